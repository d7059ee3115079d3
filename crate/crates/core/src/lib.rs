//! Online matching under general arrivals.
//!
//! The crate implements both sides of the online matching problem on
//! arbitrary (not necessarily bipartite) graphs:
//!
//! - [`graph`]: arrival-ordered instances, exact maximum matching
//!   (blossom contraction plus a brute-force oracle), and fractional
//!   assignment feasibility.
//! - [`fractional`]: the primal-dual fractional allocator for vertex
//!   arrivals, driven by the one-parameter normalizer family `f_kappa`.
//! - [`rounding`]: randomized rounding of the fractional allocation —
//!   a lossless single-sample scheme and a two-sample scheme with a
//!   drop rule, backed by an exact joint-distribution engine or a
//!   particle ensemble.
//! - [`hardness`]: the edge-arrival lower-bound family, exact rational
//!   dual certificates, an LP export, and two fractional edge baselines.
//! - [`diagnostics`]: selection-graph structure reports — primary chain
//!   lengths, blocking mass tail frequencies, vertex classification.
//! - [`harness`]: seeded experiment families, algorithm drivers, and
//!   byte-stable CSV reporting.

pub mod diagnostics;
mod error;
pub mod fractional;
pub mod graph;
pub mod hardness;
pub mod harness;
pub mod rounding;
pub(crate) mod util;

pub use error::{Error, Result};
