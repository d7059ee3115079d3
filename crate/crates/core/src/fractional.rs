//! Primal-dual fractional allocation for vertex arrivals.
//!
//! When vertex `v` arrives with earlier neighbors `N(v)`, the allocator
//! picks the largest `theta <= 1` satisfying
//!
//! ```text
//! sum_{u in N(v)} max(theta - y_u, 0) <= f_kappa(theta)
//! ```
//!
//! then raises `x_{uv}` by `(theta - y_u)^+ / beta * (1 + (1 - theta) / f_kappa(theta))`
//! for every earlier neighbor, sets those `y_u` to `theta`, and sets
//! `y_v = 1 - theta`. The normalizer family
//!
//! ```text
//! f_kappa(theta) = ((1+kappa)/2 - theta)^((1+kappa)/(2kappa))
//!               * (theta + (kappa-1)/2)^((kappa-1)/(2kappa))
//! ```
//!
//! is decreasing on `[0, 1]` with `f_1(theta) = 1 - theta`. Every choice
//! `kappa >= 1` keeps the dual prices `(y_u + y_v >= 1` on edges) feasible
//! and the allocation within per-vertex degree bounds after scaling by
//! `beta >= beta_star(kappa) = 1 + f_kappa(0)`; the allocator guarantees
//! `sum x = sum y / beta` exactly.

use crate::graph::{ArrivalInstance, FractionalAssignment, VertexId};
use crate::util::{adaptive_simpson, fmt_sig12};
use crate::{Error, Result};

/// Bisection width for [`solve_theta`].
const THETA_TOL: f64 = 1e-12;

/// Allocator configuration: normalizer parameter, scaling, and the
/// aggressiveness knob used by two-sample rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocatorParams {
    /// Normalizer family parameter, at least 1.
    pub kappa: f64,
    /// Primal scaling divisor, positive.
    pub beta: f64,
    /// Two-sample aggressiveness; 0 disables the second sample.
    pub epsilon: f64,
}

impl AllocatorParams {
    /// Lossless-rounding configuration: `f(theta) = 1 - theta`, `beta = 2`.
    pub fn warmup() -> Self {
        Self {
            kappa: 1.0,
            beta: 2.0,
            epsilon: 0.0,
        }
    }

    /// Two-sample configuration: `kappa = 1 + 2 epsilon`, `beta = 2 - epsilon`.
    ///
    /// Requires `0 < epsilon <= 0.09`, the range on which
    /// `beta_star(1 + 2 epsilon) <= 2 - epsilon` holds.
    pub fn improved(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 0.09) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 0.09], got {epsilon}"
            )));
        }
        Ok(Self {
            kappa: 1.0 + 2.0 * epsilon,
            beta: 2.0 - epsilon,
            epsilon,
        })
    }

    /// Arbitrary configuration with validated ranges.
    pub fn new(kappa: f64, beta: f64, epsilon: f64) -> Result<Self> {
        if !(kappa >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "kappa must be at least 1, got {kappa}"
            )));
        }
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must be positive, got {beta}"
            )));
        }
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be nonnegative, got {epsilon}"
            )));
        }
        Ok(Self {
            kappa,
            beta,
            epsilon,
        })
    }
}

/// Evaluates the normalizer `f_kappa(theta)` for `kappa >= 1`, `theta` in `[0, 1]`.
pub fn f_kappa(kappa: f64, theta: f64) -> f64 {
    assert!(kappa >= 1.0, "kappa {kappa} out of range");
    assert!((0.0..=1.0).contains(&theta), "theta {theta} out of range");
    if kappa == 1.0 {
        return 1.0 - theta;
    }
    let a = ((1.0 + kappa) / 2.0 - theta).max(0.0);
    let b = theta + (kappa - 1.0) / 2.0;
    a.powf((1.0 + kappa) / (2.0 * kappa)) * b.powf((kappa - 1.0) / (2.0 * kappa))
}

/// Smallest feasible scaling for the normalizer: `1 + f_kappa(0)`.
pub fn beta_star(kappa: f64) -> f64 {
    1.0 + f_kappa(kappa, 0.0)
}

/// How the arrival-time maximization terminated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaBinding {
    /// `theta = 1` with the constraint slack (or exactly tight).
    AtOne,
    /// The constraint is tight at an interior root.
    Interior,
}

/// Result of [`solve_theta`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaResult {
    pub theta: f64,
    pub binding: ThetaBinding,
}

/// Maximizes `theta <= 1` subject to `sum (theta - y)^+ <= f_kappa(theta)`.
///
/// The left side is nondecreasing and the right side strictly decreasing,
/// so the feasible set is an interval `[0, r]`; bisection locates `r`
/// to within [`THETA_TOL`] and returns its feasible end.
pub fn solve_theta(ys: &[f64], kappa: f64) -> ThetaResult {
    let slack = |theta: f64| -> f64 {
        let mass: f64 = ys.iter().map(|&y| (theta - y).max(0.0)).sum();
        mass - f_kappa(kappa, theta)
    };
    if slack(1.0) <= 0.0 {
        return ThetaResult {
            theta: 1.0,
            binding: ThetaBinding::AtOne,
        };
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > THETA_TOL {
        let mid = 0.5 * (lo + hi);
        if slack(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    ThetaResult {
        theta: lo,
        binding: ThetaBinding::Interior,
    }
}

/// Running allocator state over a fixed vertex population.
#[derive(Debug, Clone)]
pub struct FractionalState {
    params: AllocatorParams,
    y: Vec<f64>,
    x: FractionalAssignment,
    loads: Vec<f64>,
    primal: f64,
    dual: f64,
}

impl FractionalState {
    /// Fresh state over `n` vertices.
    pub fn new(n: usize, params: AllocatorParams) -> Self {
        Self {
            params,
            y: vec![0.0; n],
            x: FractionalAssignment::new(),
            loads: vec![0.0; n],
            primal: 0.0,
            dual: 0.0,
        }
    }

    /// Processes the arrival of `v` with earlier neighbors `nbrs`.
    ///
    /// Returns the chosen `theta` together with the per-neighbor
    /// increments applied to `x` (same order as `nbrs`).
    pub fn process_arrival(&mut self, v: VertexId, nbrs: &[VertexId]) -> (ThetaResult, Vec<f64>) {
        debug_assert!(nbrs.iter().all(|&u| u != v));
        let ys: Vec<f64> = nbrs.iter().map(|&u| self.y[u]).collect();
        let result = solve_theta(&ys, self.params.kappa);
        let theta = result.theta;
        let f_theta = f_kappa(self.params.kappa, theta);
        // At theta = 1 with f(1) = 0 every increment below is zero, so the
        // gain factor's value is immaterial; keep it finite.
        let gain = if f_theta > 0.0 {
            1.0 + (1.0 - theta) / f_theta
        } else {
            1.0
        };
        let mut increments = Vec::with_capacity(nbrs.len());
        for (&u, &y_u) in nbrs.iter().zip(&ys) {
            let delta = (theta - y_u).max(0.0) / self.params.beta * gain;
            increments.push(delta);
            if delta > 0.0 {
                self.x.add(u, v, delta);
                self.loads[u] += delta;
                self.loads[v] += delta;
                self.primal += delta;
            }
            if theta > y_u {
                self.dual += theta - y_u;
                self.y[u] = theta;
            }
        }
        self.y[v] = 1.0 - theta;
        self.dual += 1.0 - theta;
        (result, increments)
    }

    /// Dual price of `u`.
    pub fn y(&self, u: VertexId) -> f64 {
        self.y[u]
    }

    /// All dual prices.
    pub fn ys(&self) -> &[f64] {
        &self.y
    }

    /// Fractional degree of `u`.
    pub fn load(&self, u: VertexId) -> f64 {
        self.loads[u]
    }

    /// Edge allocation so far.
    pub fn assignment(&self) -> &FractionalAssignment {
        &self.x
    }

    /// Total allocated mass `sum_e x_e`.
    pub fn primal_value(&self) -> f64 {
        self.primal
    }

    /// Total dual mass `sum_u y_u`.
    pub fn dual_value(&self) -> f64 {
        self.dual
    }

    /// Consumes the state, returning the final assignment.
    pub fn into_assignment(self) -> FractionalAssignment {
        self.x
    }
}

/// One row of the arrival trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub arrival: usize,
    pub theta: f64,
    pub dual_sum: f64,
    pub primal_sum: f64,
}

/// A completed fractional run.
#[derive(Debug, Clone)]
pub struct FractionalRun {
    pub params: AllocatorParams,
    pub x: FractionalAssignment,
    pub y: Vec<f64>,
    pub loads: Vec<f64>,
    pub primal_value: f64,
    pub dual_value: f64,
    pub trace: Vec<TraceRow>,
}

/// Runs the allocator over a whole arrival sequence.
pub fn run_fractional(inst: &ArrivalInstance, params: AllocatorParams) -> FractionalRun {
    let n = inst.n();
    let mut state = FractionalState::new(n, params);
    let mut trace = Vec::with_capacity(n);
    for v in 0..n {
        let (result, _) = state.process_arrival(v, inst.earlier_neighbors(v));
        trace.push(TraceRow {
            arrival: v,
            theta: result.theta,
            dual_sum: state.dual_value(),
            primal_sum: state.primal_value(),
        });
    }
    FractionalRun {
        params,
        y: state.y.clone(),
        loads: state.loads.clone(),
        primal_value: state.primal,
        dual_value: state.dual,
        x: state.x,
        trace,
    }
}

/// Renders the arrival trace as CSV with 12-significant-digit floats.
pub fn trace_csv(run: &FractionalRun) -> String {
    let mut out = String::from("arrival,theta,dual_sum,primal_sum\n");
    for row in &run.trace {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.arrival,
            fmt_sig12(row.theta),
            fmt_sig12(row.dual_sum),
            fmt_sig12(row.primal_sum)
        ));
    }
    out
}

/// Residual of the scaling identity
/// `1 + f_kappa(1 - theta) + int_theta^1 (1 - t) / f_kappa(t) dt = beta_star(kappa)`,
/// which holds for every `theta` in `[0, 1]`.
///
/// The integrand extends continuously to `t = 1` (value 1 for `kappa = 1`,
/// 0 otherwise).
pub fn beta_star_identity_residual(kappa: f64, theta: f64) -> f64 {
    let integrand = |t: f64| {
        let f = f_kappa(kappa, t);
        if f == 0.0 {
            1.0
        } else {
            (1.0 - t) / f
        }
    };
    let integral = adaptive_simpson(&integrand, theta, 1.0, 1e-9);
    (1.0 + f_kappa(kappa, 1.0 - theta) + integral - beta_star(kappa)).abs()
}

/// First-order upper estimate for `f_{1+2eps}`:
/// `(1 - theta) * (1 + eps * ln((theta + eps) / (1 + eps - theta))) + 1.01 eps`.
pub fn taylor_upper_bound(epsilon: f64, theta: f64) -> f64 {
    (1.0 - theta) * (1.0 + epsilon * ((theta + epsilon) / (1.0 + epsilon - theta)).ln())
        + 1.01 * epsilon
}

/// A point where `f_{1+2eps}` exceeds [`taylor_upper_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundViolation {
    pub theta: f64,
    pub f_value: f64,
    pub bound: f64,
}

/// Grid points where the first-order estimate fails to dominate
/// `f_{1+2eps}`. The estimate is only asymptotic: for moderate `epsilon`
/// (circa `1e-3` and above) it is exceeded near both ends of `[0, 1]`.
pub fn taylor_bound_violations(epsilon: f64, grid: &[f64]) -> Vec<BoundViolation> {
    let kappa = 1.0 + 2.0 * epsilon;
    grid.iter()
        .map(|&theta| BoundViolation {
            theta,
            f_value: f_kappa(kappa, theta),
            bound: taylor_upper_bound(epsilon, theta),
        })
        .filter(|v| v.f_value > v.bound)
        .collect()
}

/// Whether `beta_star(1 + 2 epsilon) <= 2 - epsilon`.
pub fn beta_star_inequality_holds(epsilon: f64) -> bool {
    beta_star(1.0 + 2.0 * epsilon) <= 2.0 - epsilon
}
