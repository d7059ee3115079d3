//! Small numeric helpers shared across modules.

/// One step of the splitmix64 output function.
pub(crate) fn splitmix64_mix(state: u64) -> u64 {
    let mut z = state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Element `index` of the splitmix64 stream seeded at `base`.
///
/// Matches the reference generator: advance the state `index + 1` times,
/// then mix. Used to derive independent per-trial and per-sample seeds.
pub(crate) fn splitmix64_stream(base: u64, index: u64) -> u64 {
    splitmix64_mix(base.wrapping_add(SPLITMIX_GAMMA.wrapping_mul(index.wrapping_add(1))))
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub(crate) fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Wilson score interval for `successes` out of `trials` at `z` standard scores.
pub(crate) fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (
        ((center - spread) / denom).max(0.0),
        ((center + spread) / denom).min(1.0),
    )
}

/// Format a float with 12 significant digits in scientific notation.
///
/// The single fixed format keeps every CSV byte-stable across runs and
/// platforms.
pub(crate) fn fmt_sig12(x: f64) -> String {
    if x == 0.0 {
        // Avoid "-0" leaking into reports.
        return "0.00000000000e0".to_string();
    }
    format!("{x:.11e}")
}

/// Inverse-CDF draw over `weights` (not necessarily summing to 1) with a
/// single uniform `u` in `[0, 1)`. Returns the first index whose running
/// sum exceeds `u`, or `None` for the residual mass.
pub(crate) fn sample_discrete(weights: &[f64], u: f64) -> Option<usize> {
    let mut cum = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        cum += w;
        if u < cum {
            return Some(i);
        }
    }
    None
}
