//! Shared numerics: Gauss–Legendre rules, radial phase-space quadrature,
//! weighted Laguerre evaluation, factorial tables, compensated summation,
//! and the deterministic worker pool.
//!
//! Everything here is deterministic: rules are computed by Newton iteration
//! from fixed seeds, parallel maps preserve input order, and reductions are
//! performed sequentially over ordered chunks so that results do not depend
//! on the number of worker threads.

use std::sync::OnceLock;

use rayon::prelude::*;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// ascending in the node coordinate. Exact for polynomials of degree
/// `2n − 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "empty quadrature rule");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // Tricomi-style seed for the i-th root, then Newton.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut deriv = 0.0;
        for _ in 0..64 {
            let (mut p_prev, mut p) = (0.0f64, 1.0f64);
            for j in 0..n {
                let p_prev2 = p_prev;
                p_prev = p;
                p = ((2 * j + 1) as f64 * z * p_prev - j as f64 * p_prev2) / (j + 1) as f64;
            }
            deriv = n as f64 * (z * p - p_prev) / (z * z - 1.0);
            let dz = p / deriv;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * deriv * deriv);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// A quadrature rule for radial phase-space integrals: the weights absorb
/// the polar Jacobian so that `Σ w_i f(r_i) ≈ ∫₀^R 2 r f(r) dr`, which is
/// `(1/π) ∫ f(|z|) d²z` over the disc of radius `R`.
#[derive(Clone, Debug)]
pub struct RadialRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub radius: f64,
}

/// Composite Gauss–Legendre rule on `[0, R]` built from unit panels with
/// `nodes_per_unit` points each (the last panel is shortened to end at `R`).
pub fn radial_rule(radius: f64, nodes_per_unit: usize) -> RadialRule {
    assert!(radius > 0.0 && radius.is_finite());
    let (gx, gw) = gauss_legendre(nodes_per_unit);
    let panels = radius.ceil() as usize;
    let mut nodes = Vec::with_capacity(panels * nodes_per_unit);
    let mut weights = Vec::with_capacity(panels * nodes_per_unit);
    for p in 0..panels {
        let lo = p as f64;
        let hi = (lo + 1.0).min(radius);
        let mid = 0.5 * (lo + hi);
        let scale = 0.5 * (hi - lo);
        for (t, v) in gx.iter().zip(&gw) {
            let r = mid + scale * t;
            nodes.push(r);
            weights.push(v * scale * 2.0 * r);
        }
    }
    RadialRule { nodes, weights, radius }
}

const LN_FACTORIAL_MAX: usize = 1 << 17;

/// `ln(k!)`, tabulated with compensated accumulation of `ln j`.
pub fn ln_factorial(k: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACTORIAL_MAX + 1);
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        t.push(0.0);
        for j in 1..=LN_FACTORIAL_MAX {
            // Neumaier update keeps the cumulative error at O(ulp).
            let term = (j as f64).ln();
            let fresh = sum + term;
            comp += if sum.abs() >= term.abs() { (sum - fresh) + term } else { (term - fresh) + sum };
            sum = fresh;
            t.push(sum + comp);
        }
        t
    });
    table[k]
}

/// Compensated (Neumaier) sum of an ordered sequence.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let fresh = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - fresh) + v } else { (v - fresh) + sum };
        sum = fresh;
    }
    sum + comp
}

/// Exponent-weighted Laguerre row: `ℓ_k(u) = e^{−u/2} L_k(u)` for
/// `k = 0..=k_max`.
///
/// These are the diagonal displacement matrix elements, so `|ℓ_k| ≤ 1`.
/// The three-term recurrence is run on a rescaled copy whose seed is `O(1)`
/// even when `e^{−u/2}` underflows; the true magnitude is restored through
/// a tracked log-scale, and entries below the f64 range are returned as 0.
pub fn laguerre_weighted_row(u: f64, k_max: usize) -> Vec<f64> {
    assert!(u >= 0.0 && u.is_finite());
    let mut out = vec![0.0; k_max + 1];
    // v_k follows the unweighted L_k recurrence; ℓ_k = v_k · e^{log_scale}.
    let mut log_scale = -0.5 * u;
    let mut scale = if log_scale < -745.0 { 0.0 } else { log_scale.exp() };
    let mut v_prev = 1.0f64;
    out[0] = v_prev * scale;
    if k_max == 0 {
        return out;
    }
    let mut v = 1.0 - u;
    out[1] = v * scale;
    for k in 1..k_max {
        let next = ((2 * k + 1) as f64 - u) * v - k as f64 * v_prev;
        v_prev = v;
        v = next / (k + 1) as f64;
        if v.abs() > 1e270 || v_prev.abs() > 1e270 {
            v *= 1e-270;
            v_prev *= 1e-270;
            log_scale += 270.0 * std::f64::consts::LN_10;
            scale = if log_scale < -745.0 { 0.0 } else { log_scale.exp() };
        }
        out[k + 1] = v * scale;
    }
    out
}

/// Weighted associated-Laguerre row `e^{−u/2} L_n^{(d)}(u)` for
/// `n = 0..=n_max` at fixed integer offset `d ≥ 0`.
///
/// Used for off-diagonal displacement matrix elements; safe in plain f64
/// for the moderate cutoffs (≤ a few hundred) where dense matrices live.
pub fn assoc_laguerre_weighted_row(u: f64, d: usize, n_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    let w = (-0.5 * u).exp();
    out[0] = w;
    if n_max == 0 {
        return out;
    }
    out[1] = w * (1.0 + d as f64 - u);
    for n in 2..=n_max {
        let a = (2 * n - 1 + d) as f64 - u;
        let b = (n - 1 + d) as f64;
        out[n] = (a * out[n - 1] - b * out[n - 2]) / n as f64;
    }
    out
}

/// Worker pool capped by the `QCLT_THREADS` environment variable
/// (default: available parallelism). Built once per process.
pub fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var("QCLT_THREADS")
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|&t| t >= 1)
            .unwrap_or_else(|| {
                std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
            });
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("worker pool construction cannot fail with a positive thread count")
    })
}

/// Order-preserving parallel map on the capped pool. The output vector is
/// indexed exactly like the input, so downstream sequential reductions are
/// independent of scheduling.
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    pool().install(|| items.par_iter().map(|t| f(t)).collect())
}

/// Order-preserving parallel map over an index range.
pub fn par_map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    pool().install(|| (0..n).into_par_iter().map(f).collect())
}
