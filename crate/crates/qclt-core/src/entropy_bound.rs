//! Quantitative upper bound on the relative entropy D(ρ∥τ) against a
//! thermal reference in terms of a weighted Hilbert–Schmidt distance:
//! D(ρ∥τ) ≤ C_{β,E}(α² + ε) with ε = ∥(ρ − τ_α)(N_m + m)^{(m+3)/2}∥₂,
//! where τ_α is a first-order odd perturbation of τ in phase space
//! (χ_{τ_α} = χ_τ(1 + αE)). All constants are explicit; two supporting
//! pointwise/truncated comparison inequalities and the two geometric
//! tail-sum bounds they rest on are checkable numerically.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::fock::{hermitian_eigen, DensityOperator, State};
use crate::gaussian::{
    rotation_unitary, squeeze_unitary, thermal_entropy, williamson_1mode, GaussianSpec,
};
use crate::quad::{compensated_sum, ln_factorial};
use crate::{Error, Result};

const THERMAL_TAIL_TOL: f64 = 1e-12;
const INFINITE_BETA_NU_TOL: f64 = 1e-12;

/// Odd polynomial E(z, z̄) with E(−z) = −E(z) = conj(E(z)): every term has
/// odd total degree and the coefficients satisfy conj(e_{p,q}) = −e_{q,p}.
#[derive(Clone, Debug, Default)]
pub struct OddPolynomial {
    terms: HashMap<(usize, usize), Complex64>,
    pub degree: usize,
}

impl OddPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn new(terms: HashMap<(usize, usize), Complex64>) -> Result<Self> {
        let mut clean: HashMap<(usize, usize), Complex64> = HashMap::new();
        for (&(p, q), &c) in &terms {
            if c.norm() == 0.0 {
                continue;
            }
            if (p + q) % 2 == 0 {
                return Err(Error::Domain("perturbation polynomial must be odd"));
            }
            clean.insert((p, q), c);
        }
        for (&(p, q), &c) in &clean {
            let partner = clean.get(&(q, p)).copied().unwrap_or_default();
            if (c.conj() + partner).norm() > 1e-12 * (1.0 + c.norm()) {
                return Err(Error::Domain(
                    "perturbation polynomial must satisfy conj(e_pq) = -e_qp",
                ));
            }
        }
        let degree = clean.keys().map(|&(p, q)| p + q).max().unwrap_or(0);
        Ok(Self { terms: clean, degree })
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let zb = z.conj();
        self.terms
            .iter()
            .map(|(&(p, q), &c)| c * z.powu(p as u32) * zb.powu(q as u32))
            .sum()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(usize, usize), &Complex64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// The explicit constants entering the bound for reference inverse
/// temperatures β.
#[derive(Clone, Debug)]
pub struct BoundConstants {
    pub nu_beta: f64,
    pub eta_beta: f64,
    pub zeta: f64,
    pub c_prime: f64,
    pub c_double_prime: f64,
    pub m_beta_e: f64,
    pub s_tau: f64,
    pub c_final: f64,
}

/// ζ(s) for s > 1, via Euler–Maclaurin (absolute accuracy ≲ 1e−12).
pub fn zeta_series(s: f64) -> f64 {
    let n = 1_000_000u64;
    let head = compensated_sum((1..n).map(|k| (k as f64).powf(-s)));
    let nf = n as f64;
    head + nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s) + s * nf.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * nf.powf(-s - 3.0) / 720.0
}

fn check_beta(beta: &[f64]) -> Result<()> {
    for (j, &b) in beta.iter().enumerate() {
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::InfiniteBeta(j));
        }
    }
    Ok(())
}

/// ⟨k'| (a†)^{q'} a^{p'} (a†)^p a^q |k⟩-style thermal trace:
/// tr(X'† X τ) with X = (a†)^p a^q, X' = (a†)^{p'} a^{q'}, τ thermal with
/// occupation probabilities q_k = (1−e^{−β}) e^{−βk}. Evaluated by ladder
/// application on each Fock state; the series over k is truncated once a
/// term falls below 1e−18 of the running sum.
fn thermal_ladder_trace(p: usize, q: usize, pp: usize, qp: usize, beta: f64) -> f64 {
    // tr((a†)^{q'} a^{p'} (a†)^p a^q τ) ≠ 0 requires the net shift to
    // vanish: k − q + p − p' + q' = k.
    if q + pp != p + qp {
        return 0.0;
    }
    let ln_w = (1.0 - (-beta).exp()).ln();
    let mut total = 0.0f64;
    let mut k = q; // a^q annihilates lower states
    loop {
        // |k⟩ → a^q → (a†)^p → a^{p'} → (a†)^{q'}, tracking √-factors.
        let k1 = k - q;
        let k2 = k1 + p;
        if k2 < pp {
            k += 1;
            continue;
        }
        let k3 = k2 - pp;
        let ln_amp = 0.5
            * (ln_factorial(k) - ln_factorial(k1) + ln_factorial(k2) - ln_factorial(k1)
                + ln_factorial(k2)
                - ln_factorial(k3)
                + ln_factorial(k3 + qp)
                - ln_factorial(k3));
        let term = (ln_amp + ln_w - beta * k as f64).exp();
        total += term;
        if term < 1e-18 * total.max(1e-300) && k > q + 8 {
            break;
        }
        if k > 100_000 {
            break;
        }
        k += 1;
    }
    total
}

/// All bound constants for inverse temperatures β and perturbation E.
pub fn bound_constants(beta: &[f64], e: &OddPolynomial) -> Result<BoundConstants> {
    check_beta(beta)?;
    let m = beta.len();
    if m != 1 && !e.is_zero() {
        return Err(Error::Domain("perturbed references are single-mode"));
    }
    let nu_beta: f64 = beta.iter().map(|b| 1.0 - (-b).exp()).product();
    let beta_max = beta.iter().cloned().fold(f64::MIN, f64::max);
    let eta_beta =
        beta_max - beta.iter().map(|b| (1.0 - (-b).exp()).ln()).sum::<f64>() + 1.0;
    let zeta = zeta_series(1.0 + 1.0 / m as f64);
    let c_prime = 2.0 * (beta_max + 1.0) / nu_beta;
    let prod_b1: f64 = beta.iter().map(|b| (b + 1.0) * (b + 1.0)).product();
    let c_double_prime = 2f64.powi(m as i32) * m as f64 * eta_beta * prod_b1 / nu_beta;
    // M_{β,E} = Σ_{t,t'} |e_t e_{t'}| |tr(X_{t'}† X_t τ)| over E's terms.
    let mut m_beta_e = 0.0f64;
    for (&(p, q), &c) in e.terms() {
        for (&(pp, qp), &cp) in e.terms() {
            let tr = thermal_ladder_trace(p, q, pp, qp, beta[0]);
            m_beta_e += c.norm() * cp.norm() * tr.abs();
        }
    }
    let nus: Vec<f64> = beta
        .iter()
        .map(|b| {
            let q = (-b).exp();
            (1.0 + q) / (1.0 - q)
        })
        .collect();
    let s_tau: f64 = nus.iter().map(|&nu| thermal_entropy(nu)).sum();
    let zeta_m = zeta.powf(m as f64 / 2.0);
    let branch1 = 2.0 * m_beta_e;
    let branch2 = c_prime + eta_beta * zeta_m + c_double_prime;
    let branch3 = nu_beta + 1.0 / nu_beta + eta_beta * zeta_m + s_tau;
    let c_final = branch1.max(branch2).max(branch3);
    Ok(BoundConstants {
        nu_beta,
        eta_beta,
        zeta,
        c_prime,
        c_double_prime,
        m_beta_e,
        s_tau,
        c_final,
    })
}

/// Thermal occupation log-probabilities per basis multi-index.
fn thermal_log_probs(beta: &[f64], cutoff: &crate::fock::FockCutoff) -> Vec<f64> {
    let log_norm: Vec<f64> = beta.iter().map(|b| (1.0 - (-b).exp()).ln()).collect();
    cutoff
        .indices()
        .iter()
        .map(|k| {
            k.iter()
                .zip(beta)
                .zip(&log_norm)
                .map(|((&kj, &bj), &lnj)| lnj - bj * kj as f64)
                .sum()
        })
        .collect()
}

/// Dense matrix of (a†)^p a^q τ for a single-mode thermal τ with weights
/// τ_j: entries δ_{i, j−q+p} √(j! i!)/(j−q)! τ_j.
fn ladder_times_thermal(p: usize, q: usize, tau: &[f64], k_max: usize) -> DMatrix<Complex64> {
    let mut out = DMatrix::<Complex64>::zeros(k_max + 1, k_max + 1);
    for j in q..=k_max {
        let i = j - q + p;
        if i > k_max {
            continue;
        }
        let amp = (0.5 * (ln_factorial(j) + ln_factorial(i)) - ln_factorial(j - q)).exp();
        out[(i, j)] = Complex64::new(amp * tau[j], 0.0);
    }
    out
}

/// Ladder-coefficient representation of the operator whose characteristic
/// function is z^P z̄^Q χ_τ(z): multiplication by z maps the coefficient
/// of (a†)^p a^q τ to (e^β−1)·(p, q+1) − p·(p−1, q); multiplication by z̄
/// maps it to (e^{−β}−1)·(p+1, q) + q e^{−β}·(p, q−1).
fn monomial_ladder_rep(
    big_p: usize,
    big_q: usize,
    beta: f64,
) -> HashMap<(usize, usize), Complex64> {
    let eb = beta.exp();
    let emb = (-beta).exp();
    let mut rep: HashMap<(usize, usize), Complex64> = HashMap::new();
    rep.insert((0, 0), Complex64::new(1.0, 0.0));
    for _ in 0..big_p {
        let mut next: HashMap<(usize, usize), Complex64> = HashMap::new();
        for (&(p, q), &c) in &rep {
            *next.entry((p, q + 1)).or_default() += c * (eb - 1.0);
            if p > 0 {
                *next.entry((p - 1, q)).or_default() -= c * p as f64;
            }
        }
        rep = next;
    }
    for _ in 0..big_q {
        let mut next: HashMap<(usize, usize), Complex64> = HashMap::new();
        for (&(p, q), &c) in &rep {
            *next.entry((p + 1, q)).or_default() += c * (emb - 1.0);
            if q > 0 {
                *next.entry((p, q - 1)).or_default() += c * q as f64 * emb;
            }
        }
        rep = next;
    }
    rep
}

/// The perturbed reference τ_α with χ_{τ_α}(z) = χ_τ(z)(1 + αE(z)), as a
/// Hermitian matrix in the Fock basis (single mode). Its diagonal equals
/// that of τ for every α because E is odd. Not necessarily positive.
pub fn tau_alpha(
    beta: f64,
    k_max: usize,
    e: &OddPolynomial,
    alpha: f64,
) -> Result<DMatrix<Complex64>> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InfiniteBeta(0));
    }
    let qfac = (-beta).exp();
    let tail = qfac.powi(k_max as i32 + 1);
    if tail > THERMAL_TAIL_TOL {
        return Err(Error::CutoffTooSmall(format!(
            "thermal tail {tail:.3e} at cutoff {k_max} exceeds {THERMAL_TAIL_TOL:.0e}"
        )));
    }
    let tau: Vec<f64> = (0..=k_max).map(|k| (1.0 - qfac) * qfac.powi(k as i32)).collect();
    let mut out = DMatrix::<Complex64>::zeros(k_max + 1, k_max + 1);
    for (i, &t) in tau.iter().enumerate() {
        out[(i, i)] = Complex64::new(t, 0.0);
    }
    for (&(bp, bq), &coeff) in e.terms() {
        let rep = monomial_ladder_rep(bp, bq, beta);
        for (&(p, q), &c) in &rep {
            let block = ladder_times_thermal(p, q, &tau, k_max);
            let w = alpha * coeff * c;
            for j in 0..=k_max {
                for i in 0..=k_max {
                    let v = block[(i, j)];
                    if v.norm_sqr() != 0.0 {
                        out[(i, j)] += w * v;
                    }
                }
            }
        }
    }
    // E's symmetry makes this Hermitian in exact arithmetic.
    let asym = (0..=k_max)
        .flat_map(|i| (0..=k_max).map(move |j| (i, j)))
        .map(|(i, j)| (out[(i, j)] - out[(j, i)].conj()).norm())
        .fold(0.0, f64::max);
    if asym > 1e-10 {
        return Err(Error::NonHermitian(asym));
    }
    let sym = (&out + out.adjoint()).scale(0.5);
    Ok(sym)
}

/// D(ρ∥τ) for a thermal τ evaluated in log space (no eigendecomposition
/// of τ and no underflow at large β·k).
pub fn relent_vs_thermal(rho: &DensityOperator, beta: &[f64]) -> Result<f64> {
    check_beta(beta)?;
    if rho.modes() != beta.len() {
        return Err(Error::Domain("mode count mismatch between state and reference"));
    }
    let log_q = thermal_log_probs(beta, rho.cutoff());
    let s = rho.von_neumann_entropy()?;
    let cross = compensated_sum(
        (0..rho.dim()).map(|k| -rho.entries()[(k, k)].re * log_q[k]),
    );
    Ok(cross - s)
}

/// Per-Fock-state margins of the pointwise comparison
/// ⟨k|ρ(ln ρ − ln τ)|k⟩ ≤ ⟨k|ρ − τ + (ρ−τ)²τ^{−1}|k⟩ against a thermal τ;
/// returns the minimum over retained k of RHS − LHS.
pub fn pointwise_bound_check(rho: &DensityOperator, beta: &[f64]) -> Result<f64> {
    check_beta(beta)?;
    if rho.modes() != beta.len() {
        return Err(Error::Domain("mode count mismatch between state and reference"));
    }
    let n = rho.dim();
    let log_q = thermal_log_probs(beta, rho.cutoff());
    let (eigs, vecs) = hermitian_eigen(rho.entries())?;
    let mut worst = f64::INFINITY;
    for k in 0..n {
        // LHS: Σ_j |V_{kj}|² λ_j ln λ_j − ρ_kk ln q_k.
        let mut rho_lnrho_kk = 0.0f64;
        for (j, &l) in eigs.iter().enumerate() {
            if l > 1e-300 {
                rho_lnrho_kk += vecs[(k, j)].norm_sqr() * l * l.ln();
            }
        }
        let rho_kk = rho.entries()[(k, k)].re;
        let lhs = rho_lnrho_kk - rho_kk * log_q[k];
        // RHS: (ρ−τ)_kk + ∥(ρ−τ)e_k∥² / q_k.
        let q_k = log_q[k].exp();
        let mut col_sq = 0.0f64;
        for i in 0..n {
            let d = rho.entries()[(i, k)] - if i == k { Complex64::new(q_k, 0.0) } else { Complex64::default() };
            col_sq += d.norm_sqr();
        }
        let rhs = (rho_kk - q_k) + col_sq / q_k;
        worst = worst.min(rhs - lhs);
    }
    Ok(worst)
}

/// Truncated comparison: for a threshold t,
/// RHS(t) = Σ_{β·k ≤ t} ⟨k|(ρ−τ)²τ^{−1}|k⟩
///        + η_β Σ_{β·k > t} (|k|+m) |⟨k|ρ−τ|k⟩|
///        − Σ_{β·k > t} ⟨k|τ ln τ|k⟩,
/// returned with the flag D(ρ∥τ) ≤ RHS + 1e−8.
pub fn truncated_rhs(rho: &DensityOperator, beta: &[f64], t: f64) -> Result<(f64, bool)> {
    check_beta(beta)?;
    let m = beta.len();
    if rho.modes() != m {
        return Err(Error::Domain("mode count mismatch between state and reference"));
    }
    let n = rho.dim();
    let indices = rho.cutoff().indices();
    let log_q = thermal_log_probs(beta, rho.cutoff());
    let beta_max = beta.iter().cloned().fold(f64::MIN, f64::max);
    let eta_beta = beta_max - beta.iter().map(|b| (1.0 - (-b).exp()).ln()).sum::<f64>() + 1.0;
    let mut rhs = 0.0f64;
    for k in 0..n {
        let bk: f64 = indices[k].iter().zip(beta).map(|(&kj, &bj)| kj as f64 * bj).sum();
        let q_k = log_q[k].exp();
        let rho_kk = rho.entries()[(k, k)].re;
        if bk <= t {
            let mut col_sq = 0.0f64;
            for i in 0..n {
                let d = rho.entries()[(i, k)]
                    - if i == k { Complex64::new(q_k, 0.0) } else { Complex64::default() };
                col_sq += d.norm_sqr();
            }
            rhs += col_sq / q_k;
        } else {
            let tot: usize = indices[k].iter().sum();
            rhs += eta_beta * (tot + m) as f64 * (rho_kk - q_k).abs();
            rhs -= q_k * log_q[k];
        }
    }
    let d = relent_vs_thermal(rho, beta)?;
    Ok((rhs, d <= rhs + 1e-8))
}

/// Threshold from the balancing rule e^t/(t+1)^m = 1/ε, solved by
/// bisection on [max(m−1, 0), 800]; ε ≥ 1 selects t = 0.
pub fn balance_t(eps: f64, m: usize) -> f64 {
    if !(eps > 0.0) {
        return 800.0;
    }
    if eps >= 1.0 {
        return 0.0;
    }
    let target = (1.0 / eps).ln(); // solve t − m ln(t+1) = ln(1/ε)
    let f = |t: f64| t - m as f64 * (t + 1.0).ln() - target;
    let mut lo = (m as f64 - 1.0).max(0.0);
    let mut hi = 800.0;
    if f(lo) > 0.0 {
        return lo;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Result of the main bound evaluation.
#[derive(Clone, Debug)]
pub struct RelentUpper {
    pub bound: f64,
    pub holds: bool,
    pub divergence: f64,
    pub epsilon: f64,
    pub t_star: f64,
    pub constants: BoundConstants,
}

/// Weighted Hilbert–Schmidt norm ∥M (N_m + m)^{(m+3)/2}∥₂ with N_m the
/// total-number operator.
fn weighted_hs_norm(m: &DMatrix<Complex64>, indices: &[Vec<usize>], modes: usize) -> f64 {
    let expo = (modes as f64 + 3.0) / 2.0;
    let mut acc = 0.0f64;
    for j in 0..m.ncols() {
        let tot: usize = indices[j].iter().sum();
        let w = ((tot + modes) as f64).powf(expo);
        for i in 0..m.nrows() {
            acc += m[(i, j)].norm_sqr() * w * w;
        }
    }
    acc.sqrt()
}

/// Rotates ρ into the frame where the Gaussian reference is thermal;
/// returns the rotated state and the per-mode β. Single-mode references
/// may be squeezed (handled by symplectic conjugation); multi-mode
/// references must already be thermal per mode.
fn thermal_frame(rho: &DensityOperator, tau: &GaussianSpec) -> Result<(DensityOperator, Vec<f64>)> {
    let mean_drift = tau.mean().iter().map(|x| x.abs()).fold(0.0, f64::max);
    if mean_drift > 1e-9 {
        return Err(Error::Domain("reference must be centered"));
    }
    let m = tau.modes();
    if rho.modes() != m {
        return Err(Error::Domain("mode count mismatch between state and reference"));
    }
    let nu_to_beta = |nu: f64, j: usize| -> Result<f64> {
        if nu <= 1.0 + INFINITE_BETA_NU_TOL {
            return Err(Error::InfiniteBeta(j));
        }
        Ok(((nu + 1.0) / (nu - 1.0)).ln())
    };
    if m == 1 {
        let w = williamson_1mode(tau.cov())?;
        let beta = nu_to_beta(w.nu, 0)?;
        if w.squeeze.abs() < 1e-9 {
            return Ok((rho.clone(), vec![beta]));
        }
        let k_max = rho.dim() - 1;
        let u = rotation_unitary(w.angle, k_max) * squeeze_unitary(-w.squeeze, k_max)?;
        let rotated = u.adjoint() * rho.entries() * &u;
        let kept: f64 = (0..=k_max).map(|i| rotated[(i, i)].re).sum();
        let op = DensityOperator::trusted(
            rotated,
            1,
            rho.cutoff().clone(),
            (1.0 - kept).max(0.0),
        );
        return Ok((op, vec![beta]));
    }
    let cov = tau.cov();
    let mut betas = Vec::with_capacity(m);
    for j in 0..m {
        for i in 0..2 * m {
            for l in 0..2 * m {
                let same_block = i / 2 == j && l / 2 == j;
                if !same_block && (i / 2 == j || l / 2 == j) && cov[(i, l)].abs() > 1e-10 {
                    return Err(Error::UnsupportedCovariance(
                        "multi-mode references must be products of per-mode thermals".into(),
                    ));
                }
            }
        }
        let a = cov[(2 * j, 2 * j)];
        let b = cov[(2 * j, 2 * j + 1)];
        let c = cov[(2 * j + 1, 2 * j + 1)];
        if (a - c).abs() > 1e-10 || b.abs() > 1e-10 {
            return Err(Error::UnsupportedCovariance(
                "multi-mode references must be thermal (νI per mode)".into(),
            ));
        }
        betas.push(nu_to_beta(a, j)?);
    }
    Ok((rho.clone(), betas))
}

/// The main inequality D(ρ∥τ) ≤ C_{β,E}(α² + ε) with
/// ε = ∥(ρ − τ_α)(N_m+m)^{(m+3)/2}∥₂, for a centered Gaussian reference.
pub fn relent_upper(
    rho: &DensityOperator,
    tau: &GaussianSpec,
    e: &OddPolynomial,
    alpha: f64,
) -> Result<RelentUpper> {
    let (rho_t, beta) = thermal_frame(rho, tau)?;
    if beta.len() != 1 && !e.is_zero() {
        return Err(Error::Domain("perturbed references are single-mode"));
    }
    let constants = bound_constants(&beta, e)?;
    let k_max = rho_t.dim() - 1;
    let indices = rho_t.cutoff().indices();
    let diff = if e.is_zero() {
        // τ_0 = τ: exact diagonal at any cutoff, no ladder headroom needed.
        let log_q = thermal_log_probs(&beta, rho_t.cutoff());
        let mut ta = DMatrix::<Complex64>::zeros(rho_t.dim(), rho_t.dim());
        for (i, &lq) in log_q.iter().enumerate() {
            ta[(i, i)] = Complex64::new(lq.exp(), 0.0);
        }
        rho_t.entries() - ta
    } else {
        let ta = tau_alpha(beta[0], k_max, e, alpha)?;
        rho_t.entries() - ta
    };
    let epsilon = weighted_hs_norm(&diff, &indices, beta.len());
    let bound = constants.c_final * (alpha * alpha + epsilon);
    let divergence = relent_vs_thermal(&rho_t, &beta)?;
    let t_star = balance_t(epsilon, beta.len());
    Ok(RelentUpper {
        bound,
        holds: divergence <= bound + 1e-8,
        divergence,
        epsilon,
        t_star,
        constants,
    })
}

/// Non-Gaussianity report: d_G = D(ρ∥ρ_G) against the Gaussification and
/// its upper bound C_{β,0}·ε.
#[derive(Clone, Debug)]
pub struct NonGaussianity {
    pub d_g: f64,
    pub bound: f64,
    pub holds: bool,
    pub epsilon: f64,
}

/// d_G(ρ) = D(ρ∥ρ_G) and the corollary bound with E = 0, α = 0. The state
/// must be centered; its Gaussification is derived from the covariance.
pub fn non_gaussianity_upper(rho: &State) -> Result<NonGaussianity> {
    let drift = rho.first_moments().iter().map(|x| x.abs()).fold(0.0, f64::max);
    if drift > 1e-8 {
        return Err(Error::NotCentered(drift));
    }
    let gamma = rho.covariance();
    let spec = GaussianSpec::new(rho.modes(), vec![0.0; 2 * rho.modes()], gamma)?;
    let dense = rho.to_dense();
    let report = relent_upper(&dense, &spec, &OddPolynomial::zero(), 0.0)?;
    Ok(NonGaussianity {
        d_g: report.divergence,
        bound: report.bound,
        holds: report.holds,
        epsilon: report.epsilon,
    })
}

/// Exact vs bounded geometric tail sums over multi-indices with β·k > t:
/// f = Σ e^{−β·k} ≤ 2^m ∏(β_j+1)/ν_β (t+1)^{m−1} e^{−t} and the
/// (k₁+1)-weighted variant g ≤ 2^m ∏(β_j+1)²/ν_β² (t+1)^m e^{−t}.
#[derive(Clone, Copy, Debug)]
pub struct TailSums {
    pub f_exact: f64,
    pub f_bound: f64,
    pub g_exact: f64,
    pub g_bound: f64,
}

pub fn appendix_tail_sums(beta: &[f64], t: f64) -> Result<TailSums> {
    check_beta(beta)?;
    let m = beta.len();
    if m == 0 || m > 3 {
        return Err(Error::Domain("exact tail enumeration supports 1 to 3 modes"));
    }
    if t < 0.0 {
        return Err(Error::Domain("threshold must be nonnegative"));
    }
    // Per-mode cutoffs: e^{−β_j k} below 1e−14 relative to the β·k ≤ t box.
    let caps: Vec<usize> =
        beta.iter().map(|b| ((t + 40.0) / b).ceil() as usize + 1).collect();
    let mut f_exact = 0.0f64;
    let mut g_exact = 0.0f64;
    let mut idx = vec![0usize; m];
    loop {
        let bk: f64 = idx.iter().zip(beta).map(|(&k, &b)| k as f64 * b).sum();
        if bk > t {
            let w = (-bk).exp();
            f_exact += w;
            g_exact += (idx[0] + 1) as f64 * w;
        }
        // odometer increment
        let mut pos = 0;
        loop {
            idx[pos] += 1;
            if idx[pos] <= caps[pos] {
                break;
            }
            idx[pos] = 0;
            pos += 1;
            if pos == m {
                break;
            }
        }
        if pos == m {
            break;
        }
    }
    let nu_beta: f64 = beta.iter().map(|b| 1.0 - (-b).exp()).product();
    let prod_b: f64 = beta.iter().map(|b| b + 1.0).product();
    let prod_b2: f64 = beta.iter().map(|b| (b + 1.0) * (b + 1.0)).product();
    let f_bound =
        2f64.powi(m as i32) * prod_b / nu_beta * (t + 1.0).powi(m as i32 - 1) * (-t).exp();
    let g_bound = 2f64.powi(m as i32) * prod_b2 / (nu_beta * nu_beta)
        * (t + 1.0).powi(m as i32)
        * (-t).exp();
    Ok(TailSums { f_exact, f_bound, g_exact, g_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{DiagonalState, FockCutoff};
    use crate::phase_space::char_fn_op;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn thermal_dense(nu: f64, k_max: usize) -> DensityOperator {
        let q = (nu - 1.0) / (nu + 1.0);
        let probs: Vec<f64> = (0..=k_max).map(|k| (1.0 - q) * q.powi(k as i32)).collect();
        let tail = q.powi(k_max as i32 + 1);
        DensityOperator::from_diagonal(&DiagonalState::new(probs, tail).unwrap())
    }

    fn random_density(seed: u64, dim: usize) -> DensityOperator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = DMatrix::<Complex64>::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                g[(i, j)] = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            }
        }
        let h = &g * g.adjoint();
        let tr: f64 = (0..dim).map(|i| h[(i, i)].re).sum();
        DensityOperator::trusted(h / Complex64::new(tr, 0.0), 1, FockCutoff::single(dim - 1), 0.0)
    }

    fn cubic_perturbation(scale: f64) -> OddPolynomial {
        let mut terms = HashMap::new();
        terms.insert((3, 0), Complex64::new(scale, 0.0));
        terms.insert((0, 3), Complex64::new(-scale, 0.0));
        OddPolynomial::new(terms).unwrap()
    }

    #[test]
    fn constants_closed_forms() {
        let beta = (5.0f64 / 3.0).ln();
        let c = bound_constants(&[beta], &OddPolynomial::zero()).unwrap();
        assert_abs_diff_eq!(c.nu_beta, 0.4, epsilon = 1e-14);
        assert_abs_diff_eq!(c.zeta, std::f64::consts::PI.powi(2) / 6.0, epsilon = 1e-10);
        assert_abs_diff_eq!(c.eta_beta, (25.0f64 / 6.0).ln() + 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.c_prime, 2.0 * (beta + 1.0) / 0.4, epsilon = 1e-12);
        assert_eq!(c.m_beta_e, 0.0);
        assert!(c.c_final >= c.c_prime + c.eta_beta * c.zeta.sqrt() + c.c_double_prime - 1e-12);
        assert_abs_diff_eq!(zeta_series(1.5), 2.612_375_348_685_488, epsilon = 1e-9);
    }

    #[test]
    fn odd_polynomial_symmetry() {
        let e = cubic_perturbation(0.3);
        for z in [Complex64::new(0.7, -0.2), Complex64::new(-1.1, 0.4)] {
            let v = e.eval(z);
            assert!((e.eval(-z) + v).norm() < 1e-12);
            assert!((v.conj() + v).norm() < 1e-12);
        }
        let mut bad = HashMap::new();
        bad.insert((2, 0), Complex64::new(1.0, 0.0));
        assert!(OddPolynomial::new(bad).is_err());
        let mut wrong_pair = HashMap::new();
        wrong_pair.insert((3, 0), Complex64::new(1.0, 0.0));
        wrong_pair.insert((0, 3), Complex64::new(1.0, 0.0));
        assert!(OddPolynomial::new(wrong_pair).is_err());
    }

    #[test]
    fn tau_alpha_diagonal_and_char() {
        let nu = 4.0f64;
        let beta = ((nu + 1.0) / (nu - 1.0)).ln();
        let e = cubic_perturbation(1.0);
        let alpha = 0.01;
        let k_max = 60;
        let ta = tau_alpha(beta, k_max, &e, alpha).unwrap();
        let t0 = tau_alpha(beta, k_max, &OddPolynomial::zero(), 0.0).unwrap();
        let mut tr = 0.0;
        for k in 0..=k_max {
            assert!((ta[(k, k)] - t0[(k, k)]).norm() < 1e-10, "diagonal moved at {k}");
            tr += ta[(k, k)].re;
        }
        assert_abs_diff_eq!(tr, 1.0, epsilon = 1e-10);
        // χ_{τ_α}(z) = e^{−ν|z|²/2}(1 + αE(z)) on a sample spiral.
        let cutoff = FockCutoff::single(k_max);
        for i in 1..=50 {
            let z = Complex64::from_polar(0.04 * i as f64, 2.4 * i as f64);
            let got = char_fn_op(&ta, &cutoff, &[z]).unwrap();
            let want = (-(nu * z.norm_sqr()) / 2.0).exp() * (1.0 + alpha * e.eval(z));
            assert!(
                (got - want).norm() < 1e-7,
                "χ mismatch at {z}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn pointwise_margins() {
        let tau = thermal_dense(3.0, 40);
        let beta3 = [(2.0f64).ln()];
        let w = pointwise_bound_check(&tau, &beta3).unwrap();
        assert!(w >= -1e-10, "self margin {w}");
        let hom = DensityOperator::from_diagonal(
            &DiagonalState::new(vec![0.5, 0.0, 0.5], 0.0).unwrap(),
        );
        let w = pointwise_bound_check(&hom, &beta3).unwrap();
        assert!(w >= 0.0, "hom margin {w}");
        let beta4 = [(5.0f64 / 3.0).ln()];
        for seed in 0..20 {
            let rho = random_density(seed, 12);
            let w = pointwise_bound_check(&rho, &beta4).unwrap();
            assert!(w >= -1e-8, "seed {seed} margin {w}");
        }
    }

    #[test]
    fn truncated_comparison() {
        let beta3 = [(2.0f64).ln()];
        let tau = thermal_dense(3.0, 40);
        let (rhs, holds) = truncated_rhs(&tau, &beta3, 1.0).unwrap();
        assert!(holds);
        assert!(rhs >= 0.0);
        let hom = DensityOperator::from_diagonal(
            &DiagonalState::new(vec![0.5, 0.0, 0.5], 0.0).unwrap(),
        );
        for t in [0.0, 1.0, 2.0, 5.0] {
            let (_, holds) = truncated_rhs(&hom, &beta3, t).unwrap();
            assert!(holds, "t = {t}");
        }
        // With the transition far beyond the cutoff, RHS reduces to the
        // full quadratic sum, which still dominates D.
        let (rhs_big, holds_big) = truncated_rhs(&hom, &beta3, 1e6).unwrap();
        assert!(holds_big);
        let d = relent_vs_thermal(&hom, &beta3).unwrap();
        assert!(rhs_big >= d);
    }

    #[test]
    fn balancing_rule() {
        for (eps, m) in [(0.5, 1usize), (1e-3, 1), (1e-6, 2), (0.2, 3)] {
            let t = balance_t(eps, m);
            let lhs = t.exp() / (t + 1.0).powi(m as i32);
            assert_abs_diff_eq!(lhs, 1.0 / eps, epsilon = 1e-6 * (1.0 / eps));
        }
        assert_eq!(balance_t(1.5, 1), 0.0);
    }

    #[test]
    fn main_bound_on_examples() {
        // Self-comparison: D = 0, ε ≈ 0.
        let tau = thermal_dense(3.0, 50);
        let spec = GaussianSpec::new(1, vec![0.0, 0.0], tau.covariance()).unwrap();
        let rep = relent_upper(&tau, &spec, &OddPolynomial::zero(), 0.0).unwrap();
        assert!(rep.holds);
        assert!(rep.divergence.abs() < 1e-9);
        assert!(rep.epsilon < 1e-8);
        // Random states against their own Gaussification.
        for seed in 100..110 {
            let rho = random_density(seed, 10).phase_average();
            let spec =
                GaussianSpec::new(1, vec![0.0, 0.0], rho.covariance()).unwrap();
            let rep = relent_upper(&rho, &spec, &OddPolynomial::zero(), 0.0).unwrap();
            assert!(rep.holds, "seed {seed}: D = {} > {}", rep.divergence, rep.bound);
            // Chain: D ≤ truncated RHS at t* ≤ the final bound.
            let w = williamson_1mode(spec.cov()).unwrap();
            let beta = ((w.nu + 1.0) / (w.nu - 1.0)).ln();
            let (rhs, holds) = truncated_rhs(&rho, &[beta], rep.t_star).unwrap();
            assert!(holds, "seed {seed} chain lower link");
            assert!(rhs <= rep.bound + 1e-8, "seed {seed} chain upper link");
        }
    }

    #[test]
    fn non_gaussianity_examples() {
        let tau = State::Dense(thermal_dense(3.0, 50));
        let rep = non_gaussianity_upper(&tau).unwrap();
        assert!(rep.d_g.abs() < 1e-9);
        assert!(rep.holds);
        let one = State::Dense(DensityOperator::number_state(1, 30));
        let rep = non_gaussianity_upper(&one).unwrap();
        assert_abs_diff_eq!(rep.d_g, 4.0f64.ln(), epsilon = 1e-10);
        assert!(rep.holds);
    }

    #[test]
    fn appendix_sums() {
        let s = appendix_tail_sums(&[1.0], 0.0).unwrap();
        let e1 = (-1.0f64).exp();
        assert_abs_diff_eq!(s.f_exact, e1 / (1.0 - e1), epsilon = 1e-12);
        assert_abs_diff_eq!(s.f_bound, 4.0 / (1.0 - e1), epsilon = 1e-12);
        assert!(s.f_exact <= s.f_bound);
        assert!(s.g_exact <= s.g_bound);
        for t in 0..=10 {
            let s = appendix_tail_sums(&[1.0, 2.0], t as f64).unwrap();
            assert!(s.f_exact <= s.f_bound + 1e-10, "f at t={t}");
            assert!(s.g_exact <= s.g_bound + 1e-10, "g at t={t}");
        }
        let far = appendix_tail_sums(&[1.0], 20.0).unwrap();
        assert!(far.f_exact < 1e-8 && far.f_bound < 1e-7);
        assert!(far.f_exact <= far.f_bound);
    }
}
