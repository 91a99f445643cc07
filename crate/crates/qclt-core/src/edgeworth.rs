//! Cumulants of the log-characteristic function, the correction
//! polynomials of the n^{−1/2} expansion around the Gaussian limit, and an
//! empirical residual statistic for that expansion.
//!
//! For a single mode, ln χ_ρ(z) = Σ_α q_α z^p z̄^q / (p! q!) near the
//! origin, α = (p, q). Cumulants are recovered numerically: χ is sampled
//! on a polar stencil (5 radii × 16 phases, outer radius 0.1), the log is
//! taken, an angular DFT separates harmonics h = p − q, and a per-harmonic
//! radial least-squares with two guard degrees recovers the coefficients;
//! a second, shrunken stencil Richardson-corrects the leading truncation
//! term. Hermiticity gives χ(−z) = conj χ(z), hence the exact symmetry
//! q_{(q,p)} = (−1)^{p+q} conj(q_{(p,q)}), which is enforced on the fit
//! output.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::fock::State;
use crate::gaussian::{gaussian_char, GaussianSpec};
use crate::phase_space::{char_fn, CharSamples};
use crate::{Error, Result};

/// Outer stencil radius for the cumulant fit.
pub const FIT_RADIUS: f64 = 0.1;
const FIT_RADII: usize = 5;
const FIT_PHASES: usize = 16;
const FIT_GUARD_STEPS: usize = 2;
const RICHARDSON_SCALE: f64 = 0.8;
const MAX_ORDER: usize = 6;

/// Cumulants q_α of ln χ up to total degree `order` (single mode).
#[derive(Clone, Debug)]
pub struct CumulantSet {
    pub modes: usize,
    pub order: usize,
    coeffs: HashMap<(usize, usize), Complex64>,
}

impl CumulantSet {
    /// q_{(p,q)}; zero for the constant term and for indices outside the
    /// fitted range.
    pub fn get(&self, p: usize, q: usize) -> Complex64 {
        self.coeffs.get(&(p, q)).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &Complex64)> {
        self.coeffs.iter()
    }

    /// Largest |q_α| over 1 ≤ |α| ≤ order with p ≠ q (phase-sensitive
    /// part; vanishes for Fock-diagonal states).
    pub fn max_off_phase(&self) -> f64 {
        self.coeffs
            .iter()
            .filter(|((p, q), _)| p != q)
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max)
    }
}

/// One stratum of the n^{−1/2} expansion: a polynomial Σ e_α z^p z̄^q.
#[derive(Clone, Debug)]
pub struct EdgeworthPolynomial {
    pub r: usize,
    pub terms: HashMap<(usize, usize), Complex64>,
    pub degree: usize,
}

impl EdgeworthPolynomial {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let zb = z.conj();
        self.terms
            .iter()
            .map(|(&(p, q), &c)| c * z.powu(p as u32) * zb.powu(q as u32))
            .sum()
    }
}

fn polar_stencil(scale: f64) -> Vec<Complex64> {
    let mut nodes = Vec::with_capacity(FIT_RADII * FIT_PHASES);
    for i in 1..=FIT_RADII {
        let r = scale * FIT_RADIUS * i as f64 / FIT_RADII as f64;
        for t in 0..FIT_PHASES {
            let th = 2.0 * std::f64::consts::PI * t as f64 / FIT_PHASES as f64;
            nodes.push(Complex64::from_polar(r, th));
        }
    }
    nodes
}

/// Exponents fitted for harmonic `h` at a given order: total degrees
/// s ≡ |h| (mod 2) with max(|h|, 1) ≤ s, plus `FIT_GUARD_STEPS` extra
/// degrees past `order` absorbing the next Taylor strata.
fn harmonic_degrees(h: usize, order: usize) -> Vec<usize> {
    let lo = h.max(1);
    let start = if lo % 2 == h % 2 { lo } else { lo + 1 };
    (0..)
        .map(|i| start + 2 * i)
        .take_while(|&s| s <= order + 2 * FIT_GUARD_STEPS)
        .collect()
}

/// Per-scale fit: returns coefficients c_{h,s} of r^s e^{ihθ} in ln χ.
fn fit_at_scale(
    chi: &(impl Fn(Complex64) -> Result<Complex64> + ?Sized),
    order: usize,
    scale: f64,
) -> Result<HashMap<(usize, usize), Complex64>> {
    let nodes = polar_stencil(scale);
    let mut logs = Vec::with_capacity(nodes.len());
    for z in &nodes {
        let v = chi(*z)?;
        if v.norm() < 1e-14 {
            return Err(Error::FitIllConditioned(
                "characteristic function vanished inside the fit stencil".into(),
            ));
        }
        logs.push(v.ln());
    }
    // Angular DFT per radius: F_h(r_i) = (1/P) Σ_t f(r_i e^{iθ_t}) e^{−ihθ_t}.
    let radii: Vec<f64> =
        (1..=FIT_RADII).map(|i| scale * FIT_RADIUS * i as f64 / FIT_RADII as f64).collect();
    let mut out = HashMap::new();
    for h in 0..=order {
        let degrees = harmonic_degrees(h, order);
        if degrees.is_empty() {
            continue;
        }
        let mut rhs = Vec::with_capacity(FIT_RADII);
        for i in 0..FIT_RADII {
            let mut acc = Complex64::default();
            for t in 0..FIT_PHASES {
                let th = 2.0 * std::f64::consts::PI * t as f64 / FIT_PHASES as f64;
                let w = Complex64::from_polar(1.0, -(h as f64) * th);
                acc += logs[i * FIT_PHASES + t] * w;
            }
            rhs.push(acc / FIT_PHASES as f64);
        }
        // Column-scaled radial Vandermonde in the degrees of this harmonic.
        let r_max = radii[FIT_RADII - 1];
        let a = DMatrix::<f64>::from_fn(FIT_RADII, degrees.len(), |i, j| {
            (radii[i] / r_max).powi(degrees[j] as i32)
        });
        let svd = a.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smin > 0.0) || smax / smin > 1e10 {
            return Err(Error::FitIllConditioned(format!(
                "radial system for harmonic {h} has condition {:.2e}",
                smax / smin
            )));
        }
        let b_re = DVector::from_iterator(FIT_RADII, rhs.iter().map(|v| v.re));
        let b_im = DVector::from_iterator(FIT_RADII, rhs.iter().map(|v| v.im));
        let x_re = svd.solve(&b_re, 0.0).map_err(|e| Error::FitIllConditioned(e.into()))?;
        let x_im = svd.solve(&b_im, 0.0).map_err(|e| Error::FitIllConditioned(e.into()))?;
        for (j, &s) in degrees.iter().enumerate() {
            let c = Complex64::new(x_re[j], x_im[j]) / r_max.powi(s as i32);
            out.insert((h, s), c);
        }
    }
    Ok(out)
}

/// Cumulants of an arbitrary characteristic function near the origin.
pub fn weyl_cumulants_fn(
    chi: impl Fn(Complex64) -> Result<Complex64>,
    order: usize,
) -> Result<CumulantSet> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::Domain("cumulant extraction supports orders 1 through 6"));
    }
    let coarse = fit_at_scale(&chi, order, 1.0)?;
    let fine = fit_at_scale(&chi, order, RICHARDSON_SCALE)?;
    let mut coeffs = HashMap::new();
    for (&(h, s), &c1) in &coarse {
        if s > order {
            continue; // guard degrees are scaffolding, not results
        }
        // Leading truncation term of c_{h,s} scales like
        // (stencil radius)^{order + 2·guards + 2 − s}; eliminate it from
        // the two scales.
        let g = (order + 2 * FIT_GUARD_STEPS + 2 - s) as i32;
        let sig = RICHARDSON_SCALE.powi(g);
        let c2 = fine[&(h, s)];
        let c = (c2 - sig * c1) / (1.0 - sig);
        // c is the monomial coefficient; q_α carries the factorials.
        let p = (s + h) / 2;
        let q = (s - h) / 2;
        let fact = |n: usize| (1..=n).map(|i| i as f64).product::<f64>();
        coeffs.insert((p, q), c * fact(p) * fact(q));
    }
    // χ(−z) = conj χ(z) gives q_{(q,p)} = (−1)^{p+q} conj q_{(p,q)};
    // fill the h < 0 harmonics and exactly symmetrize.
    let keys: Vec<(usize, usize)> = coeffs.keys().copied().collect();
    for (p, q) in keys {
        let sign = if (p + q) % 2 == 0 { 1.0 } else { -1.0 };
        let v = coeffs[&(p, q)];
        let partner = sign * v.conj();
        let entry = coeffs.entry((q, p)).or_insert(partner);
        if p != q {
            let merged = 0.5 * (*entry + partner);
            *entry = merged;
            coeffs.insert((p, q), sign * merged.conj());
        } else {
            // p = q terms are real by the same symmetry.
            coeffs.insert((p, q), Complex64::new(v.re, 0.0));
        }
    }
    Ok(CumulantSet { modes: 1, order, coeffs })
}

/// Cumulants of a stored single-mode state.
pub fn weyl_cumulants(state: &State, order: usize) -> Result<CumulantSet> {
    if state.modes() != 1 {
        return Err(Error::Domain("cumulant extraction is single-mode"));
    }
    weyl_cumulants_fn(|z| char_fn(state, &[z]), order)
}

/// Second-order coefficients (q_{2,0}, q_{1,1}, q_{0,2}) of the Gaussian
/// log-characteristic function with covariance γ (one mode).
pub fn quadratic_block(gamma: &DMatrix<f64>) -> (Complex64, Complex64, Complex64) {
    let (a, b, c) = (gamma[(0, 0)], gamma[(0, 1)], gamma[(1, 1)]);
    let q20 = Complex64::new(0.25 * (a - c), -0.5 * b);
    let q11 = Complex64::new(-0.25 * (a + c), 0.0);
    (q20, q11, q20.conj())
}

fn multiply_terms(
    a: &HashMap<(usize, usize), Complex64>,
    b: &HashMap<(usize, usize), Complex64>,
) -> HashMap<(usize, usize), Complex64> {
    let mut out = HashMap::new();
    for (&(p1, q1), &c1) in a {
        for (&(p2, q2), &c2) in b {
            *out.entry((p1 + p2, q1 + q2)).or_insert(Complex64::default()) += c1 * c2;
        }
    }
    out
}

/// Correction polynomials E_r, r = 1..=r_max, from the cumulant tail:
/// the n^{−r/2} stratum of exp(Σ_{|α|≥3} q_α z^α n^{−(|α|−2)/2}/α!) with
/// E_1 the third-cumulant sum and E_2 the fourth-cumulant sum plus half
/// the squared third-cumulant sum.
pub fn edgeworth_polynomials(q: &CumulantSet, r_max: usize) -> Result<Vec<EdgeworthPolynomial>> {
    if r_max > 2 {
        return Err(Error::Domain("expansion strata are computed for r ≤ 2"));
    }
    if q.order < r_max + 2 {
        return Err(Error::InsufficientOrder { have: q.order, need: r_max + 2 });
    }
    let stratum = |deg: usize| -> HashMap<(usize, usize), Complex64> {
        let fact = |n: usize| (1..=n).map(|i| i as f64).product::<f64>();
        q.coeffs
            .iter()
            .filter(|(&(p, qq), v)| p + qq == deg && v.norm() > 0.0)
            .map(|(&(p, qq), &v)| ((p, qq), v / (fact(p) * fact(qq))))
            .collect()
    };
    let mut out = Vec::new();
    if r_max >= 1 {
        let t1 = stratum(3);
        out.push(EdgeworthPolynomial { r: 1, terms: t1, degree: 3 });
    }
    if r_max >= 2 {
        let t1 = &out[0].terms;
        let mut t2 = stratum(4);
        for (key, val) in multiply_terms(t1, t1) {
            *t2.entry(key).or_insert(Complex64::default()) += 0.5 * val;
        }
        let degree = t2.keys().map(|&(p, qq)| p + qq).max().unwrap_or(0);
        out.push(EdgeworthPolynomial { r: 2, terms: t2, degree });
    }
    Ok(out)
}

/// Weighted sup-residual of the expansion at a given n:
/// sup over the sampled nodes of
/// |χ_{ρ^⊞n}(z) − χ_G(z)(1 + Σ_{r≤r_max} n^{−r/2} E_r(z))|
/// · e^{(ν_min−1)|z|²/4} · n^{r_max/2},
/// where ν_min is the smallest eigenvalue of the covariance of ρ and the
/// sampled χ_{ρ^⊞n} is supplied by the caller (any convolution route).
/// The nodes must stay inside the window |z| ≤ 0.1√n.
pub fn expansion_residual(
    rho: &State,
    chi_n: &CharSamples,
    n: usize,
    r_max: usize,
) -> Result<f64> {
    if rho.modes() != 1 {
        return Err(Error::Domain("the expansion residual is single-mode"));
    }
    let d = rho.first_moments();
    let drift = d.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if drift > 1e-8 {
        return Err(Error::NotCentered(drift));
    }
    let window = 0.1 * (n as f64).sqrt();
    for z in &chi_n.nodes {
        if z.norm() > window + 1e-12 {
            return Err(Error::GridTooCoarse(format!(
                "node |z| = {:.3} lies outside the expansion window {window:.3}",
                z.norm()
            )));
        }
    }
    let q = weyl_cumulants(rho, r_max + 2)?;
    let polys = edgeworth_polynomials(&q, r_max)?;
    let gamma = rho.covariance();
    let spec = GaussianSpec::new(1, vec![0.0; 2], gamma.clone())?;
    let eigs = gamma.symmetric_eigen();
    let nu_min = eigs.eigenvalues.min();
    let scale = (n as f64).powf(r_max as f64 / 2.0);
    let mut worst = 0.0f64;
    for (z, chi_val) in chi_n.nodes.iter().zip(&chi_n.values) {
        let g = gaussian_char(&spec, &[*z]);
        let mut corr = Complex64::new(1.0, 0.0);
        for poly in &polys {
            corr += poly.eval(*z) * (n as f64).powf(-(poly.r as f64) / 2.0);
        }
        let weight = ((nu_min - 1.0) * z.norm_sqr() / 4.0).exp();
        let resid = (chi_val - g * corr).norm() * weight * scale;
        worst = worst.max(resid);
    }
    Ok(worst)
}
