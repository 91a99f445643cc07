//! Heavy-tailed scale mixtures of thermal states ρ = ∫ w(s) τ_s ds with
//! ν(τ_s) = 4s², built so that ∫w = ∫s²w = 1 (the Gaussification of every
//! mixture is the ν = 4 thermal state) while a power-law tail w(s) ∝ s^{−p}
//! leaves the photon-number moment of order κ infinite for κ ≥ p − 1.
//! These states converge under symmetric convolution but with arbitrarily
//! slow rates. Also provides the first-order reference operator for the
//! n-fold convolution of a mixture and the elementary comparison function
//! h(t) = sin t/t + (cos t − 1)/t² − 1/2 + t²/8 ≥ 0.

use crate::fock::DiagonalState;
use crate::phase_space::{diagonal_from_radial_char, RadialInversion};
use crate::quad::{compensated_sum, gauss_legendre, par_map_range};
use crate::{Error, Result};

/// Relative mass of w beyond the last dyadic quadrature panel.
const W_TAIL_TOL: f64 = 1e-13;
const GL_NODES: usize = 64;

/// One member τ_s of the thermal family, ν(τ_s) = 4s² with the Fock
/// weights (2/(4s²+1)) ((4s²−1)/(4s²+1))^k.
#[derive(Clone, Copy, Debug)]
pub struct ThermalFamilyPoint {
    pub s: f64,
}

impl ThermalFamilyPoint {
    pub fn new(s: f64) -> Result<Self> {
        if !(s >= 0.5) || !s.is_finite() {
            return Err(Error::Domain("family parameter must satisfy s ≥ 1/2"));
        }
        Ok(Self { s })
    }

    pub fn nu(&self) -> f64 {
        4.0 * self.s * self.s
    }

    /// β_s = ln((4s²+1)/(4s²−1)); +∞ at s = 1/2 (the vacuum member).
    pub fn beta_s(&self) -> f64 {
        let f = 4.0 * self.s * self.s;
        if f <= 1.0 {
            f64::INFINITY
        } else {
            ((f + 1.0) / (f - 1.0)).ln()
        }
    }

    /// The shrunken parameter √(1 + (s²−1)/n); s_n(1) = s and s_n → 1.
    pub fn s_n(&self, n: usize) -> f64 {
        (1.0 + (self.s * self.s - 1.0) / n as f64).sqrt()
    }
}

/// ⟨k|τ_s|k⟩, evaluated in log space (stable for large k and large s).
pub fn family_weight(s: f64, k: usize) -> f64 {
    let f = 4.0 * s * s;
    let drop = 2.0 / (f + 1.0); // 1 − q_s
    if f <= 1.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let ln_q = (-drop).ln_1p();
    drop * (k as f64 * ln_q).exp()
}

/// Scale density w(s): a constant plateau c₀ on [1/2, 1) and the power
/// tail a(p−1) s^{−p} on [1, ∞); the degenerate point mass δ(s−1) is a
/// test hook (the Gaussian fixed point of the family).
#[derive(Clone, Copy, Debug)]
pub struct MixtureDensity {
    pub theta: f64,
    pub tail_exponent: f64,
    pub a: f64,
    pub plateau: f64,
    point: bool,
}

/// A scale moment ∫ s^κ w(s) ds: finite exactly when κ < p − 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WMoment {
    Finite(f64),
    Divergent,
}

impl MixtureDensity {
    /// δ(s − 1): the mixture degenerates to the single thermal state τ₁.
    pub fn point_mass() -> Self {
        Self { theta: 0.0, tail_exponent: f64::INFINITY, a: 0.0, plateau: 0.0, point: true }
    }

    pub fn is_point_mass(&self) -> bool {
        self.point
    }

    /// w(s) for the continuous families (undefined for the point mass).
    pub fn density(&self, s: f64) -> f64 {
        if self.point {
            return 0.0;
        }
        if (0.5..1.0).contains(&s) {
            self.plateau
        } else if s >= 1.0 {
            let p = self.tail_exponent;
            self.a * (p - 1.0) * s.powf(-p)
        } else {
            0.0
        }
    }

    /// Quadrature nodes (s_i, W_i) with the density folded into the
    /// weights: Gauss–Legendre on the plateau and on dyadic panels
    /// [2^j, 2^{j+1}] until the remaining w-mass is below 1e−13. For any
    /// integrand bounded by 1 the truncation error is below that mass.
    pub fn quadrature_nodes(&self) -> Vec<(f64, f64)> {
        if self.point {
            return vec![(1.0, 1.0)];
        }
        let p = self.tail_exponent;
        let (gx, gw) = gauss_legendre(GL_NODES);
        let mut nodes = Vec::new();
        for (&x, &w) in gx.iter().zip(&gw) {
            let s = 0.75 + 0.25 * x;
            nodes.push((s, 0.25 * w * self.plateau));
        }
        // Remaining mass beyond S = 2^{j+1} is a·S^{−(p−1)}.
        let panels = ((self.a / W_TAIL_TOL).ln() / ((p - 1.0) * 2f64.ln()))
            .ceil()
            .max(1.0) as usize;
        for j in 0..panels.min(60) {
            let lo = 2f64.powi(j as i32);
            let hi = 2.0 * lo;
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            for (&x, &w) in gx.iter().zip(&gw) {
                let s = mid + half * x;
                nodes.push((s, half * w * self.a * (p - 1.0) * s.powf(-p)));
            }
        }
        nodes
    }

    /// ∫ w(s) f(s) ds over the fixed node set (deterministic order).
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        compensated_sum(self.quadrature_nodes().iter().map(|&(s, w)| w * f(s)))
    }
}

/// Solves the plateau/tail amplitudes from ∫w = 1 and ∫s²w = 1:
/// c₀/2 + a·I₀ = 1 and (7/24)c₀ + a·I₂ = 1 with the closed-form tail
/// integrals I₀ = 1, I₂ = (p−1)/(p−3).
pub fn plateau_solve(p: f64, theta: f64) -> Result<MixtureDensity> {
    if !(0.0 < theta && theta < 1.0) {
        return Err(Error::Domain("family exponent θ must lie in (0, 1)"));
    }
    if (p - (4.0 - theta)).abs() > 1e-12 && (p - (5.0 - theta)).abs() > 1e-12 {
        return Err(Error::Domain("tail exponent must be 4−θ or 5−θ"));
    }
    let i2 = (p - 1.0) / (p - 3.0);
    let c0 = (i2 - 1.0) / (i2 / 2.0 - 7.0 / 24.0);
    let a = 1.0 - c0 / 2.0;
    if !(c0 > 0.0) || !(a > 0.0) {
        return Err(Error::NoValidDensity(c0.min(a)));
    }
    Ok(MixtureDensity { theta, tail_exponent: p, a, plateau: c0, point: false })
}

/// The trace-distance divergence family (tail exponent p = 4 − θ).
pub fn trace_family(theta: f64) -> Result<MixtureDensity> {
    plateau_solve(4.0 - theta, theta)
}

/// The relative-entropy divergence family (tail exponent p = 5 − θ).
pub fn relent_family(theta: f64) -> Result<MixtureDensity> {
    plateau_solve(5.0 - theta, theta)
}

/// Closed-form scale moment ∫ s^κ w(s) ds.
pub fn w_moment(w: &MixtureDensity, kappa: f64) -> WMoment {
    if w.point {
        return WMoment::Finite(1.0);
    }
    let p = w.tail_exponent;
    if kappa >= p - 1.0 {
        return WMoment::Divergent;
    }
    let plateau = w.plateau * (1.0 - 0.5f64.powf(kappa + 1.0)) / (kappa + 1.0);
    let tail = w.a * (p - 1.0) / (p - 1.0 - kappa);
    WMoment::Finite(plateau + tail)
}

/// The same moment by panel quadrature plus the closed-form remainder
/// beyond the last panel. Trips `QuadratureDivergence` when successive
/// panel contributions stop contracting — the numerical signature of
/// κ ≥ p − 1 (divergence itself is always decided analytically).
pub fn w_moment_quadrature(w: &MixtureDensity, kappa: f64, panels: usize) -> Result<f64> {
    if w.point {
        return Ok(1.0);
    }
    let p = w.tail_exponent;
    let (gx, gw) = gauss_legendre(GL_NODES);
    let mut total = compensated_sum(gx.iter().zip(&gw).map(|(&x, &wt)| {
        let s = 0.75 + 0.25 * x;
        0.25 * wt * w.plateau * s.powf(kappa)
    }));
    let mut prev = f64::INFINITY;
    for j in 0..panels {
        let lo = 2f64.powi(j as i32);
        let hi = 2.0 * lo;
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let contribution = compensated_sum(gx.iter().zip(&gw).map(|(&x, &wt)| {
            let s = mid + half * x;
            half * wt * w.a * (p - 1.0) * s.powf(kappa - p)
        }));
        if j >= 4 && contribution >= prev * 0.999 {
            return Err(Error::QuadratureDivergence(format!(
                "panel contributions stopped contracting at [2^{j}, 2^{}] for κ = {kappa}",
                j + 1
            )));
        }
        prev = contribution;
        total += contribution;
    }
    let s_edge = 2f64.powi(panels as i32);
    total += w.a * (p - 1.0) * s_edge.powf(kappa - p + 1.0) / (p - 1.0 - kappa);
    Ok(total)
}

/// Diagonal Fock weights p_k = ∫ w(s) ⟨k|τ_s|k⟩ ds up to the cutoff, with
/// the honestly-computed remaining mass ∫ w(s) q_s^{K+1} ds as the tail
/// (the power-law tail of w makes the remaining mass decay only like
/// K^{−(p−1)/2}, so it stays well above round-off at any desk-scale K).
pub fn mixture_diag(w: &MixtureDensity, k_max: usize) -> Result<DiagonalState> {
    let nodes = w.quadrature_nodes();
    // Per-node geometric data: prefactor (1−q_s)·W and ln q_s.
    let prepared: Vec<(f64, f64)> = nodes
        .iter()
        .map(|&(s, wt)| {
            let f = 4.0 * s * s;
            let drop = 2.0 / (f + 1.0);
            let ln_q = if f <= 1.0 { f64::NEG_INFINITY } else { (-drop).ln_1p() };
            (drop * wt, ln_q)
        })
        .collect();
    let probs = par_map_range(k_max + 1, |k| {
        compensated_sum(prepared.iter().map(|&(pref, ln_q)| {
            if ln_q.is_infinite() {
                if k == 0 {
                    pref
                } else {
                    0.0
                }
            } else {
                pref * (k as f64 * ln_q).exp()
            }
        }))
    });
    let tail = compensated_sum(nodes.iter().map(|&(s, wt)| {
        let f = 4.0 * s * s;
        if f <= 1.0 {
            return 0.0;
        }
        let ln_q = (-2.0 / (f + 1.0)).ln_1p();
        wt * ((k_max as f64 + 1.0) * ln_q).exp()
    }));
    DiagonalState::new(probs, tail.clamp(0.0, 1.0))
}

/// Radial characteristic function of the mixture:
/// χ_ρ(r) = ∫ w(s) e^{−2s²r²} ds. By convexity it is sandwiched between
/// e^{−2r²} (Jensen, using ∫s²w = 1) and e^{−r²/2} (the s = 1/2 member).
pub fn mixture_radial_char(w: &MixtureDensity, r: f64) -> f64 {
    w.integrate(|s| (-2.0 * s * s * r * r).exp())
}

/// Radial characteristic function of the n-fold symmetric convolution:
/// χ_{ρ^⊞n}(r) = χ_ρ(r/√n)^n.
pub fn mixture_nfold_radial_char(w: &MixtureDensity, n: usize, r: f64) -> f64 {
    let scaled = r / (n as f64).sqrt();
    mixture_radial_char(w, scaled).powi(n as i32)
}

/// Diagonal of ρ^⊞n recovered from the radial characteristic function.
pub fn mixture_nfold_diag(
    w: &MixtureDensity,
    n: usize,
    k_max: usize,
    radius: f64,
) -> Result<RadialInversion> {
    if n == 0 {
        return Err(Error::Domain("convolution power must be at least 1"));
    }
    let nodes = w.quadrature_nodes();
    let root_n = (n as f64).sqrt();
    let chi = move |r: f64| {
        let rr = r / root_n;
        compensated_sum(nodes.iter().map(|&(s, wt)| wt * (-2.0 * s * s * rr * rr).exp()))
            .powi(n as i32)
    };
    diagonal_from_radial_char(chi, k_max, radius)
}

/// First-order reference for the n-fold convolution and its sup-norm
/// residual on the diagonal.
#[derive(Clone, Debug)]
pub struct Lemma72Report {
    /// reference_k = ⟨k|τ₁|k⟩ + n ∫ (⟨k|τ_{s_n}|k⟩ − ⟨k|τ₁|k⟩) w(s) ds
    /// (a signed diagonal, not a probability vector).
    pub reference: Vec<f64>,
    /// max_k |⟨k|ρ^⊞n|k⟩ − reference_k|.
    pub residual: f64,
}

/// Builds the shrunken-parameter reference τ₁ + n∫(τ_{s_n} − τ₁)w ds and
/// compares it against the actual diagonal of ρ^⊞n (recovered through the
/// radial characteristic function at the given cutoff).
pub fn lemma72_reference(w: &MixtureDensity, n: usize, k_max: usize) -> Result<Lemma72Report> {
    if n == 0 {
        return Err(Error::Domain("convolution power must be at least 1"));
    }
    let inversion = mixture_nfold_diag(w, n, k_max, 9.0)?;
    let actual = inversion.state.probs();
    let nodes = w.quadrature_nodes();
    let shrunk: Vec<(f64, f64)> = nodes
        .iter()
        .map(|&(s, wt)| (ThermalFamilyPoint { s }.s_n(n), wt))
        .collect();
    let reference = par_map_range(k_max + 1, |k| {
        let base = family_weight(1.0, k);
        let correction = compensated_sum(
            shrunk.iter().map(|&(sn, wt)| wt * (family_weight(sn, k) - base)),
        );
        base + n as f64 * correction
    });
    let residual = actual
        .iter()
        .zip(&reference)
        .map(|(&p, &r)| (p - r).abs())
        .fold(0.0, f64::max);
    Ok(Lemma72Report { reference, residual })
}

/// h(t) = sin t/t + (cos t − 1)/t² − 1/2 + t²/8, nonnegative on ℝ; the
/// Taylor series t⁴/144 − t⁶/5760 + t⁸/403200 − t¹⁰/43545600 replaces the
/// (catastrophically cancelling) direct formula below |t| ≤ 1/4, where the
/// truncation error is < 1e−16 while the direct formula's cancellation
/// noise (~ε/t²) would swamp the tiny true value.
pub fn h_eval(t: f64) -> f64 {
    let t2 = t * t;
    if t.abs() <= 0.25 {
        let t4 = t2 * t2;
        return t4 / 144.0 - t4 * t2 / 5760.0 + t4 * t4 / 403_200.0
            - t4 * t4 * t2 / 43_545_600.0;
    }
    t.sin() / t + (t.cos() - 1.0) / t2 - 0.5 + t2 / 8.0
}

/// Smallest grid point c (step 1e−3, grid up to t = 100) such that
/// h(t) ≥ t²/16 for every sampled t ≥ c.
pub fn h_threshold_search() -> f64 {
    let step = 1e-3;
    let mut last_bad = 0usize;
    for k in 1..=100_000usize {
        let t = k as f64 * step;
        if h_eval(t) < t * t / 16.0 {
            last_bad = k;
        }
    }
    (last_bad + 1) as f64 * step
}
