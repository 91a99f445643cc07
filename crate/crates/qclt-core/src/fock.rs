//! Truncated Fock-basis representation of m-mode operators and the state
//! functionals built on it: moments, first moments, covariance, Schatten
//! norms, entropies, truncation, and centering.
//!
//! Two representations coexist by design. [`DensityOperator`] is a dense
//! complex matrix over a product (or total-number) Fock basis and supports
//! everything. [`DiagonalState`] is a plain probability vector over photon
//! numbers of a single mode — the fast path for thermal states and
//! phase-invariant mixtures, which is where all the large-cutoff work
//! happens. Every functional is implemented for both and the pair must
//! agree to 1e−10 on diagonal inputs (covered by the integration tests).
//!
//! Tolerances enforced here:
//! - Hermiticity: max entrywise asymmetry ≤ 1e−12 (then symmetrized);
//! - eigenvalue floor: −1e−10;
//! - unit trace: |tr − 1| ≤ 1e−8 when no truncation deficit is declared;
//! - entropy eigenvalue floor: 1e−15 (smaller weights contribute zero);
//! - relative-entropy support: p > 1e−12 where q < 1e−300 is a violation.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::quad::{assoc_laguerre_weighted_row, compensated_sum, ln_factorial};
use crate::{Error, Result};

pub const HERMITICITY_TOL: f64 = 1e-12;
pub const EIGENVALUE_FLOOR: f64 = -1e-10;
pub const TRACE_TOL: f64 = 1e-8;
pub const ENTROPY_EIGEN_FLOOR: f64 = 1e-15;
pub const SUPPORT_P_TOL: f64 = 1e-12;
pub const SUPPORT_Q_FLOOR: f64 = 1e-300;

/// Basis cutoff for a truncated m-mode Fock space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FockCutoff {
    /// Independent photon-number cap per mode; the basis is the full product
    /// of single-mode ladders, dimension `∏ (K_j + 1)`, enumerated row-major
    /// (last mode fastest).
    PerMode(Vec<usize>),
    /// Cap on the total photon number; the basis holds every multi-index `k`
    /// with `|k| ≤ max_total`, dimension `C(max_total + modes, modes)`,
    /// enumerated lexicographically.
    TotalNumber { modes: usize, max_total: usize },
}

impl FockCutoff {
    /// Single-mode cutoff `K` (indices `0..=K`).
    pub fn single(k: usize) -> Self {
        FockCutoff::PerMode(vec![k])
    }

    pub fn modes(&self) -> usize {
        match self {
            FockCutoff::PerMode(ks) => ks.len(),
            FockCutoff::TotalNumber { modes, .. } => *modes,
        }
    }

    /// Number of retained multi-indices.
    pub fn dimension(&self) -> usize {
        match self {
            FockCutoff::PerMode(ks) => ks.iter().map(|k| k + 1).product(),
            FockCutoff::TotalNumber { modes, max_total } => {
                // C(max_total + modes, modes), exact in integer arithmetic.
                let mut acc: u128 = 1;
                for i in 1..=*modes {
                    acc = acc * (*max_total as u128 + i as u128) / i as u128;
                }
                acc as usize
            }
        }
    }

    /// Deterministic enumeration of the retained multi-indices.
    pub fn indices(&self) -> Vec<Vec<usize>> {
        match self {
            FockCutoff::PerMode(ks) => {
                let mut out = Vec::with_capacity(self.dimension());
                let mut cur = vec![0usize; ks.len()];
                loop {
                    out.push(cur.clone());
                    let mut pos = ks.len();
                    while pos > 0 {
                        pos -= 1;
                        if cur[pos] < ks[pos] {
                            cur[pos] += 1;
                            for c in cur.iter_mut().skip(pos + 1) {
                                *c = 0;
                            }
                            break;
                        }
                        if pos == 0 {
                            return out;
                        }
                    }
                }
            }
            FockCutoff::TotalNumber { modes, max_total } => {
                fn rec(out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>, left: usize, modes: usize) {
                    if cur.len() == modes {
                        out.push(cur.clone());
                        return;
                    }
                    for k in 0..=left {
                        cur.push(k);
                        rec(out, cur, left - k, modes);
                        cur.pop();
                    }
                }
                let mut out = Vec::with_capacity(self.dimension());
                rec(&mut out, &mut Vec::new(), *max_total, *modes);
                out
            }
        }
    }
}

/// A truncated m-mode density matrix in the Fock basis.
///
/// `trace_deficit` carries the mass known to have been lost to truncation;
/// it is reported, never silently renormalized away (renormalization happens
/// only in [`truncate`], which is defined that way).
#[derive(Clone, Debug)]
pub struct DensityOperator {
    modes: usize,
    cutoff: FockCutoff,
    entries: DMatrix<Complex64>,
    trace_deficit: f64,
}

/// Single-mode Fock-diagonal state: probabilities over photon numbers
/// `0..=K` plus the mass beyond the cutoff.
#[derive(Clone, Debug)]
pub struct DiagonalState {
    probs: Vec<f64>,
    tail_mass: f64,
}

/// Value of the moment functional `tr(ρ (N_m + m)^{κ/2})` over the retained
/// basis. `tail_bound` is the least contribution the escaped mass could
/// still add (it would sit just above the cutoff), zero for exact states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentValue {
    pub order: f64,
    pub value: f64,
    pub tail_bound: f64,
}

/// A state in whichever representation it currently lives in.
#[derive(Clone, Debug)]
pub enum State {
    Dense(DensityOperator),
    Diagonal(DiagonalState),
}

pub(crate) fn hermitian_eigen(
    m: &DMatrix<Complex64>,
) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let se = nalgebra::linalg::SymmetricEigen::try_new(m.clone(), f64::EPSILON, 100_000)
        .ok_or(Error::EigenFailure)?;
    Ok((se.eigenvalues.as_slice().to_vec(), se.eigenvectors))
}

fn max_asymmetry(entries: &DMatrix<Complex64>) -> f64 {
    let n = entries.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((entries[(i, j)] - entries[(j, i)].conj()).norm());
        }
    }
    worst
}

fn symmetrize(entries: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (entries + entries.adjoint()).scale(0.5)
}

impl DensityOperator {
    /// Validate and construct a unit-trace state (no declared deficit).
    ///
    /// The matrix is symmetrized via `(A + A†)/2` when the asymmetry is
    /// below 1e−12, rejected otherwise; eigenvalues must clear −1e−10 and
    /// the trace must sit within 1e−8 of one.
    pub fn build_density(
        entries: DMatrix<Complex64>,
        modes: usize,
        cutoff: FockCutoff,
    ) -> Result<Self> {
        Self::with_trace_deficit(entries, modes, cutoff, 0.0)
    }

    /// As [`build_density`](Self::build_density), with mass `trace_deficit`
    /// already known lost to truncation: the trace must lie in
    /// `[1 − deficit − 1e−10, 1 + 1e−10]`.
    pub fn with_trace_deficit(
        entries: DMatrix<Complex64>,
        modes: usize,
        cutoff: FockCutoff,
        trace_deficit: f64,
    ) -> Result<Self> {
        if modes == 0 || modes != cutoff.modes() {
            return Err(Error::Domain("mode count does not match the cutoff"));
        }
        let dim = cutoff.dimension();
        if entries.nrows() != dim || entries.ncols() != dim {
            return Err(Error::LengthMismatch(entries.nrows(), dim));
        }
        if entries.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Domain("non-finite matrix entry"));
        }
        if !(0.0..=1.0).contains(&trace_deficit) {
            return Err(Error::Domain("trace deficit outside [0, 1]"));
        }
        let asym = max_asymmetry(&entries);
        if asym > HERMITICITY_TOL {
            return Err(Error::NonHermitian(asym));
        }
        let entries = symmetrize(&entries);
        let trace: f64 = (0..dim).map(|i| entries[(i, i)].re).sum();
        let tol = if trace_deficit == 0.0 { TRACE_TOL } else { 1e-10 };
        if trace > 1.0 + 1e-10 || trace < 1.0 - trace_deficit - tol {
            return Err(Error::BadTrace(trace));
        }
        let (eigs, _) = hermitian_eigen(&entries)?;
        if let Some(&bad) = eigs.iter().find(|&&l| l < EIGENVALUE_FLOOR) {
            return Err(Error::NegativeEigenvalue(bad));
        }
        Ok(Self { modes, cutoff, entries, trace_deficit })
    }

    /// Crate-internal constructor for matrices produced by operations that
    /// preserve validity; symmetrizes but skips the spectral check.
    pub(crate) fn trusted(
        entries: DMatrix<Complex64>,
        modes: usize,
        cutoff: FockCutoff,
        trace_deficit: f64,
    ) -> Self {
        let entries = symmetrize(&entries);
        Self { modes, cutoff, entries, trace_deficit }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> &FockCutoff {
        &self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn trace_deficit(&self) -> f64 {
        self.trace_deficit
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.entries[(i, i)].re).sum()
    }

    /// Vacuum projector on a single mode with cutoff `K`.
    pub fn vacuum(k_max: usize) -> Self {
        Self::number_state(0, k_max)
    }

    /// `|k⟩⟨k|` on a single mode with cutoff `K ≥ k`.
    pub fn number_state(k: usize, k_max: usize) -> Self {
        assert!(k <= k_max, "number state outside cutoff");
        let mut m = DMatrix::zeros(k_max + 1, k_max + 1);
        m[(k, k)] = Complex64::new(1.0, 0.0);
        Self { modes: 1, cutoff: FockCutoff::single(k_max), entries: m, trace_deficit: 0.0 }
    }

    /// Pure state `(|a⟩ + |b⟩)/√2` on a single mode with cutoff `K`.
    pub fn equal_superposition(a: usize, b: usize, k_max: usize) -> Self {
        assert!(a < b && b <= k_max, "superposition outside cutoff");
        let mut m = DMatrix::zeros(k_max + 1, k_max + 1);
        let h = Complex64::new(0.5, 0.0);
        m[(a, a)] = h;
        m[(b, b)] = h;
        m[(a, b)] = h;
        m[(b, a)] = h;
        Self { modes: 1, cutoff: FockCutoff::single(k_max), entries: m, trace_deficit: 0.0 }
    }

    pub fn from_diagonal(d: &DiagonalState) -> Self {
        let n = d.probs.len();
        let mut m = DMatrix::zeros(n, n);
        for (k, &p) in d.probs.iter().enumerate() {
            m[(k, k)] = Complex64::new(p, 0.0);
        }
        Self {
            modes: 1,
            cutoff: FockCutoff::single(n - 1),
            entries: m,
            trace_deficit: d.tail_mass,
        }
    }

    /// Extract the diagonal as a [`DiagonalState`] when every off-diagonal
    /// entry is below `tol` (single mode only).
    pub fn to_diagonal(&self, tol: f64) -> Option<DiagonalState> {
        if self.modes != 1 {
            return None;
        }
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                if i != j && self.entries[(i, j)].norm() > tol {
                    return None;
                }
            }
        }
        let probs: Vec<f64> = (0..n).map(|i| self.entries[(i, i)].re.max(0.0)).collect();
        DiagonalState::new(probs, self.trace_deficit).ok()
    }

    /// Project onto total photon number ≤ `n` and renormalize.
    ///
    /// Returns the renormalized truncation together with the retained mass
    /// `tr(Π_n ρ Π_n)`. For a single mode the output matrix shrinks to
    /// cutoff `min(n, K)`; multi-mode output keeps the ambient basis with
    /// entries outside the projector zeroed.
    pub fn truncate(&self, n: usize) -> Result<(Self, f64)> {
        let indices = self.cutoff.indices();
        let keep: Vec<bool> = indices.iter().map(|k| k.iter().sum::<usize>() <= n).collect();
        let kept_mass: f64 = (0..self.dim())
            .filter(|&i| keep[i])
            .map(|i| self.entries[(i, i)].re)
            .sum();
        if kept_mass < 1e-300 {
            return Err(Error::ZeroMass);
        }
        let inv = Complex64::new(1.0 / kept_mass, 0.0);
        if self.modes == 1 {
            let new_k = n.min(self.dim() - 1);
            let block = self.entries.view((0, 0), (new_k + 1, new_k + 1)).into_owned() * inv;
            let out = Self {
                modes: 1,
                cutoff: FockCutoff::single(new_k),
                entries: block,
                trace_deficit: 0.0,
            };
            Ok((out, kept_mass))
        } else {
            let mut m = self.entries.clone();
            for i in 0..self.dim() {
                for j in 0..self.dim() {
                    if keep[i] && keep[j] {
                        m[(i, j)] *= inv;
                    } else {
                        m[(i, j)] = Complex64::new(0.0, 0.0);
                    }
                }
            }
            let out =
                Self { modes: self.modes, cutoff: self.cutoff.clone(), entries: m, trace_deficit: 0.0 };
            Ok((out, kept_mass))
        }
    }

    /// `tr(ρ (N_m + m)^{κ/2})` over the retained basis.
    pub fn moment(&self, kappa: f64) -> Result<MomentValue> {
        if !(kappa > 0.0) {
            return Err(Error::Domain("moment order must be positive"));
        }
        let m = self.modes as f64;
        let indices = self.cutoff.indices();
        let value = compensated_sum((0..self.dim()).map(|i| {
            let total: usize = indices[i].iter().sum();
            self.entries[(i, i)].re * (total as f64 + m).powf(kappa / 2.0)
        }));
        let next = indices
            .iter()
            .map(|k| k.iter().sum::<usize>())
            .max()
            .unwrap_or(0) as f64
            + 1.0;
        Ok(MomentValue {
            order: kappa,
            value,
            tail_bound: self.trace_deficit * (next + m).powf(kappa / 2.0),
        })
    }

    /// Twirl over the four total-number phases U_θ = e^{iθN},
    /// θ ∈ {0, π/2, π, 3π/2}: keeps only entries whose total-photon
    /// difference is a multiple of four, which kills all first moments
    /// and the ⟨a_j a_k⟩ blocks (the covariance becomes mode-thermal).
    pub fn phase_average(&self) -> Self {
        let indices = self.cutoff.indices();
        let totals: Vec<usize> = indices.iter().map(|k| k.iter().sum()).collect();
        let n = self.dim();
        let mut entries = self.entries.clone();
        for i in 0..n {
            for j in 0..n {
                if (totals[i] as isize - totals[j] as isize).rem_euclid(4) != 0 {
                    entries[(i, j)] = Complex64::new(0.0, 0.0);
                }
            }
        }
        Self::trusted(entries, self.modes, self.cutoff.clone(), self.trace_deficit)
    }

    /// `tr(ρ a_j)` for each mode.
    pub fn ladder_means(&self) -> Vec<Complex64> {
        if self.modes == 1 {
            let n = self.dim();
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 1..n {
                acc += (j as f64).sqrt() * self.entries[(j, j - 1)];
            }
            return vec![acc];
        }
        let indices = self.cutoff.indices();
        let lookup: std::collections::HashMap<&[usize], usize> =
            indices.iter().enumerate().map(|(i, k)| (k.as_slice(), i)).collect();
        (0..self.modes)
            .map(|mode| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (col, k) in indices.iter().enumerate() {
                    if k[mode] == 0 {
                        continue;
                    }
                    let mut lower = k.clone();
                    lower[mode] -= 1;
                    if let Some(&row) = lookup.get(lower.as_slice()) {
                        // ⟨k|ρ a_mode|k⟩ pieces: ρ_{k, k−e} √(k_mode).
                        acc += (k[mode] as f64).sqrt() * self.entries[(col, row)];
                    }
                }
                acc
            })
            .collect()
    }

    /// Quadrature first moments `d ∈ ℝ^{2m}` in `(x₁, p₁, x₂, p₂, …)` order.
    pub fn first_moments(&self) -> Vec<f64> {
        let mut d = Vec::with_capacity(2 * self.modes);
        for a in self.ladder_means() {
            d.push(std::f64::consts::SQRT_2 * a.re);
            d.push(std::f64::consts::SQRT_2 * a.im);
        }
        d
    }

    /// Covariance matrix `γ = tr(ρ {R − d, (R − d)ᵀ})` (anti-commutator
    /// convention; vacuum ↦ identity).
    pub fn covariance(&self) -> DMatrix<f64> {
        let m = self.modes;
        let d = self.first_moments();
        let indices = self.cutoff.indices();
        let lookup: std::collections::HashMap<&[usize], usize> =
            indices.iter().enumerate().map(|(i, k)| (k.as_slice(), i)).collect();
        // Second ladder moments A_jk = ⟨a_j a_k⟩ and B_jk = ⟨a_j† a_k⟩.
        let mut a2 = DMatrix::<Complex64>::zeros(m, m);
        let mut occ = DMatrix::<Complex64>::zeros(m, m);
        for j in 0..m {
            for k in 0..m {
                let mut acc_a2 = Complex64::new(0.0, 0.0);
                let mut acc_occ = Complex64::new(0.0, 0.0);
                for (col, idx) in indices.iter().enumerate() {
                    // ⟨col| ρ a_j a_k |col⟩: lower by k then by j.
                    if idx[k] >= 1 {
                        let f1 = (idx[k] as f64).sqrt();
                        let mut mid = idx.clone();
                        mid[k] -= 1;
                        if mid[j] >= 1 {
                            let f2 = (mid[j] as f64).sqrt();
                            mid[j] -= 1;
                            if let Some(row) = lookup.get(mid.as_slice()) {
                                acc_a2 += f1 * f2 * self.entries[(col, *row)];
                            }
                        }
                    }
                    // ⟨col| ρ a_j† a_k |col⟩: lower by k then raise by j.
                    if idx[k] >= 1 {
                        let f1 = (idx[k] as f64).sqrt();
                        let mut mid = idx.clone();
                        mid[k] -= 1;
                        let f2 = ((mid[j] + 1) as f64).sqrt();
                        mid[j] += 1;
                        if let Some(row) = lookup.get(mid.as_slice()) {
                            acc_occ += f1 * f2 * self.entries[(col, *row)];
                        }
                    }
                }
                a2[(j, k)] = acc_a2;
                occ[(j, k)] = acc_occ;
            }
        }
        let mut g = DMatrix::<f64>::zeros(2 * m, 2 * m);
        for j in 0..m {
            for k in 0..m {
                let del = if j == k { 1.0 } else { 0.0 };
                let dxj = d[2 * j];
                let dpj = d[2 * j + 1];
                let dxk = d[2 * k];
                let dpk = d[2 * k + 1];
                let re_a = a2[(j, k)].re;
                let im_a = a2[(j, k)].im;
                let re_b = occ[(j, k)].re;
                let im_b = occ[(j, k)].im;
                g[(2 * j, 2 * k)] = 2.0 * re_a + 2.0 * re_b + del - 2.0 * dxj * dxk;
                g[(2 * j + 1, 2 * k + 1)] = -2.0 * re_a + 2.0 * re_b + del - 2.0 * dpj * dpk;
                g[(2 * j, 2 * k + 1)] = 2.0 * im_a + 2.0 * im_b - 2.0 * dxj * dpk;
                g[(2 * j + 1, 2 * k)] = 2.0 * im_a - 2.0 * im_b - 2.0 * dpj * dxk;
            }
        }
        // Exact symmetry regardless of rounding.
        let gt = g.transpose();
        (g + gt).scale(0.5)
    }

    /// Von Neumann entropy `−tr(ρ ln ρ)`; eigenvalues below 1e−15
    /// contribute zero.
    pub fn von_neumann_entropy(&self) -> Result<f64> {
        let (eigs, _) = hermitian_eigen(&self.entries)?;
        Ok(entropy_from_weights(eigs.iter().copied()))
    }

    /// Relative entropy `D(ρ∥σ) = tr(ρ ln ρ) − tr(ρ ln σ)`.
    pub fn relative_entropy(&self, sigma: &DensityOperator) -> Result<f64> {
        if self.dim() != sigma.dim() {
            return Err(Error::LengthMismatch(self.dim(), sigma.dim()));
        }
        let (rho_eigs, _) = hermitian_eigen(&self.entries)?;
        let minus_s_rho: f64 = -entropy_from_weights(rho_eigs.iter().copied());
        let (sig_eigs, sig_vecs) = hermitian_eigen(&sigma.entries)?;
        let mut cross = 0.0f64;
        for (i, &mu) in sig_eigs.iter().enumerate() {
            let v = sig_vecs.column(i);
            // ⟨v_i| ρ |v_i⟩
            let w = (v.adjoint() * &self.entries * v)[(0, 0)].re.max(0.0);
            if mu < SUPPORT_Q_FLOOR {
                if w > SUPPORT_P_TOL {
                    return Err(Error::SupportViolation { index: i, p: w, q: mu.max(0.0) });
                }
                continue;
            }
            cross += w * mu.ln();
        }
        Ok(minus_s_rho - cross)
    }

    /// Conjugate by the displacement `D_z`: returns `D_z† ρ D_z`.
    pub fn displace_adjoint(&self, z: &[Complex64]) -> Result<Self> {
        let d = displacement_matrix_unchecked(z, &self.cutoff)?;
        let entries = d.adjoint() * &self.entries * &d;
        Ok(Self::trusted(entries, self.modes, self.cutoff.clone(), self.trace_deficit))
    }

    /// Center the state: `σ̃ = D_z† ρ D_z` with `z_j = tr(ρ a_j)`, so that
    /// the first moments of the result vanish.
    ///
    /// Requires headroom: the mass in the top `⌈4|z|²⌉` levels of each mode
    /// must not exceed 1e−10, otherwise the displaced state would leak
    /// through the cutoff.
    pub fn center(&self) -> Result<(Self, Vec<Complex64>)> {
        let z = self.ladder_means();
        let norm2: f64 = z.iter().map(|v| v.norm_sqr()).sum();
        if norm2 < 1e-24 {
            return Ok((self.clone(), z));
        }
        let headroom = (4.0 * norm2).ceil() as usize;
        let indices = self.cutoff.indices();
        let top: f64 = (0..self.dim())
            .filter(|&i| {
                let total: usize = indices[i].iter().sum();
                let max_total = match &self.cutoff {
                    FockCutoff::PerMode(ks) => ks.iter().sum::<usize>(),
                    FockCutoff::TotalNumber { max_total, .. } => *max_total,
                };
                total + headroom > max_total
            })
            .map(|i| self.entries[(i, i)].re)
            .sum();
        if top > 1e-10 {
            return Err(Error::CutoffTooSmall(format!(
                "centering needs {headroom} free levels but the top levels hold mass {top:.3e}"
            )));
        }
        let centered = self.displace_adjoint(&z)?;
        Ok((centered, z))
    }
}

fn entropy_from_weights(weights: impl IntoIterator<Item = f64>) -> f64 {
    compensated_sum(
        weights
            .into_iter()
            .filter(|&l| l > ENTROPY_EIGEN_FLOOR)
            .map(|l| -l * l.ln()),
    )
}

impl DiagonalState {
    /// Validate probabilities (`≥ 0`) and total mass
    /// (`Σp + tail ∈ [1 ± 1e−10]`).
    pub fn new(mut probs: Vec<f64>, tail_mass: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Domain("empty probability vector"));
        }
        for (k, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() {
                return Err(Error::Domain("non-finite probability"));
            }
            if *p < 0.0 {
                if *p < -1e-15 {
                    return Err(Error::NegativeMass { index: k, value: *p });
                }
                *p = 0.0;
            }
        }
        if !(0.0..=1.0 + 1e-10).contains(&tail_mass) {
            return Err(Error::Domain("tail mass outside [0, 1]"));
        }
        let total = compensated_sum(probs.iter().copied()) + tail_mass;
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::BadTrace(total));
        }
        Ok(Self { probs, tail_mass })
    }

    pub fn vacuum(k_max: usize) -> Self {
        Self::fock(0, k_max)
    }

    pub fn fock(k: usize, k_max: usize) -> Self {
        assert!(k <= k_max);
        let mut probs = vec![0.0; k_max + 1];
        probs[k] = 1.0;
        Self { probs, tail_mass: 0.0 }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn cutoff(&self) -> usize {
        self.probs.len() - 1
    }

    /// Mean photon number over the retained weights.
    pub fn mean_photons(&self) -> f64 {
        compensated_sum(self.probs.iter().enumerate().map(|(k, &p)| p * k as f64))
    }

    pub fn moment(&self, kappa: f64) -> Result<MomentValue> {
        if !(kappa > 0.0) {
            return Err(Error::Domain("moment order must be positive"));
        }
        let value = compensated_sum(
            self.probs
                .iter()
                .enumerate()
                .map(|(k, &p)| p * (k as f64 + 1.0).powf(kappa / 2.0)),
        );
        let next = self.probs.len() as f64 + 1.0;
        Ok(MomentValue { order: kappa, value, tail_bound: self.tail_mass * next.powf(kappa / 2.0) })
    }

    /// Covariance `diag(2⟨N⟩+1, 2⟨N⟩+1)`; phase invariance kills the rest.
    pub fn covariance(&self) -> DMatrix<f64> {
        let nu = 2.0 * self.mean_photons() + 1.0;
        DMatrix::from_diagonal_element(2, 2, nu)
    }

    pub fn von_neumann_entropy(&self) -> f64 {
        entropy_from_weights(self.probs.iter().copied())
    }

    /// Project onto photon number ≤ `n` and renormalize.
    pub fn truncate(&self, n: usize) -> Result<(Self, f64)> {
        let keep = n.min(self.cutoff());
        let kept_mass = compensated_sum(self.probs[..=keep].iter().copied());
        if kept_mass < 1e-300 {
            return Err(Error::ZeroMass);
        }
        let probs: Vec<f64> = self.probs[..=keep].iter().map(|p| p / kept_mass).collect();
        Ok((Self { probs, tail_mass: 0.0 }, kept_mass))
    }
}

/// `Σ p_k ln(p_k / q_k)` with explicit support checking.
pub fn relative_entropy_diagonal(p: &DiagonalState, q: &DiagonalState) -> Result<f64> {
    if p.probs.len() != q.probs.len() {
        return Err(Error::LengthMismatch(p.probs.len(), q.probs.len()));
    }
    relative_entropy_weights(&p.probs, q.probs.iter().map(|&v| v.ln()))
}

/// `Σ p_k (ln p_k − ln q_k)` where the reference enters through its
/// log-weights; the fast path for references whose raw weights underflow.
pub fn relative_entropy_weights(
    p: &[f64],
    ln_q: impl IntoIterator<Item = f64>,
) -> Result<f64> {
    let mut terms = Vec::with_capacity(p.len());
    for (k, (&pk, lq)) in p.iter().zip(ln_q).enumerate() {
        if pk <= 0.0 {
            continue;
        }
        if lq == f64::NEG_INFINITY {
            if pk > SUPPORT_P_TOL {
                return Err(Error::SupportViolation { index: k, p: pk, q: 0.0 });
            }
            continue;
        }
        if pk > ENTROPY_EIGEN_FLOOR {
            terms.push(pk * (pk.ln() - lq));
        }
    }
    Ok(compensated_sum(terms))
}

/// Schatten p-norm of a Hermitian operator (p = 1 via eigenvalues,
/// p = 2 entrywise; p = 2 accepts arbitrary complex matrices).
pub fn schatten_norm(op: &DMatrix<Complex64>, p: u8) -> Result<f64> {
    match p {
        2 => Ok(op.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()),
        1 => {
            let asym = max_asymmetry(op);
            if asym > 1e-9 {
                return Err(Error::NonHermitian(asym));
            }
            let (eigs, _) = hermitian_eigen(&symmetrize(op))?;
            Ok(compensated_sum(eigs.iter().map(|l| l.abs())))
        }
        _ => Err(Error::Domain("only p ∈ {1, 2} are supported")),
    }
}

/// Schatten p-norm of a diagonal operator given by its real diagonal.
pub fn schatten_norm_diagonal(diag: &[f64], p: u8) -> Result<f64> {
    match p {
        1 => Ok(compensated_sum(diag.iter().map(|d| d.abs()))),
        2 => Ok(diag.iter().map(|d| d * d).sum::<f64>().sqrt()),
        _ => Err(Error::Domain("only p ∈ {1, 2} are supported")),
    }
}

/// Single-mode displacement block `⟨j|D_z|k⟩` for `j, k ≤ K`, no
/// unitarity-defect check. Exact closed form:
/// `⟨j|D_z|k⟩ = √(k!/j!) z^{j−k} e^{−|z|²/2} L_k^{(j−k)}(|z|²)` for `j ≥ k`
/// and `⟨j|D_z|k⟩ = √(j!/k!) (−z̄)^{k−j} e^{−|z|²/2} L_j^{(k−j)}(|z|²)`
/// otherwise.
pub(crate) fn displacement_block(z: Complex64, k_max: usize) -> DMatrix<Complex64> {
    let u = z.norm_sqr();
    let dim = k_max + 1;
    let mut m = DMatrix::zeros(dim, dim);
    for d in 0..=k_max {
        let row = assoc_laguerre_weighted_row(u, d, k_max - d);
        let zu = if d == 0 { Complex64::new(1.0, 0.0) } else { z.powu(d as u32) };
        let zl = if d == 0 { Complex64::new(1.0, 0.0) } else { (-z.conj()).powu(d as u32) };
        for n in 0..=(k_max - d) {
            let ratio = (0.5 * (ln_factorial(n) - ln_factorial(n + d))).exp();
            let val = ratio * row[n];
            m[(n + d, n)] = zu * val;
            if d > 0 {
                m[(n, n + d)] = zl * val;
            }
        }
    }
    m
}

pub(crate) fn displacement_matrix_unchecked(
    z: &[Complex64],
    cutoff: &FockCutoff,
) -> Result<DMatrix<Complex64>> {
    let ks = match cutoff {
        FockCutoff::PerMode(ks) => ks.clone(),
        FockCutoff::TotalNumber { modes, max_total } => {
            if *modes == 1 {
                vec![*max_total]
            } else {
                return Err(Error::Domain(
                    "displacement over total-number bases is not supported; use a product basis",
                ));
            }
        }
    };
    if ks.len() != z.len() {
        return Err(Error::LengthMismatch(ks.len(), z.len()));
    }
    let mut out = displacement_block(z[0], ks[0]);
    for (zi, ki) in z.iter().zip(&ks).skip(1) {
        out = out.kronecker(&displacement_block(*zi, *ki));
    }
    Ok(out)
}

/// Displacement operator `D_z = ∏_j exp(z_j a_j† − z̄_j a_j)` on the
/// truncated space.
///
/// Matrix elements are exact closed forms, so truncation never corrupts
/// retained entries — it only loses the mass a displaced basis vector sends
/// past the cutoff. The upper half of each mode's ladder therefore serves
/// as a guard band: every column in the lower half (`k ≤ K_j/2`) must keep
/// norm ≥ 1 − 1e−8 at this `z`, else `CutoffTooSmall`. Callers keep their
/// states inside the lower half.
pub fn displacement_matrix(z: &[Complex64], cutoff: &FockCutoff) -> Result<DMatrix<Complex64>> {
    let ks = match cutoff {
        FockCutoff::PerMode(ks) => ks.clone(),
        FockCutoff::TotalNumber { modes: 1, max_total } => vec![*max_total],
        _ => {
            return Err(Error::Domain(
                "displacement over total-number bases is not supported; use a product basis",
            ))
        }
    };
    if ks.len() != z.len() {
        return Err(Error::LengthMismatch(ks.len(), z.len()));
    }
    let mut out: Option<DMatrix<Complex64>> = None;
    for (zi, ki) in z.iter().zip(&ks) {
        let block = displacement_block(*zi, *ki);
        let mut worst: f64 = 1.0;
        for c in 0..=(ki / 2) {
            let norm2: f64 = block.column(c).iter().map(|v| v.norm_sqr()).sum();
            worst = worst.min(norm2.sqrt());
        }
        if worst < 1.0 - 1e-8 {
            return Err(Error::CutoffTooSmall(format!(
                "displacement at |z| = {:.4} leaks mass {:.3e} from the lower half of a cutoff-{} ladder; raise the cutoff",
                zi.norm(),
                1.0 - worst,
                ki
            )));
        }
        out = Some(match out {
            None => block,
            Some(prev) => prev.kronecker(&block),
        });
    }
    out.ok_or(Error::Domain("empty displacement"))
}

impl State {
    pub fn moment(&self, kappa: f64) -> Result<MomentValue> {
        match self {
            State::Dense(r) => r.moment(kappa),
            State::Diagonal(d) => d.moment(kappa),
        }
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        match self {
            State::Dense(r) => r.covariance(),
            State::Diagonal(d) => d.covariance(),
        }
    }

    pub fn first_moments(&self) -> Vec<f64> {
        match self {
            State::Dense(r) => r.first_moments(),
            State::Diagonal(_) => vec![0.0, 0.0],
        }
    }

    pub fn von_neumann_entropy(&self) -> Result<f64> {
        match self {
            State::Dense(r) => r.von_neumann_entropy(),
            State::Diagonal(d) => Ok(d.von_neumann_entropy()),
        }
    }

    pub fn to_dense(&self) -> DensityOperator {
        match self {
            State::Dense(r) => r.clone(),
            State::Diagonal(d) => DensityOperator::from_diagonal(d),
        }
    }

    pub fn modes(&self) -> usize {
        match self {
            State::Dense(r) => r.modes(),
            State::Diagonal(_) => 1,
        }
    }
}

impl From<DensityOperator> for State {
    fn from(r: DensityOperator) -> Self {
        State::Dense(r)
    }
}

impl From<DiagonalState> for State {
    fn from(d: DiagonalState) -> Self {
        State::Diagonal(d)
    }
}

// ---------------------------------------------------------------------------
// Text formats (round-trip exactly through Display/parse of f64).
// ---------------------------------------------------------------------------

/// Serialize a dense operator: header `m K`, then `i j re im` per entry,
/// row-major. Requires a uniform per-mode cutoff.
pub fn write_dense(rho: &DensityOperator, w: &mut impl std::io::Write) -> Result<()> {
    let k = match rho.cutoff() {
        FockCutoff::PerMode(ks) if ks.windows(2).all(|p| p[0] == p[1]) => ks[0],
        FockCutoff::TotalNumber { modes: 1, max_total } => *max_total,
        _ => return Err(Error::Domain("only uniform product cutoffs serialize")),
    };
    writeln!(w, "{} {}", rho.modes(), k)?;
    let n = rho.dim();
    for i in 0..n {
        for j in 0..n {
            let v = rho.entries()[(i, j)];
            writeln!(w, "{} {} {} {}", i, j, v.re, v.im)?;
        }
    }
    Ok(())
}

pub fn read_dense(r: &mut impl std::io::BufRead) -> Result<DensityOperator> {
    let mut header = String::new();
    r.read_line(&mut header)?;
    let mut it = header.split_whitespace();
    let modes: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse("dense header: expected `m K`".into()))?;
    let k: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse("dense header: expected `m K`".into()))?;
    let cutoff = FockCutoff::PerMode(vec![k; modes]);
    let dim = cutoff.dimension();
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    let mut line = String::new();
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(Error::Parse(format!("dense entry line `{}`", line.trim())));
        }
        let i: usize = f[0].parse().map_err(|_| Error::Parse(format!("bad index `{}`", f[0])))?;
        let j: usize = f[1].parse().map_err(|_| Error::Parse(format!("bad index `{}`", f[1])))?;
        let re: f64 = f[2].parse().map_err(|_| Error::Parse(format!("bad value `{}`", f[2])))?;
        let im: f64 = f[3].parse().map_err(|_| Error::Parse(format!("bad value `{}`", f[3])))?;
        if i >= dim || j >= dim {
            return Err(Error::Parse(format!("index ({i},{j}) outside dimension {dim}")));
        }
        m[(i, j)] = Complex64::new(re, im);
    }
    let trace: f64 = (0..dim).map(|i| m[(i, i)].re).sum();
    let deficit = (1.0 - trace).max(0.0);
    DensityOperator::with_trace_deficit(m, modes, cutoff, deficit)
}

/// Serialize a diagonal state: header `K`, then `k p_k` per line.
pub fn write_diagonal(d: &DiagonalState, w: &mut impl std::io::Write) -> Result<()> {
    writeln!(w, "{}", d.cutoff())?;
    for (k, p) in d.probs().iter().enumerate() {
        writeln!(w, "{} {}", k, p)?;
    }
    Ok(())
}

pub fn read_diagonal(r: &mut impl std::io::BufRead) -> Result<DiagonalState> {
    let mut header = String::new();
    r.read_line(&mut header)?;
    let k: usize = header
        .trim()
        .parse()
        .map_err(|_| Error::Parse("diagonal header: expected `K`".into()))?;
    let mut probs = vec![0.0; k + 1];
    let mut line = String::new();
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 2 {
            return Err(Error::Parse(format!("diagonal entry line `{}`", line.trim())));
        }
        let idx: usize = f[0].parse().map_err(|_| Error::Parse(format!("bad index `{}`", f[0])))?;
        let p: f64 = f[1].parse().map_err(|_| Error::Parse(format!("bad value `{}`", f[1])))?;
        if idx > k {
            return Err(Error::Parse(format!("index {idx} outside cutoff {k}")));
        }
        probs[idx] = p;
    }
    let total = compensated_sum(probs.iter().copied());
    DiagonalState::new(probs, (1.0 - total).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cutoff_dimensions() {
        assert_eq!(FockCutoff::single(5).dimension(), 6);
        assert_eq!(FockCutoff::PerMode(vec![2, 3]).dimension(), 12);
        // |k| ≤ 3 over two modes: C(5, 2) = 10 multi-indices.
        assert_eq!(FockCutoff::TotalNumber { modes: 2, max_total: 3 }.dimension(), 10);
        assert_eq!(
            FockCutoff::TotalNumber { modes: 2, max_total: 3 }.indices().len(),
            10
        );
    }

    #[test]
    fn build_density_validates() {
        let id1 = DMatrix::from_row_slice(1, 1, &[c(1.0, 0.0)]);
        assert!(DensityOperator::build_density(id1, 1, FockCutoff::single(0)).is_ok());

        let mut bad = DMatrix::zeros(2, 2);
        bad[(0, 1)] = c(1.0, 0.0);
        bad[(0, 0)] = c(1.0, 0.0);
        match DensityOperator::build_density(bad, 1, FockCutoff::single(1)) {
            Err(Error::NonHermitian(_)) => {}
            other => panic!("expected NonHermitian, got {other:?}"),
        }
    }

    #[test]
    fn truncate_and_trace() {
        let vac = DensityOperator::vacuum(4);
        let (t, kept) = vac.truncate(0).unwrap();
        assert_eq!(t.dim(), 1);
        assert!((kept - 1.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_moment_examples() {
        let vac = DiagonalState::vacuum(4);
        assert!((vac.moment(2.0).unwrap().value - 1.0).abs() < 1e-15);
        let one = DiagonalState::fock(1, 4);
        assert!((one.moment(2.0).unwrap().value - 2.0).abs() < 1e-15);
    }

    #[test]
    fn covariance_of_number_states() {
        let vac = DensityOperator::vacuum(6);
        let g = vac.covariance();
        assert!((g[(0, 0)] - 1.0).abs() < 1e-12 && (g[(1, 1)] - 1.0).abs() < 1e-12);
        assert!(g[(0, 1)].abs() < 1e-12);
        let one = DensityOperator::number_state(1, 10);
        let g1 = one.covariance();
        assert!((g1[(0, 0)] - 3.0).abs() < 1e-12 && (g1[(1, 1)] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn displacement_is_unitary_within_headroom() {
        let z = [c(0.4, 0.3)];
        let d = displacement_matrix(&z, &FockCutoff::single(40)).unwrap();
        let prod = d.adjoint() * &d;
        for i in 0..20 {
            for j in 0..20 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - c(expect, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn displacement_diagonal_is_weighted_laguerre() {
        // ⟨1|D_z|1⟩ = e^{−u/2}(1 − u) vanishes at u = 1.
        let z = [c(1.0, 0.0)];
        let d = displacement_matrix(&z, &FockCutoff::single(60)).unwrap();
        assert!(d[(1, 1)].norm() < 1e-12);
        assert!((d[(0, 0)].re - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn center_handles_superposition() {
        // (|0⟩+|1⟩)/√2 has ⟨a⟩ = 1/2.
        let rho = DensityOperator::equal_superposition(0, 1, 40);
        let (centered, z) = rho.center().unwrap();
        assert!((z[0] - c(0.5, 0.0)).norm() < 1e-12);
        let d = centered.first_moments();
        assert!(d[0].abs() < 1e-8 && d[1].abs() < 1e-8);
    }

    #[test]
    fn schatten_examples() {
        let a = DensityOperator::number_state(0, 2);
        let b = DensityOperator::number_state(1, 2);
        let diff = a.entries() - b.entries();
        assert!((schatten_norm(&diff, 2).unwrap() - 2.0f64.sqrt()).abs() < 1e-12);
        assert!((schatten_norm(&diff, 1).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn relative_entropy_diag_example() {
        // D(diag(1/2,0,1/2) ∥ geometric q_k = 2^{−(k+1)}) = ln 2.
        let p = DiagonalState::new(vec![0.5, 0.0, 0.5], 0.0).unwrap();
        let probs: Vec<f64> = (0..3).map(|k| 0.5f64.powi(k + 1)).collect();
        let q = DiagonalState::new(probs, 0.125).unwrap();
        let d = relative_entropy_diagonal(&p, &q).unwrap();
        assert!((d - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn text_round_trip() {
        let rho = DensityOperator::equal_superposition(0, 3, 8);
        let mut buf = Vec::new();
        write_dense(&rho, &mut buf).unwrap();
        let back = read_dense(&mut std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(back.dim(), rho.dim());
        let diff = back.entries() - rho.entries();
        assert!(diff.iter().all(|v| v.norm() == 0.0));
    }
}
