//! Beam-splitter convolution of bosonic states: the pairwise mixing
//! ρ ⊞_η σ = tr₂(U_η (ρ⊗σ) U_η†), the inductive n-fold symmetric
//! convolution, a pointwise characteristic-function route built on
//! χ_{ρ^⊞n}(z) = χ_ρ(z/√n)ⁿ, and a brute tensor oracle that exponentiates
//! the two-mode generator sector by sector.
//!
//! The amplitude convention follows the Heisenberg action
//! U_η a₁ U_η† = √η a₁ − √(1−η) a₂,  U_η a₂ U_η† = √(1−η) a₁ + √η a₂,
//! so that A(1,1,0;η) = √η and A(0,1,0;η) = −√(1−η). Only |A|² enters any
//! diagonal or phase-invariant result; the opposite sign convention would
//! conjugate dense outputs by a parity flip on the discarded mode.
//!
//! Numerical range: the amplitude table is exact to ~1e−13 up to cutoff 32
//! for any η, but the underlying recurrence sheds ~2.5 bits per extra row,
//! so near-balanced tables become unreliable past cutoff ≈ 40. The
//! constructor's per-pair unitarity guard rejects such tables instead of
//! returning them; large-cutoff convolutions belong on the
//! characteristic-function route, which never forms the table.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::fock::{hermitian_eigen, DensityOperator, DiagonalState, FockCutoff, State};
use crate::phase_space::{
    char_fn_radial_diag, diagonal_from_radial_char, invert_char_with_tail, CharSamples, PhaseGrid,
    RadialInversion,
};
use crate::quad::{compensated_sum, ln_factorial, par_map};
use crate::{Error, Result};

/// Mass pushed past the cutoff by a single convolution beyond which the
/// result is rejected.
pub const CONVOLUTION_LEAK_TOL: f64 = 1e-9;

/// How an n-fold symmetric convolution is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvolutionRoute {
    /// Strict inductive sequence of diagonal kernel applications with
    /// η = 1 − 1/k at step k (Fock-diagonal states only).
    DiagonalInductive,
    /// Pointwise χ_ρ(z/√n)ⁿ followed by inversion.
    CharPower,
    /// Two-mode generator exponentiation and partial trace; n ≤ 3 and
    /// cutoff ≤ 12 only.
    TensorOracle,
}

/// ⟨j, k+l−j | U_η | k, l⟩ in closed form: a finite alternating binomial
/// sum in √η and √(1−η).
pub fn bs_amplitude(j: usize, k: usize, l: usize, eta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain("transmissivity must lie in [0, 1]"));
    }
    if j > k + l {
        return Err(Error::IndexOutOfSector { j, sector: k + l });
    }
    let ln_pref = 0.5 * (ln_factorial(j) + ln_factorial(k + l - j) - ln_factorial(k) - ln_factorial(l));
    let p_lo = j.saturating_sub(l);
    let p_hi = k.min(j);
    let mut acc = 0.0f64;
    for p in p_lo..=p_hi {
        // C(k, p) · C(l, j−p) via log-factorials, exact sign (−1)^{k−p}.
        let ln_binoms = ln_factorial(k) - ln_factorial(p) - ln_factorial(k - p) + ln_factorial(l)
            - ln_factorial(j - p)
            - ln_factorial(l - (j - p));
        let e_eta = 0.5 * (2 * p + l - j) as f64;
        let e_bar = 0.5 * (k + j - 2 * p) as f64;
        let mag = (ln_pref + ln_binoms).exp() * eta.powf(e_eta) * (1.0 - eta).powf(e_bar);
        let sign = if (k - p) % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * mag;
    }
    Ok(acc)
}

/// Precomputed amplitude table for all (k, l) up to a cutoff, with the
/// full output range j ∈ [0, k+l] so per-sector unitarity is checkable.
#[derive(Debug)]
pub struct BeamSplitterKernel {
    pub eta: f64,
    pub cutoff: usize,
    rows: Vec<Vec<f64>>,
}

impl BeamSplitterKernel {
    /// Builds the full table. Rows are generated by the creation-operator
    /// recurrence
    /// √(k+1) A(j, k+1, l) = √(ηj) A(j−1, k, l) − √((1−η)(k+l+1−j)) A(j, k, l),
    /// seeded at k = 0 by the sign-free closed form
    /// A(j, 0, l) = √C(l,j) η^{(l−j)/2} (1−η)^{j/2}. This evaluates the same
    /// amplitudes as [`bs_amplitude`] but stays accurate at large sectors,
    /// where the alternating sum cancels catastrophically; any residual
    /// degradation trips the per-pair unitarity check below.
    pub fn new(eta: f64, cutoff: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Domain("transmissivity must lie in [0, 1]"));
        }
        let ls: Vec<usize> = (0..=cutoff).collect();
        let per_l = par_map(&ls, move |&l| -> Result<Vec<Vec<f64>>> {
            let mut column = Vec::with_capacity(cutoff + 1);
            let mut prev: Vec<f64> = (0..=l)
                .map(|j| {
                    let ln_c = ln_factorial(l) - ln_factorial(j) - ln_factorial(l - j);
                    (0.5 * ln_c).exp()
                        * eta.powf(0.5 * (l - j) as f64)
                        * (1.0 - eta).powf(0.5 * j as f64)
                })
                .collect();
            column.push(prev.clone());
            for k in 0..cutoff {
                let s1 = k + l + 1;
                let mut next = vec![0.0f64; s1 + 1];
                let inv = 1.0 / ((k + 1) as f64).sqrt();
                for (j, slot) in next.iter_mut().enumerate() {
                    let up = if j > 0 { (eta * j as f64).sqrt() * prev[j - 1] } else { 0.0 };
                    let stay = if j < prev.len() {
                        ((1.0 - eta) * (s1 - j) as f64).sqrt() * prev[j]
                    } else {
                        0.0
                    };
                    *slot = (up - stay) * inv;
                }
                column.push(next.clone());
                prev = next;
            }
            for row in &column {
                let norm = compensated_sum(row.iter().map(|a| a * a));
                if (norm - 1.0).abs() > 1e-10 {
                    return Err(Error::CutoffTooSmall(format!(
                        "beam-splitter table at cutoff {cutoff} lost unitarity \
                         (η = {eta}); use a smaller table or the χ-power route"
                    )));
                }
            }
            Ok(column)
        });
        let mut by_l = Vec::with_capacity(cutoff + 1);
        for block in per_l {
            by_l.push(block?);
        }
        let mut rows = Vec::with_capacity((cutoff + 1) * (cutoff + 1));
        for k in 0..=cutoff {
            for column in &by_l {
                rows.push(column[k].clone());
            }
        }
        Ok(Self { eta, cutoff, rows })
    }

    #[inline]
    pub fn amplitude(&self, j: usize, k: usize, l: usize) -> f64 {
        let row = &self.rows[k * (self.cutoff + 1) + l];
        if j < row.len() {
            row[j]
        } else {
            0.0
        }
    }

    #[inline]
    pub fn row(&self, k: usize, l: usize) -> &[f64] {
        &self.rows[k * (self.cutoff + 1) + l]
    }
}

fn kernel_cache() -> &'static Mutex<HashMap<(u64, usize), Arc<BeamSplitterKernel>>> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, usize), Arc<BeamSplitterKernel>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Kernel table shared per (η, cutoff) across the whole process.
pub fn cached_kernel(eta: f64, cutoff: usize) -> Result<Arc<BeamSplitterKernel>> {
    let key = (eta.to_bits(), cutoff);
    if let Some(k) = kernel_cache().lock().unwrap().get(&key) {
        return Ok(Arc::clone(k));
    }
    let built = Arc::new(BeamSplitterKernel::new(eta, cutoff)?);
    let mut map = kernel_cache().lock().unwrap();
    Ok(Arc::clone(map.entry(key).or_insert(built)))
}

/// Diagonal pairwise convolution r_j = Σ_{k,l} p_k q_l A(j,k,l;η)².
pub fn convolve_diag(
    p: &DiagonalState,
    q: &DiagonalState,
    eta: f64,
) -> Result<DiagonalState> {
    let k_out = p.cutoff().max(q.cutoff());
    let kernel = cached_kernel(eta, k_out)?;
    convolve_diag_with(p, q, &kernel)
}

/// Same as [`convolve_diag`] with an explicit kernel (must cover both
/// cutoffs).
pub fn convolve_diag_with(
    p: &DiagonalState,
    q: &DiagonalState,
    kernel: &BeamSplitterKernel,
) -> Result<DiagonalState> {
    let k_out = p.cutoff().max(q.cutoff());
    if kernel.cutoff < k_out {
        return Err(Error::CutoffTooSmall("kernel table smaller than the state cutoffs".into()));
    }
    let mut out = vec![0.0f64; k_out + 1];
    let mut represented = 0.0f64;
    for (k, &pk) in p.probs().iter().enumerate() {
        if pk == 0.0 {
            continue;
        }
        for (l, &ql) in q.probs().iter().enumerate() {
            if ql == 0.0 {
                continue;
            }
            let w = pk * ql;
            represented += w;
            let row = kernel.row(k, l);
            for (j, a) in row.iter().enumerate().take(k_out + 1) {
                out[j] += w * a * a;
            }
        }
    }
    let kept = compensated_sum(out.iter().copied());
    let leaked = (represented - kept).max(0.0);
    if leaked > CONVOLUTION_LEAK_TOL {
        return Err(Error::CutoffTooSmall(format!(
            "convolution pushed mass {leaked:.3e} past the cutoff {k_out}"
        )));
    }
    DiagonalState::new(out, (1.0 - kept).max(0.0))
}

/// Dense pairwise convolution over a single mode:
/// out_{j,j'} = Σ ρ_{kk'} σ_{ll'} A(j,k,l) A(j',k',l') over indices with
/// k+l−j = k'+l'−j' (the discarded mode's occupation).
pub fn convolve_dense(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    eta: f64,
) -> Result<DensityOperator> {
    if rho.modes() != 1 || sigma.modes() != 1 {
        return Err(Error::Domain("dense convolution is single-mode"));
    }
    let k_out = (rho.dim() - 1).max(sigma.dim() - 1);
    let kernel = cached_kernel(eta, k_out)?;
    let kp = rho.dim() - 1;
    let kq = sigma.dim() - 1;
    let mut out = DMatrix::<Complex64>::zeros(k_out + 1, k_out + 1);
    for k in 0..=kp {
        for kk in 0..=kp {
            for l in 0..=kq {
                let w1 = rho.entries()[(k, kk)];
                if w1.norm_sqr() == 0.0 {
                    continue;
                }
                let row = kernel.row(k, l);
                for ll in 0..=kq {
                    let w = w1 * sigma.entries()[(l, ll)];
                    if w.norm_sqr() == 0.0 {
                        continue;
                    }
                    let row2 = kernel.row(kk, ll);
                    // Shared discarded-mode index t = k+l−j = k'+l'−j'.
                    let s1 = k + l;
                    let s2 = kk + ll;
                    let t_hi = s1.min(s2);
                    for t in 0..=t_hi {
                        let j = s1 - t;
                        let j2 = s2 - t;
                        if j > k_out || j2 > k_out {
                            continue;
                        }
                        out[(j, j2)] += w * row[j] * row2[j2];
                    }
                }
            }
        }
    }
    let represented = rho.trace() * sigma.trace();
    let kept: f64 = (0..=k_out).map(|i| out[(i, i)].re).sum();
    let leaked = (represented - kept).max(0.0);
    if leaked > CONVOLUTION_LEAK_TOL {
        return Err(Error::CutoffTooSmall(format!(
            "convolution pushed mass {leaked:.3e} past the cutoff {k_out}"
        )));
    }
    Ok(DensityOperator::trusted(
        out,
        1,
        FockCutoff::single(k_out),
        (1.0 - kept).max(0.0),
    ))
}

/// ρ ⊞_η σ in whichever representation both inputs admit.
pub fn convolve_pair(a: &State, b: &State, eta: f64) -> Result<State> {
    match (a, b) {
        (State::Diagonal(p), State::Diagonal(q)) => Ok(State::Diagonal(convolve_diag(p, q, eta)?)),
        _ => {
            let rho = a.to_dense();
            let sigma = b.to_dense();
            Ok(State::Dense(convolve_dense(&rho, &sigma, eta)?))
        }
    }
}

/// Strict inductive n-fold symmetric convolution of a diagonal state:
/// step k mixes the running state with a fresh copy at η = 1 − 1/k.
/// The per-step kernels are built ephemerally (each η occurs once, so
/// going through the shared cache would pin ~n tables in memory).
pub fn nfold_inductive_diag(d: &DiagonalState, n: usize) -> Result<DiagonalState> {
    if n == 0 {
        return Err(Error::Domain("the symmetric convolution needs n ≥ 1"));
    }
    let mut acc = d.clone();
    for step in 2..=n {
        let eta = 1.0 - 1.0 / step as f64;
        let kernel = BeamSplitterKernel::new(eta, acc.cutoff().max(d.cutoff()))?;
        acc = convolve_diag_with(&acc, d, &kernel)?;
    }
    Ok(acc)
}

/// n-fold symmetric convolution of a diagonal state for n a power of two,
/// via repeated balanced self-convolution (ρ^⊞2m = ρ^⊞m ⊞_{1/2} ρ^⊞m).
pub fn nfold_doubling_diag(d: &DiagonalState, n: usize) -> Result<DiagonalState> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Domain("doubling route needs n to be a power of two"));
    }
    let mut acc = d.clone();
    let mut m = 1usize;
    while m < n {
        acc = convolve_diag(&acc, &acc, 0.5)?;
        m *= 2;
    }
    Ok(acc)
}

/// χ-route n-fold convolution of a diagonal state: invert
/// χ(r/√n)ⁿ on a radial rule at the input cutoff.
pub fn nfold_char_diag(d: &DiagonalState, n: usize, radius: f64) -> Result<RadialInversion> {
    if n == 0 {
        return Err(Error::Domain("the symmetric convolution needs n ≥ 1"));
    }
    let probs = d.probs().to_vec();
    let sqrt_n = (n as f64).sqrt();
    diagonal_from_radial_char(
        move |r| char_fn_radial_diag(&probs, r / sqrt_n).powi(n as i32),
        d.cutoff(),
        radius,
    )
}

/// χ-route n-fold convolution of a dense single-mode state: sample
/// χ_ρ(z/√n)ⁿ on a Cartesian grid and invert. `tail_tol` is forwarded to
/// the inversion's boundary-decay guard (the pointwise power suppresses
/// the boundary like |χ|ⁿ, but slowly for small n — the caller owns that
/// truncation-error budget).
pub fn nfold_char_dense(
    rho: &DensityOperator,
    n: usize,
    radius: f64,
    step: f64,
    tail_tol: f64,
) -> Result<DensityOperator> {
    if n == 0 {
        return Err(Error::Domain("the symmetric convolution needs n ≥ 1"));
    }
    if rho.modes() != 1 {
        return Err(Error::Domain("the χ-power route is single-mode"));
    }
    let grid = PhaseGrid::cartesian(radius, step)?;
    let nodes = grid.nodes();
    let entries = rho.entries().clone();
    let cutoff = rho.cutoff().clone();
    let sqrt_n = (n as f64).sqrt();
    let vals = par_map(&nodes, move |z| {
        crate::phase_space::char_fn_op(&entries, &cutoff, &[*z / sqrt_n]).map(|v| v.powu(n as u32))
    });
    let mut values = Vec::with_capacity(vals.len());
    for v in vals {
        values.push(v?);
    }
    let samples = CharSamples { grid, nodes, values };
    invert_char_with_tail(&samples, rho.dim() - 1, tail_tol)
}

// ---------------------------------------------------------------------------
// Tensor oracle: exponentiate θ(a₁†a₂ − a₁a₂†), θ = arccos(√η), on each
// total-photon sector and trace out mode 2. Exact for states supported on
// total photon number ≤ 2K, independent of the closed-form amplitudes.
// ---------------------------------------------------------------------------

const ORACLE_MAX_CUTOFF: usize = 12;
const ORACLE_MAX_N: usize = 3;

fn sector_unitaries(theta: f64, s_max: usize) -> Result<Vec<DMatrix<Complex64>>> {
    let mut out = Vec::with_capacity(s_max + 1);
    for s in 0..=s_max {
        let dim = s + 1; // basis (k, s−k), k = 0..=s
        let mut h = DMatrix::<Complex64>::zeros(dim, dim);
        for k in 0..s {
            // a₁†a₂ |k, s−k⟩ = √((k+1)(s−k)) |k+1, s−k−1⟩; the generator
            // G = θ(a₁†a₂ − a₁a₂†) is anti-Hermitian, H = −iG Hermitian.
            let g = theta * (((k + 1) * (s - k)) as f64).sqrt();
            h[(k + 1, k)] = Complex64::new(0.0, -g);
            h[(k, k + 1)] = Complex64::new(0.0, g);
        }
        let (eigs, vecs) = hermitian_eigen(&h)?;
        let mut phases = DMatrix::<Complex64>::zeros(dim, dim);
        for (i, &l) in eigs.iter().enumerate() {
            phases[(i, i)] = Complex64::new(0.0, l).exp();
        }
        out.push(&vecs * phases * vecs.adjoint());
    }
    Ok(out)
}

/// Brute-force ρ ⊞_η σ through the two-mode unitary. The output lives at
/// cutoff K_ρ + K_σ (photon conservation makes this exact — no leak).
pub fn tensor_oracle_pair(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    eta: f64,
) -> Result<DensityOperator> {
    if rho.modes() != 1 || sigma.modes() != 1 {
        return Err(Error::Domain("the tensor oracle is single-mode"));
    }
    let kp = rho.dim() - 1;
    let kq = sigma.dim() - 1;
    if kp.max(kq) > 2 * ORACLE_MAX_CUTOFF {
        return Err(Error::RouteUnavailable(format!(
            "tensor oracle capped at cutoff {ORACLE_MAX_CUTOFF} per input (got {kp}, {kq})"
        )));
    }
    let s_max = kp + kq;
    let theta = eta.sqrt().min(1.0).acos();
    let us = sector_unitaries(theta, s_max)?;
    // Two-mode blocks M_{s,s'} over sector bases (k, s−k); entries exist
    // only when k ≤ K_ρ and s−k ≤ K_σ.
    let in_basis = |s: usize, k: usize| -> Option<(usize, usize)> {
        let l = s - k;
        (k <= kp && l <= kq).then_some((k, l))
    };
    let mut out = DMatrix::<Complex64>::zeros(s_max + 1, s_max + 1);
    for s in 0..=s_max {
        for sp in 0..=s_max {
            // Assemble M_{s,s'} = ρ_{k k'} σ_{s−k, s'−k'}.
            let mut block = DMatrix::<Complex64>::zeros(s + 1, sp + 1);
            let mut any = false;
            for k in 0..=s {
                let Some((k1, l1)) = in_basis(s, k) else { continue };
                for k2 in 0..=sp {
                    let Some((k1p, l1p)) = in_basis(sp, k2) else { continue };
                    let v = rho.entries()[(k1, k1p)] * sigma.entries()[(l1, l1p)];
                    if v.norm_sqr() != 0.0 {
                        block[(k, k2)] = v;
                        any = true;
                    }
                }
            }
            if !any {
                continue;
            }
            let conj = &us[s] * block * us[sp].adjoint();
            // Partial trace over mode 2: ⟨j, t | · | j', t⟩ with
            // j = s − t, j' = s' − t.
            let t_hi = s.min(sp);
            for t in 0..=t_hi {
                let j = s - t;
                let j2 = sp - t;
                out[(j, j2)] += conj[(j, j2)];
            }
        }
    }
    let kept: f64 = (0..=s_max).map(|i| out[(i, i)].re).sum();
    Ok(DensityOperator::trusted(
        out,
        1,
        FockCutoff::single(s_max),
        (1.0 - kept).max(0.0),
    ))
}

/// Inductive n-fold convolution through the tensor oracle (n ≤ 3,
/// cutoff ≤ 12).
pub fn tensor_oracle_nfold(rho: &DensityOperator, n: usize) -> Result<DensityOperator> {
    if n == 0 || n > ORACLE_MAX_N {
        return Err(Error::RouteUnavailable(format!(
            "tensor oracle capped at n ≤ {ORACLE_MAX_N}"
        )));
    }
    if rho.dim() - 1 > ORACLE_MAX_CUTOFF {
        return Err(Error::RouteUnavailable(format!(
            "tensor oracle capped at cutoff {ORACLE_MAX_CUTOFF}"
        )));
    }
    let mut acc = rho.clone();
    for step in 2..=n {
        let eta = 1.0 - 1.0 / step as f64;
        acc = tensor_oracle_pair(&acc, rho, eta)?;
    }
    Ok(acc)
}

/// n-fold symmetric convolution by the requested route; n = 1 returns the
/// input unchanged.
pub fn nfold_symmetric(state: &State, n: usize, route: ConvolutionRoute) -> Result<State> {
    if n == 0 {
        return Err(Error::Domain("the symmetric convolution needs n ≥ 1"));
    }
    if n == 1 {
        return Ok(state.clone());
    }
    match route {
        ConvolutionRoute::DiagonalInductive => match state {
            State::Diagonal(d) => Ok(State::Diagonal(nfold_inductive_diag(d, n)?)),
            State::Dense(_) => Err(Error::RouteUnavailable(
                "the inductive diagonal route needs a Fock-diagonal state".into(),
            )),
        },
        ConvolutionRoute::CharPower => match state {
            State::Diagonal(d) => Ok(State::Diagonal(nfold_char_diag(d, n, 8.0)?.state)),
            State::Dense(rho) => {
                Ok(State::Dense(nfold_char_dense(rho, n, 8.0, 0.05, 1e-4)?))
            }
        },
        ConvolutionRoute::TensorOracle => {
            let dense = state.to_dense();
            Ok(State::Dense(tensor_oracle_nfold(&dense, n)?))
        }
    }
}
