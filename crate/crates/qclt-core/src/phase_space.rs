//! Phase-space transforms over a truncated Fock space: characteristic
//! functions χ_T(z) = tr(T D_z), Wigner functions, the Plancherel identity
//! ∥T∥₂² = (1/π^m)∫|χ_T|² d^{2m}z, a trace-norm upper bound through the
//! ladder-compressed characteristic function, and inversion from sampled
//! χ back to Fock matrices.
//!
//! Grids come in two shapes. A Cartesian grid is the square lattice
//! {(ah, bh) : |ah|, |bh| ≤ R} used for states with phase structure; a
//! radial grid carries Gauss–Legendre panels in r with weights absorbing
//! the Jacobian 2r, so that ∫f(|z|) d²z = π · Σᵢ wᵢ f(rᵢ). Radial rules
//! place `max(64, ⌈2.6√K⌉)` nodes per unit radius: the integrands
//! ℓ_k(r²) oscillate with frequency 2√k per unit r, so the density must
//! scale with √K to keep ~8 nodes per cycle (a flat 64 per unit would
//! under-resolve beyond K ≈ 600).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::fock::{
    displacement_block, displacement_matrix_unchecked, DensityOperator, DiagonalState, FockCutoff,
    State,
};
use crate::quad::{compensated_sum, laguerre_weighted_row, par_map, radial_rule, RadialRule};
use crate::{Error, Result};

/// Discretization of the d²z integrals (single mode).
#[derive(Clone, Debug)]
pub enum PhaseGrid {
    /// Square lattice with spacing `step` covering `[−radius, radius]²`;
    /// `radius/step` must be integral.
    Cartesian { radius: f64, step: f64 },
    /// Gauss–Legendre panels in the radius for phase-invariant integrands.
    Radial(RadialRule),
}

/// χ_T sampled on a grid, with the node list aligned to the values.
#[derive(Clone, Debug)]
pub struct CharSamples {
    pub grid: PhaseGrid,
    pub nodes: Vec<Complex64>,
    pub values: Vec<Complex64>,
}

/// Outcome of a radial inversion: the recovered diagonal plus what was
/// clipped (tiny quadrature negatives in `[−1e−9, 0)` are zeroed).
#[derive(Clone, Debug)]
pub struct RadialInversion {
    pub state: DiagonalState,
    pub clipped_mass: f64,
    pub clipped_count: usize,
}

/// Node density per unit radius used by every radial rule in this module.
pub fn radial_nodes_per_unit(k_max: usize) -> usize {
    64usize.max((2.6 * (k_max as f64).sqrt()).ceil() as usize)
}

/// Default radial rule for integrands built from ℓ_k with k ≤ K times a
/// factor decaying at least like a vacuum Gaussian.
pub fn default_radial_rule(k_max: usize, radius: f64) -> RadialRule {
    radial_rule(radius, radial_nodes_per_unit(k_max))
}

impl PhaseGrid {
    pub fn cartesian(radius: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(radius > 0.0) {
            return Err(Error::Domain("grid radius and step must be positive"));
        }
        let ratio = radius / step;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::Domain("radius/step must be integral"));
        }
        Ok(PhaseGrid::Cartesian { radius, step })
    }

    /// All nodes in deterministic row-major order (Cartesian) or radial
    /// order (ascending r).
    pub fn nodes(&self) -> Vec<Complex64> {
        match self {
            PhaseGrid::Cartesian { radius, step } => {
                let n = (radius / step).round() as i64;
                let mut out = Vec::with_capacity(((2 * n + 1) * (2 * n + 1)) as usize);
                for iy in -n..=n {
                    for ix in -n..=n {
                        out.push(Complex64::new(ix as f64 * step, iy as f64 * step));
                    }
                }
                out
            }
            PhaseGrid::Radial(rule) => {
                rule.nodes.iter().map(|&r| Complex64::new(r, 0.0)).collect()
            }
        }
    }
}

/// χ_T(z) = tr(T D_z) for a raw single- or multi-mode matrix over a
/// product basis.
pub fn char_fn_op(
    op: &DMatrix<Complex64>,
    cutoff: &FockCutoff,
    z: &[Complex64],
) -> Result<Complex64> {
    let d = displacement_matrix_unchecked(z, cutoff)?;
    if d.nrows() != op.nrows() {
        return Err(Error::LengthMismatch(op.nrows(), d.nrows()));
    }
    let n = op.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += op[(i, j)] * d[(j, i)];
        }
    }
    Ok(acc)
}

/// Radial characteristic function of a Fock-diagonal state:
/// χ(r) = Σ_k p_k e^{−r²/2} L_k(r²).
pub fn char_fn_radial_diag(probs: &[f64], r: f64) -> f64 {
    let row = laguerre_weighted_row(r * r, probs.len() - 1);
    compensated_sum(probs.iter().zip(&row).map(|(p, l)| p * l))
}

/// χ_ρ(z) for a state in either representation (single mode for the
/// diagonal path).
pub fn char_fn(state: &State, z: &[Complex64]) -> Result<Complex64> {
    match state {
        State::Dense(rho) => char_fn_op(rho.entries(), rho.cutoff(), z),
        State::Diagonal(d) => {
            if z.len() != 1 {
                return Err(Error::LengthMismatch(z.len(), 1));
            }
            Ok(Complex64::new(char_fn_radial_diag(d.probs(), z[0].norm()), 0.0))
        }
    }
}

/// Sample χ_ρ over a grid, enforcing the sample invariants:
/// χ(0) = tr within 1e−10, and χ(−z) = conj χ(z) on Cartesian grids.
pub fn sample_char(state: &State, grid: &PhaseGrid) -> Result<CharSamples> {
    if let (PhaseGrid::Radial(_), State::Dense(_)) = (grid, state) {
        // A dense state may carry phase structure a radial grid cannot see.
        return Err(Error::Domain("radial sampling requires a Fock-diagonal state"));
    }
    let nodes = grid.nodes();
    let values: Vec<Complex64> = match state {
        State::Diagonal(d) => {
            let probs = d.probs().to_vec();
            par_map(&nodes, move |z| {
                Complex64::new(char_fn_radial_diag(&probs, z.norm()), 0.0)
            })
        }
        State::Dense(rho) => {
            let entries = rho.entries().clone();
            let cutoff = rho.cutoff().clone();
            let vals =
                par_map(&nodes, move |z| char_fn_op(&entries, &cutoff, &[*z]));
            let mut out = Vec::with_capacity(vals.len());
            for v in vals {
                out.push(v?);
            }
            out
        }
    };
    let samples = CharSamples { grid: grid.clone(), nodes, values };
    validate_samples(state, &samples)?;
    Ok(samples)
}

fn validate_samples(state: &State, samples: &CharSamples) -> Result<()> {
    if let PhaseGrid::Cartesian { radius, step } = &samples.grid {
        let n = (radius / step).round() as i64;
        let side = (2 * n + 1) as usize;
        let origin = (n as usize) * side + n as usize;
        let trace = match state {
            State::Dense(r) => r.trace(),
            State::Diagonal(d) => compensated_sum(d.probs().iter().copied()),
        };
        if (samples.values[origin] - Complex64::new(trace, 0.0)).norm() > 1e-10 {
            return Err(Error::Domain("characteristic sample at 0 differs from the trace"));
        }
        // χ(−z) = conj χ(z): node (ix, iy) pairs with (−ix, −iy), which is
        // the reversed index in row-major order.
        let total = samples.values.len();
        let mut worst = 0.0f64;
        for i in 0..total {
            let v = samples.values[i];
            let w = samples.values[total - 1 - i];
            worst = worst.max((v - w.conj()).norm());
        }
        if worst > 1e-10 {
            return Err(Error::Domain("characteristic samples break conjugate symmetry"));
        }
    }
    Ok(())
}

/// Write m = 1 samples as CSV (`re_z,im_z,re_chi,im_chi`, or `r,chi` for
/// radial grids).
pub fn write_char_csv(samples: &CharSamples, w: &mut impl std::io::Write) -> Result<()> {
    match &samples.grid {
        PhaseGrid::Cartesian { .. } => {
            writeln!(w, "re_z,im_z,re_chi,im_chi")?;
            for (z, v) in samples.nodes.iter().zip(&samples.values) {
                writeln!(w, "{},{},{},{}", z.re, z.im, v.re, v.im)?;
            }
        }
        PhaseGrid::Radial(_) => {
            writeln!(w, "r,chi")?;
            for (z, v) in samples.nodes.iter().zip(&samples.values) {
                writeln!(w, "{},{}", z.re, v.re)?;
            }
        }
    }
    Ok(())
}

/// ∫|χ|² d²z over the grid (single mode).
fn char_square_integral(samples: &CharSamples) -> f64 {
    match &samples.grid {
        PhaseGrid::Cartesian { step, .. } => {
            step * step * compensated_sum(samples.values.iter().map(|v| v.norm_sqr()))
        }
        PhaseGrid::Radial(rule) => {
            std::f64::consts::PI
                * compensated_sum(
                    rule.weights
                        .iter()
                        .zip(&samples.values)
                        .map(|(w, v)| w * v.norm_sqr()),
                )
        }
    }
}

/// Relative Plancherel defect |∥T∥₂² − (1/π)∫|χ_T|²| / max(∥T∥₂², 1e−30)
/// for a Hermitian single-mode operator.
pub fn plancherel_residual(op: &DMatrix<Complex64>, grid: &PhaseGrid) -> Result<f64> {
    let hs2: f64 = op.iter().map(|v| v.norm_sqr()).sum();
    let dim = op.nrows();
    let diag: Option<Vec<f64>> = {
        let mut off = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                if i != j {
                    off = off.max(op[(i, j)].norm());
                }
            }
        }
        if off <= 1e-14 {
            Some((0..dim).map(|i| op[(i, i)].re).collect())
        } else {
            None
        }
    };
    let nodes = grid.nodes();
    let values: Vec<Complex64> = match &diag {
        Some(d) => {
            let d = d.clone();
            par_map(&nodes, move |z| {
                let row = laguerre_weighted_row(z.norm_sqr(), d.len() - 1);
                Complex64::new(
                    compensated_sum(d.iter().zip(&row).map(|(p, l)| p * l)),
                    0.0,
                )
            })
        }
        None => {
            if matches!(grid, PhaseGrid::Radial(_)) {
                return Err(Error::Domain("radial Plancherel requires a diagonal operator"));
            }
            let op = op.clone();
            let cutoff = FockCutoff::single(dim - 1);
            let vals = par_map(&nodes, move |z| char_fn_op(&op, &cutoff, &[*z]));
            let mut out = Vec::with_capacity(vals.len());
            for v in vals {
                out.push(v?);
            }
            out
        }
    };
    let samples = CharSamples { grid: grid.clone(), nodes, values };
    let integral = char_square_integral(&samples) / std::f64::consts::PI;
    Ok((hs2 - integral).abs() / hs2.max(1e-30))
}

/// Plancherel defect of a diagonal state over a radial rule.
pub fn plancherel_residual_diag(probs: &[f64], rule: &RadialRule) -> f64 {
    let hs2: f64 = probs.iter().map(|p| p * p).sum();
    let vals = par_map(&rule.nodes, {
        let probs = probs.to_vec();
        move |r| char_fn_radial_diag(&probs, *r)
    });
    let integral = compensated_sum(rule.weights.iter().zip(&vals).map(|(w, v)| w * v * v));
    (hs2 - integral).abs() / hs2.max(1e-30)
}

/// Wigner function W_T(z) = (1/π²)∫χ_T(w) e^{zw̄−z̄w} d²w from Cartesian
/// samples; errors when the imaginary residue betrays a non-Hermitian T or
/// an unconverged grid.
pub fn wigner_fn(samples: &CharSamples, z: Complex64) -> Result<f64> {
    let step = match &samples.grid {
        PhaseGrid::Cartesian { step, .. } => *step,
        PhaseGrid::Radial(_) => {
            return Err(Error::Domain("the Wigner transform needs Cartesian samples"))
        }
    };
    let mut acc = Complex64::new(0.0, 0.0);
    for (w, v) in samples.nodes.iter().zip(&samples.values) {
        // zw̄ − z̄w = 2i(Im w · Re z ... ) — explicitly 2i(y·u − x·v)
        // with z = x + iy, w = u + iv.
        let phase = 2.0 * (z.im * w.re - z.re * w.im);
        acc += v * Complex64::new(phase.cos(), phase.sin());
    }
    let scale = step * step / (std::f64::consts::PI * std::f64::consts::PI);
    let val = acc * scale;
    if val.im.abs() > 1e-8 {
        return Err(Error::GridTooCoarse(format!(
            "Wigner imaginary residue {:.3e}",
            val.im
        )));
    }
    Ok(val.re)
}

/// ∫W over the grid box, via the closed-form lattice kernel
/// ∫_{[−R,R]²} e^{zw̄−z̄w} d²z = (sin 2Ru / u)(sin 2Rv / v); drift from 1
/// beyond 1e−4 means the grid is too coarse for this state.
pub fn wigner_normalization(samples: &CharSamples) -> Result<f64> {
    let (radius, step) = match &samples.grid {
        PhaseGrid::Cartesian { radius, step } => (*radius, *step),
        PhaseGrid::Radial(_) => {
            return Err(Error::Domain("the Wigner transform needs Cartesian samples"))
        }
    };
    let sinc = |t: f64| {
        if t.abs() < 1e-12 {
            2.0 * radius
        } else {
            (2.0 * radius * t).sin() / t
        }
    };
    let mut acc = Complex64::new(0.0, 0.0);
    for (w, v) in samples.nodes.iter().zip(&samples.values) {
        acc += v * sinc(w.re) * sinc(w.im);
    }
    let val = acc * (step * step / (std::f64::consts::PI * std::f64::consts::PI));
    Ok(val.re)
}

/// Minimum of W over a centered square scan, after checking the
/// normalization drift (> 1e−4 → GridTooCoarse).
pub fn wigner_min_on_grid(
    samples: &CharSamples,
    scan_radius: f64,
    scan_step: f64,
) -> Result<f64> {
    let norm = wigner_normalization(samples)?;
    if (norm - 1.0).abs() > 1e-4 {
        return Err(Error::GridTooCoarse(format!(
            "Wigner normalization drifted to {norm:.8}"
        )));
    }
    let n = (scan_radius / scan_step).round() as i64;
    let points: Vec<Complex64> = (-n..=n)
        .flat_map(|iy| {
            (-n..=n).map(move |ix| Complex64::new(ix as f64 * scan_step, iy as f64 * scan_step))
        })
        .collect();
    let vals = par_map(&points, {
        let samples = samples.clone();
        move |z| wigner_fn(&samples, *z)
    });
    let mut min = f64::INFINITY;
    for v in vals {
        min = min.min(v?);
    }
    Ok(min)
}

/// Upper bound on ∥T∥₁ through the ladder-compressed characteristic
/// function: √((π²/6) ∫|χ_{a†Ta}|² d²z) dominates the trace norm
/// (single mode).
///
/// The compression (a†Ta)_{jk} = √(jk) T_{j−1,k−1} shifts mass upward, so
/// T must leave its top level essentially empty; otherwise the shifted
/// operator does not fit the cutoff.
pub fn trace_norm_upper(op: &DMatrix<Complex64>) -> Result<f64> {
    let dim = op.nrows();
    if dim != op.ncols() || dim == 0 {
        return Err(Error::Domain("square matrix required"));
    }
    let hs: f64 = op.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let top = (0..dim)
        .map(|i| op[(i, dim - 1)].norm().max(op[(dim - 1, i)].norm()))
        .fold(0.0f64, f64::max);
    if top > 1e-9 * hs.max(1e-30) {
        return Err(Error::CutoffTooSmall(format!(
            "top-level mass {top:.3e} would be pushed past the cutoff by the ladder compression"
        )));
    }
    let mut shifted = DMatrix::<Complex64>::zeros(dim, dim);
    for j in 1..dim {
        for k in 1..dim {
            shifted[(j, k)] = ((j * k) as f64).sqrt() * op[(j - 1, k - 1)];
        }
    }
    let k_max = dim - 1;
    let radius = 8.0 + 2.0 * (k_max as f64).sqrt();
    let mut off = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            if i != j {
                off = off.max(shifted[(i, j)].norm());
            }
        }
    }
    let integral = if off <= 1e-14 {
        let rule = default_radial_rule(k_max, radius);
        let diag: Vec<f64> = (0..dim).map(|i| shifted[(i, i)].re).collect();
        let vals = par_map(&rule.nodes, move |r| char_fn_radial_diag(&diag, *r));
        std::f64::consts::PI
            * compensated_sum(rule.weights.iter().zip(&vals).map(|(w, v)| w * v * v))
    } else {
        let step = (std::f64::consts::PI / (5.0 * ((k_max + 1) as f64).sqrt())).min(0.05);
        let step = radius / (radius / step).ceil();
        let grid = PhaseGrid::cartesian(radius, step)?;
        let nodes = grid.nodes();
        let cutoff = FockCutoff::single(k_max);
        let shifted = shifted.clone();
        let vals = par_map(&nodes, move |z| char_fn_op(&shifted, &cutoff, &[*z]));
        let mut acc = Vec::with_capacity(vals.len());
        for v in vals {
            acc.push(v?.norm_sqr());
        }
        step * step * compensated_sum(acc)
    };
    Ok((std::f64::consts::PI * std::f64::consts::PI / 6.0 * integral).max(0.0).sqrt())
}

/// Recover a single-mode operator from Cartesian samples via
/// T = (1/π)∫χ(w) D_{−w} d²w.
///
/// Guards: the lattice must resolve the cutoff (h ≤ π/(4√K)) and the
/// samples must have decayed at the boundary. The strict boundary
/// threshold is 1e−10, matching the 1e−6 round-trip guarantee; callers
/// who have analyzed their truncation error can pass a looser threshold
/// through [`invert_char_with_tail`].
pub fn invert_char(samples: &CharSamples, k_max: usize) -> Result<DensityOperator> {
    invert_char_with_tail(samples, k_max, 1e-10)
}

pub fn invert_char_with_tail(
    samples: &CharSamples,
    k_max: usize,
    tail_tol: f64,
) -> Result<DensityOperator> {
    let (radius, step) = match &samples.grid {
        PhaseGrid::Cartesian { radius, step } => (*radius, *step),
        PhaseGrid::Radial(_) => {
            return Err(Error::Domain(
                "inversion from radial samples goes through diagonal_from_radial_char",
            ))
        }
    };
    let nyquist = std::f64::consts::PI / (4.0 * (k_max.max(1) as f64).sqrt());
    if step > nyquist + 1e-12 {
        return Err(Error::GridTooCoarse(format!(
            "step {step} exceeds the cutoff-{k_max} resolution limit {nyquist:.4}"
        )));
    }
    let boundary_max = samples
        .nodes
        .iter()
        .zip(&samples.values)
        .filter(|(z, _)| z.re.abs() >= radius - 0.5 * step || z.im.abs() >= radius - 0.5 * step)
        .map(|(_, v)| v.norm())
        .fold(0.0f64, f64::max);
    if boundary_max > tail_tol {
        return Err(Error::GridTooCoarse(format!(
            "boundary samples still carry |χ| = {boundary_max:.3e} (> {tail_tol:.1e})"
        )));
    }
    // Deterministic parallel reduction: one chunk per lattice row.
    let n = (radius / step).round() as i64;
    let side = (2 * n + 1) as usize;
    let rows: Vec<usize> = (0..side).collect();
    let partials = par_map(&rows, {
        let nodes = samples.nodes.clone();
        let values = samples.values.clone();
        move |&row| {
            let mut acc = DMatrix::<Complex64>::zeros(k_max + 1, k_max + 1);
            for i in row * side..(row + 1) * side {
                let d = displacement_block(-nodes[i], k_max);
                let c = values[i];
                acc.iter_mut().zip(d.iter()).for_each(|(a, b)| *a += c * b);
            }
            acc
        }
    });
    let mut total = DMatrix::<Complex64>::zeros(k_max + 1, k_max + 1);
    for p in partials {
        total += p;
    }
    total *= Complex64::new(step * step / std::f64::consts::PI, 0.0);
    let trace: f64 = (0..=k_max).map(|i| total[(i, i)].re).sum();
    Ok(DensityOperator::trusted(
        total,
        1,
        FockCutoff::single(k_max),
        (1.0 - trace).max(0.0),
    ))
}

/// Invert a real radial characteristic function into Fock weights:
/// p_j = ∫ χ(r) e^{−r²/2} L_j(r²) 2r dr, exploiting the orthonormality of
/// the weighted Laguerre system.
///
/// The caller guarantees Gaussian-dominated decay of χ; `radius` should
/// cover it to the target accuracy (|χ| ≤ e^{−r²/2} gives ~1e−13 by
/// r = 7.5). Values below −1e−9 abort; stray negatives above that are
/// clipped to zero and reported.
pub fn diagonal_from_radial_char(
    chi: impl Fn(f64) -> f64 + Sync,
    k_max: usize,
    radius: f64,
) -> Result<RadialInversion> {
    let rule = default_radial_rule(k_max, radius);
    let chi_vals = par_map(&rule.nodes, |r| chi(*r));
    if chi_vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::QuadratureDivergence(
            "non-finite radial characteristic value".into(),
        ));
    }
    // Accumulate p_j = Σ_i w_i χ_i ℓ_j(u_i) in fixed chunks.
    const CHUNK: usize = 256;
    let chunk_ids: Vec<usize> = (0..rule.nodes.len().div_ceil(CHUNK)).collect();
    let partials = par_map(&chunk_ids, {
        let nodes = rule.nodes.clone();
        let weights = rule.weights.clone();
        let chi_vals = chi_vals.clone();
        move |&c| {
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(nodes.len());
            let mut acc = vec![0.0f64; k_max + 1];
            for i in lo..hi {
                let scale = weights[i] * chi_vals[i];
                if scale == 0.0 {
                    continue;
                }
                let row = laguerre_weighted_row(nodes[i] * nodes[i], k_max);
                for (a, l) in acc.iter_mut().zip(&row) {
                    *a += scale * l;
                }
            }
            acc
        }
    });
    let mut probs = vec![0.0f64; k_max + 1];
    for p in partials {
        for (a, b) in probs.iter_mut().zip(&p) {
            *a += b;
        }
    }
    let mut clipped_mass = 0.0;
    let mut clipped_count = 0;
    for (j, p) in probs.iter_mut().enumerate() {
        if *p < -1e-9 {
            return Err(Error::NegativeMass { index: j, value: *p });
        }
        if *p < 0.0 {
            clipped_mass += -*p;
            clipped_count += 1;
            *p = 0.0;
        }
    }
    let total = compensated_sum(probs.iter().copied());
    let state = if total > 1.0 {
        let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
        DiagonalState::new(probs, 0.0)?
    } else {
        DiagonalState::new(probs, 1.0 - total)?
    };
    Ok(RadialInversion { state, clipped_mass, clipped_count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn char_closed_forms() {
        let vac = State::Dense(DensityOperator::vacuum(30));
        let z1 = [Complex64::new(0.6, 0.8)];
        assert_abs_diff_eq!(
            char_fn(&vac, &z1).unwrap().re,
            (-0.5f64).exp(),
            epsilon = 1e-12
        );
        let one = State::Diagonal(DiagonalState::fock(1, 30));
        let z2 = [Complex64::new(2.0f64.sqrt(), 0.0)];
        assert_abs_diff_eq!(
            char_fn(&one, &z2).unwrap().re,
            -(-1.0f64).exp(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            char_fn(&one, &[Complex64::new(0.0, 0.0)]).unwrap().re,
            1.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn plancherel_vacuum_radial() {
        let rule = default_radial_rule(0, 9.0);
        let res = plancherel_residual_diag(&[1.0], &rule);
        assert!(res <= 1e-10, "residual {res}");
    }

    #[test]
    fn plancherel_fock_one_cartesian() {
        let grid = PhaseGrid::cartesian(8.0, 0.05).unwrap();
        let mut op = DMatrix::<Complex64>::zeros(2, 2);
        op[(1, 1)] = Complex64::new(1.0, 0.0);
        let res = plancherel_residual(&op, &grid).unwrap();
        assert!(res <= 1e-6, "residual {res}");
    }

    #[test]
    fn plancherel_thermal_truncated() {
        // τ₁ (ν = 4) at K = 100: exact Σp² = 1/4 adjusted for the tail.
        let probs: Vec<f64> = (0..=100).map(|k| 0.4 * 0.6f64.powi(k)).collect();
        let rule = default_radial_rule(100, 20.0);
        let res = plancherel_residual_diag(&probs, &rule);
        assert!(res <= 1e-6, "residual {res}");
    }

    #[test]
    fn wigner_vacuum_and_thermal() {
        let vac = State::Dense(DensityOperator::vacuum(20));
        let grid = PhaseGrid::cartesian(6.0, 0.05).unwrap();
        let samples = sample_char(&vac, &grid).unwrap();
        let w0 = wigner_fn(&samples, Complex64::new(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(w0, 2.0 / std::f64::consts::PI, epsilon = 1e-8);
        let w1 = wigner_fn(&samples, Complex64::new(0.5, -0.25)).unwrap();
        assert_abs_diff_eq!(
            w1,
            2.0 / std::f64::consts::PI * (-2.0 * 0.3125f64).exp(),
            epsilon = 1e-8
        );
        assert!((wigner_normalization(&samples).unwrap() - 1.0).abs() < 1e-6);

        let probs: Vec<f64> = (0..=70).map(|k| 0.4 * 0.6f64.powi(k)).collect();
        let tau = State::Diagonal(DiagonalState::new(probs, 0.6f64.powi(71)).unwrap());
        let samples_t = sample_char(&tau, &grid).unwrap();
        let wt = wigner_fn(&samples_t, Complex64::new(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(wt, 1.0 / (2.0 * std::f64::consts::PI), epsilon = 1e-8);
    }

    #[test]
    fn trace_norm_upper_dominates() {
        // T = |1⟩⟨1| − |0⟩⟨0| has ∥T∥₁ = 2; the compressed-χ bound is
        // √((π²/6)·5π) ≈ 5.08.
        let mut op = DMatrix::<Complex64>::zeros(3, 3);
        op[(0, 0)] = Complex64::new(-1.0, 0.0);
        op[(1, 1)] = Complex64::new(1.0, 0.0);
        let bound = trace_norm_upper(&op).unwrap();
        assert!(bound >= 2.0);
        let expect = (std::f64::consts::PI.powi(2) / 6.0 * 5.0 * std::f64::consts::PI).sqrt();
        assert_abs_diff_eq!(bound, expect, epsilon = 1e-6);
        let zero = DMatrix::<Complex64>::zeros(3, 3);
        assert_abs_diff_eq!(trace_norm_upper(&zero).unwrap(), 0.0, epsilon = 1e-30);
    }

    #[test]
    fn radial_inversion_closed_forms() {
        let vac = diagonal_from_radial_char(|r| (-0.5 * r * r).exp(), 8, 9.0).unwrap();
        assert_abs_diff_eq!(vac.state.probs()[0], 1.0, epsilon = 1e-10);
        for k in 1..=8 {
            assert!(vac.state.probs()[k].abs() < 1e-10);
        }

        let th = diagonal_from_radial_char(|r| (-2.0 * r * r).exp(), 30, 9.0).unwrap();
        for k in 0..10 {
            assert_abs_diff_eq!(
                th.state.probs()[k],
                0.4 * 0.6f64.powi(k as i32),
                epsilon = 1e-10
            );
        }

        // Two interfering single-photon modes meeting at a balanced
        // splitter: χ(r) = [e^{−r²/4}(1 − r²/2)]² inverts to
        // diag(1/2, 0, 1/2).
        let hom = diagonal_from_radial_char(
            |r| {
                let f = (-0.25 * r * r).exp() * (1.0 - 0.5 * r * r);
                f * f
            },
            6,
            9.0,
        )
        .unwrap();
        assert_abs_diff_eq!(hom.state.probs()[0], 0.5, epsilon = 1e-10);
        assert!(hom.state.probs()[1].abs() < 1e-10);
        assert_abs_diff_eq!(hom.state.probs()[2], 0.5, epsilon = 1e-10);
    }

    #[test]
    fn invert_round_trip() {
        let rho = DensityOperator::equal_superposition(0, 1, 8);
        let grid = PhaseGrid::cartesian(8.0, 0.1).unwrap();
        let samples = sample_char(&State::Dense(rho.clone()), &grid).unwrap();
        let back = invert_char(&samples, 8).unwrap();
        let diff = back.entries() - rho.entries();
        let dist = crate::fock::schatten_norm(&diff, 1).unwrap();
        assert!(dist < 1e-6, "trace distance {dist}");
    }

    #[test]
    fn invert_guards() {
        let rho = DensityOperator::vacuum(8);
        let coarse = PhaseGrid::cartesian(8.0, 0.5).unwrap();
        let samples = sample_char(&State::Dense(rho.clone()), &coarse).unwrap();
        assert!(matches!(invert_char(&samples, 40), Err(Error::GridTooCoarse(_))));
        let small = PhaseGrid::cartesian(2.0, 0.1).unwrap();
        let s2 = sample_char(&State::Dense(rho), &small).unwrap();
        assert!(matches!(invert_char(&s2, 8), Err(Error::GridTooCoarse(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn random_diagonals_satisfy_plancherel(raw in proptest::collection::vec(0.01f64..1.0, 3..6)) {
            let total: f64 = raw.iter().sum();
            let probs: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let rule = default_radial_rule(probs.len() - 1, 9.0);
            let res = plancherel_residual_diag(&probs, &rule);
            prop_assert!(res <= 1e-8, "residual {}", res);
            // |χ| ≤ 1 on a few radii.
            for r in [0.3, 1.0, 2.5] {
                prop_assert!(char_fn_radial_diag(&probs, r).abs() <= 1.0 + 1e-12);
            }
        }
    }
}
