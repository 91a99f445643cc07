//! Gaussian-state parameterizations: first moments + covariance specs,
//! thermal Fock realizations, Gaussification, the symplectic uncertainty
//! check, and the single-mode Williamson normal form.
//!
//! Conventions: quadratures are ordered (x₁, p₁, x₂, p₂, …) with vacuum
//! covariance equal to the identity, so a thermal state of occupancy
//! `(ν−1)/2` has covariance νI₂ and Fock weights `(1−q)q^k`,
//! q = e^{−β} = (ν−1)/(ν+1). The characteristic function of a Gaussian
//! state is `exp(−¼ wᵀγw + i dᵀw)` where `w = Λẑ` is the real vector with
//! per-mode components `(√2 Im z_j, −√2 Re z_j)`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::fock::{hermitian_eigen, DensityOperator, DiagonalState, FockCutoff, State};
use crate::quad::compensated_sum;
use crate::{Error, Result};

/// Mean vector + covariance matrix of an m-mode Gaussian state.
#[derive(Clone, Debug)]
pub struct GaussianSpec {
    modes: usize,
    mean: Vec<f64>,
    cov: DMatrix<f64>,
}

/// Symplectic eigenvalues ν_j ≥ 1 with the matching inverse temperatures
/// β_j ∈ (0, ∞], related by ν = (1 + e^{−β})/(1 − e^{−β}).
#[derive(Clone, Debug)]
pub struct ThermalSpec {
    nus: Vec<f64>,
    betas: Vec<f64>,
}

/// Single-mode Williamson data: `γ = S diag(ν,ν) Sᵀ` with the symplectic
/// `S = R(angle) · diag(e^{+squeeze}, e^{−squeeze})`.
#[derive(Clone, Copy, Debug)]
pub struct Williamson1Mode {
    pub nu: f64,
    pub angle: f64,
    pub squeeze: f64,
}

/// The standard symplectic form Ω_m = ⊕ [[0, 1], [−1, 0]].
pub fn omega(modes: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(2 * modes, 2 * modes);
    for j in 0..modes {
        o[(2 * j, 2 * j + 1)] = 1.0;
        o[(2 * j + 1, 2 * j)] = -1.0;
    }
    o
}

/// Minimum eigenvalue of the Hermitian matrix γ + iΩ_m; physical
/// covariances give ≥ −1e−9.
pub fn uncertainty_check(cov: &DMatrix<f64>) -> Result<f64> {
    let n = cov.nrows();
    if n % 2 != 0 || cov.ncols() != n {
        return Err(Error::Domain("covariance must be 2m × 2m"));
    }
    let sym = cov.iter().zip(cov.transpose().iter()).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
    if sym > 1e-9 {
        return Err(Error::Domain("covariance must be symmetric"));
    }
    let om = omega(n / 2);
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] = Complex64::new(cov[(i, j)], om[(i, j)]);
        }
    }
    let (eigs, _) = hermitian_eigen(&h)?;
    Ok(eigs.into_iter().fold(f64::INFINITY, f64::min))
}

impl GaussianSpec {
    /// Validate symmetry and the uncertainty relation (min eig of γ + iΩ
    /// ≥ −1e−9).
    pub fn new(modes: usize, mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if mean.len() != 2 * modes || cov.nrows() != 2 * modes || cov.ncols() != 2 * modes {
            return Err(Error::LengthMismatch(mean.len(), 2 * modes));
        }
        let min_eig = uncertainty_check(&cov)?;
        if min_eig < -1e-9 {
            return Err(Error::UnsupportedCovariance(format!(
                "covariance violates the uncertainty relation: min eig(γ + iΩ) = {min_eig:.3e}"
            )));
        }
        let cov = (cov.clone() + cov.transpose()).scale(0.5);
        Ok(Self { modes, mean, cov })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Thermal spec with covariance νI₂ per mode and zero mean.
    pub fn thermal(nus: &[f64]) -> Result<Self> {
        let m = nus.len();
        let mut cov = DMatrix::zeros(2 * m, 2 * m);
        for (j, &nu) in nus.iter().enumerate() {
            cov[(2 * j, 2 * j)] = nu;
            cov[(2 * j + 1, 2 * j + 1)] = nu;
        }
        Self::new(m, vec![0.0; 2 * m], cov)
    }
}

impl ThermalSpec {
    pub fn from_nus(nus: &[f64]) -> Result<Self> {
        let mut betas = Vec::with_capacity(nus.len());
        for &nu in nus {
            if !(nu >= 1.0) {
                return Err(Error::Domain("symplectic eigenvalue below 1"));
            }
            if nu == 1.0 {
                betas.push(f64::INFINITY);
            } else {
                // q = (ν−1)/(ν+1) = e^{−β}.
                betas.push(-(((nu - 1.0) / (nu + 1.0)).ln()));
            }
        }
        Ok(Self { nus: nus.to_vec(), betas })
    }

    pub fn from_betas(betas: &[f64]) -> Result<Self> {
        let mut nus = Vec::with_capacity(betas.len());
        for &beta in betas {
            if !(beta > 0.0) {
                return Err(Error::Domain("inverse temperature must be positive"));
            }
            if beta.is_infinite() {
                nus.push(1.0);
            } else {
                let q = (-beta).exp();
                nus.push((1.0 + q) / (1.0 - q));
            }
        }
        Ok(Self { nus, betas: betas.to_vec() })
    }

    pub fn modes(&self) -> usize {
        self.nus.len()
    }

    pub fn nus(&self) -> &[f64] {
        &self.nus
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }
}

/// Geometric Fock weights of a single thermal mode, with the exact tail.
pub(crate) fn thermal_weights(nu: f64, k_max: usize) -> (Vec<f64>, f64) {
    let q = (nu - 1.0) / (nu + 1.0);
    let head = 2.0 / (nu + 1.0); // = 1 − q
    let mut probs = Vec::with_capacity(k_max + 1);
    let mut pk = head;
    for _ in 0..=k_max {
        probs.push(pk);
        pk *= q;
    }
    // Remaining mass is exactly q^{K+1}.
    let tail = if q == 0.0 { 0.0 } else { q.powi(k_max as i32 + 1) };
    (probs, tail)
}

/// Fock realization of a single thermal mode: weights `(1−q)q^k` with
/// q = (ν−1)/(ν+1). Errors with `CutoffTooSmall` when the geometric tail
/// `q^{K+1}` exceeds 1e−12.
pub fn thermal_fock(spec: &ThermalSpec, k_max: usize) -> Result<DiagonalState> {
    if spec.modes() != 1 {
        return Err(Error::Domain("diagonal thermal realization is single-mode"));
    }
    let (probs, tail) = thermal_weights(spec.nus[0], k_max);
    if tail > 1e-12 {
        return Err(Error::CutoffTooSmall(format!(
            "thermal tail q^{} = {tail:.3e} exceeds 1e−12 at ν = {}",
            k_max + 1,
            spec.nus[0]
        )));
    }
    DiagonalState::new(probs, tail)
}

/// Dense product realization of a multi-mode thermal spec over a per-mode
/// cutoff.
pub fn thermal_fock_dense(spec: &ThermalSpec, cutoff: &FockCutoff) -> Result<DensityOperator> {
    let ks = match cutoff {
        FockCutoff::PerMode(ks) => ks.clone(),
        _ => return Err(Error::Domain("dense thermal realization needs a per-mode cutoff")),
    };
    if ks.len() != spec.modes() {
        return Err(Error::LengthMismatch(ks.len(), spec.modes()));
    }
    let mut entries: Option<DMatrix<Complex64>> = None;
    let mut kept = 1.0f64;
    for (j, &k_max) in ks.iter().enumerate() {
        let (probs, tail) = thermal_weights(spec.nus[j], k_max);
        if tail > 1e-12 {
            return Err(Error::CutoffTooSmall(format!(
                "thermal tail {tail:.3e} exceeds 1e−12 at ν = {} (mode {j})",
                spec.nus[j]
            )));
        }
        kept *= 1.0 - tail;
        let mut block = DMatrix::<Complex64>::zeros(k_max + 1, k_max + 1);
        for (k, &p) in probs.iter().enumerate() {
            block[(k, k)] = Complex64::new(p, 0.0);
        }
        entries = Some(match entries {
            None => block,
            Some(prev) => prev.kronecker(&block),
        });
    }
    let entries = entries.ok_or(Error::Domain("empty thermal spec"))?;
    Ok(DensityOperator::trusted(
        entries,
        spec.modes(),
        FockCutoff::PerMode(ks),
        (1.0 - kept).max(0.0),
    ))
}

/// Characteristic function of a Gaussian spec:
/// `exp(−¼ wᵀγw + i dᵀw)` with `w_j = (√2 Im z_j, −√2 Re z_j)`.
pub fn gaussian_char(spec: &GaussianSpec, z: &[Complex64]) -> Complex64 {
    let m = spec.modes;
    assert_eq!(z.len(), m, "one displacement argument per mode");
    let mut w = Vec::with_capacity(2 * m);
    for zj in z {
        w.push(std::f64::consts::SQRT_2 * zj.im);
        w.push(-std::f64::consts::SQRT_2 * zj.re);
    }
    let mut quad = 0.0;
    for i in 0..2 * m {
        for j in 0..2 * m {
            quad += w[i] * spec.cov[(i, j)] * w[j];
        }
    }
    let phase: f64 = spec.mean.iter().zip(&w).map(|(d, wi)| d * wi).sum();
    (Complex64::new(-0.25 * quad, phase)).exp()
}

/// Von Neumann entropy of a thermal mode with symplectic eigenvalue ν.
pub fn thermal_entropy(nu: f64) -> f64 {
    if nu <= 1.0 {
        return 0.0;
    }
    let up = (nu + 1.0) / 2.0;
    let dn = (nu - 1.0) / 2.0;
    up * up.ln() - dn * dn.ln()
}

/// Williamson normal form of a positive-definite 2×2 covariance:
/// ν = √det γ and a symplectic `S = R(angle)·diag(e^{+r}, e^{−r})` with
/// `γ = S diag(ν,ν) Sᵀ`.
pub fn williamson_1mode(cov: &DMatrix<f64>) -> Result<Williamson1Mode> {
    if cov.nrows() != 2 || cov.ncols() != 2 {
        return Err(Error::Domain("single-mode covariance must be 2×2"));
    }
    let a = cov[(0, 0)];
    let b = 0.5 * (cov[(0, 1)] + cov[(1, 0)]);
    let c = cov[(1, 1)];
    let det = a * c - b * b;
    if !(det > 0.0) || a <= 0.0 || c <= 0.0 {
        return Err(Error::NotPositiveDefinite);
    }
    let nu = det.sqrt();
    let t = 0.5 * (a + c);
    let d = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let l_max = t + d;
    let l_min = (t - d).max(det / l_max); // guard against cancellation
    // R(φ)ᵀ γ R(φ) = diag(λ_max, λ_min) with φ = ½ atan2(2b, a − c).
    let angle = 0.5 * (2.0 * b).atan2(a - c);
    let squeeze = 0.25 * (l_max / l_min).ln();
    Ok(Williamson1Mode { nu, angle, squeeze })
}

impl Williamson1Mode {
    /// The symplectic matrix `R(angle)·diag(e^{+squeeze}, e^{−squeeze})`.
    pub fn symplectic(&self) -> DMatrix<f64> {
        let (s, c) = self.angle.sin_cos();
        let ep = self.squeeze.exp();
        let em = (-self.squeeze).exp();
        DMatrix::from_row_slice(2, 2, &[c * ep, -s * em, s * ep, c * em])
    }

    /// Reconstruct `S diag(ν,ν) Sᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let s = self.symplectic();
        (&s * s.transpose()).scale(self.nu)
    }
}

/// Phase-rotation unitary e^{iθ a†a} on a cutoff-K ladder.
pub(crate) fn rotation_unitary(theta: f64, k_max: usize) -> DMatrix<Complex64> {
    let mut u = DMatrix::zeros(k_max + 1, k_max + 1);
    for k in 0..=k_max {
        u[(k, k)] = Complex64::new(0.0, theta * k as f64).exp();
    }
    u
}

/// Squeeze unitary exp(r(a² − a†²)/2), whose Heisenberg action is
/// x ↦ e^{−r} x, p ↦ e^{+r} p.
pub(crate) fn squeeze_unitary(r: f64, k_max: usize) -> Result<DMatrix<Complex64>> {
    let dim = k_max + 1;
    // H = −i r (a² − a†²)/2 is Hermitian; U = exp(iH).
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    for k in 0..dim {
        if k + 2 < dim {
            // ⟨k|a²|k+2⟩ = √((k+1)(k+2)); a†² is its transpose with −.
            let g = 0.5 * r * (((k + 1) * (k + 2)) as f64).sqrt();
            h[(k, k + 2)] = Complex64::new(0.0, -g);
            h[(k + 2, k)] = Complex64::new(0.0, g);
        }
    }
    let (eigs, vecs) = hermitian_eigen(&h)?;
    let mut phases = DMatrix::<Complex64>::zeros(dim, dim);
    for (i, &l) in eigs.iter().enumerate() {
        phases[(i, i)] = Complex64::new(0.0, l).exp();
    }
    Ok(&vecs * phases * vecs.adjoint())
}

/// Gaussification: the Gaussian state with the same first and second
/// moments. Requires the input centered within 1e−8. Returns the spec
/// (mean 0, covariance of the input) and a Fock realization at the input
/// cutoff whose covariance matches within 1e−6.
///
/// Diagonal inputs stay diagonal (thermal); dense single-mode inputs may
/// be squeezed thermal (built by conjugating a thermal state with numeric
/// rotation/squeeze unitaries); dense multi-mode inputs must have
/// mode-wise thermal covariance.
pub fn gaussify(state: &State) -> Result<(GaussianSpec, State)> {
    let d = state.first_moments();
    let d_norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if d_norm > 1e-8 {
        return Err(Error::NotCentered(d_norm));
    }
    let cov = state.covariance();
    match state {
        State::Diagonal(diag) => {
            let nu = cov[(0, 0)];
            let spec = GaussianSpec::thermal(&[nu])?;
            let (probs, tail) = thermal_weights(nu, diag.cutoff());
            let real = DiagonalState::new(probs, tail)?;
            check_gaussify_cov(&cov, &real.covariance())?;
            Ok((spec, State::Diagonal(real)))
        }
        State::Dense(rho) => {
            let m = rho.modes();
            if m == 1 {
                let w = williamson_1mode(&cov)?;
                let k_max = rho.dim() - 1;
                let (probs, tail) = thermal_weights(w.nu, k_max);
                if w.squeeze.abs() < 1e-9 {
                    let real = DiagonalState::new(probs, tail)?;
                    check_gaussify_cov(&cov, &real.covariance())?;
                    let spec = GaussianSpec::new(1, vec![0.0, 0.0], cov)?;
                    return Ok((spec, State::Diagonal(real)));
                }
                // Want S = R(angle)·diag(e^{+r}, e^{−r}); the squeeze
                // unitary with parameter −r contributes diag(e^{+r}, e^{−r}).
                let usq = squeeze_unitary(-w.squeeze, k_max)?;
                let urot = rotation_unitary(w.angle, k_max);
                let u = &urot * usq;
                let mut tau = DMatrix::<Complex64>::zeros(k_max + 1, k_max + 1);
                for (k, &p) in probs.iter().enumerate() {
                    tau[(k, k)] = Complex64::new(p, 0.0);
                }
                let entries = &u * tau * u.adjoint();
                let real = DensityOperator::trusted(entries, 1, FockCutoff::single(k_max), tail);
                check_gaussify_cov(&cov, &real.covariance())?;
                let spec = GaussianSpec::new(1, vec![0.0, 0.0], cov)?;
                Ok((spec, State::Dense(real)))
            } else {
                // Mode-wise thermal covariance only.
                let mut nus = Vec::with_capacity(m);
                for j in 0..m {
                    let nu = cov[(2 * j, 2 * j)];
                    if (cov[(2 * j + 1, 2 * j + 1)] - nu).abs() > 1e-7 {
                        return Err(Error::UnsupportedCovariance(
                            "multi-mode Gaussification needs νI₂ blocks".into(),
                        ));
                    }
                    nus.push(nu);
                }
                for i in 0..2 * m {
                    for j in 0..2 * m {
                        if i != j && cov[(i, j)].abs() > 1e-7 {
                            return Err(Error::UnsupportedCovariance(
                                "multi-mode Gaussification needs a diagonal covariance".into(),
                            ));
                        }
                    }
                }
                let ks = match rho.cutoff() {
                    FockCutoff::PerMode(ks) => ks.clone(),
                    _ => {
                        return Err(Error::UnsupportedCovariance(
                            "multi-mode Gaussification needs a product basis".into(),
                        ))
                    }
                };
                let spec_t = ThermalSpec::from_nus(&nus)?;
                let real = thermal_fock_dense(&spec_t, &FockCutoff::PerMode(ks))?;
                check_gaussify_cov(&cov, &real.covariance())?;
                let spec = GaussianSpec::thermal(&nus)?;
                Ok((spec, State::Dense(real)))
            }
        }
    }
}

fn check_gaussify_cov(want: &DMatrix<f64>, got: &DMatrix<f64>) -> Result<()> {
    let worst = want
        .iter()
        .zip(got.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    if worst > 1e-6 {
        return Err(Error::CutoffTooSmall(format!(
            "Gaussification covariance off by {worst:.3e}; raise the cutoff"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Text format: line 1 `m`, line 2 the 2m mean entries, then 2m cov rows.
// ---------------------------------------------------------------------------

pub fn write_gaussian(spec: &GaussianSpec, w: &mut impl std::io::Write) -> Result<()> {
    writeln!(w, "{}", spec.modes)?;
    let mean: Vec<String> = spec.mean.iter().map(|v| v.to_string()).collect();
    writeln!(w, "{}", mean.join(" "))?;
    for i in 0..2 * spec.modes {
        let row: Vec<String> = (0..2 * spec.modes).map(|j| spec.cov[(i, j)].to_string()).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn read_gaussian(r: &mut impl std::io::BufRead) -> Result<GaussianSpec> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let m: usize = line
        .trim()
        .parse()
        .map_err(|_| Error::Parse("Gaussian header: expected the mode count".into()))?;
    let parse_row = |line: &str, want: usize| -> Result<Vec<f64>> {
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad value `{t}`"))))
            .collect::<Result<_>>()?;
        if vals.len() != want {
            return Err(Error::Parse(format!("expected {want} entries, found {}", vals.len())));
        }
        Ok(vals)
    };
    line.clear();
    r.read_line(&mut line)?;
    let mean = parse_row(&line, 2 * m)?;
    let mut cov = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..2 * m {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::Parse("missing covariance row".into()));
        }
        for (j, v) in parse_row(&line, 2 * m)?.into_iter().enumerate() {
            cov[(i, j)] = v;
        }
    }
    GaussianSpec::new(m, mean, cov)
}

/// Mean photon number of a thermal spec summed over modes,
/// Σ_j (ν_j − 1)/2.
pub fn thermal_mean_photons(spec: &ThermalSpec) -> f64 {
    compensated_sum(spec.nus.iter().map(|nu| 0.5 * (nu - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn thermal_weights_examples() {
        let spec = ThermalSpec::from_nus(&[4.0]).unwrap();
        let tau = thermal_fock(&spec, 80).unwrap();
        for k in 0..10 {
            let want = 0.4 * 0.6f64.powi(k as i32);
            assert_abs_diff_eq!(tau.probs()[k], want, epsilon = 1e-15);
        }
        let one = ThermalSpec::from_nus(&[1.0]).unwrap();
        let vac = thermal_fock(&one, 0).unwrap();
        assert_eq!(vac.probs(), &[1.0]);
    }

    #[test]
    fn thermal_cutoff_guard() {
        let spec = ThermalSpec::from_nus(&[4.0]).unwrap();
        assert!(matches!(thermal_fock(&spec, 5), Err(Error::CutoffTooSmall(_))));
    }

    #[test]
    fn thermal_occupancy_consistency() {
        for nu in [1.0, 2.0, 3.0, 4.0, 10.0] {
            let spec = ThermalSpec::from_nus(&[nu]).unwrap();
            let k_max = if nu == 1.0 { 2 } else { 400 };
            let tau = thermal_fock(&spec, k_max).unwrap();
            assert_abs_diff_eq!(tau.mean_photons(), (nu - 1.0) / 2.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn gaussian_char_closed_forms() {
        let th = GaussianSpec::thermal(&[4.0]).unwrap();
        let z = [Complex64::new(0.6, 0.8)];
        assert_abs_diff_eq!(
            gaussian_char(&th, &z).re,
            (-2.0f64).exp(),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(gaussian_char(&th, &z).im, 0.0, epsilon = 1e-14);

        let th3 = GaussianSpec::thermal(&[3.0]).unwrap();
        let z2 = [Complex64::new(0.5, 0.0)];
        assert_abs_diff_eq!(
            gaussian_char(&th3, &z2).re,
            (-3.0f64 / 8.0).exp(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn uncertainty_examples() {
        let id = DMatrix::identity(2, 2);
        assert_abs_diff_eq!(uncertainty_check(&id).unwrap(), 0.0, epsilon = 1e-12);
        let four = DMatrix::from_diagonal_element(2, 2, 4.0);
        assert_abs_diff_eq!(uncertainty_check(&four).unwrap(), 3.0, epsilon = 1e-12);
        let half = DMatrix::from_diagonal_element(2, 2, 0.5);
        assert_abs_diff_eq!(uncertainty_check(&half).unwrap(), -0.5, epsilon = 1e-12);
    }

    #[test]
    fn williamson_examples() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 8.0]);
        let w = williamson_1mode(&g).unwrap();
        assert_abs_diff_eq!(w.nu, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.squeeze, 0.25 * 4.0f64.ln(), epsilon = 1e-12);
        let rec = w.reconstruct();
        assert!((rec - &g).iter().all(|v| v.abs() < 1e-10));

        let id = DMatrix::identity(2, 2);
        assert_abs_diff_eq!(williamson_1mode(&id).unwrap().nu, 1.0, epsilon = 1e-14);

        // Off-diagonal case reconstructs too.
        let g2 = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let w2 = williamson_1mode(&g2).unwrap();
        let rec2 = w2.reconstruct();
        assert!((rec2 - &g2).iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn gaussify_number_state() {
        let one = State::Dense(DensityOperator::number_state(1, 60));
        let (spec, real) = gaussify(&one).unwrap();
        assert_abs_diff_eq!(spec.cov()[(0, 0)], 3.0, epsilon = 1e-10);
        match real {
            State::Diagonal(d) => {
                for k in 0..6 {
                    assert_abs_diff_eq!(d.probs()[k], 0.5f64.powi(k as i32 + 1), epsilon = 1e-12);
                }
            }
            _ => panic!("number-state Gaussification should be thermal"),
        }
    }

    #[test]
    fn gaussify_squeezed_covariance() {
        // Conjugate a thermal state by a squeeze and check round trip.
        let spec = ThermalSpec::from_nus(&[2.0]).unwrap();
        let tau = thermal_fock(&spec, 90).unwrap();
        let dense = DensityOperator::from_diagonal(&tau);
        let u = squeeze_unitary(0.3, 90).unwrap();
        let sq = DensityOperator::trusted(
            &u * dense.entries() * u.adjoint(),
            1,
            FockCutoff::single(90),
            tau.tail_mass(),
        );
        let cov = sq.covariance();
        // x ↦ e^{−r}x under exp(r(a²−a†²)/2) with r = 0.3.
        assert_abs_diff_eq!(cov[(0, 0)], 2.0 * (-0.6f64).exp(), epsilon = 1e-6);
        assert_abs_diff_eq!(cov[(1, 1)], 2.0 * (0.6f64).exp(), epsilon = 1e-6);
        let (gspec, real) = gaussify(&State::Dense(sq.clone())).unwrap();
        let got = real.covariance();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(got[(i, j)], gspec.cov()[(i, j)], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn entropy_of_thermal() {
        assert_abs_diff_eq!(thermal_entropy(3.0), 2.0 * std::f64::consts::LN_2, epsilon = 1e-14);
        assert_eq!(thermal_entropy(1.0), 0.0);
    }

    #[test]
    fn gaussian_round_trip() {
        let spec = GaussianSpec::new(
            1,
            vec![0.25, -0.5],
            DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_gaussian(&spec, &mut buf).unwrap();
        let back = read_gaussian(&mut std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(back.mean(), spec.mean());
        assert!(back
            .cov()
            .iter()
            .zip(spec.cov().iter())
            .all(|(a, b)| a == b));
    }
}
