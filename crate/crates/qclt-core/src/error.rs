use thiserror::Error;

/// Crate-wide error type.
///
/// Variants mirror the failure modes of the numerical contracts: input
/// validation (`NonHermitian`, `BadTrace`, …), resolution limits
/// (`CutoffTooSmall`, `GridTooCoarse`), and solver breakdowns
/// (`EigenFailure`, `DegenerateFit`, …).
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix deviates from its adjoint beyond the 1e−12 tolerance.
    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NonHermitian(f64),
    /// An eigenvalue of a would-be state fell below the −1e−10 floor.
    #[error("state has negative eigenvalue {0:.3e}")]
    NegativeEigenvalue(f64),
    /// Trace differs from 1 by more than 1e−8 with no declared deficit.
    #[error("trace {0} is incompatible with a unit-trace state")]
    BadTrace(f64),
    /// A projection retained essentially no mass.
    #[error("projection retained mass below 1e-300")]
    ZeroMass,
    /// `p_k` is significant where the reference weight `q_k` vanishes.
    #[error("support violation at Fock index {index}: p={p:.3e} but q={q:.3e}")]
    SupportViolation { index: usize, p: f64, q: f64 },
    /// The symmetric/Hermitian eigensolver did not converge.
    #[error("eigensolver failed to converge")]
    EigenFailure,
    /// The Fock cutoff cannot represent the requested object.
    #[error("Fock cutoff too small: {0}")]
    CutoffTooSmall(String),
    /// The phase-space grid cannot resolve the requested transform.
    #[error("phase-space grid too coarse: {0}")]
    GridTooCoarse(String),
    /// Inversion produced probability mass below the −1e−9 floor.
    #[error("negative probability {value:.3e} at Fock index {index}")]
    NegativeMass { index: usize, value: f64 },
    /// A quadrature failed its convergence check.
    #[error("quadrature divergence: {0}")]
    QuadratureDivergence(String),
    /// Beam-splitter amplitude requested outside its photon-number sector.
    #[error("index {j} outside the {sector}-photon sector")]
    IndexOutOfSector { j: usize, sector: usize },
    /// The requested convolution route cannot handle these inputs.
    #[error("convolution route unavailable: {0}")]
    RouteUnavailable(String),
    /// The cumulant-fit design matrix is numerically rank-deficient.
    #[error("cumulant fit is ill-conditioned: {0}")]
    FitIllConditioned(String),
    /// Cumulants were not supplied to a high enough order.
    #[error("cumulants of order {have} cannot produce correction index {need}")]
    InsufficientOrder { have: usize, need: usize },
    /// A thermal mode with ν = 1 (β = ∞) must be stripped before bounding.
    #[error("mode {0} has infinite inverse temperature; strip vacuum modes first")]
    InfiniteBeta(usize),
    /// First moments are too large for an operation requiring centered input.
    #[error("state is not centered (|first moments| = {0:.3e})")]
    NotCentered(f64),
    /// Covariance shape outside the supported family.
    #[error("unsupported covariance: {0}")]
    UnsupportedCovariance(String),
    /// A matrix required to be positive definite is not.
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    /// The plateau/tail density ansatz has no nonnegative solution here.
    #[error("no valid mixture density for theta={0}")]
    NoValidDensity(f64),
    /// Too few or degenerate points for a least-squares slope.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    /// Dimensions of two coupled arguments disagree.
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    /// Plain argument-domain violation.
    #[error("domain error: {0}")]
    Domain(&'static str),
    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// Malformed textual input (state files, CLI specs).
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = core::result::Result<T, Error>;
