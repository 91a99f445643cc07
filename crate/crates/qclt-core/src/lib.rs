//! Numerical core for bosonic-state central-limit experiments.
//!
//! This crate simulates continuous-variable quantum states in a truncated
//! Fock basis and provides the machinery needed to study how repeated
//! beam-splitter convolutions drive a state towards its Gaussification:
//!
//! - [`fock`] — truncated density operators, Fock-diagonal states, moments,
//!   norms, entropies, truncation and centering;
//! - [`gaussian`] — Gaussian parameterizations (mean + covariance), thermal
//!   realizations, Gaussification, and the symplectic uncertainty check;
//! - [`phase_space`] — characteristic/Wigner transforms, the Plancherel
//!   identity, a trace-norm upper bound, and inversion back to Fock matrices;
//! - [`convolution`] — the beam-splitter convolution `ρ ⊞_η σ`, its n-fold
//!   symmetric iteration along three independent routes, and a brute-force
//!   tensor oracle;
//! - [`edgeworth`] — cumulants of `ln χ_ρ` and the correction polynomials of
//!   the expansion of `χ_{ρ^⊞n}` around the Gaussian limit;
//! - [`entropy_bound`] — an explicit-constant upper bound on the relative
//!   entropy to a thermal reference, with all supporting inequalities;
//! - [`counterexamples`] — heavy-tailed thermal mixtures whose scaled
//!   convergence metrics diverge, plus their reference expansions;
//! - [`experiments`] — deterministic scan drivers, slope fits, bound audits,
//!   the self-test suite, and CSV/JSON emission used by the CLI.
//!
//! # Conventions
//!
//! - `ℏ = 1` quadratures `x = (a + a†)/√2`, `p = (a − a†)/(i√2)`; the vacuum
//!   covariance is the 2×2 identity and `γ + iΩ ≥ 0` for physical states.
//! - Trace distance carries no 1/2 factor: it is the plain Schatten-1 norm
//!   of the difference.
//! - Characteristic functions are `χ_T(z) = tr(T D_z)` with
//!   `D_z = exp(z a† − z̄ a)` per mode; all phase-space integrals use the
//!   Lebesgue measure `d^{2m}z` on ℂ^m.
//!
//! # Numerical contract
//!
//! Every operation is a pure function of its inputs. Parallel sweeps reduce
//! in a fixed order, so results are byte-identical across thread counts
//! (the `QCLT_THREADS` environment variable only caps the worker pool).
//! Tolerances (Hermiticity 1e−12, eigenvalue floor −1e−10, probability
//! floor −1e−9, …) are documented on the types that enforce them.

#![forbid(unsafe_code)]

pub mod convolution;
pub mod counterexamples;
pub mod edgeworth;
pub mod entropy_bound;
mod error;
pub mod experiments;
pub mod fock;
pub mod gaussian;
pub mod phase_space;
pub mod quad;

pub use error::{Error, Result};
