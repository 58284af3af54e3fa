//! Nonlinear filtering with the feedback particle filter (FPF).
//!
//! The centerpiece is an exact gain-function solver for the scalar FPF: the
//! Poisson equation `(p K)' = -(h - hbar) p` is solved in closed form when the
//! filtering density `p` is a Gaussian-mixture particle approximation and the
//! observation function `h` is a polynomial. Each mixture component contributes
//! a polynomial part, obtained by a backward recursion over Hermite
//! coefficients, and an error-function part fixed by a per-particle constant.
//! Construction costs `O(p * N_p)` for degree `p` and `N_p` particles.
//!
//! Around that core the crate provides:
//!
//! - [`hermite`]: physicists' Hermite polynomials, series arithmetic, and
//!   basis conversion.
//! - [`density`]: particle ensembles, Gaussian-mixture densities, exact
//!   polynomial expectations, and the error function.
//! - [`gain`]: the decomposition gain (coefficients, constants, evaluation,
//!   derivative, and the FPF control term).
//! - [`baselines`]: an exact direct-integration gain oracle plus constant-gain
//!   and kernel-based approximations.
//! - [`filters`]: FPF and bootstrap particle-filter engines over a common
//!   state-space model, with a Kalman-Bucy reference for linear models.
//! - [`experiments`]: reproducible gain-accuracy, CPU-scaling, and Monte-Carlo
//!   tracking experiments with CSV/JSON-friendly results.

pub mod baselines;
pub mod density;
mod error;
pub mod experiments;
pub mod filters;
pub mod gain;
pub mod hermite;
pub mod rng;
pub mod special;

pub use baselines::{constant_gain, exact_gain_quadrature, kernel_gain, GridGain, KernelGainResult};
pub use density::{ensemble_moments, gaussian_pdf, hbar, MixtureDensity, ParticleEnsemble};
pub use error::Error;
pub use filters::{FilterConfig, FilterState, GainMethod, StateModel, TimeMode, Trajectory};
pub use gain::{build_gain, solve_coefficients, DecompositionGain};
pub use hermite::{hermite_eval, HermiteSeries};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
