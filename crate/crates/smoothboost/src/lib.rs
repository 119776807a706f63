//! Iterative bias correction of linear regression smoothers.
//!
//! A linear smoother fits `m̂ = S·y` for an n×n smoothing matrix `S` built from
//! the covariates. Smoothing the residuals of that fit estimates its bias, and
//! subtracting the estimated bias gives a corrected smoother; repeating the
//! correction is operationally the L2 boosting algorithm, with k-step fits
//! `m̂_k = [I − (I−μS)^k] y`. Whether the sequence converges toward the data or
//! blows up is governed by the spectrum of `I − μS`.
//!
//! The crate provides:
//!
//! - [`smoother`]: kernel (Nadaraya-Watson), k-nearest-neighbor, smoothing
//!   spline, and bin smoothers as explicit matrices with out-of-sample weight
//!   vectors.
//! - [`boost`]: the bias-correction recursion in coefficient form (one
//!   matrix-vector product per iteration, usable to k ~ 10⁶), the closed-form
//!   fit, exact bias/variance, and out-of-sample prediction.
//! - [`spectral`]: singular values and symmetric-equivalent eigenvalues of
//!   `I − μS`, a convergent/divergent/boundary classification, and the 3×3
//!   principal-minor witness for compact-support kernels.
//! - [`stopping`]: AIC, AICc, GCV, L-fold / leave-one-out cross validation and
//!   data-splitting rules selecting the stopping iteration.
//! - [`sim`]: a Monte-Carlo harness comparing stopped boosted smoothers against
//!   classically tuned single smoothers.

pub mod boost;
pub mod error;
pub mod kernel;
pub mod sample;
pub mod sim;
pub mod smoother;
pub mod spectral;
mod spline;
pub mod stopping;

pub use boost::{closed_form_fit, exact_bias_variance, run_boost, BoostConfig, BoostTrajectory, BoostVariant, Predictor};
pub use error::{Error, Result};
pub use kernel::{KernelFamily, KernelSpec};
pub use sample::DesignSample;
pub use sim::{run_scenario, SimScenario, SimSummary};
pub use smoother::{build_smoother, LinearSmoother, SmootherSpec};
pub use spectral::{analyze, principal_minor_witness, Classification, SpectrumReport};
pub use stopping::{select, SelectionResult, StoppingRule};
