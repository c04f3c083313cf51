//! Uncertainty-aware sensitivity analysis built on divergences of
//! parametric predictive distributions.
//!
//! The crate provides:
//! - predictive distributions (Gaussian, Student-t, Bernoulli, Poisson),
//!   their Fisher information matrices, and KL / Rényi divergences
//!   ([`predictive`]),
//! - the R-sens and R-sens₂ sensitivity measures together with the
//!   finite-difference KL approximation and ranking utilities
//!   ([`sensitivity`]),
//! - Gaussian-process models with analytic input derivatives for Gaussian,
//!   probit and Laplace-Poisson observation models ([`gp`]),
//! - closed-form Bayesian linear regression and Laplace logistic
//!   regression ([`linear`]),
//! - baseline importance methods (EAD/AED, EAH/AEH, VAR, PD, PFI,
//!   H-statistic) ([`baselines`]),
//! - a simulation and benchmark harness ([`harness`]) and dataset
//!   ingestion ([`dataset`]).
//!
//! The divergence and sensitivity core is generic over the scalar type via
//! [`scalar::Scalar`]; concrete `f64` aliases are exported at the root.

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod gp;
pub mod harness;
pub mod linear;
pub mod predictive;
pub mod quadrature;
pub mod scalar;
pub mod sensitivity;
pub mod special;

pub use error::{Error, Result};
pub use predictive::{FisherMatrix, PredictiveDistribution};
pub use sensitivity::{ImportanceReport, ParamSensitivity};

/// `f64` predictive distribution, the working type of the model layer.
pub type Predictive = PredictiveDistribution<f64>;
/// `f64` Fisher information matrix.
pub type Fisher = FisherMatrix<f64>;
/// `f64` parameter sensitivity bundle.
pub type Sensitivity = ParamSensitivity<f64>;
/// `f32` predictive distribution.
pub type Predictive32 = PredictiveDistribution<f32>;
