//! Bayesian and frequentist estimation for linear inverse problems whose
//! forward operator depends on a parameter that is itself only observed with
//! noise.
//!
//! The crate works in coefficient space throughout. An observation consists
//! of `Y = K_θ f + εZ` and `T = θ + δW`; from it one can compute a Galerkin
//! projection estimator with a spectral cutoff, choose its level adaptively
//! with Lepski's rule, or sample the joint posterior of `(f, θ)` with a
//! Metropolis-within-Gibbs scheme. The [`bench`] module wires these into the
//! heat-equation and blind-deconvolution experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod bench;
pub mod error;
pub mod estimator;
pub mod forward;
pub mod operator;
pub mod posterior;

pub use basis::{BasisKind, BasisSpec, CoefficientVector, LevelScaling};
pub use error::{Error, Result};
pub use estimator::{
    galerkin_estimate, lepski_select, max_level, oracle_level, CutoffBranch, GalerkinConfig,
    GalerkinEstimate, LepskiConfig, LepskiDiagnostics, LepskiGrid, ThetaRefPolicy,
};
pub use forward::{
    log_likelihood_projected, log_prior_f, log_prior_theta, simulate, simulate_noiseless,
    Observation,
};
pub use operator::{laplace_singular_values, OperatorKind, OperatorModel, ThetaParam};
pub use posterior::{
    conditional_f_given_theta, gibbs_run, mh_theta_step, theta_conditional_gaussian, ChainConfig,
    PosteriorSummary, PriorConfig, ThetaDim, ThetaUpdate,
};
