//! Alpha-divergence risk of Gaussian plug-in predictive densities and their
//! variance-expanded variants.
//!
//! Observe `X ~ N_d(θ, σ_X² I)` and predict the density of an independent
//! `Y ~ N_d(θ, σ_Y² I)`. A plug-in density `N_d(θ̂(X), σ_Y² I)` can be improved
//! by expanding its variance to `c² σ_Y²`. This crate provides:
//!
//! - [`model`]: the observation model, the divergence kernel `h_α` and the
//!   closed-form loss of a scale-expanded Gaussian,
//! - [`closedrisk`]: analytic frequentist risks for `θ̂ = X`, `θ̂ = aX` and
//!   `θ̂ = max(X, 0)`,
//! - [`cutoffs`]: the dominance cut-offs in the expansion factor,
//! - [`estimators`]: the point-estimator catalog and moment-bound machinery,
//! - [`montecarlo`]: reproducible Monte Carlo risks, `ε`, dominance scans,
//!   empirical exact cut-offs and mixture risks,
//! - [`figures`], [`verify`] and [`cli`]: CSV sweeps, self-checks and the
//!   command-line front end.
//!
//! All distance-dependent quantities are functions of `‖θ̂ − θ‖²` only.

pub mod cli;
pub mod closedrisk;
pub mod cutoffs;
pub mod error;
pub mod estimators;
pub mod figures;
pub mod model;
pub mod montecarlo;
pub mod quadrature;
pub mod roots;
pub mod special;
pub mod verify;

pub use closedrisk::{
    c_opt, risk_affine, risk_affine_limit, risk_identity, risk_kl_plugin, risk_ratio_identity,
    risk_truncated, risk_truncated_at_zero, risk_truncated_limit, TruncatedRiskParams,
};
pub use cutoffs::{
    cutoff_affine, cutoff_general, cutoff_general_lower_bound, cutoff_kl_exact, cutoff_truncated,
    CutoffKind, CutoffResult, TauParams,
};
pub use error::{Error, Result};
pub use estimators::{
    lemma22_lower_bound, moment_bounds, quartic_bound_from_componentwise, Estimator,
    MomentBounds, ParameterSpace, Provenance, ShrinkFn,
};
pub use model::{h_alpha, loss_closed, loss_kl, AlphaLoss, LossKernelParams, Model};
pub use montecarlo::{
    dominance_scan, empirical_cutoff, mc_epsilon, mc_risk, mixture_risk, EmpiricalCutoff,
    EpsilonEstimate, MixtureDensity, RiskEstimate, ScanRow,
};
