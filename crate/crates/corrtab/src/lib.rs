//! Latent-variable logit analysis of correlated 2x2 contingency tables.
//!
//! A shared Gaussian shock on both arms' logits induces the cross-arm
//! correlation seen in sets of clinical 2x2 tables. This crate fits that
//! model per table with a generalized EM loop (Metropolis-Hastings or
//! deterministic quadrature for the E-like step), derives success
//! probabilities, odds ratios, and an independence test, pools estimates
//! across tables by sample-size weights, and drives the two simulation
//! studies.

// Validations use `!(x > 0.0)`-style comparisons so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datasets;
pub mod error;
pub mod estimator;
pub mod inference;
pub mod model;
pub mod report;
pub mod rng;
pub mod sampler;
pub mod simulation;
pub mod table;

pub use error::{Error, Result};
pub use estimator::{
    correct_counts, estimate_alpha_variance, estimate_pi, fit_table, m_step, Estimator, FitConfig,
    FitResult,
};
pub use inference::{log_odds_ratio, pool_fits, test_independence, PooledResult};
pub use model::{
    log_likelihood, log_posterior_kernel, posterior_expectation_quadrature, success_prob,
    ModelParams, PosteriorQuadrature, QuadratureSpec,
};
pub use report::{fit_table_set, FitReport};
pub use sampler::{sample_posterior, SampleSet, SamplerConfig};
pub use simulation::{
    correlation_study, generate_table, performance_study, CorrelationStudyResult, GeneratorConfig,
    PerformanceStudyResult,
};
pub use table::{empirical_rates, parse_table_set, rate_correlation, ContingencyTable, TableSet};
