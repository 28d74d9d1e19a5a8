//! Generalized EM estimation for one table.
//!
//! Each iteration replaces the latent shock by its posterior mean (Monte
//! Carlo or quadrature, per configuration) and then applies the closed-form
//! maximizers: alpha_j is the corrected empirical logit shifted by the
//! posterior mean, and sigma2 is the squared posterior mean floored away
//! from zero. After convergence the success probabilities and the expected
//! information are integrated under the fitted conditional density.

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::Result;
use crate::inference::test_independence;
use crate::model::{success_prob, ModelParams, PosteriorQuadrature, QuadratureSpec};
use crate::sampler::{sample_posterior, SamplerConfig};
pub use crate::table::correct_counts;
use crate::table::ContingencyTable;

/// Which estimator computes posterior expectations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Metropolis-Hastings draws; seed-dependent.
    Mh,
    /// Deterministic trapezoid quadrature.
    Quadrature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Degenerate-cell correction applied to y = 0 and y = n.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Convergence threshold on the max parameter change per iteration.
    pub tol: f64,
    /// Lower bound keeping sigma2 away from a degenerate prior.
    pub sigma2_floor: f64,
    pub estimator: Estimator,
    pub sampler: SamplerConfig,
    pub quadrature: QuadratureSpec,
    /// Two-sided test size.
    pub level: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            max_iters: 100,
            tol: 1e-4,
            sigma2_floor: 1e-3,
            estimator: Estimator::Mh,
            sampler: SamplerConfig::default(),
            quadrature: QuadratureSpec::default(),
            level: 0.05,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        use crate::error::Error::InvalidParameter;
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(InvalidParameter("epsilon must be in (0, 0.5)".into()));
        }
        if !(self.sigma2_floor > 0.0) {
            return Err(InvalidParameter("sigma2_floor must be positive".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(InvalidParameter("level must be in (0, 1)".into()));
        }
        if !(self.tol > 0.0) {
            return Err(InvalidParameter("tol must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(InvalidParameter("max_iters must be >= 1".into()));
        }
        self.sampler.validate()?;
        self.quadrature.validate()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            sampler: self.sampler.with_seed(seed),
            ..self.clone()
        }
    }
}

/// Sampler diagnostics carried into reports for MH fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerDiagnostics {
    pub acceptance_rate: f64,
    pub step: f64,
}

/// Per-table estimates, standard errors, and the independence test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub label: Option<String>,
    pub alpha1_hat: f64,
    pub alpha2_hat: f64,
    pub sigma2_hat: f64,
    pub pi1_hat: f64,
    pub pi2_hat: f64,
    pub se_alpha1: f64,
    pub se_alpha2: f64,
    pub log_or: f64,
    pub se_log_or: f64,
    pub t_stat: f64,
    pub reject: bool,
    pub iters: usize,
    pub delta_bar: f64,
    pub converged: bool,
    pub diagnostics: Option<SamplerDiagnostics>,
}

/// Upper level/2 standard normal quantile.
pub fn z_critical(level: f64) -> f64 {
    Normal::new(0.0, 1.0)
        .expect("unit normal")
        .inverse_cdf(1.0 - level / 2.0)
}

/// Closed-form maximizers given the current posterior mean of delta:
/// corrected logits shifted by `delta_bar`, and the floored squared mean
/// for sigma2.
pub fn m_step(
    t: &ContingencyTable,
    delta_bar: f64,
    epsilon: f64,
    sigma2_floor: f64,
) -> (f64, f64, f64) {
    let alpha1 = corrected_logit(t.y1(), t.n1(), epsilon) - delta_bar;
    let alpha2 = corrected_logit(t.y2(), t.n2(), epsilon) - delta_bar;
    let sigma2 = (delta_bar * delta_bar).max(sigma2_floor);
    (alpha1, alpha2, sigma2)
}

fn corrected_logit(y: u64, n: u64, epsilon: f64) -> f64 {
    let cy = correct_counts(y, n, epsilon);
    (cy / (n as f64 - cy)).ln()
}

/// The five conditional expectations every fit needs: E[delta], E[p_j],
/// and the expected information E[n_j p_j (1 - p_j)] for j = 1, 2.
struct Moments {
    delta_bar: f64,
    pi1: f64,
    pi2: f64,
    info1: f64,
    info2: f64,
    diagnostics: Option<SamplerDiagnostics>,
}

fn conditional_moments(t: &ContingencyTable, p: &ModelParams, cfg: &FitConfig) -> Result<Moments> {
    let g_pi1 = |d: f64| success_prob(p.alpha1, d);
    let g_pi2 = |d: f64| success_prob(p.alpha2, d);
    let g_info1 = |d: f64| t.n1() as f64 * g_pi1(d) * (1.0 - g_pi1(d));
    let g_info2 = |d: f64| t.n2() as f64 * g_pi2(d) * (1.0 - g_pi2(d));
    match cfg.estimator {
        Estimator::Quadrature => {
            let quad = PosteriorQuadrature::new(t, p, &cfg.quadrature)?;
            Ok(Moments {
                delta_bar: quad.expectation(|d| d),
                pi1: quad.expectation(g_pi1),
                pi2: quad.expectation(g_pi2),
                info1: quad.expectation(g_info1),
                info2: quad.expectation(g_info2),
                diagnostics: None,
            })
        }
        Estimator::Mh => {
            let draws = sample_posterior(t, p, &cfg.sampler)?;
            Ok(Moments {
                delta_bar: draws.posterior_mean(),
                pi1: draws.expectation(g_pi1),
                pi2: draws.expectation(g_pi2),
                info1: draws.expectation(g_info1),
                info2: draws.expectation(g_info2),
                diagnostics: Some(SamplerDiagnostics {
                    acceptance_rate: draws.acceptance_rate,
                    step: draws.final_step,
                }),
            })
        }
    }
}

/// Posterior expectations of the two success probabilities under the
/// fitted conditional density.
pub fn estimate_pi(t: &ContingencyTable, p: &ModelParams, cfg: &FitConfig) -> Result<(f64, f64)> {
    let m = conditional_moments(t, p, cfg)?;
    Ok((m.pi1, m.pi2))
}

/// Variance of each alpha estimate: the expected information
/// E[n_j p_j(delta)(1 - p_j(delta))] taken under f(delta | y1, y2) and
/// used directly, not inverted; the non-inverted form is what the
/// reference standard errors require.
pub fn estimate_alpha_variance(
    t: &ContingencyTable,
    p: &ModelParams,
    cfg: &FitConfig,
) -> Result<(f64, f64)> {
    let m = conditional_moments(t, p, cfg)?;
    Ok((m.info1, m.info2))
}

/// Runs the generalized EM loop on one table, then derives success
/// probabilities, standard errors, the log odds ratio, and the
/// independence test from the converged parameters.
///
/// Both alphas always come from the same final posterior mean, so
/// `log_or` equals the corrected-logit difference exactly, regardless of
/// estimator, seed, or convergence path. Non-convergence within
/// `max_iters` is reported through the `converged` flag, not an error.
pub fn fit_table(t: &ContingencyTable, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    let mut delta_bar = 0.0;
    let (mut alpha1, mut alpha2, _) = m_step(t, delta_bar, cfg.epsilon, cfg.sigma2_floor);
    let mut sigma2 = 1.0;
    let mut iters = 0;
    let mut converged = false;

    while iters < cfg.max_iters {
        iters += 1;
        let params = ModelParams {
            alpha1,
            alpha2,
            sigma2,
        };
        delta_bar = conditional_moments(t, &params, cfg)?.delta_bar;
        let (next1, next2, next_s2) = m_step(t, delta_bar, cfg.epsilon, cfg.sigma2_floor);
        let change = (next1 - alpha1)
            .abs()
            .max((next2 - alpha2).abs())
            .max((next_s2 - sigma2).abs());
        alpha1 = next1;
        alpha2 = next2;
        sigma2 = next_s2;
        if change < cfg.tol {
            converged = true;
            break;
        }
    }

    let fitted = ModelParams {
        alpha1,
        alpha2,
        sigma2,
    };
    let m = conditional_moments(t, &fitted, cfg)?;
    let log_or = alpha1 - alpha2;
    let se_log_or = (m.info1 + m.info2).sqrt();
    let (t_stat, reject) = test_independence(log_or, se_log_or, cfg.level)?;

    Ok(FitResult {
        label: t.label().map(str::to_string),
        alpha1_hat: alpha1,
        alpha2_hat: alpha2,
        sigma2_hat: sigma2,
        pi1_hat: m.pi1,
        pi2_hat: m.pi2,
        se_alpha1: m.info1.sqrt(),
        se_alpha2: m.info2.sqrt(),
        log_or,
        se_log_or,
        t_stat,
        reject,
        iters,
        delta_bar,
        converged,
        diagnostics: m.diagnostics,
    })
}
