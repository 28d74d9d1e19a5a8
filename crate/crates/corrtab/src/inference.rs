//! Odds-ratio inference: the per-table independence test and sample-size
//! weighted pooling of per-table fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{z_critical, FitResult};
use crate::table::TableSet;

/// log theta = alpha1 - alpha2; the shared latent shock cancels.
pub fn log_odds_ratio(alpha1: f64, alpha2: f64) -> f64 {
    alpha1 - alpha2
}

/// Two-sided z test of independence (log theta = 0).
pub fn test_independence(log_or: f64, se_log_or: f64, level: f64) -> Result<(f64, bool)> {
    if !(se_log_or > 0.0) {
        return Err(Error::ZeroStandardError);
    }
    let t_stat = log_or / se_log_or;
    Ok((t_stat, t_stat.abs() > z_critical(level)))
}

/// k-table estimates pooled by sample-size weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledResult {
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
    pub k: usize,
}

/// Pools per-table fits: arm-specific estimates are weighted by that arm's
/// sample sizes, sigma2 by total table size, and variances by squared
/// normalized weights. The pooled test reuses the two-sided z rule.
pub fn pool_fits(fits: &[FitResult], tables: &TableSet, level: f64) -> Result<PooledResult> {
    if fits.is_empty() {
        return Err(Error::EmptyTableSet);
    }
    if fits.len() != tables.len() {
        return Err(Error::LengthMismatch {
            fits: fits.len(),
            tables: tables.len(),
        });
    }

    let n1: Vec<f64> = tables.iter().map(|t| t.n1() as f64).collect();
    let n2: Vec<f64> = tables.iter().map(|t| t.n2() as f64).collect();
    let total: Vec<f64> = tables.iter().map(|t| (t.n1() + t.n2()) as f64).collect();
    let sum1: f64 = n1.iter().sum();
    let sum2: f64 = n2.iter().sum();
    let sum_total: f64 = total.iter().sum();

    // Normalized weights make k = 1 pooling an exact identity.
    let w1: Vec<f64> = n1.iter().map(|n| n / sum1).collect();
    let w2: Vec<f64> = n2.iter().map(|n| n / sum2).collect();
    let wt: Vec<f64> = total.iter().map(|n| n / sum_total).collect();

    let dot = |w: &[f64], f: &dyn Fn(&FitResult) -> f64| -> f64 {
        w.iter().zip(fits).map(|(wi, fit)| wi * f(fit)).sum()
    };
    let alpha1_hat = dot(&w1, &|f| f.alpha1_hat);
    let alpha2_hat = dot(&w2, &|f| f.alpha2_hat);
    let pi1_hat = dot(&w1, &|f| f.pi1_hat);
    let pi2_hat = dot(&w2, &|f| f.pi2_hat);
    let sigma2_hat = dot(&wt, &|f| f.sigma2_hat);
    let var1: f64 = w1
        .iter()
        .zip(fits)
        .map(|(w, f)| w * w * f.se_alpha1 * f.se_alpha1)
        .sum();
    let var2: f64 = w2
        .iter()
        .zip(fits)
        .map(|(w, f)| w * w * f.se_alpha2 * f.se_alpha2)
        .sum();

    let log_or = log_odds_ratio(alpha1_hat, alpha2_hat);
    let se_log_or = (var1 + var2).sqrt();
    let (t_stat, reject) = test_independence(log_or, se_log_or, level)?;

    Ok(PooledResult {
        alpha1_hat,
        alpha2_hat,
        sigma2_hat,
        pi1_hat,
        pi2_hat,
        se_alpha1: var1.sqrt(),
        se_alpha2: var2.sqrt(),
        log_or,
        se_log_or,
        t_stat,
        reject,
        k: fits.len(),
    })
}
