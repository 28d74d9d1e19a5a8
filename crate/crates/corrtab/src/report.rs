//! Fit report assembly and rendering (JSON, aligned text, CSV).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimator::{fit_table, FitConfig, FitResult};
use crate::inference::{pool_fits, PooledResult};
use crate::rng::derive_seed;
use crate::table::TableSet;

/// Per-table fits plus the optional combined row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub dataset: String,
    pub tables: Vec<FitResult>,
    pub combined: Option<PooledResult>,
}

/// Fits every table of a set (in parallel, one derived sampler stream per
/// table: seed_i = derive_seed(master, i)) and pools unless disabled.
pub fn fit_table_set(set: &TableSet, cfg: &FitConfig, pool: bool) -> Result<FitReport> {
    use rayon::prelude::*;
    let fits: Vec<FitResult> = set
        .tables()
        .par_iter()
        .enumerate()
        .map(|(i, t)| fit_table(t, &cfg.with_seed(derive_seed(cfg.sampler.seed, i as u64))))
        .collect::<Result<Vec<_>>>()?;
    let combined = if pool {
        Some(pool_fits(&fits, set, cfg.level)?)
    } else {
        None
    };
    Ok(FitReport {
        dataset: set.name().to_string(),
        tables: fits,
        combined,
    })
}

impl FitReport {
    pub fn any_non_converged(&self) -> bool {
        self.tables.iter().any(|f| !f.converged)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Aligned text mirroring the reference tables' column layout:
    /// alpha1(se), alpha2(se), pi1, pi2, log OR(se), T, decision.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10} {:>19} {:>19} {:>8} {:>8} {:>19} {:>9} {:>7}",
            "trial", "alpha1(se)", "alpha2(se)", "pi1", "pi2", "log_or(se)", "T", "reject"
        );
        for (i, f) in self.tables.iter().enumerate() {
            let label = f.label.clone().unwrap_or_else(|| (i + 1).to_string());
            let _ = writeln!(out, "{}", text_row(&label, &row_values(f)));
        }
        if let Some(c) = &self.combined {
            let _ = writeln!(out, "{}", text_row("combined", &pooled_values(c)));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "trial,alpha1_hat,se_alpha1,alpha2_hat,se_alpha2,pi1_hat,pi2_hat,\
             log_or,se_log_or,t_stat,reject,sigma2_hat,delta_bar,iters,converged\n",
        );
        for (i, f) in self.tables.iter().enumerate() {
            let label = f.label.clone().unwrap_or_else(|| (i + 1).to_string());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                label,
                f.alpha1_hat,
                f.se_alpha1,
                f.alpha2_hat,
                f.se_alpha2,
                f.pi1_hat,
                f.pi2_hat,
                f.log_or,
                f.se_log_or,
                f.t_stat,
                u8::from(f.reject),
                f.sigma2_hat,
                f.delta_bar,
                f.iters,
                u8::from(f.converged),
            );
        }
        if let Some(c) = &self.combined {
            let _ = writeln!(
                out,
                "combined,{},{},{},{},{},{},{},{},{},{},{},,,",
                c.alpha1_hat,
                c.se_alpha1,
                c.alpha2_hat,
                c.se_alpha2,
                c.pi1_hat,
                c.pi2_hat,
                c.log_or,
                c.se_log_or,
                c.t_stat,
                u8::from(c.reject),
                c.sigma2_hat,
            );
        }
        out
    }
}

struct RowValues {
    alpha1: f64,
    se1: f64,
    alpha2: f64,
    se2: f64,
    pi1: f64,
    pi2: f64,
    log_or: f64,
    se_log_or: f64,
    t_stat: f64,
    reject: bool,
}

fn row_values(f: &FitResult) -> RowValues {
    RowValues {
        alpha1: f.alpha1_hat,
        se1: f.se_alpha1,
        alpha2: f.alpha2_hat,
        se2: f.se_alpha2,
        pi1: f.pi1_hat,
        pi2: f.pi2_hat,
        log_or: f.log_or,
        se_log_or: f.se_log_or,
        t_stat: f.t_stat,
        reject: f.reject,
    }
}

fn pooled_values(c: &PooledResult) -> RowValues {
    RowValues {
        alpha1: c.alpha1_hat,
        se1: c.se_alpha1,
        alpha2: c.alpha2_hat,
        se2: c.se_alpha2,
        pi1: c.pi1_hat,
        pi2: c.pi2_hat,
        log_or: c.log_or,
        se_log_or: c.se_log_or,
        t_stat: c.t_stat,
        reject: c.reject,
    }
}

fn text_row(label: &str, v: &RowValues) -> String {
    format!(
        "{:<10} {:>19} {:>19} {:>8.4} {:>8.4} {:>19} {:>9.4} {:>7}",
        label,
        format!("{:.4} ({:.4})", v.alpha1, v.se1),
        format!("{:.4} ({:.4})", v.alpha2, v.se2),
        v.pi1,
        v.pi2,
        format!("{:.4} ({:.4})", v.log_or, v.se_log_or),
        v.t_stat,
        u8::from(v.reject),
    )
}
