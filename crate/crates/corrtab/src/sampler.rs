//! Random-walk Metropolis-Hastings sampling of f(delta | y1, y2).
//!
//! The proposal is a Gaussian step. Step size adapts only during burn-in
//! (multiplied or divided by 1.1 every 50 proposals to steer the window
//! acceptance rate into the target band) and is frozen afterwards, so the
//! retained draws come from a fixed-kernel chain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{log_posterior_kernel, ModelParams};
use crate::rng::{open_unit, standard_normal, stream};
use crate::table::ContingencyTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Number of retained draws M.
    pub samples_m: usize,
    pub burn_in: usize,
    /// Keep every `thin`-th post-burn-in state.
    pub thin: usize,
    pub initial_step: f64,
    /// (lo, hi) acceptance band steered toward during burn-in.
    pub target_acceptance: (f64, f64),
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            samples_m: 10_000,
            burn_in: 2_000,
            thin: 1,
            initial_step: 1.0,
            target_acceptance: (0.2, 0.5),
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_m == 0 {
            return Err(Error::InvalidParameter("samples_m must be >= 1".into()));
        }
        if self.thin == 0 {
            return Err(Error::InvalidParameter("thin must be >= 1".into()));
        }
        if !(self.initial_step > 0.0) {
            return Err(Error::InvalidParameter(
                "initial_step must be positive".into(),
            ));
        }
        let (lo, hi) = self.target_acceptance;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::InvalidParameter(
                "target acceptance must satisfy 0 < lo < hi < 1".into(),
            ));
        }
        Ok(())
    }

    /// The same configuration with the seed replaced by a derived stream.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }
}

/// Retained draws plus chain diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub draws: Vec<f64>,
    /// Post-burn-in acceptance fraction.
    pub acceptance_rate: f64,
    /// Step size in effect after burn-in adaptation froze.
    pub final_step: f64,
}

impl SampleSet {
    /// Arithmetic mean of the draws.
    pub fn posterior_mean(&self) -> f64 {
        self.draws.iter().sum::<f64>() / self.draws.len() as f64
    }

    /// Monte Carlo expectation (1/M) sum g(delta_i).
    pub fn expectation(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.draws.iter().map(|&d| g(d)).sum::<f64>() / self.draws.len() as f64
    }

    /// Autocorrelation-adjusted standard error of the mean of g(delta).
    pub fn mc_standard_error(&self, g: impl Fn(f64) -> f64) -> f64 {
        let values: Vec<f64> = self.draws.iter().map(|&d| g(d)).collect();
        mc_standard_error(&values)
    }
}

const ADAPT_WINDOW: usize = 50;
const ADAPT_FACTOR: f64 = 1.1;

/// Draws `samples_m` states from f(delta | y1, y2) by random-walk MH
/// started at delta = 0. Identical inputs give bit-identical output.
pub fn sample_posterior(
    t: &ContingencyTable,
    p: &ModelParams,
    c: &SamplerConfig,
) -> Result<SampleSet> {
    p.validate()?;
    c.validate()?;
    let kernel = |d: f64| log_posterior_kernel(t, p, d);
    let mut rng = stream(c.seed);

    let mut delta = 0.0;
    let mut log_k = kernel(delta);
    let mut step = c.initial_step;
    let (lo, hi) = c.target_acceptance;

    let mut window_accepts = 0usize;
    for i in 0..c.burn_in {
        if mh_step(&mut rng, &kernel, &mut delta, &mut log_k, step) {
            window_accepts += 1;
        }
        if (i + 1) % ADAPT_WINDOW == 0 {
            let rate = window_accepts as f64 / ADAPT_WINDOW as f64;
            if rate > hi {
                step *= ADAPT_FACTOR;
            } else if rate < lo {
                step /= ADAPT_FACTOR;
            }
            window_accepts = 0;
        }
    }

    let total = c.samples_m * c.thin;
    let mut draws = Vec::with_capacity(c.samples_m);
    let mut accepts = 0usize;
    for i in 0..total {
        if mh_step(&mut rng, &kernel, &mut delta, &mut log_k, step) {
            accepts += 1;
        }
        if (i + 1) % c.thin == 0 {
            draws.push(delta);
        }
    }

    Ok(SampleSet {
        draws,
        acceptance_rate: accepts as f64 / total as f64,
        final_step: step,
    })
}

fn mh_step(
    rng: &mut crate::rng::Stream,
    kernel: &impl Fn(f64) -> f64,
    delta: &mut f64,
    log_k: &mut f64,
    step: f64,
) -> bool {
    let proposal = *delta + step * standard_normal(rng);
    let log_k_prop = kernel(proposal);
    let u = open_unit(rng);
    if u.ln() < log_k_prop - *log_k {
        *delta = proposal;
        *log_k = log_k_prop;
        true
    } else {
        false
    }
}

/// Effective sample size from Geyer's initial positive sequence: pairs of
/// autocorrelations are summed until the first non-positive pair.
pub fn effective_sample_size(values: &[f64]) -> f64 {
    let m = values.len();
    if m < 2 {
        return m as f64;
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let gamma = |lag: usize| -> f64 {
        if lag >= m {
            return 0.0;
        }
        centered[..m - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / m as f64
    };
    let g0 = gamma(0);
    if g0 == 0.0 {
        return m as f64;
    }
    let mut pair_sum = 0.0;
    let mut k = 0;
    loop {
        let pair = (gamma(2 * k) + gamma(2 * k + 1)) / g0;
        if pair <= 0.0 || 2 * k + 1 >= m {
            break;
        }
        pair_sum += pair;
        k += 1;
    }
    let tau = (2.0 * pair_sum - 1.0).max(1.0);
    (m as f64 / tau).min(m as f64)
}

/// Standard error of the Monte Carlo mean: sd / sqrt(effective sample size).
pub fn mc_standard_error(values: &[f64]) -> f64 {
    let m = values.len();
    if m < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
    (var / effective_sample_size(values)).sqrt()
}
