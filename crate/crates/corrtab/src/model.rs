//! Latent-variable logit model densities and the deterministic quadrature
//! engine used as the oracle for every posterior expectation.
//!
//! The model puts a shared Gaussian shock `delta ~ N(0, sigma2)` on both
//! arms' logits: given delta, arm j has success probability
//! `p_j(delta) = expit(alpha_j + delta)` and `y_j ~ Binomial(n_j, p_j)`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::table::ContingencyTable;

/// Model parameters: the two arm intercepts and the latent variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub sigma2: f64,
}

impl ModelParams {
    pub fn new(alpha1: f64, alpha2: f64, sigma2: f64) -> Result<Self> {
        let p = Self {
            alpha1,
            alpha2,
            sigma2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha1.is_finite() || !self.alpha2.is_finite() {
            return Err(Error::InvalidParameter("alpha must be finite".into()));
        }
        if !(self.sigma2 > 0.0) {
            return Err(Error::InvalidParameter("sigma2 must be positive".into()));
        }
        Ok(())
    }
}

/// Trapezoid-grid parameters for posterior expectations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Grid half-width in units of the latent standard deviation.
    pub half_width_sd: f64,
    /// Trapezoid node count; must be odd and at least 3.
    pub nodes: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            half_width_sd: 10.0,
            nodes: 4001,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 3 || self.nodes.is_multiple_of(2) {
            return Err(Error::InvalidParameter(
                "quadrature nodes must be odd and >= 3".into(),
            ));
        }
        if !(self.half_width_sd > 0.0) {
            return Err(Error::InvalidParameter(
                "quadrature half width must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// log(1 + e^x) without overflow for any finite x.
pub(crate) fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// expit(alpha + delta), exact in the saturated tails and overflow-free
/// for |alpha + delta| up to at least 700.
pub fn success_prob(alpha: f64, delta: f64) -> f64 {
    let x = alpha + delta;
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn ln_binomial_coeff(n: u64, y: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(y as f64 + 1.0) - ln_gamma((n - y) as f64 + 1.0)
}

/// Log joint density of (y1, y2, delta): two binomial terms with their
/// coefficients plus the N(0, sigma2) density of delta.
pub fn log_likelihood(t: &ContingencyTable, p: &ModelParams, delta: f64) -> f64 {
    let binom = ln_binomial_coeff(t.n1(), t.y1()) + ln_binomial_coeff(t.n2(), t.y2());
    let normal = -0.5 * (2.0 * std::f64::consts::PI).ln()
        - 0.5 * p.sigma2.ln()
        - delta * delta / (2.0 * p.sigma2);
    binom + binomial_log_terms(t, p, delta) + normal
}

/// Log of the unnormalized conditional density f(delta | y1, y2): equal to
/// the log likelihood up to a delta-free additive constant.
pub fn log_posterior_kernel(t: &ContingencyTable, p: &ModelParams, delta: f64) -> f64 {
    binomial_log_terms(t, p, delta) - delta * delta / (2.0 * p.sigma2)
}

fn binomial_log_terms(t: &ContingencyTable, p: &ModelParams, delta: f64) -> f64 {
    let x1 = p.alpha1 + delta;
    let x2 = p.alpha2 + delta;
    t.y1() as f64 * x1 - t.n1() as f64 * log1p_exp(x1) + t.y2() as f64 * x2
        - t.n2() as f64 * log1p_exp(x2)
}

const SCAN_LO: f64 = -20.0;
const SCAN_STEP: f64 = 0.01;
const SCAN_POINTS: usize = 4001; // covers [-20, 20]
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section refinement of a maximum bracketed by [a, b].
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut h = b - a;
    let mut c = b - INV_PHI * h;
    let mut d = a + INV_PHI * h;
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..80 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            h = b - a;
            c = b - INV_PHI * h;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            h = b - a;
            d = a + INV_PHI * h;
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Normalized posterior density tabulated on a uniform trapezoid grid
/// centered on the kernel mode. Building the grid once lets several
/// integrands share the same normalization.
#[derive(Debug, Clone)]
pub struct PosteriorQuadrature {
    nodes: Vec<f64>,
    density: Vec<f64>,
    step: f64,
}

impl PosteriorQuadrature {
    pub fn new(t: &ContingencyTable, p: &ModelParams, spec: &QuadratureSpec) -> Result<Self> {
        p.validate()?;
        spec.validate()?;
        let kernel = |d: f64| log_posterior_kernel(t, p, d);

        // Coarse mode scan over [-20, 20] at step 0.01.
        let mut best = SCAN_LO;
        let mut best_val = f64::NEG_INFINITY;
        for i in 0..SCAN_POINTS {
            let d = SCAN_LO + i as f64 * SCAN_STEP;
            let v = kernel(d);
            if !v.is_finite() {
                return Err(Error::NonFiniteKernel { delta: d });
            }
            if v > best_val {
                best_val = v;
                best = d;
            }
        }
        let mode = golden_max(kernel, best - SCAN_STEP, best + SCAN_STEP);

        let half_width = spec.half_width_sd * p.sigma2.sqrt() + 5.0;
        let step = 2.0 * half_width / (spec.nodes - 1) as f64;
        let mut nodes = Vec::with_capacity(spec.nodes);
        let mut log_kernel = Vec::with_capacity(spec.nodes);
        let mut max_log = f64::NEG_INFINITY;
        for i in 0..spec.nodes {
            let d = mode - half_width + i as f64 * step;
            let v = kernel(d);
            if v.is_nan() || v == f64::INFINITY {
                return Err(Error::NonFiniteKernel { delta: d });
            }
            max_log = max_log.max(v);
            nodes.push(d);
            log_kernel.push(v);
        }
        let mut density: Vec<f64> = log_kernel.iter().map(|v| (v - max_log).exp()).collect();
        let norm = trapezoid(&density, step);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NonFiniteKernel { delta: mode });
        }
        for d in &mut density {
            *d /= norm;
        }
        Ok(Self {
            nodes,
            density,
            step,
        })
    }

    /// E[g(delta) | y1, y2] by trapezoid quadrature of g against the
    /// normalized density.
    pub fn expectation(&self, g: impl Fn(f64) -> f64) -> f64 {
        let weighted: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.density)
            .map(|(&d, &f)| g(d) * f)
            .collect();
        trapezoid(&weighted, self.step)
    }

    /// Integral of the normalized density itself; 1 up to quadrature error.
    pub fn total_mass(&self) -> f64 {
        trapezoid(&self.density, self.step)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
}

fn trapezoid(values: &[f64], step: f64) -> f64 {
    let n = values.len();
    let interior: f64 = values[1..n - 1].iter().sum();
    step * (0.5 * values[0] + interior + 0.5 * values[n - 1])
}

/// One-shot posterior expectation of `g` under f(delta | y1, y2).
pub fn posterior_expectation_quadrature(
    t: &ContingencyTable,
    p: &ModelParams,
    g: impl Fn(f64) -> f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    Ok(PosteriorQuadrature::new(t, p, spec)?.expectation(g))
}
