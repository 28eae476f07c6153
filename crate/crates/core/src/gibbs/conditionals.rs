//! Full conditional distributions of the hierarchical model.
//!
//! Each function returns the parameters of a conditional so that tests can
//! compare them with closed forms; [`ConditionalParams::sample`] draws from it.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{ChainState, GroupObservations, InverseGammaPrior, SharedGammaRule};
use crate::numerics::{
    log_normal_density, sample_from_precision, sample_gamma, sample_inverse_gamma, sample_normal,
    BAYES_FACTOR_MAX, BAYES_FACTOR_MIN,
};

/// Floor on every inverse-gamma rate.
pub const RATE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConditionalParams {
    Normal { mean: f64, variance: f64 },
    /// Density proportional to `x^{-shape-1} exp(-rate/x)`.
    InverseGamma { shape: f64, rate: f64 },
    /// Shape/rate Gamma, mean `shape/rate`.
    Gamma { shape: f64, rate: f64 },
}

impl ConditionalParams {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match *self {
            ConditionalParams::Normal { mean, variance } => sample_normal(mean, variance, rng),
            ConditionalParams::InverseGamma { shape, rate } => sample_inverse_gamma(shape, rate, rng),
            ConditionalParams::Gamma { shape, rate } => sample_gamma(shape, rate, rng),
        }
    }

    /// Infinite for an inverse gamma with shape <= 1.
    pub fn mean(&self) -> f64 {
        match *self {
            ConditionalParams::Normal { mean, .. } => mean,
            ConditionalParams::InverseGamma { shape, rate } => {
                if shape > 1.0 {
                    rate / (shape - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            ConditionalParams::Gamma { shape, rate } => shape / rate,
        }
    }

    /// Infinite for an inverse gamma with shape <= 2.
    pub fn variance(&self) -> f64 {
        match *self {
            ConditionalParams::Normal { variance, .. } => variance,
            ConditionalParams::InverseGamma { shape, rate } => {
                if shape > 2.0 {
                    rate * rate / ((shape - 1.0).powi(2) * (shape - 2.0))
                } else {
                    f64::INFINITY
                }
            }
            ConditionalParams::Gamma { shape, rate } => shape / (rate * rate),
        }
    }
}

fn inverse_gamma(n: f64, sum_sq: f64, prior: Option<InverseGammaPrior>) -> ConditionalParams {
    let (a0, b0) = prior.map_or((0.0, 0.0), |p| (p.shape, p.rate));
    ConditionalParams::InverseGamma {
        shape: a0 + 0.5 * n,
        rate: (b0 + 0.5 * sum_sq).max(RATE_FLOOR),
    }
}

fn sum_and_len(ys: &[f64]) -> (f64, f64) {
    (ys.iter().sum(), ys.len() as f64)
}

/// Baseline mean `mu_j` given the change `mudiff_j`, the variances and the
/// regression prediction `prior_mean` for group `j`.
pub fn mu_conditional(
    group: &GroupObservations,
    j: usize,
    state: &ChainState,
    prior_mean: f64,
) -> ConditionalParams {
    let (s0, n0) = sum_and_len(&group.y_pre);
    let (s1, n1) = sum_and_len(&group.y_post);
    let v0 = state.sigma2_pre[j];
    let v1 = state.sigma2_post[j];
    let t2 = state.tau2_base;
    let md = state.mu_diff[j];
    // n * ybar written as the sum to stay exact when n = 0.
    let num = t2 * (v1 * s0 + v0 * (s1 - n1 * md)) + v0 * v1 * prior_mean;
    let den = t2 * (n0 * v1 + n1 * v0) + v0 * v1;
    ConditionalParams::Normal {
        mean: num / den,
        variance: v0 * v1 * t2 / den,
    }
}

pub fn mudiff_conditional(
    group: &GroupObservations,
    j: usize,
    state: &ChainState,
    prior_mean: f64,
) -> ConditionalParams {
    let (s1, n1) = sum_and_len(&group.y_post);
    let v1 = state.sigma2_post[j];
    let t2 = state.tau2_change;
    let mu = state.mu[j];
    let num = t2 * (s1 - n1 * mu) + v1 * prior_mean;
    let den = n1 * t2 + v1;
    ConditionalParams::Normal {
        mean: num / den,
        variance: v1 * t2 / den,
    }
}

/// Conditionals of the pre- and post-period variances of group `j`. A period
/// with no observations yields `None` and keeps its current value.
pub fn sigma_conditionals(
    group: &GroupObservations,
    j: usize,
    state: &ChainState,
    prior: Option<InverseGammaPrior>,
) -> (Option<ConditionalParams>, Option<ConditionalParams>) {
    let mu = state.mu[j];
    let post_mean = mu + state.mu_diff[j];
    let ss0: f64 = group.y_pre.iter().map(|y| (y - mu).powi(2)).sum();
    let ss1: f64 = group.y_post.iter().map(|y| (y - post_mean).powi(2)).sum();
    let pre = (!group.y_pre.is_empty()).then(|| inverse_gamma(group.y_pre.len() as f64, ss0, prior));
    let post =
        (!group.y_post.is_empty()).then(|| inverse_gamma(group.y_post.len() as f64, ss1, prior));
    (pre, post)
}

/// Conditionals of the between-group variances given the regression
/// predictions for `mu` and `mudiff`. The rate uses the squared norm of the
/// residuals.
pub fn tau_conditionals(
    state: &ChainState,
    base_means: &[f64],
    change_means: &[f64],
    prior: Option<InverseGammaPrior>,
) -> (ConditionalParams, ConditionalParams) {
    let j = state.mu.len() as f64;
    let ss = |xs: &[f64], ms: &[f64]| -> f64 { xs.iter().zip(ms).map(|(x, m)| (x - m).powi(2)).sum() };
    (
        inverse_gamma(j, ss(&state.mu, base_means), prior),
        inverse_gamma(j, ss(&state.mu_diff, change_means), prior),
    )
}

/// Draw of the coefficients of `targets = design * b + e`, `e ~ N(0, resvar)`,
/// under independent `N(0, 1/prior_precision[i])` priors.
pub fn coefficient_block_draw<R: Rng + ?Sized>(
    targets: &[f64],
    design: &DMatrix<f64>,
    resvar: f64,
    prior_precision: &[f64],
    rng: &mut R,
) -> Result<DVector<f64>> {
    if design.nrows() != targets.len() {
        return Err(Error::Structural(format!(
            "design has {} rows, {} targets",
            design.nrows(),
            targets.len()
        )));
    }
    let gram = design.transpose() * design;
    let xty = design.transpose() * DVector::from_column_slice(targets);
    coefficient_block_draw_gram(&gram, &xty, resvar, prior_precision, rng)
}

/// [`coefficient_block_draw`] from precomputed `X'X` and `X'y`.
pub fn coefficient_block_draw_gram<R: Rng + ?Sized>(
    gram: &DMatrix<f64>,
    xty: &DVector<f64>,
    resvar: f64,
    prior_precision: &[f64],
    rng: &mut R,
) -> Result<DVector<f64>> {
    let d = gram.nrows();
    if prior_precision.len() != d || xty.len() != d {
        return Err(Error::Structural(format!(
            "{d} design columns, {} prior precisions, {} cross products",
            prior_precision.len(),
            xty.len()
        )));
    }
    if !(resvar > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "residual variance must be > 0, got {resvar}"
        )));
    }
    let mut q = gram / resvar;
    for (i, p) in prior_precision.iter().enumerate() {
        q[(i, i)] += p;
    }
    sample_from_precision(q, &(xty / resvar), rng)
}

fn log_bayes_factor(coef: f64, spike_var: f64, slab_var: f64) -> f64 {
    let spike = log_normal_density(coef, 0.0, spike_var).unwrap_or(f64::NEG_INFINITY);
    let slab = log_normal_density(coef, 0.0, slab_var).unwrap_or(f64::NEG_INFINITY);
    spike - slab
}

fn prob_from_log_bf(log_bf: f64, p: f64) -> f64 {
    let log_bf = log_bf.clamp(BAYES_FACTOR_MIN.ln(), BAYES_FACTOR_MAX.ln());
    let log_odds_against = log_bf + ((1.0 - p) / p).ln();
    if log_odds_against > 0.0 {
        let e = (-log_odds_against).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + log_odds_against.exp())
    }
}

/// Posterior probability that a coefficient came from the slab rather than
/// the spike: `1 / (1 + BF (1-p)/p)` with `BF` the spike-to-slab density
/// ratio at `coef`.
pub fn inclusion_prob(coef: f64, spike_var: f64, slab_var: f64, p: f64) -> f64 {
    prob_from_log_bf(log_bayes_factor(coef, spike_var, slab_var), p)
}

/// Inclusion probability for one indicator governing two coefficients.
pub fn shared_inclusion_prob(coefs: (f64, f64), spike_var: f64, slab_var: f64, p: f64) -> f64 {
    let lbf = log_bayes_factor(coefs.0, spike_var, slab_var)
        + log_bayes_factor(coefs.1, spike_var, slab_var);
    prob_from_log_bf(lbf, p)
}

/// Conditional of the slab precision `gamma_k` given its indicator and the
/// coefficient(s) it governs. `rule` only matters for two coefficients.
pub fn gamma_conditional(
    included: bool,
    coefs: &[f64],
    nu: f64,
    lambda: f64,
    rule: SharedGammaRule,
) -> ConditionalParams {
    let w = if included { 1.0 } else { 0.0 };
    let count = match rule {
        SharedGammaRule::HalfIncrement => 1.0,
        SharedGammaRule::Conjugate => coefs.len() as f64,
    };
    let ss: f64 = coefs.iter().map(|b| b * b).sum();
    ConditionalParams::Gamma {
        shape: 0.5 * nu + 0.5 * w * count,
        rate: 0.5 * nu * lambda * lambda + 0.5 * w * ss,
    }
}
