//! Joint-distribution ("getting it right") check of a sampler.
//!
//! Two ways of drawing from the joint of parameters and outcomes are
//! compared: independent draws from the prior followed by outcomes, and a
//! chain that alternates one Gibbs sweep with a fresh draw of the outcomes.
//! Both have the same stationary law only if every conditional update is
//! correct, so test statistics must agree in mean.
//!
//! Only methods whose updates are exact conditionals of a proper joint are
//! supported: `Full`, `Null`, fixed sets, `Separate`, and `Shared` with the
//! conjugate slab-precision rule. The variance prior must be proper.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Sampler;
use crate::error::{Error, Result};
use crate::model::{
    ChainState, HdidDataset, InverseGammaPrior, Method, ModelSpec, PriorConfig, RegressionBlock,
    SharedGammaRule,
};
use crate::numerics::{mean_and_variance, sample_gamma, sample_inverse_gamma, sample_normal};

/// Scalar summary of a joint draw.
pub type Statistic = fn(&ChainState) -> f64;

/// Statistics compared by default: both between-group variances, both
/// treatment effects, the first change coefficient and its indicator, and
/// the first group's post-period variance.
pub fn default_statistics() -> Vec<(&'static str, Statistic)> {
    vec![
        ("tau2_change", |s| s.tau2_change),
        ("tau2_base", |s| s.tau2_base),
        ("delta", |s| s.change.treatment),
        ("delta_base", |s| s.base.treatment),
        ("beta[0]", |s| s.change.coefs.first().copied().unwrap_or(0.0)),
        ("w[0]", |s| s.change.included.first().map_or(0.0, |w| *w as u8 as f64)),
        ("sigma2_post[0]", |s| s.sigma2_post[0]),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GewekeStat {
    pub name: String,
    pub prior_mean: f64,
    pub prior_se: f64,
    pub chain_mean: f64,
    /// Batch-means standard error.
    pub chain_se: f64,
    pub z: f64,
}

fn supported(spec: &ModelSpec, priors: &PriorConfig) -> Result<InverseGammaPrior> {
    let vp = priors.variance_prior.ok_or_else(|| {
        Error::InvalidParameter("joint check needs a proper variance prior".into())
    })?;
    match spec.method {
        Method::Full | Method::Null | Method::FixedSet { .. } | Method::Separate => {}
        Method::Shared if priors.shared_gamma == SharedGammaRule::Conjugate => {}
        ref m => {
            return Err(Error::InvalidParameter(format!(
                "joint check does not support {} with these priors",
                m.name()
            )))
        }
    }
    if spec.center_outcomes {
        return Err(Error::InvalidParameter(
            "joint check needs uncentred outcomes (the centre depends on the data)".into(),
        ));
    }
    Ok(vp)
}

fn slab_block<R: Rng + ?Sized>(
    k: usize,
    mask: Option<&[bool]>,
    p_incl: f64,
    priors: &PriorConfig,
    rng: &mut R,
) -> Result<RegressionBlock> {
    let mut blk = RegressionBlock {
        intercept: 0.0,
        treatment: 0.0,
        coefs: vec![0.0; k],
        included: vec![false; k],
        slab_precision: vec![0.0; k],
    };
    let nu = priors.slab_df;
    for c in 0..k {
        let lam = priors.slab_scale[c];
        blk.slab_precision[c] = sample_gamma(0.5 * nu, 0.5 * nu * lam * lam, rng)?;
        match mask {
            Some(m) => {
                blk.included[c] = m[c];
                if m[c] {
                    blk.coefs[c] = sample_normal(0.0, 1.0 / blk.slab_precision[c], rng)?;
                }
            }
            None => {
                blk.included[c] = rng.random::<f64>() < p_incl;
                let var = if blk.included[c] {
                    1.0 / blk.slab_precision[c]
                } else {
                    priors.spike_sd[c].powi(2)
                };
                blk.coefs[c] = sample_normal(0.0, var, rng)?;
            }
        }
    }
    Ok(blk)
}

/// Parameters drawn from the prior. Group-level quantities use the design
/// of `dataset`; its outcomes are ignored.
pub fn draw_from_prior<R: Rng + ?Sized>(
    dataset: &HdidDataset,
    spec: &ModelSpec,
    priors: &PriorConfig,
    rng: &mut R,
) -> Result<ChainState> {
    let vp = supported(spec, priors)?;
    let j = dataset.num_groups();
    let k = dataset.num_covariates();
    let masks = spec.method.fixed_masks(k);
    let (mut base, mut change) = match &masks {
        Some((b, c)) => (
            slab_block(k, Some(b), 0.0, priors, rng)?,
            slab_block(k, Some(c), 0.0, priors, rng)?,
        ),
        None => (
            slab_block(k, None, priors.p_base, priors, rng)?,
            slab_block(k, None, priors.p_change, priors, rng)?,
        ),
    };
    if spec.method == Method::Shared {
        // One indicator and one slab precision per covariate, for both blocks.
        for c in 0..k {
            base.included[c] = change.included[c];
            base.slab_precision[c] = change.slab_precision[c];
            let var = if change.included[c] {
                1.0 / change.slab_precision[c]
            } else {
                priors.spike_sd[c].powi(2)
            };
            base.coefs[c] = sample_normal(0.0, var, rng)?;
        }
    }
    base.intercept = sample_normal(0.0, priors.intercept_var_base, rng)?;
    if spec.adjust_baseline_for_t {
        base.treatment = sample_normal(0.0, priors.treatment_var, rng)?;
    }
    change.intercept = sample_normal(0.0, priors.intercept_var_change, rng)?;
    change.treatment = sample_normal(0.0, priors.treatment_var, rng)?;

    let tau2_base = sample_inverse_gamma(vp.shape, vp.rate, rng)?;
    let tau2_change = sample_inverse_gamma(vp.shape, vp.rate, rng)?;
    let pred = |b: &RegressionBlock, r: usize| -> f64 {
        b.intercept
            + b.treatment * dataset.treatment[r]
            + (0..k).map(|c| dataset.x[(r, c)] * b.coefs[c]).sum::<f64>()
    };
    let mut state = ChainState {
        mu: Vec::with_capacity(j),
        mu_diff: Vec::with_capacity(j),
        sigma2_pre: Vec::with_capacity(j),
        sigma2_post: Vec::with_capacity(j),
        tau2_base,
        tau2_change,
        base: base.clone(),
        change: change.clone(),
        exposure: None,
    };
    for r in 0..j {
        state.mu.push(sample_normal(pred(&base, r), tau2_base, rng)?);
        state.mu_diff.push(sample_normal(pred(&change, r), tau2_change, rng)?);
        state.sigma2_pre.push(sample_inverse_gamma(vp.shape, vp.rate, rng)?);
        state.sigma2_post.push(sample_inverse_gamma(vp.shape, vp.rate, rng)?);
    }
    Ok(state)
}

/// Outcomes given the parameters, with the group sizes of `template`.
pub fn draw_outcomes<R: Rng + ?Sized>(
    template: &HdidDataset,
    state: &ChainState,
    rng: &mut R,
) -> Result<HdidDataset> {
    let mut d = template.clone();
    for (j, g) in d.groups.iter_mut().enumerate() {
        let post = state.mu[j] + state.mu_diff[j];
        for y in g.y_pre.iter_mut() {
            *y = sample_normal(state.mu[j], state.sigma2_pre[j], rng)?;
        }
        for y in g.y_post.iter_mut() {
            *y = sample_normal(post, state.sigma2_post[j], rng)?;
        }
    }
    Ok(d)
}

/// Standard error of the mean of a correlated series from `batches`
/// non-overlapping batch means.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches.max(1);
    if size == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = xs
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let (_, var) = mean_and_variance(&means);
    (var / means.len() as f64).sqrt()
}

/// Runs `draws` independent prior draws and a successive-conditional chain
/// of `draws` steps, and compares the means of `stats`.
pub fn geweke_check<R: Rng + ?Sized>(
    template: &HdidDataset,
    spec: &ModelSpec,
    priors: &PriorConfig,
    stats: &[(&str, Statistic)],
    draws: usize,
    rng: &mut R,
) -> Result<Vec<GewekeStat>> {
    supported(spec, priors)?;
    let mut prior_vals = vec![Vec::with_capacity(draws); stats.len()];
    for _ in 0..draws {
        let s = draw_from_prior(template, spec, priors, rng)?;
        for (i, (_, f)) in stats.iter().enumerate() {
            prior_vals[i].push(f(&s));
        }
    }

    let mut state = draw_from_prior(template, spec, priors, rng)?;
    let mut chain_vals = vec![Vec::with_capacity(draws); stats.len()];
    for _ in 0..draws {
        let data = draw_outcomes(template, &state, rng)?;
        let mut sampler = Sampler::with_state(&data, spec, priors, state)?;
        sampler.step(rng)?;
        state = sampler.state();
        for (i, (_, f)) in stats.iter().enumerate() {
            chain_vals[i].push(f(&state));
        }
    }

    Ok(stats
        .iter()
        .enumerate()
        .map(|(i, (name, _))| {
            let (pm, pv) = mean_and_variance(&prior_vals[i]);
            let prior_se = (pv / draws as f64).sqrt();
            let (cm, _) = mean_and_variance(&chain_vals[i]);
            let chain_se = batch_means_se(&chain_vals[i], 50);
            let se = (prior_se.powi(2) + chain_se.powi(2)).sqrt();
            GewekeStat {
                name: name.to_string(),
                prior_mean: pm,
                prior_se,
                chain_mean: cm,
                chain_se,
                z: if se > 0.0 { (cm - pm) / se } else { 0.0 },
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_means_of_iid_match_the_plain_se() {
        let mut rng = crate::numerics::RngStream::new(3, 0);
        let xs: Vec<f64> = (0..20_000).map(|_| sample_normal(0.0, 4.0, &mut rng).unwrap()).collect();
        let se = batch_means_se(&xs, 50);
        let plain = (4.0f64 / 20_000.0).sqrt();
        assert!((se / plain - 1.0).abs() < 0.35, "{se} vs {plain}");
    }

    #[test]
    fn rejects_unsupported_setups() {
        let d = HdidDataset {
            groups: vec![],
            x: nalgebra::DMatrix::zeros(0, 0),
            treatment: vec![],
            covariate_names: vec![],
        };
        let mut p = PriorConfig::simulation(0);
        let spec = ModelSpec::new(Method::Separate).with_centering(false);
        let mut rng = crate::numerics::RngStream::new(1, 0);
        assert!(draw_from_prior(&d, &spec, &p, &mut rng).is_err());
        p.variance_prior = Some(InverseGammaPrior { shape: 3.0, rate: 2.0 });
        let eff = ModelSpec::new(Method::Efficient).with_centering(false);
        assert!(draw_from_prior(&d, &eff, &p, &mut rng).is_err());
        let shared = ModelSpec::new(Method::Shared).with_centering(false);
        assert!(draw_from_prior(&d, &shared, &p, &mut rng).is_err());
    }
}
