//! Synthetic data from the hierarchical model.
//!
//! Covariates are iid standard normal, exposure is `T ~ N(X alpha, 1)`, the
//! group baseline is `mu ~ N(T delta_base + X beta_base, tau2_base)`, the
//! change is `mudiff ~ N(T delta + X beta, tau2_change)`, and individual
//! outcomes are drawn around `mu` (before) and `mu + mudiff` (after).

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GroupObservations, HdidDataset};
use crate::numerics::sample_normal;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralVariances {
    pub exposure: f64,
    pub tau2_base: f64,
    pub tau2_change: f64,
    pub sigma2_pre: f64,
    pub sigma2_post: f64,
}

impl Default for StructuralVariances {
    fn default() -> Self {
        Self {
            exposure: 1.0,
            tau2_base: 1.0,
            tau2_change: 1.0,
            sigma2_pre: 1.0,
            sigma2_post: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerativeConfig {
    /// Number of groups `J`.
    pub groups: usize,
    /// Individuals per group and period.
    pub individuals: usize,
    pub alpha: Vec<f64>,
    pub beta_base: Vec<f64>,
    pub beta_change: Vec<f64>,
    pub delta_base: f64,
    pub delta: f64,
    #[serde(default)]
    pub variances: StructuralVariances,
}

impl GenerativeConfig {
    /// Eight covariates, one per role in [`CovariateRole::ALL`], true effect 1.
    pub fn study(groups: usize) -> Self {
        let roles = CovariateRole::ALL;
        let ind = |f: fn(&CovariateRole) -> bool| -> Vec<f64> {
            roles.iter().map(|r| if f(r) { 1.0 } else { 0.0 }).collect()
        };
        Self {
            groups,
            individuals: 10,
            alpha: ind(|r| r.affects_t),
            beta_base: ind(|r| r.affects_mu),
            beta_change: ind(|r| r.affects_mudiff),
            delta_base: 0.0,
            delta: 1.0,
            variances: StructuralVariances::default(),
        }
    }

    pub fn num_covariates(&self) -> usize {
        self.alpha.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.alpha.len();
        if self.groups == 0 {
            return Err(Error::InvalidParameter("at least one group is required".into()));
        }
        if self.beta_base.len() != k || self.beta_change.len() != k {
            return Err(Error::InvalidParameter(format!(
                "coefficient lengths differ: alpha {k}, beta_base {}, beta_change {}",
                self.beta_base.len(),
                self.beta_change.len()
            )));
        }
        let v = self.variances;
        for (name, x) in [
            ("exposure", v.exposure),
            ("tau2_base", v.tau2_base),
            ("tau2_change", v.tau2_change),
            ("sigma2_pre", v.sigma2_pre),
            ("sigma2_post", v.sigma2_post),
        ] {
            if !(x >= 0.0) || !x.is_finite() {
                return Err(Error::InvalidParameter(format!("variance {name} = {x} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// Which parts of the causal graph a covariate feeds into.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CovariateRole {
    pub affects_t: bool,
    pub affects_mu: bool,
    pub affects_mudiff: bool,
}

impl CovariateRole {
    const fn new(affects_t: bool, affects_mu: bool, affects_mudiff: bool) -> Self {
        Self {
            affects_t,
            affects_mu,
            affects_mudiff,
        }
    }

    /// The eight roles `X1..X8`: X1 affects everything, X2 the exposure and
    /// baseline, X3 the exposure and change, X4 only the exposure, X5 the
    /// baseline and change, X6 only the baseline, X7 only the change, X8
    /// nothing.
    pub const ALL: [CovariateRole; 8] = [
        Self::new(true, true, true),
        Self::new(true, true, false),
        Self::new(true, false, true),
        Self::new(true, false, false),
        Self::new(false, true, true),
        Self::new(false, true, false),
        Self::new(false, false, true),
        Self::new(false, false, false),
    ];

    /// Role `X{index}` for `index` in 1..=8.
    pub fn numbered(index: usize) -> Result<CovariateRole> {
        index
            .checked_sub(1)
            .and_then(|i| Self::ALL.get(i).copied())
            .ok_or_else(|| Error::InvalidParameter(format!("covariate role X{index} does not exist")))
    }

    pub fn label(&self) -> String {
        let i = Self::ALL.iter().position(|r| r == self).expect("every role is listed");
        format!("X{}", i + 1)
    }

    /// Confounder of the treatment effect: affects both exposure and change.
    pub fn is_confounder(&self) -> bool {
        self.affects_t && self.affects_mudiff
    }
}

/// Single generating covariate with the given role, 50 groups of 10.
pub fn single_covariate_config(role: CovariateRole) -> GenerativeConfig {
    let ind = |b: bool| vec![if b { 1.0 } else { 0.0 }];
    GenerativeConfig {
        groups: 50,
        individuals: 10,
        alpha: ind(role.affects_t),
        beta_base: ind(role.affects_mu),
        beta_change: ind(role.affects_mudiff),
        delta_base: 0.0,
        delta: 1.0,
        variances: StructuralVariances::default(),
    }
}

/// Latent quantities behind a generated dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentTruth {
    pub mu: Vec<f64>,
    pub mu_diff: Vec<f64>,
    pub delta: f64,
    pub delta_base: f64,
}

/// Covariates and exposure only. [`generate`] draws these first from the
/// same generator, so both see identical `(X, T)` for a given stream.
pub fn generate_design<R: Rng + ?Sized>(
    config: &GenerativeConfig,
    rng: &mut R,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    config.validate()?;
    let j = config.groups;
    let k = config.num_covariates();
    let mut x = DMatrix::zeros(j, k);
    for r in 0..j {
        for c in 0..k {
            x[(r, c)] = sample_normal(0.0, 1.0, rng)?;
        }
    }
    let mut t = Vec::with_capacity(j);
    for r in 0..j {
        let m: f64 = (0..k).map(|c| x[(r, c)] * config.alpha[c]).sum();
        t.push(sample_normal(m, config.variances.exposure, rng)?);
    }
    Ok((x, t))
}

pub fn generate<R: Rng + ?Sized>(
    config: &GenerativeConfig,
    rng: &mut R,
) -> Result<(HdidDataset, LatentTruth)> {
    let (x, t) = generate_design(config, rng)?;
    let j = config.groups;
    let k = config.num_covariates();
    let v = config.variances;
    let dot = |r: usize, b: &[f64]| -> f64 { (0..k).map(|c| x[(r, c)] * b[c]).sum() };
    let mut mu = Vec::with_capacity(j);
    let mut mu_diff = Vec::with_capacity(j);
    for r in 0..j {
        mu.push(sample_normal(t[r] * config.delta_base + dot(r, &config.beta_base), v.tau2_base, rng)?);
    }
    for r in 0..j {
        mu_diff.push(sample_normal(
            t[r] * config.delta + dot(r, &config.beta_change),
            v.tau2_change,
            rng,
        )?);
    }
    let mut groups = Vec::with_capacity(j);
    for r in 0..j {
        let y_pre = (0..config.individuals)
            .map(|_| sample_normal(mu[r], v.sigma2_pre, rng))
            .collect::<Result<Vec<_>>>()?;
        let y_post = (0..config.individuals)
            .map(|_| sample_normal(mu[r] + mu_diff[r], v.sigma2_post, rng))
            .collect::<Result<Vec<_>>>()?;
        groups.push(GroupObservations {
            id: format!("{}", r + 1),
            y_pre,
            y_post,
        });
    }
    let dataset = HdidDataset {
        groups,
        x,
        treatment: t,
        covariate_names: (1..=k).map(|c| format!("X{c}")).collect(),
    };
    Ok((
        dataset,
        LatentTruth {
            mu,
            mu_diff,
            delta: config.delta,
            delta_base: config.delta_base,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    #[test]
    fn study_shape() {
        let (d, truth) = generate(&GenerativeConfig::study(50), &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(d.num_groups(), 50);
        assert_eq!(d.num_covariates(), 8);
        let pre: usize = d.groups.iter().map(|g| g.y_pre.len()).sum();
        let post: usize = d.groups.iter().map(|g| g.y_post.len()).sum();
        assert_eq!((pre, post), (500, 500));
        assert_eq!(truth.mu.len(), 50);
    }

    #[test]
    fn roles_match_study_vectors() {
        let c = GenerativeConfig::study(10);
        assert_eq!(c.alpha, vec![1., 1., 1., 1., 0., 0., 0., 0.]);
        assert_eq!(c.beta_base, vec![1., 1., 0., 0., 1., 1., 0., 0.]);
        assert_eq!(c.beta_change, vec![1., 0., 1., 0., 1., 0., 1., 0.]);
        let x1 = single_covariate_config(CovariateRole::numbered(1).unwrap());
        assert_eq!((x1.alpha[0], x1.beta_base[0], x1.beta_change[0]), (1.0, 1.0, 1.0));
        let x4 = single_covariate_config(CovariateRole::numbered(4).unwrap());
        assert_eq!((x4.alpha[0], x4.beta_base[0], x4.beta_change[0]), (1.0, 0.0, 0.0));
        let x8 = single_covariate_config(CovariateRole::numbered(8).unwrap());
        assert_eq!((x8.alpha[0], x8.beta_base[0], x8.beta_change[0]), (0.0, 0.0, 0.0));
        assert_eq!(x8.groups, 50);
        assert!(CovariateRole::numbered(9).is_err());
        assert_eq!(CovariateRole::ALL[2].label(), "X3");
    }

    #[test]
    fn same_seed_same_data() {
        let c = GenerativeConfig::study(7);
        let a = generate(&c, &mut RngStream::new(5, 3)).unwrap();
        let b = generate(&c, &mut RngStream::new(5, 3)).unwrap();
        assert_eq!(a.0, b.0);
        let (x, t) = generate_design(&c, &mut RngStream::new(5, 3)).unwrap();
        assert_eq!(x, a.0.x);
        assert_eq!(t, a.0.treatment);
    }

    #[test]
    fn naive_slope_and_exposure_variance() {
        let mut c = GenerativeConfig::study(100_000);
        c.individuals = 0;
        let (d, truth) = generate(&c, &mut RngStream::new(11, 0)).unwrap();
        let n = d.treatment.len() as f64;
        let mt = d.treatment.iter().sum::<f64>() / n;
        let md = truth.mu_diff.iter().sum::<f64>() / n;
        let vt = d.treatment.iter().map(|t| (t - mt).powi(2)).sum::<f64>() / (n - 1.0);
        let cov = d
            .treatment
            .iter()
            .zip(&truth.mu_diff)
            .map(|(t, m)| (t - mt) * (m - md))
            .sum::<f64>()
            / (n - 1.0);
        assert!((vt - 5.0).abs() < 0.1, "{vt}");
        assert!((cov / vt - 1.4).abs() < 0.01, "{}", cov / vt);
    }

    #[test]
    fn independent_when_all_effects_zero() {
        let mut c = GenerativeConfig::study(100_000);
        c.individuals = 0;
        c.alpha = vec![0.0; 8];
        c.beta_base = vec![0.0; 8];
        c.beta_change = vec![0.0; 8];
        c.delta = 0.0;
        let (d, truth) = generate(&c, &mut RngStream::new(12, 0)).unwrap();
        let n = d.treatment.len() as f64;
        let r: f64 = d.treatment.iter().zip(&truth.mu_diff).map(|(t, m)| t * m).sum::<f64>() / n;
        assert!(r.abs() < 3.0 / n.sqrt(), "{r}");
    }

    #[test]
    fn group_means_track_latent_mu() {
        let mut c = GenerativeConfig::study(20);
        c.individuals = 10_000;
        let (d, truth) = generate(&c, &mut RngStream::new(2, 0)).unwrap();
        for (g, mu) in d.groups.iter().zip(&truth.mu) {
            let m = g.y_pre.iter().sum::<f64>() / g.y_pre.len() as f64;
            assert!((m - mu).abs() < 4.0 / 100.0);
        }
    }
}
