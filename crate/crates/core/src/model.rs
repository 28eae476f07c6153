//! Datasets, priors, model configuration and sampler state.
//!
//! The two-level model: individual outcomes in group `j` are
//! `N(mu_j, s2pre_j)` before treatment and `N(mu_j + mudiff_j, s2post_j)`
//! after. The group baseline `mu_j` and change `mudiff_j` are in turn
//! regressed on the group covariates `X_j` and the treatment exposure `T_j`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{mean_and_variance, quantile_sorted};

/// Floor applied to the starting within-group variances.
pub const INITIAL_VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupObservations {
    pub id: String,
    pub y_pre: Vec<f64>,
    pub y_post: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HdidDataset {
    pub groups: Vec<GroupObservations>,
    /// `J x K` group-level covariates.
    pub x: DMatrix<f64>,
    /// Treatment exposure per group.
    pub treatment: Vec<f64>,
    pub covariate_names: Vec<String>,
}

impl HdidDataset {
    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_covariates(&self) -> usize {
        self.x.ncols()
    }

    /// Copy of the dataset with `c` added to every outcome.
    pub fn shifted(&self, c: f64) -> HdidDataset {
        let mut out = self.clone();
        for g in &mut out.groups {
            g.y_pre.iter_mut().for_each(|y| *y += c);
            g.y_post.iter_mut().for_each(|y| *y += c);
        }
        out
    }
}

/// Optional proper inverse-gamma prior on the variance components.
/// `None` gives the usual `1/variance` reference prior.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseGammaPrior {
    pub shape: f64,
    pub rate: f64,
}

/// How the shared slab precision is updated when one indicator governs two
/// coefficients.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharedGammaRule {
    /// Shape grows by one half whether one or two coefficients are in the slab.
    #[default]
    HalfIncrement,
    /// Shape grows by one half per coefficient (the conjugate update).
    Conjugate,
}

fn default_diffuse() -> f64 {
    10_000.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// Spike standard deviation `z_k` per covariate.
    pub spike_sd: Vec<f64>,
    /// Slab degrees of freedom `nu`.
    pub slab_df: f64,
    /// Slab scale `lambda_k` per covariate.
    pub slab_scale: Vec<f64>,
    pub p_change: f64,
    pub p_base: f64,
    pub p_exposure: f64,
    /// Prior variance of the change-model intercept.
    pub intercept_var_change: f64,
    /// Prior variance of the baseline-model intercept.
    pub intercept_var_base: f64,
    /// Prior variance of the treatment coefficients in both models.
    pub treatment_var: f64,
    /// Prior variance of the exposure-model intercept.
    #[serde(default = "default_diffuse")]
    pub intercept_var_exposure: f64,
    #[serde(default)]
    pub variance_prior: Option<InverseGammaPrior>,
    #[serde(default)]
    pub shared_gamma: SharedGammaRule,
}

impl PriorConfig {
    /// Settings used for the simulation studies: spike sd 0.01, t(5) slab
    /// with scale 5, inclusion probability 1/2, intercept variance 1e4.
    pub fn simulation(k: usize) -> Self {
        Self::with_spike(k, 0.01)
    }

    /// Same as [`PriorConfig::simulation`] but with the wider 0.025 spike
    /// used when analysing real data.
    pub fn analysis(k: usize) -> Self {
        Self::with_spike(k, 0.025)
    }

    pub fn with_spike(k: usize, spike_sd: f64) -> Self {
        Self {
            spike_sd: vec![spike_sd; k],
            slab_df: 5.0,
            slab_scale: vec![5.0; k],
            p_change: 0.5,
            p_base: 0.5,
            p_exposure: 0.5,
            intercept_var_change: 10_000.0,
            intercept_var_base: 10_000.0,
            treatment_var: 10_000.0,
            intercept_var_exposure: 10_000.0,
            variance_prior: None,
            shared_gamma: SharedGammaRule::HalfIncrement,
        }
    }

    pub fn num_covariates(&self) -> usize {
        self.spike_sd.len()
    }

    /// Prior mean of the slab precision, `1 / lambda_k^2`.
    pub fn slab_precision_mean(&self, k: usize) -> f64 {
        1.0 / (self.slab_scale[k] * self.slab_scale[k])
    }

    fn violations(&self, k: usize, out: &mut Vec<String>) {
        if self.spike_sd.len() != k {
            out.push(format!(
                "priors: spike_sd has {} entries, dataset has {k} covariates",
                self.spike_sd.len()
            ));
        }
        if self.slab_scale.len() != k {
            out.push(format!(
                "priors: slab_scale has {} entries, dataset has {k} covariates",
                self.slab_scale.len()
            ));
        }
        for (i, z) in self.spike_sd.iter().enumerate() {
            if !(*z > 0.0) {
                out.push(format!("priors: spike_sd[{i}] = {z} must be > 0"));
            }
        }
        for (i, l) in self.slab_scale.iter().enumerate() {
            if !(*l > 0.0) {
                out.push(format!("priors: slab_scale[{i}] = {l} must be > 0"));
            }
        }
        if !(self.slab_df > 0.0) {
            out.push(format!("priors: slab_df = {} must be > 0", self.slab_df));
        }
        for (name, p) in [
            ("p_change", self.p_change),
            ("p_base", self.p_base),
            ("p_exposure", self.p_exposure),
        ] {
            if !(p > 0.0 && p < 1.0) {
                out.push(format!("priors: {name} = {p} must lie in (0, 1)"));
            }
        }
        for (name, v) in [
            ("intercept_var_change", self.intercept_var_change),
            ("intercept_var_base", self.intercept_var_base),
            ("treatment_var", self.treatment_var),
            ("intercept_var_exposure", self.intercept_var_exposure),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                out.push(format!("priors: {name} = {v} must be finite and > 0"));
            }
        }
        if let Some(ig) = self.variance_prior {
            if !(ig.shape > 0.0 && ig.rate > 0.0) {
                out.push(format!(
                    "priors: variance prior IG({}, {}) needs positive parameters",
                    ig.shape, ig.rate
                ));
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Every covariate in both models.
    Full,
    /// No covariates in either model.
    Null,
    /// Fixed covariate sets for the baseline and change models.
    FixedSet { baseline: Vec<bool>, change: Vec<bool> },
    Separate,
    Shared,
    Sufficient,
    Efficient,
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Full => "full".into(),
            Method::Null => "null".into(),
            Method::FixedSet { baseline, change } => {
                let fmt = |m: &[bool]| m.iter().map(|b| if *b { '1' } else { '0' }).collect::<String>();
                format!("fixed[{}|{}]", fmt(baseline), fmt(change))
            }
            Method::Separate => "separate".into(),
            Method::Shared => "shared".into(),
            Method::Sufficient => "sufficient".into(),
            Method::Efficient => "efficient".into(),
        }
    }

    /// Parses one of `full`, `null`, `separate`, `shared`, `sufficient`,
    /// `efficient` (case-insensitive).
    pub fn parse(name: &str) -> Result<Method> {
        match name.to_ascii_lowercase().as_str() {
            "full" => Ok(Method::Full),
            "null" => Ok(Method::Null),
            "separate" => Ok(Method::Separate),
            "shared" => Ok(Method::Shared),
            "sufficient" => Ok(Method::Sufficient),
            "efficient" => Ok(Method::Efficient),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }

    pub fn is_selection(&self) -> bool {
        matches!(
            self,
            Method::Separate | Method::Shared | Method::Sufficient | Method::Efficient
        )
    }

    /// Fixed inclusion masks `(baseline, change)` for non-selecting methods.
    pub fn fixed_masks(&self, k: usize) -> Option<(Vec<bool>, Vec<bool>)> {
        match self {
            Method::Full => Some((vec![true; k], vec![true; k])),
            Method::Null => Some((vec![false; k], vec![false; k])),
            Method::FixedSet { baseline, change } => Some((baseline.clone(), change.clone())),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSettings {
    /// Total iterations, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl ChainSettings {
    /// 2000 iterations, 1000 burn-in.
    pub const STUDY: ChainSettings = ChainSettings {
        iterations: 2000,
        burn_in: 1000,
        thin: 1,
    };
    /// 10000 iterations, 5000 burn-in.
    pub const SINGLE_FIT: ChainSettings = ChainSettings {
        iterations: 10_000,
        burn_in: 5000,
        thin: 1,
    };

    pub fn retained(&self) -> usize {
        self.iterations.saturating_sub(self.burn_in) / self.thin.max(1)
    }

    /// Whether iteration `i` (0-based) is kept.
    pub fn keeps(&self, i: usize) -> bool {
        i >= self.burn_in && (i - self.burn_in + 1) % self.thin == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub method: Method,
    pub adjust_baseline_for_t: bool,
    pub chain: ChainSettings,
    /// Run the chain on outcomes centred at their grand mean. The baseline
    /// intercept prior is then centred there too.
    pub center_outcomes: bool,
}

impl ModelSpec {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            adjust_baseline_for_t: true,
            chain: ChainSettings::STUDY,
            center_outcomes: true,
        }
    }

    pub fn with_chain(mut self, chain: ChainSettings) -> Self {
        self.chain = chain;
        self
    }

    pub fn with_adjust_baseline_for_t(mut self, adjust: bool) -> Self {
        self.adjust_baseline_for_t = adjust;
        self
    }

    pub fn with_centering(mut self, center: bool) -> Self {
        self.center_outcomes = center;
        self
    }

    fn violations(&self, k: usize, out: &mut Vec<String>) {
        let c = self.chain;
        if c.iterations == 0 || c.thin == 0 {
            out.push("chain: iterations and thin must be positive".into());
        }
        if c.burn_in >= c.iterations {
            out.push(format!(
                "chain: burn-in {} must be smaller than iterations {}",
                c.burn_in, c.iterations
            ));
        }
        if let Method::FixedSet { baseline, change } = &self.method {
            if baseline.len() != k || change.len() != k {
                out.push(format!(
                    "model: fixed masks have lengths {}/{}, dataset has {k} covariates",
                    baseline.len(),
                    change.len()
                ));
            }
        }
    }
}

/// Intercept, treatment coefficient, covariate coefficients, inclusion
/// indicators and slab precisions of one regression (baseline or change).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionBlock {
    pub intercept: f64,
    pub treatment: f64,
    pub coefs: Vec<f64>,
    pub included: Vec<bool>,
    pub slab_precision: Vec<f64>,
}

impl RegressionBlock {
    pub fn included_count(&self) -> usize {
        self.included.iter().filter(|w| **w).count()
    }
}

/// Exposure model `T = a0 + X a + e`, `e ~ N(0, variance)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExposureBlock {
    pub intercept: f64,
    pub coefs: Vec<f64>,
    pub variance: f64,
    pub included: Vec<bool>,
    pub slab_precision: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub mu: Vec<f64>,
    pub mu_diff: Vec<f64>,
    pub sigma2_pre: Vec<f64>,
    pub sigma2_post: Vec<f64>,
    pub tau2_base: f64,
    pub tau2_change: f64,
    pub base: RegressionBlock,
    pub change: RegressionBlock,
    pub exposure: Option<ExposureBlock>,
}

impl ChainState {
    pub fn is_finite(&self) -> bool {
        let vecs_ok = [&self.mu, &self.mu_diff, &self.sigma2_pre, &self.sigma2_post]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()));
        let block_ok = |b: &RegressionBlock| {
            b.intercept.is_finite()
                && b.treatment.is_finite()
                && b.coefs.iter().all(|x| x.is_finite())
                && b.slab_precision.iter().all(|x| x.is_finite())
        };
        let exposure_ok = self.exposure.as_ref().is_none_or(|e| {
            e.intercept.is_finite()
                && e.variance.is_finite()
                && e.coefs.iter().all(|x| x.is_finite())
                && e.slab_precision.iter().all(|x| x.is_finite())
        });
        vecs_ok
            && self.tau2_base.is_finite()
            && self.tau2_change.is_finite()
            && block_ok(&self.base)
            && block_ok(&self.change)
            && exposure_ok
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<ValidationReport> {
        if self.violations.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidDataset(self.violations.join("; ")))
        }
    }
}

pub fn validate(dataset: &HdidDataset, spec: &ModelSpec, priors: &PriorConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    let v = &mut report.violations;
    let j = dataset.num_groups();
    let k = dataset.num_covariates();

    if j == 0 {
        v.push("dataset has no groups".into());
    }
    if dataset.x.nrows() != j {
        v.push(format!("X has {} rows, dataset has {j} groups", dataset.x.nrows()));
    }
    if dataset.treatment.len() != j {
        v.push(format!(
            "treatment has {} entries, dataset has {j} groups",
            dataset.treatment.len()
        ));
    }
    if dataset.covariate_names.len() != k {
        v.push(format!(
            "{} covariate names for {k} covariates",
            dataset.covariate_names.len()
        ));
    }
    for r in 0..dataset.x.nrows() {
        for c in 0..k {
            let val = dataset.x[(r, c)];
            if !val.is_finite() {
                v.push(format!("X[{r}, {c}] is not finite ({val})"));
            }
        }
    }
    for (i, t) in dataset.treatment.iter().enumerate() {
        if !t.is_finite() {
            v.push(format!("T[{i}] is not finite ({t})"));
        }
    }
    for g in &dataset.groups {
        if g.y_pre.iter().chain(&g.y_post).any(|y| !y.is_finite()) {
            v.push(format!("group '{}' has a non-finite outcome", g.id));
        }
    }
    if j > 1
        && dataset.treatment.len() == j
        && dataset.treatment.iter().all(|t| *t == dataset.treatment[0])
    {
        v.push("treatment has zero variance".into());
    }
    if j > 0 && !dataset.groups.iter().any(|g| !g.y_pre.is_empty()) {
        v.push("no group has a pre-period observation".into());
    }
    if j > 0 && !dataset.groups.iter().any(|g| !g.y_post.is_empty()) {
        v.push("no group has a post-period observation".into());
    }
    priors.violations(k, v);
    spec.violations(k, v);

    let w = &mut report.warnings;
    for g in &dataset.groups {
        if g.y_pre.len() == 1 {
            w.push(format!(
                "group '{}' pre-period: single observation, σ̃_j² weakly identified",
                g.id
            ));
        }
        if g.y_post.len() == 1 {
            w.push(format!(
                "group '{}' post-period: single observation, σ_j² weakly identified",
                g.id
            ));
        }
        if g.y_pre.is_empty() {
            w.push(format!("group '{}' has no pre-period observations", g.id));
        }
        if g.y_post.is_empty() {
            w.push(format!("group '{}' has no post-period observations", g.id));
        }
    }
    if spec.method == Method::Sufficient && j < 2 {
        w.push("fewer than two groups: exposure variance weakly identified".into());
    }
    report
}

/// Starting point of every chain. Uses no randomness.
pub fn initial_state(dataset: &HdidDataset, spec: &ModelSpec, priors: &PriorConfig) -> ChainState {
    let j = dataset.num_groups();
    let k = dataset.num_covariates();
    let mut mu = Vec::with_capacity(j);
    let mut mu_diff = Vec::with_capacity(j);
    let mut s2_pre = Vec::with_capacity(j);
    let mut s2_post = Vec::with_capacity(j);
    for g in &dataset.groups {
        let (m0, v0) = mean_and_variance(&g.y_pre);
        let (m1, v1) = mean_and_variance(&g.y_post);
        mu.push(m0);
        mu_diff.push(if g.y_post.is_empty() { 0.0 } else { m1 - m0 });
        s2_pre.push(start_variance(g.y_pre.len(), v0));
        s2_post.push(start_variance(g.y_post.len(), v1));
    }

    let (base_mask, change_mask) = spec
        .method
        .fixed_masks(k)
        .unwrap_or_else(|| (vec![true; k], vec![true; k]));
    let gammas: Vec<f64> = (0..k).map(|i| priors.slab_precision_mean(i)).collect();
    let block = |included: Vec<bool>| RegressionBlock {
        intercept: 0.0,
        treatment: 0.0,
        coefs: vec![0.0; k],
        included,
        slab_precision: gammas.clone(),
    };
    let exposure = (spec.method == Method::Sufficient).then(|| ExposureBlock {
        intercept: 0.0,
        coefs: vec![0.0; k],
        variance: 1.0,
        included: vec![true; k],
        slab_precision: gammas.clone(),
    });
    // Baseline intercept starts at the average group mean so that the start
    // moves with the data under a location shift.
    let mut base = block(base_mask);
    if j > 0 {
        base.intercept = mu.iter().sum::<f64>() / j as f64;
    }
    ChainState {
        mu,
        mu_diff,
        sigma2_pre: s2_pre,
        sigma2_post: s2_post,
        tau2_base: 1.0,
        tau2_change: 1.0,
        base,
        change: block(change_mask),
        exposure,
    }
}

fn start_variance(n: usize, sample_var: f64) -> f64 {
    if n == 0 {
        1.0
    } else {
        sample_var.max(INITIAL_VARIANCE_FLOOR)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
}

impl ParameterSummary {
    /// Mean, sd, and 2.5% / 50% / 97.5% equal-tailed quantiles.
    pub fn from_draws(name: impl Into<String>, draws: &[f64]) -> Self {
        let (mean, var) = mean_and_variance(draws);
        let mut sorted = draws.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |p| {
            if sorted.is_empty() {
                f64::NAN
            } else {
                quantile_sorted(&sorted, p)
            }
        };
        Self {
            name: name.into(),
            mean,
            sd: var.sqrt(),
            lower: q(0.025),
            median: q(0.5),
            upper: q(0.975),
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub method: String,
    pub draws: usize,
    pub covariate_names: Vec<String>,
    pub parameters: Vec<ParameterSummary>,
    pub change_inclusion: Vec<f64>,
    pub base_inclusion: Vec<f64>,
    pub exposure_inclusion: Option<Vec<f64>>,
}

impl PosteriorSummary {
    pub fn from_draws(method: &Method, covariate_names: &[String], draws: &[ChainState]) -> Self {
        let k = covariate_names.len();
        let col = |f: &dyn Fn(&ChainState) -> f64| draws.iter().map(f).collect::<Vec<f64>>();
        let mut parameters = vec![
            ParameterSummary::from_draws("delta", &col(&|s| s.change.treatment)),
            ParameterSummary::from_draws("delta_base", &col(&|s| s.base.treatment)),
            ParameterSummary::from_draws("intercept_change", &col(&|s| s.change.intercept)),
            ParameterSummary::from_draws("intercept_base", &col(&|s| s.base.intercept)),
            ParameterSummary::from_draws("tau2_change", &col(&|s| s.tau2_change)),
            ParameterSummary::from_draws("tau2_base", &col(&|s| s.tau2_base)),
        ];
        for (i, name) in covariate_names.iter().enumerate() {
            parameters.push(ParameterSummary::from_draws(
                format!("beta[{name}]"),
                &col(&|s| s.change.coefs[i]),
            ));
        }
        for (i, name) in covariate_names.iter().enumerate() {
            parameters.push(ParameterSummary::from_draws(
                format!("beta_base[{name}]"),
                &col(&|s| s.base.coefs[i]),
            ));
        }
        let has_exposure = draws.first().is_some_and(|s| s.exposure.is_some());
        if has_exposure {
            let ex = |s: &ChainState| s.exposure.clone().expect("exposure block");
            parameters.push(ParameterSummary::from_draws(
                "exposure_variance",
                &col(&|s| ex(s).variance),
            ));
            for (i, name) in covariate_names.iter().enumerate() {
                parameters.push(ParameterSummary::from_draws(
                    format!("alpha[{name}]"),
                    &col(&|s| s.exposure.as_ref().map_or(f64::NAN, |e| e.coefs[i])),
                ));
            }
        }
        let rate = |f: &dyn Fn(&ChainState, usize) -> bool| -> Vec<f64> {
            (0..k)
                .map(|i| {
                    if draws.is_empty() {
                        0.0
                    } else {
                        draws.iter().filter(|s| f(s, i)).count() as f64 / draws.len() as f64
                    }
                })
                .collect()
        };
        Self {
            method: method.name(),
            draws: draws.len(),
            covariate_names: covariate_names.to_vec(),
            parameters,
            change_inclusion: rate(&|s, i| s.change.included[i]),
            base_inclusion: rate(&|s, i| s.base.included[i]),
            exposure_inclusion: has_exposure.then(|| {
                rate(&|s, i| s.exposure.as_ref().is_some_and(|e| e.included[i]))
            }),
        }
    }

    pub fn parameter(&self, name: &str) -> Option<&ParameterSummary> {
        self.parameters.iter().find(|p| p.name == name)
    }
}
