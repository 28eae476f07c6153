//! Replication studies: bias, MSE and interval coverage of the treatment
//! effect estimate, plus how often each covariate is selected.
//!
//! Every replication `r` owns the stream `RngStream::new(seed, r)`; data
//! and each fit draw from tagged substreams of it. Work is spread over the
//! current rayon pool but results are collected in replication order, so a
//! study is reproducible to the last bit for any number of workers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{generate, single_covariate_config, CovariateRole, GenerativeConfig};
use crate::error::{Error, Result};
use crate::gibbs::Sampler;
use crate::model::{ChainSettings, HdidDataset, Method, ModelSpec, PriorConfig};
use crate::numerics::{mean_and_variance, quantile_sorted, RngStream};

pub(crate) const DATA_TAG: u64 = 0xDA7A;

/// Which covariate sets a fixed-set model uses. Choices 1-8: the covariate
/// enters the baseline model for even choices, the change model for choices
/// 3, 4, 7 and 8, and the baseline is adjusted for treatment from choice 5 on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Choice(u8);

impl Choice {
    pub fn new(c: u8) -> Result<Choice> {
        if (1..=8).contains(&c) {
            Ok(Choice(c))
        } else {
            Err(Error::InvalidParameter(format!("model choice {c} must be in 1..=8")))
        }
    }

    pub fn all() -> impl Iterator<Item = Choice> {
        (1..=8).map(Choice)
    }

    pub fn number(&self) -> u8 {
        self.0
    }

    pub fn in_baseline(&self) -> bool {
        self.0 % 2 == 0
    }

    pub fn in_change(&self) -> bool {
        matches!(self.0, 3 | 4 | 7 | 8)
    }

    pub fn treatment_in_baseline(&self) -> bool {
        self.0 >= 5
    }

    /// Model spec for a dataset whose `k` covariates all follow this choice.
    pub fn spec(&self, k: usize, chain: ChainSettings) -> ModelSpec {
        ModelSpec::new(Method::FixedSet {
            baseline: vec![self.in_baseline(); k],
            change: vec![self.in_change(); k],
        })
        .with_adjust_baseline_for_t(self.treatment_in_baseline())
        .with_chain(chain)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudySettings {
    pub replications: usize,
    pub chain: ChainSettings,
    pub seed: u64,
}

impl StudySettings {
    pub fn new(replications: usize, seed: u64) -> Self {
        Self {
            replications,
            chain: ChainSettings::STUDY,
            seed,
        }
    }
}

/// One model fitted to freshly generated data, replicated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub generative: GenerativeConfig,
    pub model: ModelSpec,
    pub settings: StudySettings,
}

/// Summary of one chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    /// Posterior mean of the treatment effect.
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    /// Per-covariate share of retained draws with the covariate included.
    pub change_inclusion: Vec<f64>,
    pub base_inclusion: Vec<f64>,
}

impl ReplicationResult {
    /// From treatment-effect draws and per-covariate inclusion counts.
    pub fn from_draws(delta: &[f64], change_counts: &[usize], base_counts: &[usize]) -> Self {
        let n = delta.len().max(1) as f64;
        let mut sorted = delta.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (estimate, _) = mean_and_variance(delta);
        let (lower, upper) = if sorted.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            (quantile_sorted(&sorted, 0.025), quantile_sorted(&sorted, 0.975))
        };
        Self {
            estimate,
            lower,
            upper,
            change_inclusion: change_counts.iter().map(|c| *c as f64 / n).collect(),
            base_inclusion: base_counts.iter().map(|c| *c as f64 / n).collect(),
        }
    }

    pub fn covers(&self, truth: f64) -> bool {
        self.lower <= truth && truth <= self.upper
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub label: String,
    /// Replications that produced a result.
    pub replications: usize,
    pub failed: usize,
    pub truth: f64,
    pub bias: f64,
    pub bias_moe: f64,
    pub mse: f64,
    pub mse_moe: f64,
    pub coverage: f64,
    /// Mean number of covariates in the change model.
    pub change_predictors: f64,
    pub base_predictors: f64,
    pub change_inclusion: Vec<f64>,
    pub base_inclusion: Vec<f64>,
}

/// Aggregates replications. Margins of error are `1.96 sd / sqrt(R)`.
pub fn summarize(label: &str, results: &[ReplicationResult], truth: f64, failed: usize) -> StudyReport {
    let r = results.len();
    let errors: Vec<f64> = results.iter().map(|x| x.estimate - truth).collect();
    let squares: Vec<f64> = errors.iter().map(|e| e * e).collect();
    let (bias, var_e) = mean_and_variance(&errors);
    let (mse, var_s) = mean_and_variance(&squares);
    let moe = |v: f64| if r == 0 { f64::NAN } else { 1.96 * (v / r as f64).sqrt() };
    let k = results.first().map_or(0, |x| x.change_inclusion.len());
    let avg = |f: &dyn Fn(&ReplicationResult) -> &Vec<f64>| -> Vec<f64> {
        (0..k)
            .map(|i| results.iter().map(|x| f(x)[i]).sum::<f64>() / r.max(1) as f64)
            .collect()
    };
    let change_inclusion = avg(&|x| &x.change_inclusion);
    let base_inclusion = avg(&|x| &x.base_inclusion);
    StudyReport {
        label: label.to_string(),
        replications: r,
        failed,
        truth,
        bias: if r == 0 { f64::NAN } else { bias },
        bias_moe: moe(var_e),
        mse: if r == 0 { f64::NAN } else { mse },
        mse_moe: moe(var_s),
        coverage: if r == 0 {
            f64::NAN
        } else {
            results.iter().filter(|x| x.covers(truth)).count() as f64 / r as f64
        },
        change_predictors: change_inclusion.iter().sum(),
        base_predictors: base_inclusion.iter().sum(),
        change_inclusion,
        base_inclusion,
    }
}

/// Fits one chain and reduces it to a [`ReplicationResult`].
pub fn fit_replication(
    data: &HdidDataset,
    spec: &ModelSpec,
    priors: &PriorConfig,
    rng: &mut RngStream,
) -> Result<ReplicationResult> {
    let k = data.num_covariates();
    let mut sampler = Sampler::new(data, spec, priors)?;
    let mut delta = Vec::with_capacity(spec.chain.retained());
    let mut change = vec![0usize; k];
    let mut base = vec![0usize; k];
    sampler.run_with(rng, |s| {
        delta.push(s.change.treatment);
        for i in 0..k {
            change[i] += s.change.included[i] as usize;
            base[i] += s.base.included[i] as usize;
        }
    })?;
    Ok(ReplicationResult::from_draws(&delta, &change, &base))
}

/// Stable substream tag for a fit, so that results do not depend on which
/// other methods run alongside.
pub(crate) fn fit_tag(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

fn collect(label: &str, outcomes: Vec<Result<ReplicationResult>>, truth: f64) -> Result<StudyReport> {
    let total = outcomes.len();
    let mut ok = Vec::with_capacity(total);
    let mut first_err = None;
    for o in outcomes {
        match o {
            Ok(r) => ok.push(r),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let failed = total - ok.len();
    if ok.is_empty() {
        if let Some(e) = first_err {
            return Err(e);
        }
    }
    if failed * 100 > total {
        eprintln!(
            "warning: {label}: {failed} of {total} chains failed and were dropped (first: {})",
            first_err.map_or_else(String::new, |e| e.to_string())
        );
    }
    Ok(summarize(label, &ok, truth, failed))
}

/// Replicates one scenario: fresh data each time, one chain per dataset.
pub fn run_scenario(scenario: &ScenarioSpec) -> Result<StudyReport> {
    let st = scenario.settings;
    check_settings(&st)?;
    let gen = &scenario.generative;
    let priors = PriorConfig::simulation(gen.num_covariates());
    let spec = scenario.model.clone().with_chain(st.chain);
    let name = spec.method.name();
    let tag = fit_tag(&name);
    let outcomes: Vec<Result<ReplicationResult>> = (0..st.replications)
        .into_par_iter()
        .map(|r| {
            let rep = RngStream::new(st.seed, r as u64);
            let (data, _) = generate(gen, &mut rep.substream(DATA_TAG))?;
            fit_replication(&data, &spec, &priors, &mut rep.substream(tag))
        })
        .collect();
    collect(&name, outcomes, gen.delta)
}

fn check_settings(st: &StudySettings) -> Result<()> {
    if st.replications == 0 {
        return Err(Error::InvalidParameter("replications must be >= 1".into()));
    }
    Ok(())
}

/// One cell of the role-by-choice grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoiceCell {
    pub role: String,
    pub choice: u8,
    pub report: StudyReport,
}

/// Fixed-set fits with a single generating covariate. Each role gets its own
/// datasets, shared by every choice requested for that role.
pub fn run_choice_cells(
    cells: &[(CovariateRole, Choice)],
    settings: &StudySettings,
) -> Result<Vec<ChoiceCell>> {
    run_choice_cells_with(cells, &PriorConfig::simulation(1), settings)
}

/// [`run_choice_cells`] under single-covariate `priors`.
pub fn run_choice_cells_with(
    cells: &[(CovariateRole, Choice)],
    priors: &PriorConfig,
    settings: &StudySettings,
) -> Result<Vec<ChoiceCell>> {
    check_settings(settings)?;
    if priors.num_covariates() != 1 {
        return Err(Error::Structural(format!(
            "choice cells use one covariate, priors cover {}",
            priors.num_covariates()
        )));
    }
    let mut roles: Vec<CovariateRole> = Vec::new();
    for (role, _) in cells {
        if !roles.contains(role) {
            roles.push(*role);
        }
    }
    let r_count = settings.replications;
    let items: Vec<(usize, usize)> = (0..roles.len())
        .flat_map(|ri| (0..r_count).map(move |r| (ri, r)))
        .collect();
    let per_item: Vec<Vec<Result<ReplicationResult>>> = items
        .par_iter()
        .map(|&(ri, r)| {
            let role = roles[ri];
            let role_index = CovariateRole::ALL.iter().position(|x| *x == role).unwrap_or(0) as u64;
            let gen = single_covariate_config(role);
            let rep = RngStream::new(settings.seed, r as u64).substream(role_index + 1);
            let role_cells: Vec<Choice> =
                cells.iter().filter(|(cr, _)| *cr == role).map(|(_, c)| *c).collect();
            let data = match generate(&gen, &mut rep.substream(DATA_TAG)) {
                Ok((d, _)) => d,
                Err(e) => return role_cells.iter().map(|_| Err(Error::Numerical(e.to_string()))).collect(),
            };
            role_cells
                .iter()
                .map(|choice| {
                    let spec = choice.spec(1, settings.chain);
                    let tag = fit_tag(&format!("choice{}", choice.number()));
                    fit_replication(&data, &spec, priors, &mut rep.substream(tag))
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let mut out = Vec::with_capacity(cells.len());
    for (role, choice) in cells {
        let ri = roles.iter().position(|x| x == role).expect("role listed");
        let pos = cells
            .iter()
            .filter(|(cr, _)| cr == role)
            .position(|(_, c)| c == choice)
            .expect("cell listed");
        let outcomes: Vec<Result<ReplicationResult>> = (0..r_count)
            .map(|r| clone_result(&per_item[ri * r_count + r][pos]))
            .collect();
        let label = format!("{}xC{}", role.label(), choice.number());
        out.push(ChoiceCell {
            role: role.label(),
            choice: choice.number(),
            report: collect(&label, outcomes, 1.0)?,
        });
    }
    Ok(out)
}

fn clone_result(r: &Result<ReplicationResult>) -> Result<ReplicationResult> {
    match r {
        Ok(v) => Ok(v.clone()),
        Err(e) => Err(Error::Numerical(e.to_string())),
    }
}

/// All 64 role-by-choice cells, roles `X1..X8` outermost.
pub fn run_choice_grid(settings: &StudySettings) -> Result<Vec<ChoiceCell>> {
    let cells: Vec<(CovariateRole, Choice)> = CovariateRole::ALL
        .iter()
        .flat_map(|r| Choice::all().map(move |c| (*r, c)))
        .collect();
    run_choice_cells(&cells, settings)
}

/// Methods of the variable-selection study, in reporting order.
pub fn study_methods() -> Vec<Method> {
    vec![
        Method::Full,
        Method::Separate,
        Method::Shared,
        Method::Sufficient,
        Method::Efficient,
        Method::Null,
    ]
}

/// Every method fitted to the same datasets from the eight-covariate design
/// with `groups` groups. Reports come back in the order of `methods`.
pub fn run_method_study(
    groups: usize,
    methods: &[Method],
    settings: &StudySettings,
) -> Result<Vec<StudyReport>> {
    let gen = GenerativeConfig::study(groups);
    let priors = PriorConfig::simulation(gen.num_covariates());
    let specs: Vec<ModelSpec> = methods.iter().map(|m| ModelSpec::new(m.clone())).collect();
    run_method_study_with(&gen, &priors, &specs, settings)
}

/// Several model specs fitted to the same datasets drawn from `gen`. Each
/// spec's chain settings are replaced by those of `settings`.
pub fn run_method_study_with(
    gen: &GenerativeConfig,
    priors: &PriorConfig,
    specs: &[ModelSpec],
    settings: &StudySettings,
) -> Result<Vec<StudyReport>> {
    check_settings(settings)?;
    let specs: Vec<ModelSpec> = specs.iter().map(|s| s.clone().with_chain(settings.chain)).collect();
    let per_rep: Vec<Vec<Result<ReplicationResult>>> = (0..settings.replications)
        .into_par_iter()
        .map(|r| {
            let rep = RngStream::new(settings.seed, r as u64);
            let data = match generate(gen, &mut rep.substream(DATA_TAG)) {
                Ok((d, _)) => d,
                Err(e) => return specs.iter().map(|_| Err(Error::Numerical(e.to_string()))).collect(),
            };
            specs
                .iter()
                .map(|spec| {
                    let tag = fit_tag(&spec.method.name());
                    fit_replication(&data, spec, priors, &mut rep.substream(tag))
                })
                .collect()
        })
        .collect();
    specs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let outcomes = per_rep.iter().map(|v| clone_result(&v[i])).collect();
            collect(&spec.method.name(), outcomes, gen.delta)
        })
        .collect()
}
