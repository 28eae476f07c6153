//! Command-line front end: `hdid simulate | fit | study | bias`.
//!
//! Settings come from an optional JSON config (see [`RunConfig`]) with
//! flags taking precedence. Every output file records the config and seed
//! it was produced with; outputs do not depend on `--workers`.

mod config;
mod io;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

pub use config::{PriorOverrides, RunConfig, StudyKind, DEFAULT_SEED, SEED_ENV};
pub use io::{read_dataset, write_dataset};

use crate::datagen::{generate, CovariateRole};
use crate::error::{Error, Result};
use crate::gibbs::run_sampler;
use crate::model::{validate, ChainSettings, Method, ModelSpec, PosteriorSummary};
use crate::numerics::RngStream;
use crate::oracle::{sweep_both, TABLE_A1_ORDER};
use crate::study::{
    fit_tag, run_choice_cells_with, run_method_study_with, study_methods, Choice, StudySettings, DATA_TAG,
};
use io::{fmt_f64, write_json, CsvTable};

/// Replications of a study when neither config nor flags give a number.
pub const DEFAULT_STUDY_REPLICATIONS: usize = 500;
/// Design draws of the bias sweep by default.
pub const DEFAULT_BIAS_REPLICATIONS: usize = 10_000;

#[derive(Debug, Parser)]
#[command(name = "hdid", version, about = "Hierarchical difference-in-differences with covariate selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one dataset (individuals.csv, groups.csv, truth.json).
    Simulate(CommonArgs),
    /// Fit methods to a dataset (posterior_summary.json, credible_intervals.csv).
    Fit(CommonArgs),
    /// Replication study of the methods and/or the fixed-set grid.
    Study(CommonArgs),
    /// Exact bias of nested adjustment sets (bias_table.csv).
    Bias(CommonArgs),
}

#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// JSON file of dotted keys, e.g. {"data.groups": 100}.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed; falls back to the config, then HDID_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads. Results are identical for any value.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Method to run; repeat for several (full, null, separate, shared,
    /// sufficient, efficient).
    #[arg(long = "method")]
    pub methods: Vec<String>,
    /// Number of groups.
    #[arg(long)]
    pub j: Option<usize>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    /// Individuals CSV (fit).
    #[arg(long)]
    pub individuals: Option<PathBuf>,
    /// Groups CSV (fit).
    #[arg(long)]
    pub groups: Option<PathBuf>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Fit(_) => "fit",
            Command::Study(_) => "study",
            Command::Bias(_) => "bias",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Simulate(a) | Command::Fit(a) | Command::Study(a) | Command::Bias(a) => a,
        }
    }
}

/// Defaults, then the config file, then flags. `env_seed` is used only if
/// neither the file nor the flags set a seed.
pub fn resolve_config(args: &CommonArgs, env_seed: Option<&str>) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut seed_set = false;
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        cfg.apply_json(&text)?;
        seed_set = serde_json::from_str::<serde_json::Value>(&text)
            .ok()
            .is_some_and(|v| v.get("seed").is_some());
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    } else if !seed_set {
        if let Some(s) = env_seed {
            cfg.seed = s
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}='{s}' is not an unsigned integer")))?;
        }
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    if !args.methods.is_empty() {
        cfg.methods = args.methods.clone();
    }
    if let Some(j) = args.j {
        cfg.data.groups = j;
    }
    if let Some(r) = args.replications {
        cfg.replications = Some(r);
    }
    if let Some(i) = args.iterations {
        cfg.iterations = Some(i);
    }
    if let Some(b) = args.burnin {
        cfg.burn_in = Some(b);
    }
    if let Some(p) = &args.individuals {
        cfg.individuals_csv = Some(p.clone());
    }
    if let Some(p) = &args.groups {
        cfg.groups_csv = Some(p.clone());
    }
    if cfg.workers == 0 {
        return Err(Error::Config("workers must be >= 1".into()));
    }
    Ok(cfg)
}

/// Resolves the config (reading `HDID_SEED`) and runs the command.
pub fn run(cli: &Cli) -> Result<()> {
    let env_seed = std::env::var(SEED_ENV).ok();
    let cfg = resolve_config(cli.command.args(), env_seed.as_deref())?;
    execute(cli.command.name(), &cfg)
}

/// Runs `command` ("simulate", "fit", "study" or "bias") on a worker pool of
/// `cfg.workers` threads.
pub fn execute(command: &str, cfg: &RunConfig) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    pool.install(|| match command {
        "simulate" => cmd_simulate(cfg),
        "fit" => cmd_fit(cfg),
        "study" => cmd_study(cfg),
        "bias" => cmd_bias(cfg),
        other => Err(Error::Config(format!("unknown command '{other}'"))),
    })
}

fn provenance(command: &str, cfg: &RunConfig) -> String {
    format!("hdid {command} seed={} config={}", cfg.seed, cfg.echo())
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    seed: u64,
    config: &'a RunConfig,
    result: T,
}

fn write_result<T: Serialize>(path: &Path, command: &str, cfg: &RunConfig, result: T) -> Result<()> {
    write_json(
        path,
        &Envelope {
            command,
            seed: cfg.seed,
            config: cfg,
            result,
        },
    )
}

#[derive(Serialize)]
struct Truth<'a> {
    delta: f64,
    delta_base: f64,
    alpha: &'a [f64],
    beta_base: &'a [f64],
    beta_change: &'a [f64],
    mu: &'a [f64],
    mu_diff: &'a [f64],
}

/// One dataset from `cfg.data`. It is the dataset replication 0 of a study
/// with the same seed would see.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let mut rng = RngStream::new(cfg.seed, 0).substream(DATA_TAG);
    let (data, truth) = generate(&cfg.data, &mut rng)?;
    let note = provenance("simulate", cfg);
    write_dataset(&data, &note, &cfg.out.join("individuals.csv"), &cfg.out.join("groups.csv"))?;
    let d = &cfg.data;
    write_result(
        &cfg.out.join("truth.json"),
        "simulate",
        cfg,
        Truth {
            delta: truth.delta,
            delta_base: truth.delta_base,
            alpha: &d.alpha,
            beta_base: &d.beta_base,
            beta_change: &d.beta_change,
            mu: &truth.mu,
            mu_diff: &truth.mu_diff,
        },
    )
}

#[derive(Serialize)]
struct FitResult {
    groups: usize,
    covariates: Vec<String>,
    chain: ChainSettings,
    warnings: Vec<String>,
    summaries: Vec<PosteriorSummary>,
}

fn fit_methods() -> Vec<Method> {
    vec![
        Method::Separate,
        Method::Shared,
        Method::Sufficient,
        Method::Efficient,
        Method::Full,
    ]
}

/// Fits each method to the dataset named by `cfg.individuals_csv` and
/// `cfg.groups_csv` under the analysis priors.
pub fn cmd_fit(cfg: &RunConfig) -> Result<()> {
    let (ind, grp) = match (&cfg.individuals_csv, &cfg.groups_csv) {
        (Some(i), Some(g)) => (i, g),
        _ => return Err(Error::Config("fit needs --individuals and --groups".into())),
    };
    let data = read_dataset(ind, grp)?;
    let k = data.num_covariates();
    let methods = cfg.parsed_methods(&fit_methods())?;
    let priors = cfg.priors.resolve(k, true);
    let chain = cfg.chain(ChainSettings::SINGLE_FIT)?;
    let specs: Vec<ModelSpec> = methods
        .iter()
        .map(|m| {
            ModelSpec::new(m.clone())
                .with_chain(chain)
                .with_adjust_baseline_for_t(cfg.adjust_baseline_for_t)
                .with_centering(cfg.center_outcomes)
        })
        .collect();
    let mut warnings = Vec::new();
    for spec in &specs {
        let report = validate(&data, spec, &priors).into_result()?;
        for w in report.warnings {
            if !warnings.contains(&w) {
                eprintln!("warning: {w}");
                warnings.push(w);
            }
        }
    }
    let summaries: Vec<PosteriorSummary> = specs
        .par_iter()
        .map(|spec| {
            let name = spec.method.name();
            let mut rng = RngStream::new(cfg.seed, 0).substream(fit_tag(&name));
            let out = run_sampler(&data, spec, &priors, &mut rng)?;
            Ok(PosteriorSummary::from_draws(&spec.method, &data.covariate_names, &out.draws))
        })
        .collect::<Result<_>>()?;

    let note = provenance("fit", cfg);
    let mut header = vec!["parameter".to_string()];
    for s in &summaries {
        header.push(format!("{}_lower", s.method));
        header.push(format!("{}_upper", s.method));
    }
    let mut table = CsvTable::new(&note, &header)?;
    let mut params = vec!["delta".to_string()];
    params.extend(data.covariate_names.iter().map(|n| format!("beta[{n}]")));
    for p in &params {
        let mut row = vec![p.clone()];
        for s in &summaries {
            let ps = s.parameter(p).expect("summary lists every coefficient");
            row.push(fmt_f64(ps.lower));
            row.push(fmt_f64(ps.upper));
        }
        table.row(&row)?;
    }
    table.write(&cfg.out.join("credible_intervals.csv"))?;
    write_result(
        &cfg.out.join("posterior_summary.json"),
        "fit",
        cfg,
        FitResult {
            groups: data.num_groups(),
            covariates: data.covariate_names.clone(),
            chain,
            warnings,
            summaries,
        },
    )
}

fn parse_cell(s: &str) -> Result<(CovariateRole, Choice)> {
    let bad = || Error::Config(format!("grid cell '{s}': expected the form \"X1:3\""));
    let (role, choice) = s.split_once(':').ok_or_else(bad)?;
    let r: usize = role.trim().strip_prefix('X').and_then(|n| n.parse().ok()).ok_or_else(bad)?;
    let c: u8 = choice.trim().parse().map_err(|_| bad())?;
    let role = CovariateRole::numbered(r).map_err(|e| Error::Config(e.to_string()))?;
    let choice = Choice::new(c).map_err(|e| Error::Config(e.to_string()))?;
    Ok((role, choice))
}

/// Method study on `cfg.data` and/or the role-by-choice grid, depending on
/// `cfg.study_kind`.
pub fn cmd_study(cfg: &RunConfig) -> Result<()> {
    let settings = StudySettings {
        replications: cfg.replications.unwrap_or(DEFAULT_STUDY_REPLICATIONS),
        chain: cfg.chain(ChainSettings::STUDY)?,
        seed: cfg.seed,
    };
    let note = provenance("study", cfg);
    if matches!(cfg.study_kind, StudyKind::Methods | StudyKind::Both) {
        let k = cfg.data.num_covariates();
        let specs: Vec<ModelSpec> = cfg
            .parsed_methods(&study_methods())?
            .into_iter()
            .map(|m| {
                ModelSpec::new(m)
                    .with_adjust_baseline_for_t(cfg.adjust_baseline_for_t)
                    .with_centering(cfg.center_outcomes)
            })
            .collect();
        let priors = cfg.priors.resolve(k, false);
        let reports = run_method_study_with(&cfg.data, &priors, &specs, &settings)?;
        let mut header: Vec<String> = [
            "method", "groups", "replications", "failed", "bias", "bias_moe", "mse", "mse_moe",
            "coverage", "change_predictors", "base_predictors",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend((1..=k).map(|c| format!("change_X{c}")));
        header.extend((1..=k).map(|c| format!("base_X{c}")));
        let mut table = CsvTable::new(&note, &header)?;
        for r in &reports {
            let mut row = vec![
                r.label.clone(),
                cfg.data.groups.to_string(),
                r.replications.to_string(),
                r.failed.to_string(),
            ];
            row.extend(
                [r.bias, r.bias_moe, r.mse, r.mse_moe, r.coverage, r.change_predictors, r.base_predictors]
                    .iter()
                    .map(|v| fmt_f64(*v)),
            );
            row.extend(r.change_inclusion.iter().chain(&r.base_inclusion).map(|v| fmt_f64(*v)));
            table.row(&row)?;
        }
        table.write(&cfg.out.join("method_study.csv"))?;
        write_result(&cfg.out.join("method_study.json"), "study", cfg, &reports)?;
    }
    if matches!(cfg.study_kind, StudyKind::Grid | StudyKind::Both) {
        let cells: Vec<(CovariateRole, Choice)> = if cfg.cells.is_empty() {
            CovariateRole::ALL
                .iter()
                .flat_map(|r| Choice::all().map(move |c| (*r, c)))
                .collect()
        } else {
            cfg.cells.iter().map(|s| parse_cell(s)).collect::<Result<_>>()?
        };
        let priors = cfg.priors.resolve(1, false);
        let grid = run_choice_cells_with(&cells, &priors, &settings)?;
        let header: Vec<String> = [
            "role", "choice", "replications", "failed", "bias", "bias_moe", "mse", "mse_moe", "coverage",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let mut table = CsvTable::new(&note, &header)?;
        for c in &grid {
            let r = &c.report;
            let mut row = vec![
                c.role.clone(),
                c.choice.to_string(),
                r.replications.to_string(),
                r.failed.to_string(),
            ];
            row.extend([r.bias, r.bias_moe, r.mse, r.mse_moe, r.coverage].iter().map(|v| fmt_f64(*v)));
            table.row(&row)?;
        }
        table.write(&cfg.out.join("choice_grid.csv"))?;
        write_result(&cfg.out.join("choice_grid.json"), "study", cfg, &grid)?;
    }
    Ok(())
}

/// Mean exact bias of nested adjustment sets over draws of the design.
/// The order defaults to the standard one for eight covariates and to
/// `X1..XK` otherwise.
pub fn cmd_bias(cfg: &RunConfig) -> Result<()> {
    let k = cfg.data.num_covariates();
    let order: Vec<usize> = if !cfg.bias_order.is_empty() {
        cfg.bias_order
            .iter()
            .map(|&c| {
                if c == 0 || c > k {
                    Err(Error::Config(format!("bias.order: no covariate X{c}")))
                } else {
                    Ok(c - 1)
                }
            })
            .collect::<Result<_>>()?
    } else if k == TABLE_A1_ORDER.len() + 1 {
        TABLE_A1_ORDER.to_vec()
    } else {
        (0..k).collect()
    };
    let reps = cfg.replications.unwrap_or(DEFAULT_BIAS_REPLICATIONS);
    let rows = sweep_both(&cfg.data, &order, reps, cfg.seed)?;
    let header: Vec<String> = ["label", "no_adjust", "no_adjust_se", "adjust", "adjust_se"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut table = CsvTable::new(&provenance("bias", cfg), &header)?;
    for r in &rows {
        table.row(&[
            r.label.clone(),
            fmt_f64(r.no_adjust.mean),
            fmt_f64(r.no_adjust.se),
            fmt_f64(r.adjust.mean),
            fmt_f64(r.adjust.se),
        ])?;
    }
    table.write(&cfg.out.join("bias_table.csv"))
}
