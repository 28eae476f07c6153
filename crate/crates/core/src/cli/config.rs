//! Run configuration: a flat JSON object with dotted keys, overridden by
//! command-line flags.
//!
//! ```json
//! { "seed": 7, "data.groups": 100, "chain.iterations": 4000,
//!   "model.methods": ["separate", "efficient"], "priors.spike_sd": 0.025 }
//! ```

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::datagen::GenerativeConfig;
use crate::error::{Error, Result};
use crate::model::{ChainSettings, Method, PriorConfig, SharedGammaRule};

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const SEED_ENV: &str = "HDID_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Methods,
    Grid,
    Both,
}

/// Prior settings left unset fall back to the defaults of the command.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PriorOverrides {
    pub spike_sd: Option<f64>,
    pub slab_df: Option<f64>,
    pub slab_scale: Option<f64>,
    pub p_change: Option<f64>,
    pub p_base: Option<f64>,
    pub p_exposure: Option<f64>,
    pub intercept_var_change: Option<f64>,
    pub intercept_var_base: Option<f64>,
    pub intercept_var_exposure: Option<f64>,
    pub treatment_var: Option<f64>,
    pub shared_gamma: Option<SharedGammaRule>,
}

impl PriorOverrides {
    /// Simulation defaults (spike sd 0.01) or, for real data, the wider
    /// analysis spike (0.025), then the overrides.
    pub fn resolve(&self, k: usize, analysis: bool) -> PriorConfig {
        let mut p = if analysis {
            PriorConfig::analysis(k)
        } else {
            PriorConfig::simulation(k)
        };
        if let Some(z) = self.spike_sd {
            p.spike_sd = vec![z; k];
        }
        if let Some(l) = self.slab_scale {
            p.slab_scale = vec![l; k];
        }
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut p.slab_df, self.slab_df);
        set(&mut p.p_change, self.p_change);
        set(&mut p.p_base, self.p_base);
        set(&mut p.p_exposure, self.p_exposure);
        set(&mut p.intercept_var_change, self.intercept_var_change);
        set(&mut p.intercept_var_base, self.intercept_var_base);
        set(&mut p.intercept_var_exposure, self.intercept_var_exposure);
        set(&mut p.treatment_var, self.treatment_var);
        if let Some(r) = self.shared_gamma {
            p.shared_gamma = r;
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    /// Thread count. Not part of the provenance echo: results do not depend
    /// on it.
    #[serde(skip)]
    pub workers: usize,
    #[serde(skip)]
    pub out: PathBuf,
    pub data: GenerativeConfig,
    /// Empty means the command's default method list.
    pub methods: Vec<String>,
    pub adjust_baseline_for_t: bool,
    pub center_outcomes: bool,
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: usize,
    pub priors: PriorOverrides,
    pub study_kind: StudyKind,
    pub replications: Option<usize>,
    /// Grid cells as `"X1:3"`; empty means all 64.
    pub cells: Vec<String>,
    /// 1-based adjustment order of the bias sweep; empty means the default.
    pub bias_order: Vec<usize>,
    pub individuals_csv: Option<PathBuf>,
    pub groups_csv: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            out: PathBuf::from("."),
            data: GenerativeConfig::study(50),
            methods: Vec::new(),
            adjust_baseline_for_t: true,
            center_outcomes: true,
            iterations: None,
            burn_in: None,
            thin: 1,
            priors: PriorOverrides::default(),
            study_kind: StudyKind::Methods,
            replications: None,
            cells: Vec::new(),
            bias_order: Vec::new(),
            individuals_csv: None,
            groups_csv: None,
        }
    }
}

fn bad(key: &str, what: &str) -> Error {
    Error::Config(format!("key '{key}': expected {what}"))
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    v.as_f64().ok_or_else(|| bad(key, "a number"))
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| bad(key, "a non-negative integer"))
}

fn as_bool(key: &str, v: &Value) -> Result<bool> {
    v.as_bool().ok_or_else(|| bad(key, "true or false"))
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str().ok_or_else(|| bad(key, "a string"))
}

fn as_f64_vec(key: &str, v: &Value) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| bad(key, "an array of numbers"))?
        .iter()
        .map(|x| as_f64(key, x))
        .collect()
}

fn as_string_vec(key: &str, v: &Value) -> Result<Vec<String>> {
    match v {
        Value::String(s) => Ok(vec![s.clone()]),
        Value::Array(xs) => xs.iter().map(|x| as_str(key, x).map(str::to_string)).collect(),
        _ => Err(bad(key, "a string or an array of strings")),
    }
}

impl RunConfig {
    /// Reads a JSON config file on top of the defaults.
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.apply_json(&text)?;
        Ok(cfg)
    }

    pub fn apply_json(&mut self, text: &str) -> Result<()> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        let obj: &Map<String, Value> = value
            .as_object()
            .ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
        for (k, v) in obj {
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Sets one dotted key. Unknown keys are an error.
    pub fn set(&mut self, key: &str, v: &Value) -> Result<()> {
        let d = &mut self.data;
        let p = &mut self.priors;
        match key {
            "seed" => self.seed = v.as_u64().ok_or_else(|| bad(key, "an unsigned integer"))?,
            "workers" => self.workers = as_usize(key, v)?,
            "out" => self.out = PathBuf::from(as_str(key, v)?),
            "data.groups" => d.groups = as_usize(key, v)?,
            "data.individuals" => d.individuals = as_usize(key, v)?,
            "data.alpha" => d.alpha = as_f64_vec(key, v)?,
            "data.beta_base" => d.beta_base = as_f64_vec(key, v)?,
            "data.beta_change" => d.beta_change = as_f64_vec(key, v)?,
            "data.delta_base" => d.delta_base = as_f64(key, v)?,
            "data.delta" => d.delta = as_f64(key, v)?,
            "data.variances.exposure" => d.variances.exposure = as_f64(key, v)?,
            "data.variances.tau2_base" => d.variances.tau2_base = as_f64(key, v)?,
            "data.variances.tau2_change" => d.variances.tau2_change = as_f64(key, v)?,
            "data.variances.sigma2_pre" => d.variances.sigma2_pre = as_f64(key, v)?,
            "data.variances.sigma2_post" => d.variances.sigma2_post = as_f64(key, v)?,
            "model.methods" => self.methods = as_string_vec(key, v)?,
            "model.adjust_baseline_for_t" => self.adjust_baseline_for_t = as_bool(key, v)?,
            "model.center_outcomes" => self.center_outcomes = as_bool(key, v)?,
            "chain.iterations" => self.iterations = Some(as_usize(key, v)?),
            "chain.burn_in" => self.burn_in = Some(as_usize(key, v)?),
            "chain.thin" => self.thin = as_usize(key, v)?,
            "priors.spike_sd" => p.spike_sd = Some(as_f64(key, v)?),
            "priors.slab_df" => p.slab_df = Some(as_f64(key, v)?),
            "priors.slab_scale" => p.slab_scale = Some(as_f64(key, v)?),
            "priors.p_change" => p.p_change = Some(as_f64(key, v)?),
            "priors.p_base" => p.p_base = Some(as_f64(key, v)?),
            "priors.p_exposure" => p.p_exposure = Some(as_f64(key, v)?),
            "priors.intercept_var_change" => p.intercept_var_change = Some(as_f64(key, v)?),
            "priors.intercept_var_base" => p.intercept_var_base = Some(as_f64(key, v)?),
            "priors.intercept_var_exposure" => p.intercept_var_exposure = Some(as_f64(key, v)?),
            "priors.treatment_var" => p.treatment_var = Some(as_f64(key, v)?),
            "priors.shared_gamma" => {
                p.shared_gamma = Some(match as_str(key, v)? {
                    "half_increment" => SharedGammaRule::HalfIncrement,
                    "conjugate" => SharedGammaRule::Conjugate,
                    _ => return Err(bad(key, "\"half_increment\" or \"conjugate\"")),
                })
            }
            "study.kind" => {
                self.study_kind = match as_str(key, v)? {
                    "methods" => StudyKind::Methods,
                    "grid" => StudyKind::Grid,
                    "both" => StudyKind::Both,
                    _ => return Err(bad(key, "\"methods\", \"grid\" or \"both\"")),
                }
            }
            "study.replications" => self.replications = Some(as_usize(key, v)?),
            "study.cells" => self.cells = as_string_vec(key, v)?,
            "bias.order" => {
                self.bias_order = v
                    .as_array()
                    .ok_or_else(|| bad(key, "an array of covariate numbers"))?
                    .iter()
                    .map(|x| as_usize(key, x))
                    .collect::<Result<_>>()?
            }
            "fit.individuals" => self.individuals_csv = Some(PathBuf::from(as_str(key, v)?)),
            "fit.groups" => self.groups_csv = Some(PathBuf::from(as_str(key, v)?)),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn parsed_methods(&self, default: &[Method]) -> Result<Vec<Method>> {
        if self.methods.is_empty() {
            Ok(default.to_vec())
        } else {
            self.methods.iter().map(|m| Method::parse(m)).collect()
        }
    }

    pub fn chain(&self, default: ChainSettings) -> Result<ChainSettings> {
        let iterations = self.iterations.unwrap_or(default.iterations);
        let burn_in = self.burn_in.unwrap_or(if self.iterations.is_some() {
            iterations / 2
        } else {
            default.burn_in
        });
        let chain = ChainSettings {
            iterations,
            burn_in,
            thin: self.thin,
        };
        if chain.thin == 0 || chain.burn_in >= chain.iterations {
            return Err(Error::Config(format!(
                "chain needs thin >= 1 and burn-in < iterations, got {iterations}/{burn_in}/{}",
                chain.thin
            )));
        }
        Ok(chain)
    }

    /// Single-line JSON of everything that affects results.
    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
