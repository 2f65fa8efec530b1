//! TOML experiment configuration.
//!
//! ```toml
//! format_version = 1
//! seed = 7
//! horizon = 2000
//! spectral = "exact"            # or "bounds" (Gershgorin / trace)
//!
//! [problem.generate]            # or: [problem] file = "problem.json"
//! n = 100
//! blocks = 25                   # agent count for an even split, or a list of sizes
//! norm2 = 100.0
//! cond = 100.0
//! spectrum = "log-uniform"      # or "uniform"
//! r = 0.105                     # target ||r||_2, or an explicit list
//! seed = 1
//!
//! [norm]                        # optional; scalars broadcast to every block
//! weights = 1.0
//! exponents = "inf"
//!
//! [schedule]
//! kind = "bernoulli"            # or "explicit" with updates / transmits lists
//! p_update = 0.1
//! p_transmit = 0.1
//!
//! [delay.default]
//! kind = "fixed"                # "uniform" (min, max), "adversarial", "custom" (delays)
//! delay = 1
//!
//! [init]                        # optional
//! kind = "common-random"
//! low = -1.0
//! high = 1.0
//!
//! [[runs]]
//! name = "unregularized"
//! trace = "unregularized.csv"
//!
//! [[runs]]
//! name = "regularized"
//! trace = "regularized.csv"
//! regularization = { policy = "sample", epsilon = 0.1, k_d = 10.0 }
//! ```
//!
//! Relative problem paths resolve against the config file's directory;
//! relative output paths against the output directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::block_norm::{NormScheme, PNorm};
use crate::error::{Error, Result};
use crate::generate::GenSpec;
use crate::sim::{ActivationSchedule, DelayModel, Initialization};

pub const CONFIG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralSource {
    #[default]
    Exact,
    Bounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn expand(&self, blocks: usize, what: &str) -> Result<Vec<T>> {
        match self {
            OneOrMany::One(v) => Ok(vec![v.clone(); blocks]),
            OneOrMany::Many(v) if v.len() == blocks => Ok(v.clone()),
            OneOrMany::Many(v) => Err(Error::Config(format!("norm {what} lists {} values for {blocks} blocks", v.len()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormConfig {
    pub weights: OneOrMany<f64>,
    pub exponents: OneOrMany<PNorm>,
}

impl NormConfig {
    pub fn scheme(&self, blocks: usize) -> Result<NormScheme> {
        NormScheme::new(self.weights.expand(blocks, "weights")?, self.exponents.expand(blocks, "exponents")?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimFlags {
    pub deliver_before_update: bool,
    pub timestamp_dedup: bool,
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StepsizePolicy {
    /// Each agent draws uniformly from the planned interval.
    #[default]
    Sample,
    Explicit { gammas: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegularizationPolicy {
    #[default]
    None,
    /// Each agent draws `alpha_i` from the interval planned for error target
    /// `epsilon` and condition target `k_d`.
    Sample { epsilon: f64, k_d: f64 },
    Explicit { alphas: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub name: String,
    pub trace: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events: Option<PathBuf>,
    #[serde(default)]
    pub stepsize: StepsizePolicy,
    #[serde(default)]
    pub regularization: RegularizationPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub format_version: u32,
    pub seed: u64,
    pub horizon: u64,
    #[serde(default)]
    pub spectral: SpectralSource,
    pub problem: ProblemSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<NormConfig>,
    pub schedule: ActivationSchedule,
    pub delay: DelayModel,
    #[serde(default)]
    pub init: Initialization,
    #[serde(default)]
    pub sim: SimFlags,
    pub runs: Vec<RunSpec>,
    /// Directory the config was loaded from; anchors relative problem paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != CONFIG_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported config format_version {} (expected {CONFIG_FORMAT_VERSION})",
                self.format_version
            )));
        }
        match (&self.problem.file, &self.problem.generate) {
            (Some(_), None) => {}
            (None, Some(g)) => g.validate().map_err(|e| Error::Config(format!("problem.generate: {e}")))?,
            _ => return Err(Error::Config("exactly one of problem.file and problem.generate must be given".into())),
        }
        if let ActivationSchedule::Bernoulli { .. } = self.schedule {
            self.schedule.validate(0).map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.runs.is_empty() {
            return Err(Error::Config("at least one [[runs]] entry is required".into()));
        }
        let mut names: Vec<&str> = self.runs.iter().map(|r| r.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("run names must be unique".into()));
        }
        Ok(())
    }

    pub fn problem_path(&self) -> Option<PathBuf> {
        self.problem.file.as_ref().map(|f| self.base_dir.join(f))
    }
}
