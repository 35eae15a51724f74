//! Experiment configuration files.
//!
//! A config is TOML:
//!
//! ```toml
//! n = 3
//! horizon = 2000
//! trials = 500          # default 100
//! seed = 7              # default 0
//! threshold = 1e-8      # convergence statistics
//! ln_floor = 1e-300
//!
//! [x0]
//! values = [1.0, 0.0, 0.0]
//! # or: generator = "unit-spike"
//! # or: generator = "uniform-random", sub_seed = 3   (entries in [-1, 1))
//!
//! [family]
//! kind = "two-phase-ring"   # static | complete | two-phase-ring | periodic | schedule
//! prob = 0.5
//! # static:   matrix = [[...], ...], B = 1, epsilon = 1.0
//! # periodic: phases = [[[...]], ...], dwell = 1, B = 2, epsilon = 0.5
//! # schedule: path = "phases.txt"   (relative to the config file)
//!
//! [diagnostics]             # all default to false
//! f_metric = false
//! products = false
//! brute_cut = false
//!
//! [output]
//! dir = "out"               # default "out"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::montecarlo::{Diagnostics, ExperimentConfig, DEFAULT_LN_FLOOR};
use crate::randgen::{FamilyKind, ProbabilitySequence, RandomStream};
use crate::stochmat::SquareMatrix;

pub const DEFAULT_TRIALS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum X0Generator {
    UnitSpike,
    UniformRandom { sub_seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum X0Spec {
    Values { values: Vec<f64> },
    Generated(X0Generator),
}

impl X0Spec {
    pub fn materialize(&self, n: usize) -> Vec<f64> {
        match self {
            X0Spec::Values { values } => values.clone(),
            X0Spec::Generated(X0Generator::UnitSpike) => {
                let mut v = vec![0.0; n];
                if let Some(first) = v.first_mut() {
                    *first = 1.0;
                }
                v
            }
            X0Spec::Generated(X0Generator::UniformRandom { sub_seed }) => {
                let mut rng = RandomStream::new(*sub_seed, 0);
                (0..n).map(|_| 2.0 * rng.uniform() - 1.0).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    Static {
        matrix: Vec<Vec<f64>>,
        #[serde(rename = "B", default = "one")]
        block: usize,
        epsilon: f64,
    },
    Complete {
        prob: f64,
    },
    TwoPhaseRing {
        prob: f64,
    },
    Periodic {
        phases: Vec<Vec<Vec<f64>>>,
        #[serde(default = "one")]
        dwell: usize,
        #[serde(rename = "B")]
        block: usize,
        epsilon: f64,
    },
    Schedule {
        path: PathBuf,
    },
}

fn one() -> usize {
    1
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn default_threshold() -> f64 {
    1e-8
}

fn default_ln_floor() -> f64 {
    DEFAULT_LN_FLOOR
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: default_out() }
    }
}

/// Raw file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n: usize,
    pub horizon: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_ln_floor")]
    pub ln_floor: f64,
    pub x0: X0Spec,
    pub family: FamilySpec,
    #[serde(default)]
    pub diagnostics: Diagnostics,
    #[serde(default)]
    pub output: OutputSpec,
}

/// A parsed configuration with the schedule loaded and `x0` materialized.
#[derive(Debug, Clone)]
pub struct Config {
    pub source: ConfigFile,
    pub family: ProbabilitySequence,
    pub x0: Vec<f64>,
}

impl Config {
    /// Parses TOML text; relative schedule paths resolve against `base`.
    pub fn from_str_with_base(text: &str, base: &Path) -> Result<Self> {
        let source: ConfigFile = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
                .unwrap_or(0);
            Error::Parse {
                line,
                msg: e.message().to_string(),
            }
        })?;
        Self::from_file(source, base)
    }

    pub fn from_file(source: ConfigFile, base: &Path) -> Result<Self> {
        let family = build_family(&source.family, source.n, base)?;
        if family.n() != source.n {
            return Err(Error::Config(format!(
                "family: schedule has n = {}, config has n = {}",
                family.n(),
                source.n
            )));
        }
        let x0 = source.x0.materialize(source.n);
        if x0.len() != source.n {
            return Err(Error::Config(format!(
                "x0: length {} does not match n = {}",
                x0.len(),
                source.n
            )));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("x0: entries must be finite".into()));
        }
        if source.horizon == 0 {
            return Err(Error::Config("horizon: must be >= 1".into()));
        }
        if source.trials == 0 {
            return Err(Error::Config("trials: must be >= 1".into()));
        }
        Ok(Self { source, family, x0 })
    }

    pub fn n(&self) -> usize {
        self.source.n
    }

    pub fn seed(&self) -> u64 {
        self.source.seed
    }

    pub fn output_dir(&self) -> &Path {
        &self.source.output.dir
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.source.diagnostics
    }

    pub fn experiment(&self) -> ExperimentConfig {
        let s = &self.source;
        let mut cfg = ExperimentConfig::new(self.family.clone(), self.x0.clone(), s.horizon, s.trials, s.seed);
        cfg.diagnostics = self.diagnostics();
        cfg.threshold = s.threshold;
        cfg.ln_floor = s.ln_floor;
        cfg
    }
}

fn build_family(spec: &FamilySpec, n: usize, base: &Path) -> Result<ProbabilitySequence> {
    let family = match spec {
        FamilySpec::Static { matrix, block, epsilon } => {
            ProbabilitySequence::static_matrix(SquareMatrix::from_rows(matrix.clone())?, *block, *epsilon)
        }
        FamilySpec::Complete { prob } => ProbabilitySequence::complete(n, *prob),
        FamilySpec::TwoPhaseRing { prob } => ProbabilitySequence::two_phase_ring(n, *prob),
        FamilySpec::Periodic {
            phases,
            dwell,
            block,
            epsilon,
        } => {
            let phases = phases
                .iter()
                .map(|p| SquareMatrix::from_rows(p.clone()))
                .collect::<Result<Vec<_>>>()?;
            ProbabilitySequence::new(FamilyKind::Periodic, phases, *dwell, *block, *epsilon)
        }
        FamilySpec::Schedule { path } => return ProbabilitySequence::load(&base.join(path)),
    };
    family.map_err(|e| Error::Config(format!("family: {e}")))
}

/// Reads and parses a config file.
pub fn parse_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    Config::from_str_with_base(&text, base)
}
