//! Experiment and sweep configuration: TOML with strict field checking, so
//! a typo in a probability name fails loudly instead of silently running a
//! default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evo::{GoalPoint, PredictionMode};
use crate::mcdm::PreferenceSpec;
use crate::optim::{Algorithm, CrossoverKind, CtsTie, MoeadAggregation, RunConfig};

/// Top-level configuration file: an experiment, a sweep, or both.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<ExperimentConfig>,
    pub sweep: Option<SweepConfig>,
}

/// Search-pipeline configuration: data source, model-set bounds, goal,
/// per-run settings, run count and decision method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Builtin system id (`s1`..`s7`, `duffing`) ...
    pub system: Option<String>,
    /// ... or a `u,y` CSV to identify instead.
    pub data: Option<PathBuf>,
    /// Estimation split for CSV data (builtin systems carry their own).
    pub estimation_len: Option<usize>,
    /// Sample count for generated systems.
    pub samples: Option<usize>,
    pub n_u: usize,
    pub n_y: usize,
    pub n_l: usize,
    pub xi_lim: usize,
    pub nmse_lim: f64,
    /// Independent optimizer runs pooled into the final archive.
    pub runs: usize,
    #[serde(default)]
    pub prediction: Prediction,
    #[serde(default)]
    pub run: RunSettings,
    #[serde(default)]
    pub mcdm: McdmSettings,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    #[default]
    FreeRun,
    OneStep,
}

impl From<Prediction> for PredictionMode {
    fn from(p: Prediction) -> Self {
        match p {
            Prediction::FreeRun => PredictionMode::FreeRun,
            Prediction::OneStep => PredictionMode::OneStep,
        }
    }
}

/// Per-run optimizer settings; anything omitted takes the published
/// default for the chosen algorithm.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    pub algorithm: Option<Algorithm>,
    pub ps: Option<usize>,
    pub fe_budget: Option<usize>,
    pub p_c: Option<f64>,
    pub p_m: Option<f64>,
    pub crossover: Option<CrossoverKind>,
    pub spea2_k: Option<usize>,
    pub moead_t: Option<usize>,
    pub moead_nr: Option<usize>,
    pub moead_aggregation: Option<MoeadAggregation>,
    pub cts_tie: Option<CtsTie>,
    pub seed: Option<u64>,
}

impl RunSettings {
    pub fn resolve(&self) -> Result<RunConfig> {
        let algorithm = self.algorithm.unwrap_or(Algorithm::Nsga2);
        let mut cfg = RunConfig::defaults_for(algorithm);
        if let Some(v) = self.ps {
            cfg.ps = v;
        }
        if let Some(v) = self.fe_budget {
            cfg.fe_budget = v;
        }
        if let Some(v) = self.p_c {
            cfg.p_c = v;
        }
        if let Some(v) = self.p_m {
            cfg.p_m = v;
        }
        if let Some(v) = self.crossover {
            cfg.crossover = v;
        }
        if let Some(v) = self.spea2_k {
            cfg.spea2_k = v;
        }
        if let Some(v) = self.moead_t {
            cfg.moead_t = v;
        }
        if let Some(v) = self.moead_nr {
            cfg.moead_nr = v;
        }
        if let Some(v) = self.moead_aggregation {
            cfg.moead_aggregation = v;
        }
        if let Some(v) = self.cts_tie {
            cfg.cts_tie = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A-posteriori decision settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McdmSettings {
    pub method: McdmMethod,
    /// Objective importance order for MTD, e.g. `[1, 2]` prefers sparsity.
    pub objective_ranks: Vec<usize>,
    /// Preference intensity on the 1..9 scale.
    pub intensity: f64,
}

impl Default for McdmSettings {
    fn default() -> Self {
        McdmSettings {
            method: McdmMethod::Mmd,
            objective_ranks: vec![1, 2],
            intensity: 5.0,
        }
    }
}

impl McdmSettings {
    pub fn preference(&self) -> Result<PreferenceSpec> {
        PreferenceSpec::new(self.objective_ranks.clone(), self.intensity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McdmMethod {
    Mmd,
    Mtd,
    Both,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        match (&self.system, &self.data) {
            (None, None) => {
                return Err(Error::Config {
                    path: "experiment.system".into(),
                    message: "either `system` or `data` is required".into(),
                })
            }
            (Some(_), Some(_)) => {
                return Err(Error::Config {
                    path: "experiment.system".into(),
                    message: "`system` and `data` are mutually exclusive".into(),
                })
            }
            (None, Some(_)) if self.estimation_len.is_none() => {
                return Err(Error::Config {
                    path: "experiment.estimation_len".into(),
                    message: "required when identifying CSV data".into(),
                })
            }
            _ => {}
        }
        if self.runs == 0 {
            return Err(Error::Config {
                path: "experiment.runs".into(),
                message: "must be >= 1".into(),
            });
        }
        self.goal()?;
        self.run.resolve().map_err(|e| Error::Config {
            path: "experiment.run".into(),
            message: e.to_string(),
        })?;
        crate::narx::generate_model_set(self.n_u, self.n_y, self.n_l).map_err(|e| {
            Error::Config {
                path: "experiment.n_l".into(),
                message: e.to_string(),
            }
        })?;
        Ok(())
    }

    pub fn goal(&self) -> Result<GoalPoint> {
        GoalPoint::new(self.xi_lim, self.nmse_lim).map_err(|e| Error::Config {
            path: "experiment.xi_lim".into(),
            message: e.to_string(),
        })
    }
}

/// Default crossover-probability lattice: 0.1, 0.2, ..., 1.0.
pub fn default_pc_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

/// Default mutation-probability lattice: 10 evenly spaced values across
/// [0.001, 0.02), i.e. 0.001, 0.0031, ..., 0.0199.
pub fn default_pm_grid() -> Vec<f64> {
    (0..10).map(|i| 0.001 + i as f64 * 0.0021).collect()
}

/// Robustness-sweep configuration: a (p_c, p_m) grid evaluated over a set
/// of systems with `runs` pooled runs per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_pc_grid")]
    pub p_c: Vec<f64>,
    #[serde(default = "default_pm_grid")]
    pub p_m: Vec<f64>,
    pub systems: Vec<String>,
    /// Runs per (system, cell); the published robustness setup uses 20.
    pub runs: usize,
    pub algorithm: Algorithm,
    pub crossover: CrossoverKind,
    pub n_u: usize,
    pub n_y: usize,
    pub n_l: usize,
    pub xi_lim: usize,
    pub nmse_lim: f64,
    pub samples: Option<usize>,
    pub ps: Option<usize>,
    pub fe_budget: Option<usize>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.systems.is_empty() {
            return Err(Error::Config {
                path: "sweep.systems".into(),
                message: "need at least one system".into(),
            });
        }
        if self.runs == 0 {
            return Err(Error::Config {
                path: "sweep.runs".into(),
                message: "must be >= 1".into(),
            });
        }
        if self.p_c.is_empty() || self.p_c.iter().any(|v| !(0.1..=1.0).contains(v)) {
            return Err(Error::Config {
                path: "sweep.p_c".into(),
                message: "values must lie in [0.1, 1.0]".into(),
            });
        }
        if self.p_m.is_empty() || self.p_m.iter().any(|v| !(0.001..0.02).contains(v)) {
            return Err(Error::Config {
                path: "sweep.p_m".into(),
                message: "values must lie in [0.001, 0.02)".into(),
            });
        }
        GoalPoint::new(self.xi_lim, self.nmse_lim).map_err(|e| Error::Config {
            path: "sweep.xi_lim".into(),
            message: e.to_string(),
        })?;
        Ok(())
    }

    pub fn cells(&self) -> Vec<(f64, f64)> {
        let mut cells = Vec::with_capacity(self.p_c.len() * self.p_m.len());
        for &pc in &self.p_c {
            for &pm in &self.p_m {
                cells.push((pc, pm));
            }
        }
        cells
    }

    pub fn run_config(&self, pc: f64, pm: f64, seed: u64) -> RunConfig {
        let mut cfg = RunConfig::defaults_for(self.algorithm);
        cfg.crossover = self.crossover;
        cfg.p_c = pc;
        cfg.p_m = pm;
        cfg.seed = seed;
        if let Some(ps) = self.ps {
            cfg.ps = ps;
        }
        if let Some(fe) = self.fe_budget {
            cfg.fe_budget = fe;
        }
        cfg
    }
}

/// Parses a configuration file, reporting unknown or ill-typed fields with
/// their full path.
pub fn load_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let de = toml::de::Deserializer::parse(text).map_err(|e| Error::Config {
        path: "<root>".into(),
        message: e.to_string(),
    })?;
    let cfg: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    if let Some(exp) = &cfg.experiment {
        exp.validate()?;
    }
    if let Some(sweep) = &cfg.sweep {
        sweep.validate()?;
    }
    Ok(cfg)
}
