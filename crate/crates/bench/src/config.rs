use std::path::{Path, PathBuf};

use pihqcd::error::CaseError;
use pihqcd::grid_model::{load_case, GridCase};
use pihqcd::hybrid_opt::{OptimizerConfig, ShotSchedule};
use pihqcd::qsim::AnsatzFamily;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VarianceConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub n_step: usize,
    pub trials: usize,
    /// Layers of the topology family; the generic family uses one layer per qubit.
    pub depth: usize,
    pub seed: u64,
}

impl Default for VarianceConfig {
    fn default() -> Self {
        Self { n_min: 4, n_max: 16, n_step: 1, trials: 30, depth: 2, seed: 0 }
    }
}

impl VarianceConfig {
    pub fn n_list(&self) -> Vec<usize> {
        (self.n_min..=self.n_max).step_by(self.n_step.max(1)).collect()
    }
}

/// Everything a command needs; written verbatim into the output manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub command: String,
    pub case: Option<PathBuf>,
    pub bits: usize,
    pub ansatz: AnsatzFamily,
    pub seeds: Vec<u64>,
    /// Shots per expectation for `solve` and `convergence-compare`; empty means exact.
    pub shots: Vec<u64>,
    /// Shot levels of the noise sweep; the exact run is always added as the anchor.
    pub noise_grid: Vec<u64>,
    pub out: PathBuf,
    /// Input directory of `report`.
    pub input: Option<PathBuf>,
    pub optimizer: OptimizerConfig,
    pub variance: VarianceConfig,
    pub anneal_sweeps: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            case: None,
            bits: 2,
            ansatz: AnsatzFamily::Topology,
            seeds: (0..10).collect(),
            shots: Vec::new(),
            noise_grid: vec![64, 256, 1024, 4096],
            out: PathBuf::from("out"),
            input: None,
            optimizer: OptimizerConfig::default(),
            variance: VarianceConfig::default(),
            anneal_sweeps: 500,
        }
    }
}

impl ExperimentConfig {
    /// Optimizer settings for one seed, with the top-level `bits`, `ansatz` and `shots` applied.
    pub fn optimizer_for(&self, seed: u64, shots: Option<u64>) -> OptimizerConfig {
        OptimizerConfig {
            bits: self.bits,
            ansatz: self.ansatz,
            seed,
            shots: shots.map_or(ShotSchedule::Exact, |s| ShotSchedule::Constant { shots: s }),
            ..self.optimizer.clone()
        }
    }

    pub fn solve_shots(&self) -> Option<u64> {
        self.shots.first().copied()
    }

    pub fn case_path(&self) -> Result<&Path> {
        self.case.as_deref().ok_or_else(|| BenchError::Usage(format!("{} needs --case", self.command)))
    }

    pub fn load_case(&self) -> Result<GridCase> {
        let path = self.case_path()?;
        load_case(path).map_err(|e| match e {
            CaseError::Io { source, .. } => BenchError::io(path, source),
            other => BenchError::input(path, other),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(BenchError::Usage("at least one seed is required".into()));
        }
        if self.shots.contains(&0) || self.noise_grid.contains(&0) {
            return Err(BenchError::Usage("shot counts must be positive".into()));
        }
        if self.command == "noise-sweep" && self.noise_grid.is_empty() {
            return Err(BenchError::Usage("noise sweep needs at least one shot level".into()));
        }
        if self.variance.n_min == 0 || self.variance.n_min > self.variance.n_max || self.variance.trials < 2 {
            return Err(BenchError::Usage("variance study needs 1 <= n_min <= n_max and at least 2 trials".into()));
        }
        self.optimizer_for(0, self.solve_shots()).validate().map_err(|e| BenchError::Usage(e.to_string()))
    }
}

/// Recursive merge: objects merge key by key, anything else is replaced.
pub fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Lays a config file over `base`. A manifest written by a previous run is accepted
/// as well; its `config` block is used, except for the output directory.
pub fn apply_config_file(base: &ExperimentConfig, path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    let mut over: Value = serde_json::from_str(&text).map_err(|e| BenchError::input(path, e))?;
    if let Some(mut inner) = over.get_mut("config").filter(|v| v.is_object()).map(Value::take) {
        inner.as_object_mut().expect("checked object").remove("out");
        over = inner;
    }
    if !over.is_object() {
        return Err(BenchError::input(path, "config file must hold a JSON object"));
    }
    let mut merged = serde_json::to_value(base).expect("config serializes");
    merge(&mut merged, over);
    let mut cfg: ExperimentConfig = serde_json::from_value(merged).map_err(|e| BenchError::input(path, e))?;
    cfg.command = base.command.clone();
    Ok(cfg)
}

/// Seed list syntax: `3`, `0..10` (half-open) or `1,4,9`.
pub fn parse_seeds(s: &str) -> std::result::Result<Vec<u64>, String> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| format!("bad seed range start: {e}"))?;
        let b: u64 = b.trim().parse().map_err(|e| format!("bad seed range end: {e}"))?;
        if a >= b {
            return Err(format!("empty seed range {s}"));
        }
        return Ok((a..b).collect());
    }
    s.split(',').map(|p| p.trim().parse::<u64>().map_err(|e| format!("bad seed {p:?}: {e}"))).collect()
}
