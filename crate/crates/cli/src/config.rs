//! Run configuration: one JSON document, training defaults, flag overrides.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use codeshift::corpus::{ShiftKind, DEFAULT_VAL_FRACTION};
use codeshift::extraction::ExtractionConfig;
use codeshift::tasks::{Task, TrainConfig};
use codeshift::uncertainty::{ProbeConfig, DEFAULT_DEGREE, DEFAULT_MC_P, DEFAULT_MC_PASSES, DEFAULT_MUTANTS};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfigs {
    pub cs: TrainConfig,
    pub cc: TrainConfig,
}

impl TrainConfigs {
    pub fn get(&self, task: Task) -> &TrainConfig {
        match task {
            Task::Cs => &self.cs,
            Task::Cc => &self.cc,
        }
    }
}

impl Default for TrainConfigs {
    fn default() -> Self {
        TrainConfigs { cs: TrainConfig::cs_default(), cc: TrainConfig::cc_default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub mc_passes: usize,
    pub mc_dropout: f64,
    pub mutants: usize,
    pub mutation_degree: f64,
    pub probe_epochs: usize,
    pub probe_learning_rate: f64,
    pub probe_batch_size: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        let probe = ProbeConfig::default();
        EstimatorConfig {
            mc_passes: DEFAULT_MC_PASSES,
            mc_dropout: DEFAULT_MC_P,
            mutants: DEFAULT_MUTANTS,
            mutation_degree: DEFAULT_DEGREE,
            probe_epochs: probe.epochs,
            probe_learning_rate: probe.learning_rate,
            probe_batch_size: probe.batch_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Manifest per shift kind, relative to the config file.
    pub manifests: BTreeMap<ShiftKind, PathBuf>,
    /// Output root; not part of the config hash.
    pub work_dir: PathBuf,
    pub seed: u64,
    pub val_fraction: f64,
    pub extraction: ExtractionConfig,
    pub train: TrainConfigs,
    pub estimators: EstimatorConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifests: BTreeMap::new(),
            work_dir: PathBuf::from("work"),
            seed: 0,
            val_fraction: DEFAULT_VAL_FRACTION,
            extraction: ExtractionConfig::default(),
            train: TrainConfigs::default(),
            estimators: EstimatorConfig::default(),
        }
    }
}

/// The configuration in force for one invocation, plus where relative
/// paths resolve from.
#[derive(Debug, Clone)]
pub struct Effective {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    pub hash: String,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<(RunConfig, PathBuf), CliError> {
        match path {
            None => Ok((RunConfig::default(), PathBuf::from("."))),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", p.display())))?;
                let cfg = serde_json::from_str(&text)
                    .map_err(|e| CliError::Validation(format!("config {} is malformed: {e}", p.display())))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                Ok((cfg, if base.as_os_str().is_empty() { PathBuf::from(".") } else { base }))
            }
        }
    }

    /// Applies the master seed everywhere a seed is consumed, then checks
    /// every value.
    pub fn finalize(mut self, base_dir: PathBuf) -> Result<Effective, CliError> {
        self.train.cs.seed = self.seed;
        self.train.cc.seed = self.seed;
        self.validate()?;
        let hash = self.hash();
        Ok(Effective { config: self, base_dir, hash })
    }

    fn validate(&self) -> Result<(), CliError> {
        let v = |m: String| Err(CliError::Validation(m));
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return v(format!("val_fraction must lie in (0, 1), got {}", self.val_fraction));
        }
        for task in Task::ALL {
            self.train.get(task).validate(task).map_err(|e| CliError::Validation(format!("train.{task}: {e}")))?;
        }
        let e = &self.estimators;
        if e.mc_passes == 0 || e.mutants == 0 || e.probe_epochs == 0 || e.probe_batch_size == 0 {
            return v("estimator counts (mc_passes, mutants, probe_epochs, probe_batch_size) must be positive".into());
        }
        if !(0.0..1.0).contains(&e.mc_dropout) {
            return v(format!("mc_dropout {} outside [0, 1)", e.mc_dropout));
        }
        if !(0.0..=1.0).contains(&e.mutation_degree) {
            return v(format!("mutation_degree {} outside [0, 1]", e.mutation_degree));
        }
        let x = &self.extraction;
        if x.max_contexts == 0 || x.max_path_len < 2 || x.window == 0 || x.min_count == 0 {
            return v("extraction limits must be positive (max_path_len ≥ 2)".into());
        }
        Ok(())
    }

    /// Everything except `work_dir`, which only says where outputs go.
    pub fn canonical(&self) -> serde_json::Value {
        let mut doc = serde_json::to_value(self).expect("config serializes");
        doc.as_object_mut().expect("object").remove("work_dir");
        doc
    }

    /// First 16 hex digits of SHA-256 over [`RunConfig::canonical`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().to_string().as_bytes());
        let mut out = String::new();
        for b in &digest[..8] {
            let _ = write!(out, "{b:02x}");
        }
        out
    }
}

impl Effective {
    pub fn manifest_path(&self, shift: ShiftKind) -> Result<PathBuf, CliError> {
        let rel = self.config.manifests.get(&shift).ok_or_else(|| {
            CliError::Validation(format!("no manifest configured for the {shift} shift (set manifests.{shift})"))
        })?;
        Ok(self.base_dir.join(rel))
    }

    pub fn run_dir(&self) -> PathBuf {
        self.base_dir.join(&self.config.work_dir).join(&self.hash)
    }

    pub fn probe_config(&self) -> ProbeConfig {
        let e = &self.config.estimators;
        ProbeConfig {
            epochs: e.probe_epochs,
            learning_rate: e.probe_learning_rate,
            batch_size: e.probe_batch_size,
            seed: self.config.seed,
        }
    }

    /// `{config_hash, config}` for JSON artifacts and checkpoint echoes.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::json!({"config_hash": self.hash, "config": self.config.canonical()})
    }

    pub fn header(&self) -> String {
        format!("config_hash={}", self.hash)
    }
}
