//! Pipeline configuration: one TOML file with a section per stage.
//!
//! ```toml
//! seed = 7
//!
//! [paths]
//! out_dir = "runs/a"
//!
//! [data]
//! train = 2000
//! validation = 300
//!
//! [data.synth]
//! interaction_prob = 0.7
//!
//! [scbg]
//! beta = 0.1
//! ```
//!
//! Every section and field is optional. Stage seeds are derived from the
//! global `seed`; any `seed` written inside a stage section is replaced.

use std::path::{Path, PathBuf};

use scbg_core::courtesy::RewardSpec;
use scbg_core::eval::EvalConfig;
use scbg_core::predictor::PredictorConfig;
use scbg_core::range::RangeConfig;
use scbg_core::rng;
use scbg_core::scbg::ScbgTrainConfig;
use scbg_core::synth::SynthConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fsio::{self, Provenance};

/// Labels mixed into the global seed, one per stochastic stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    TrainData = 1,
    ValidationData = 2,
    Predictor = 3,
    TrainLabels = 4,
    ValidationLabels = 5,
    Scbg = 6,
    Range = 7,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: PathsConfig,
    pub data: DataConfig,
    pub predictor: PredictorConfig,
    pub labels: LabelConfig,
    pub scbg: ScbgTrainConfig,
    pub range: RangeConfig,
    pub eval: EvalConfig,
}

/// Artifact locations. Unset entries resolve inside `out_dir`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub out_dir: PathBuf,
    pub dataset: Option<PathBuf>,
    pub checkpoints: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self { out_dir: PathBuf::from("out"), dataset: None, checkpoints: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train: usize,
    pub validation: usize,
    pub synth: SynthConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { train: 2000, validation: 300, synth: SynthConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelConfig {
    /// Augmented draws per scenario on top of the ground truth.
    pub m: usize,
    pub reward: RewardSpec,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self { m: 8, reward: RewardSpec::AverageSpeed }
    }
}

/// Resolved artifact paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifacts {
    pub out_dir: PathBuf,
    pub dataset: PathBuf,
    pub predictor: PathBuf,
    pub generator: PathBuf,
    pub range: PathBuf,
    pub train_labels: PathBuf,
    pub validation_labels: PathBuf,
    pub predictor_log: PathBuf,
    pub scbg_log: PathBuf,
    pub range_log: PathBuf,
    pub range_eval: PathBuf,
    pub report_json: PathBuf,
    pub report_txt: PathBuf,
    pub report_csv: PathBuf,
    pub ablation_json: PathBuf,
    pub render_dir: PathBuf,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| {
                    let before = &text[..s.start.min(text.len())];
                    let line = before.matches('\n').count() + 1;
                    (line, s.start - before.rfind('\n').map_or(0, |i| i + 1) + 1)
                })
                .unwrap_or((0, 0));
            let context = (line > 0).then(|| text.lines().nth(line - 1).unwrap_or("").to_string());
            Error::Parse { path: path.to_path_buf(), line, column, message: e.message().to_string(), context }
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("pipeline configs always encode")
    }

    pub fn validate(&self) -> Result<()> {
        self.data.synth.validate()?;
        self.predictor.validate()?;
        self.scbg.validate()?;
        self.range.validate()?;
        if self.data.train == 0 {
            return Err(Error::Invalid("data.train must be at least 1".into()));
        }
        if self.labels.m < self.scbg.augmentations {
            return Err(Error::Invalid(format!(
                "labels.m ({}) must cover scbg.augmentations ({})",
                self.labels.m, self.scbg.augmentations
            )));
        }
        if self.eval.quantile_grid.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(Error::Invalid("eval.quantile_grid entries must lie in [0, 1]".into()));
        }
        if self.eval.arbitrary_points < 2 || self.eval.histogram_bins == 0 {
            return Err(Error::Invalid("eval.arbitrary_points must be >= 2 and eval.histogram_bins >= 1".into()));
        }
        Ok(())
    }

    pub fn stage_seed(&self, stage: Stage) -> u64 {
        rng::derive(self.seed, stage as u64)
    }

    /// Copy with every stage seed derived from the global seed.
    pub fn seeded(&self) -> Self {
        let mut c = self.clone();
        c.predictor.seed = self.stage_seed(Stage::Predictor);
        c.scbg.seed = self.stage_seed(Stage::Scbg);
        c.range.seed = self.stage_seed(Stage::Range);
        c
    }

    /// SHA-256 over everything except paths, so relocating a run keeps it.
    pub fn hash(&self) -> String {
        let mut c = self.seeded();
        c.paths = PathsConfig::default();
        let digest = Sha256::digest(serde_json::to_vec(&c).expect("pipeline configs always encode"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn provenance(&self) -> Provenance {
        Provenance { seed: self.seed, config_hash: self.hash() }
    }

    pub fn artifacts(&self) -> Artifacts {
        let out = self.paths.out_dir.clone();
        let ck = self.paths.checkpoints.clone().unwrap_or_else(|| out.join("checkpoints"));
        Artifacts {
            dataset: self.paths.dataset.clone().unwrap_or_else(|| out.join("dataset.json")),
            predictor: ck.join("predictor.json"),
            generator: ck.join("generator.json"),
            range: ck.join("range.json"),
            train_labels: out.join("labels_train.jsonl"),
            validation_labels: out.join("labels_validation.jsonl"),
            predictor_log: out.join("logs/predictor.csv"),
            scbg_log: out.join("logs/scbg.csv"),
            range_log: out.join("logs/range.csv"),
            range_eval: out.join("range_eval.csv"),
            report_json: out.join("report.json"),
            report_txt: out.join("report.txt"),
            report_csv: out.join("report_scenarios.csv"),
            ablation_json: out.join("ablation.json"),
            render_dir: out.join("render"),
            out_dir: out,
        }
    }

    /// Writes the effective configuration next to the artifacts.
    pub fn save_effective(&self) -> Result<()> {
        fsio::write(&self.paths.out_dir.join("config.toml"), self.to_toml())
    }
}
