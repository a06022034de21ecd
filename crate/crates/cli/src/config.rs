//! Experiment configuration: a single strict JSON document. Unknown keys are
//! rejected so a typo never silently falls back to a default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use distillab_core::datagen::MixtureSpec;
use distillab_core::losses::beta_from_lambda;
use distillab_core::{Error, LossKind, LossSpec, Result};

/// Name of the matched-comparison preset: one temperature `T = 4` for KD,
/// TTM, and WTTM; KD balances with `lambda = 0.9`; TTM takes the equivalent
/// `beta = lambda T / (1 - lambda) = 36`; WTTM uses the same `beta` divided
/// by the training-set mean power sum.
pub const PRESET_FIG1: &str = "paper-fig1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub loss: LossConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teacher_path: Option<PathBuf>,
    pub outputs: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<MixtureConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureConfig {
    pub k: usize,
    pub d: usize,
    pub n_per_class: usize,
    pub test_n_per_class: usize,
    pub separation: f64,
    pub within_std: f64,
    pub seed: u64,
}

impl MixtureConfig {
    pub fn to_spec(&self) -> MixtureSpec {
        MixtureSpec {
            k: self.k,
            d: self.d,
            n_per_class: self.n_per_class,
            separation: self.separation,
            within_std: self.within_std,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Hidden layer widths of the teacher network (input/output dims come
    /// from the data).
    pub teacher_hidden: Vec<usize>,
    /// Hidden layer widths of the student network.
    pub student_hidden: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
    /// `(epoch milestone, multiplicative factor)` pairs.
    #[serde(default)]
    pub schedule: Vec<(usize, f64)>,
    pub seed: u64,
}

/// Loss section: all hyperparameters are optional and fall back to the
/// preset (when named) and then to neutral defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<LossKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub include_ce: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_normalize_by_mean_u: Option<bool>,
}

impl LossConfig {
    /// Resolves the section into a validated [`LossSpec`]: preset values
    /// first, explicit fields override.
    pub fn resolve(&self) -> Result<LossSpec> {
        let kind = self.kind.ok_or_else(|| {
            Error::invalid_argument("loss.kind is required (ce, kd, ttm, wttm, cp, ls)")
        })?;
        let mut spec = LossSpec::new(kind);

        if let Some(preset) = &self.preset {
            if preset != PRESET_FIG1 {
                return Err(Error::invalid_argument(format!(
                    "unknown loss preset `{preset}`; available: {PRESET_FIG1}"
                )));
            }
            let temperature = 4.0;
            let lambda = 0.9;
            spec.gamma = 1.0 / temperature;
            match kind {
                LossKind::Kd => spec.lambda = lambda,
                LossKind::Ttm => spec.beta = beta_from_lambda(lambda, temperature)?,
                LossKind::Wttm => {
                    spec.beta = beta_from_lambda(lambda, temperature)?;
                    spec.beta_normalize_by_mean_u = true;
                }
                other => {
                    return Err(Error::invalid_argument(format!(
                        "preset {PRESET_FIG1} applies to kd/ttm/wttm, not {}",
                        other.name()
                    )));
                }
            }
        }

        if let Some(v) = self.gamma {
            spec.gamma = v;
        }
        if let Some(v) = self.lambda {
            spec.lambda = v;
        }
        if let Some(v) = self.beta {
            spec.beta = v;
        }
        if let Some(v) = self.eta {
            spec.eta = v;
        }
        if let Some(v) = self.epsilon {
            spec.epsilon = v;
        }
        if let Some(v) = self.include_ce {
            spec.include_ce = v;
        }
        if let Some(v) = self.beta_normalize_by_mean_u {
            spec.beta_normalize_by_mean_u = v;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub model_path: PathBuf,
    pub metrics_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary_path: Option<PathBuf>,
}

impl OutputConfig {
    /// Effective summary path: explicit, or `<metrics stem>.summary.json`.
    pub fn summary_path(&self) -> PathBuf {
        self.summary_path.clone().unwrap_or_else(|| {
            let stem = self
                .metrics_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".to_string());
            self.metrics_path.with_file_name(format!("{stem}.summary.json"))
        })
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = distillab_core::error::read_file(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Structural checks shared by every command that runs training.
    pub fn validate(&self) -> Result<()> {
        let has_paths = self.data.train_path.is_some() || self.data.test_path.is_some();
        match (&self.data.mixture, has_paths) {
            (Some(_), true) => {
                return Err(Error::invalid_argument(
                    "data must specify either mixture or train_path/test_path, not both",
                ));
            }
            (None, false) => {
                return Err(Error::invalid_argument(
                    "data must specify a mixture or train_path/test_path",
                ));
            }
            (None, true) => {
                if self.data.train_path.is_none() || self.data.test_path.is_none() {
                    return Err(Error::invalid_argument(
                        "file-backed data needs both train_path and test_path",
                    ));
                }
            }
            (Some(m), false) => {
                m.to_spec().validate()?;
                if m.test_n_per_class == 0 {
                    return Err(Error::invalid_argument("test_n_per_class must be >= 1"));
                }
            }
        }
        if self.train.epochs == 0 {
            return Err(Error::invalid_argument("train.epochs must be >= 1"));
        }
        if self.train.batch_size == 0 {
            return Err(Error::invalid_argument("train.batch_size must be >= 1"));
        }
        Ok(())
    }
}
