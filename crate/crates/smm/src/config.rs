//! Run configuration, read from TOML.
//!
//! Every key is optional and defaults to the benchmark settings: six groups
//! of six neurons, noise `sigma = 0.01`, the progress-strip rule with `k = 5`
//! and `tau = 1e-3`, 21 trials and a validation patience of 100 epochs.
//!
//! ```toml
//! seed = 0
//!
//! [model]
//! variant = "smm"          # mm | smm | smm64
//! groups = 6
//! neurons = 6
//!
//! [data]
//! task = "f_sqrt"          # f_sq | f_sqrt | f_sig | poly_d<d>; or set `path`
//!
//! [train]
//! stop = "progress"        # progress | validation
//!
//! [bench]
//! suite = "table1"         # table1 | table2 | uci
//! trials = 21
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use smm_core::bench::TaskKind;
use smm_core::train::RpropConfig;
use smm_core::{Architecture, AuxActivation, GroupShape, MonotonicityMask, StopRule, TrainConfig, Variant, WeightEncoding};

use crate::{io, Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum VariantName {
    Mm,
    #[default]
    Smm,
    Smm64,
}

impl From<VariantName> for Variant {
    fn from(v: VariantName) -> Self {
        match v {
            VariantName::Mm => Variant::Mm,
            VariantName::Smm => Variant::Smm,
            VariantName::Smm64 => Variant::Smm64,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingName {
    #[default]
    Exponential,
    Squared,
    ExpLinear,
}

impl From<EncodingName> for WeightEncoding {
    fn from(e: EncodingName) -> Self {
        match e {
            EncodingName::Exponential => WeightEncoding::Exponential,
            EncodingName::Squared => WeightEncoding::Squared,
            EncodingName::ExpLinear => WeightEncoding::ExpLinear,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxActivationName {
    #[default]
    Tanh,
    Logistic,
}

impl From<AuxActivationName> for AuxActivation {
    fn from(a: AuxActivationName) -> Self {
        match a {
            AuxActivationName::Tanh => AuxActivation::Tanh,
            AuxActivationName::Logistic => AuxActivation::Logistic,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopName {
    Progress,
    Validation,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    #[default]
    Table1,
    Table2,
    Uci,
}

impl SuiteName {
    pub fn name(self) -> &'static str {
        match self {
            SuiteName::Table1 => "table1",
            SuiteName::Table2 => "table2",
            SuiteName::Uci => "uci",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: VariantName,
    pub groups: usize,
    pub neurons: usize,
    /// Overrides `groups` x `neurons` with explicit group sizes.
    pub group_sizes: Option<Vec<usize>>,
    pub encoding: EncodingName,
    pub aux_hidden: usize,
    pub aux_activation: AuxActivationName,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: VariantName::Smm,
            groups: 6,
            neurons: 6,
            group_sizes: None,
            encoding: EncodingName::Exponential,
            aux_hidden: smm_core::model::DEFAULT_AUX_HIDDEN,
            aux_activation: AuxActivationName::Tanh,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Generated benchmark; ignored when `path` is set.
    pub task: String,
    /// CSV file with a header row, features first and the target last.
    pub path: Option<PathBuf>,
    /// JSON list of constrained column names. Defaults to the `.mask.json`
    /// sidecar of `path`, or to all columns.
    pub mask: Option<PathBuf>,
    /// Defaults to 100 for univariate tasks and 500 otherwise.
    pub n_train: Option<usize>,
    pub n_test: usize,
    pub noise_sigma: f64,
    /// Scale CSV inputs and targets to `[0, 1]` with training statistics.
    pub normalize: bool,
    pub folds: usize,
    /// Share of the non-test rows used for validation.
    pub val_fraction: f64,
    /// Fold used by `train` on CSV data.
    pub fold: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            task: "f_sq".into(),
            path: None,
            mask: None,
            n_train: None,
            n_test: 1000,
            noise_sigma: 0.01,
            normalize: true,
            folds: 5,
            val_fraction: 0.25,
            fold: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Defaults to `progress` for generated tasks and `validation` for CSV data.
    pub stop: Option<StopName>,
    pub strip: usize,
    pub tau: f64,
    pub patience: usize,
    /// Defaults to 10 000 (progress) or 5 000 (validation).
    pub max_epochs: Option<usize>,
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub delta0: f64,
    pub delta_min: f64,
    pub delta_max: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let r = RpropConfig::default();
        TrainSection {
            stop: None,
            strip: 5,
            tau: 1e-3,
            patience: 100,
            max_epochs: None,
            eta_plus: r.eta_plus,
            eta_minus: r.eta_minus,
            delta0: r.delta0,
            delta_min: r.delta_min,
            delta_max: r.delta_max,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub suite: SuiteName,
    pub trials: usize,
    /// Worker threads; 0 uses every logical core.
    pub jobs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            suite: SuiteName::Table1,
            trials: 21,
            jobs: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub quiet: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelConfig,
    pub data: DataConfig,
    pub train: TrainSection,
    pub bench: BenchConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&io::read_to_string(path)?)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    /// SHA-256 of the settings that affect results, as hex. Output location,
    /// verbosity and the worker count are left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        c.bench.jobs = 0;
        let json = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The generated benchmark task, unless the data comes from a file.
    pub fn task(&self) -> Result<Option<TaskKind>> {
        if self.data.path.is_some() {
            return Ok(None);
        }
        TaskKind::parse(&self.data.task)
            .map(Some)
            .ok_or_else(|| Error::config(format!("data.task: unknown task `{}`", self.data.task)))
    }

    pub fn shape(&self) -> Result<GroupShape> {
        let m = &self.model;
        let shape = match &m.group_sizes {
            Some(sizes) => GroupShape::new(sizes.clone()),
            None => GroupShape::uniform(m.groups, m.neurons),
        };
        shape.map_err(|e| Error::config(format!("model: {e}")))
    }

    pub fn architecture(&self, variant: Variant, mask: MonotonicityMask) -> Result<Architecture> {
        let m = &self.model;
        let mut arch = Architecture::new(variant, self.shape()?, mask)
            .map_err(|e| Error::config(format!("model: {e}")))?
            .with_encoding(m.encoding.into());
        if variant == Variant::Smm64 {
            arch = arch
                .with_aux(m.aux_hidden, m.aux_activation.into())
                .map_err(|e| Error::config(format!("model.aux_hidden: {e}")))?;
        }
        Ok(arch)
    }

    /// Stopping rule, defaulting by data source when `train.stop` is unset.
    pub fn stop_rule(&self, default: StopName) -> Result<StopRule> {
        let t = &self.train;
        let rule = match t.stop.unwrap_or(default) {
            StopName::Progress => StopRule::ProgressStrip {
                strip: t.strip,
                tau: t.tau,
                max_epochs: t.max_epochs.unwrap_or(StopRule::DEFAULT_PROGRESS_MAX_EPOCHS),
            },
            StopName::Validation => StopRule::Validation {
                patience: t.patience,
                max_epochs: t.max_epochs.unwrap_or(StopRule::DEFAULT_VALIDATION_MAX_EPOCHS),
            },
        };
        rule.validate().map_err(|e| Error::config(format!("train: {e}")))?;
        Ok(rule)
    }

    pub fn train_config(&self, stop: StopRule, seed: u64, stream_id: u64) -> Result<TrainConfig> {
        let t = &self.train;
        let rprop = RpropConfig {
            eta_plus: t.eta_plus,
            eta_minus: t.eta_minus,
            delta0: t.delta0,
            delta_min: t.delta_min,
            delta_max: t.delta_max,
        };
        rprop.validate().map_err(|e| Error::config(format!("train: {e}")))?;
        Ok(TrainConfig {
            stop,
            rprop,
            seed,
            stream_id,
        })
    }
}
