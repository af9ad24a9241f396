//! Versioned JSON model files.
//!
//! Parameters are stored in flat layout order as the hex bit patterns of the
//! `f64` values, so a save/load cycle is bit-exact. Normalization bounds use
//! the same encoding.

use std::path::Path;

use serde::{Deserialize, Serialize};
use smm_core::bench::{ColumnTransform, UnitNormalizer};
use smm_core::data::Provenance;
use smm_core::{Architecture, AuxActivation, GroupShape, Model, ModelParams, MonotonicityMask, Variant, WeightEncoding};

use crate::config::RunConfig;
use crate::io::{self, f64_from_hex, f64_to_hex, ArtifactMeta};
use crate::{Error, Result};

pub const MODEL_FORMAT: &str = "smm-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuxSpec {
    pub hidden: usize,
    pub activation: String,
}

/// Seed and stream the initial parameters were drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitProvenance {
    pub seed: u64,
    pub stream_id: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataProvenance {
    Generated { task: String, seed: u64, stream_id: u64 },
    File { path: String },
    Derived { from: String },
}

impl From<&Provenance> for DataProvenance {
    fn from(p: &Provenance) -> Self {
        match p {
            Provenance::Generated { kind, seed, stream_id } => DataProvenance::Generated {
                task: kind.clone(),
                seed: *seed,
                stream_id: *stream_id,
            },
            Provenance::File { path } => DataProvenance::File { path: path.clone() },
            Provenance::Derived { from } => DataProvenance::Derived { from: from.clone() },
        }
    }
}

/// Hex-encoded `[min, max]` per input column and for the target.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub inputs: Vec<[String; 2]>,
    pub target: [String; 2],
}

impl NormalizationSpec {
    pub fn from_normalizer(n: &UnitNormalizer) -> Self {
        let enc = |t: &ColumnTransform| [f64_to_hex(t.min), f64_to_hex(t.max)];
        NormalizationSpec {
            inputs: n.inputs.iter().map(enc).collect(),
            target: enc(&n.target),
        }
    }

    pub fn to_normalizer(&self) -> Option<UnitNormalizer> {
        let dec = |p: &[String; 2]| {
            Some(ColumnTransform {
                min: f64_from_hex(&p[0])?,
                max: f64_from_hex(&p[1])?,
            })
        };
        Some(UnitNormalizer {
            inputs: self.inputs.iter().map(dec).collect::<Option<Vec<_>>>()?,
            target: dec(&self.target)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub format_version: u32,
    #[serde(flatten)]
    pub meta: ArtifactMeta,
    pub variant: String,
    pub shape: Vec<usize>,
    pub mask: Vec<bool>,
    pub encoding: String,
    pub aux: Option<AuxSpec>,
    pub init: InitProvenance,
    pub data: DataProvenance,
    pub normalization: Option<NormalizationSpec>,
    /// Settings the model was trained with, used to regenerate its data.
    pub config: Option<RunConfig>,
    pub params: Vec<String>,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    format_version: u32,
}

impl ModelFile {
    pub fn new(model: &Model, meta: ArtifactMeta, init: InitProvenance, data: &Provenance) -> Self {
        let arch = model.arch();
        ModelFile {
            format: MODEL_FORMAT.into(),
            format_version: MODEL_FORMAT_VERSION,
            meta,
            variant: arch.variant.name().into(),
            shape: arch.shape.sizes().to_vec(),
            mask: arch.mask.flags().to_vec(),
            encoding: arch.encoding.name().into(),
            aux: (arch.variant == Variant::Smm64).then(|| AuxSpec {
                hidden: arch.aux_hidden,
                activation: arch.aux_activation.name().into(),
            }),
            init,
            data: data.into(),
            normalization: None,
            config: None,
            params: model.params().as_slice().iter().map(|&v| f64_to_hex(v)).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model file serializes");
        s.push('\n');
        s
    }

    /// Parse a model file, checking the format version before anything else.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let bad = |e: serde_json::Error| Error::config(format!("{}: invalid model file: {e}", path.display()));
        let header: Header = serde_json::from_str(text).map_err(bad)?;
        if header.format != MODEL_FORMAT {
            return Err(Error::config(format!(
                "{}: not a model file (format `{}`)",
                path.display(),
                header.format
            )));
        }
        if header.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Version {
                path: path.to_path_buf(),
                kind: "model",
                found: header.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        serde_json::from_str(text).map_err(bad)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&io::read_to_string(path)?, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_json().as_bytes())
    }

    pub fn model(&self) -> Result<Model> {
        let field = |name: &str, value: &str| Error::config(format!("model file: unknown {name} `{value}`"));
        let variant = Variant::from_name(&self.variant).ok_or_else(|| field("variant", &self.variant))?;
        let encoding = WeightEncoding::from_name(&self.encoding).ok_or_else(|| field("encoding", &self.encoding))?;
        let shape = GroupShape::new(self.shape.clone())?;
        let mask = MonotonicityMask::new(self.mask.clone())?;
        let mut arch = Architecture::new(variant, shape, mask)?.with_encoding(encoding);
        if let Some(aux) = &self.aux {
            let act = AuxActivation::from_name(&aux.activation).ok_or_else(|| field("aux activation", &aux.activation))?;
            arch = arch.with_aux(aux.hidden, act)?;
        }
        let params = self
            .params
            .iter()
            .map(|s| f64_from_hex(s).ok_or_else(|| field("parameter encoding", s)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Model::from_params(arch, ModelParams(params))?)
    }

    pub fn normalizer(&self) -> Result<Option<UnitNormalizer>> {
        match &self.normalization {
            None => Ok(None),
            Some(n) => n
                .to_normalizer()
                .map(Some)
                .ok_or_else(|| Error::config("model file: malformed normalization bounds")),
        }
    }
}
