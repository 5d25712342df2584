//! `BAGM` model files.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "BAGM" | u8 version=1 | u8 L | L x u32 layer size | u8 K
//!        | K x (u16 byte length, UTF-8 class name)
//!        | input-width x f32 mean | input-width x f32 stddev
//!        | per layer: (out x in) f32 weights row-major, out x f32 biases
//!        | u32 CRC-32 of every preceding byte
//! ```

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::network::{DenseLayer, ModelParams, Prediction};
use super::{ModelSpec, NnError};
use crate::dataset::{ClassVocabulary, Normalizer};

pub const MODEL_MAGIC: [u8; 4] = *b"BAGM";
pub const MODEL_VERSION: u8 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelFileError {
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u8),
    #[error("model file is truncated")]
    Truncated,
    #[error("inconsistent model shape: {0}")]
    ShapeInconsistency(String),
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    BadChecksum { stored: u32, computed: u32 },
    #[error("class name {0} is not valid UTF-8")]
    BadClassName(usize),
    #[error("{0} unexpected bytes after checksum")]
    TrailingBytes(usize),
    #[error("model cannot be stored: {0}")]
    Unencodable(String),
    #[error("i/o: {0}")]
    Io(String),
}

/// Everything needed to classify raw readings: architecture, parameters
/// (including the normalizer) and class names.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub params: ModelParams,
    pub vocabulary: ClassVocabulary,
}

impl TrainedModel {
    pub fn new(params: ModelParams, vocabulary: ClassVocabulary) -> Result<Self, NnError> {
        if params.classes() != vocabulary.len() {
            return Err(NnError::ClassCountMismatch {
                model: params.classes(),
                data: vocabulary.len(),
            });
        }
        Ok(Self {
            spec: params.spec(),
            params,
            vocabulary,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, ModelFileError> {
        export_model(&self.params, &self.spec, &self.vocabulary)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelFileError> {
        let (params, spec, vocabulary) = import_model(bytes)?;
        Ok(Self {
            spec,
            params,
            vocabulary,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelFileError> {
        fs::write(path, self.to_bytes()?).map_err(|e| ModelFileError::Io(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelFileError> {
        let bytes = fs::read(path).map_err(|e| ModelFileError::Io(e.to_string()))?;
        Self::from_bytes(&bytes)
    }

    /// Predicted class name with the full probability vector.
    pub fn classify(&self, raw_features: &[f64]) -> Result<(&str, Prediction), NnError> {
        let pred = self.params.predict(raw_features)?;
        let name = self
            .vocabulary
            .name(pred.class)
            .expect("class count checked against vocabulary");
        Ok((name, pred))
    }
}

pub fn export_model(
    model: &ModelParams,
    spec: &ModelSpec,
    vocabulary: &ClassVocabulary,
) -> Result<Vec<u8>, ModelFileError> {
    if model.spec() != *spec {
        return Err(ModelFileError::ShapeInconsistency(format!(
            "parameters have sizes {:?}, spec says {:?}",
            model.spec().layer_sizes(),
            spec.layer_sizes()
        )));
    }
    if vocabulary.len() != spec.classes() {
        return Err(ModelFileError::ShapeInconsistency(format!(
            "{} class names for {} outputs",
            vocabulary.len(),
            spec.classes()
        )));
    }
    let sizes = spec.layer_sizes();
    let layer_count = u8::try_from(sizes.len())
        .map_err(|_| ModelFileError::Unencodable(format!("{} layers", sizes.len())))?;
    let class_count = u8::try_from(vocabulary.len())
        .map_err(|_| ModelFileError::Unencodable(format!("{} classes", vocabulary.len())))?;

    let mut out = Vec::new();
    out.extend_from_slice(&MODEL_MAGIC);
    out.push(MODEL_VERSION);
    out.push(layer_count);
    for &s in sizes {
        let s =
            u32::try_from(s).map_err(|_| ModelFileError::Unencodable(format!("layer size {s}")))?;
        out.extend_from_slice(&s.to_le_bytes());
    }
    out.push(class_count);
    for name in vocabulary.names() {
        let len = u16::try_from(name.len()).map_err(|_| {
            ModelFileError::Unencodable(format!("class name of {} bytes", name.len()))
        })?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    let norm = model.normalizer();
    for v in norm.mean().iter().chain(norm.std()) {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    for layer in model.layers() {
        for v in layer.weights.iter().chain(&layer.biases) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelFileError> {
        let end = self.pos.checked_add(n).ok_or(ModelFileError::Truncated)?;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or(ModelFileError::Truncated)?;
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, ModelFileError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ModelFileError> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self) -> Result<u32, ModelFileError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>, ModelFileError> {
        let raw = self.take(n.checked_mul(4).ok_or(ModelFileError::Truncated)?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect())
    }
}

pub fn import_model(
    bytes: &[u8],
) -> Result<(ModelParams, ModelSpec, ClassVocabulary), ModelFileError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4).map_err(|_| ModelFileError::BadMagic)?;
    if magic != MODEL_MAGIC {
        return Err(ModelFileError::BadMagic);
    }
    let version = r.u8()?;
    if version != MODEL_VERSION {
        return Err(ModelFileError::UnsupportedVersion(version));
    }
    let layer_count = r.u8()? as usize;
    let mut sizes = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        sizes.push(r.u32()? as usize);
    }
    let spec =
        ModelSpec::new(sizes).map_err(|e| ModelFileError::ShapeInconsistency(e.to_string()))?;

    let class_count = r.u8()? as usize;
    let mut names = Vec::with_capacity(class_count);
    for i in 0..class_count {
        let len = r.u16()? as usize;
        let raw = r.take(len)?;
        names.push(String::from_utf8(raw.to_vec()).map_err(|_| ModelFileError::BadClassName(i))?);
    }
    if class_count != spec.classes() {
        return Err(ModelFileError::ShapeInconsistency(format!(
            "{class_count} class names for {} outputs",
            spec.classes()
        )));
    }

    let width = spec.input_width();
    let mean = r.f32s(width)?;
    let std = r.f32s(width)?;
    let mut layers = Vec::with_capacity(spec.depth());
    for w in spec.layer_sizes().windows(2) {
        let (inputs, outputs) = (w[0], w[1]);
        let weights = r.f32s(
            inputs
                .checked_mul(outputs)
                .ok_or(ModelFileError::Truncated)?,
        )?;
        let biases = r.f32s(outputs)?;
        layers.push(
            DenseLayer::from_parts(inputs, outputs, weights, biases).expect("sized from spec"),
        );
    }

    let body_end = r.pos;
    let stored = r.u32()?;
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(ModelFileError::BadChecksum { stored, computed });
    }
    if r.pos != bytes.len() {
        return Err(ModelFileError::TrailingBytes(bytes.len() - r.pos));
    }

    let vocabulary = ClassVocabulary::new(names)
        .map_err(|e| ModelFileError::ShapeInconsistency(e.to_string()))?;
    let normalizer = Normalizer::from_parts(mean, std)
        .map_err(|e| ModelFileError::ShapeInconsistency(e.to_string()))?;
    let params = ModelParams::from_parts(layers, normalizer)
        .map_err(|e| ModelFileError::ShapeInconsistency(e.to_string()))?;
    Ok((params, spec, vocabulary))
}
