//! Binary container formats for models, datasets and output matrices.
//!
//! All integers and floats are little-endian; floats are IEEE-754 binary64
//! so parameters round-trip bit-exactly.
//!
//! Model (`.smfc`):
//!
//! | field        | type          |
//! |--------------|---------------|
//! | magic        | `b"SMFC"`     |
//! | version      | `u8` (= 1)    |
//! | input_dim    | `u32`         |
//! | layer_count  | `u32`         |
//! | per layer    | `activation: u8` (0 relu, 1 softmax), `out_dim: u32`, `in_dim: u32`, `out_dim*in_dim` weights row-major `f64`, `out_dim` biases `f64` |
//!
//! Dataset (`.smds`): magic `b"SMDS"`, version `u8`, `point_count: u64`,
//! `input_dim: u32`, `class_count: u32`, then per point `input_dim` features
//! `f64` followed by `label: u32`.
//!
//! Output matrix (`.smom`): magic `b"SMOM"`, version `u8`, `rows: u64`,
//! `num_outputs: u32`, then `rows * num_outputs` values `f64` row-major.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::model::{Activation, DataPoint, DenseLayer, FcnnClassifier, LabeledDataset, ModelError, OutputMatrix};

pub const MODEL_MAGIC: &[u8; 4] = b"SMFC";
pub const DATASET_MAGIC: &[u8; 4] = b"SMDS";
pub const OUTPUTS_MAGIC: &[u8; 4] = b"SMOM";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("validation error in layer {layer}: {message}")]
    Layer { layer: usize, message: String },
    #[error("validation error: {0}")]
    Invalid(String),
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, offset: 0 }
    }

    pub(crate) fn offset(&self) -> usize {
        self.offset
    }

    pub(crate) fn error(&self, message: impl Into<String>) -> FormatError {
        FormatError::Parse { offset: self.offset, message: message.into() }
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], FormatError> {
        if self.bytes.len() - self.offset < n {
            return Err(self.error(format!(
                "unexpected end of file reading {what} ({n} bytes needed, {} left)",
                self.bytes.len() - self.offset
            )));
        }
        let slice = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(slice)
    }

    pub(crate) fn magic(&mut self, magic: &[u8; 4]) -> Result<(), FormatError> {
        let at = self.offset;
        let got = self.take(4, "magic")?;
        if got != magic {
            return Err(FormatError::Parse { offset: at, message: format!("bad magic {got:?}, expected {magic:?}") });
        }
        let at = self.offset;
        let version = self.u8("version")?;
        if version != FORMAT_VERSION {
            return Err(FormatError::Parse { offset: at, message: format!("unsupported version {version}") });
        }
        Ok(())
    }

    pub(crate) fn u8(&mut self, what: &str) -> Result<u8, FormatError> {
        Ok(self.take(1, what)?[0])
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self, what: &str) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub(crate) fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>, FormatError> {
        let bytes = n.checked_mul(8).ok_or_else(|| self.error(format!("{what}: size overflow")))?;
        Ok(self.take(bytes, what)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub(crate) fn finish(&self) -> Result<(), FormatError> {
        if self.offset != self.bytes.len() {
            return Err(self.error(format!("{} trailing bytes", self.bytes.len() - self.offset)));
        }
        Ok(())
    }
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_f64s(out: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_model(model: &FcnnClassifier) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + model.parameter_count() * 8);
    out.extend_from_slice(MODEL_MAGIC);
    out.push(FORMAT_VERSION);
    put_u32(&mut out, model.layers()[0].in_dim() as u32);
    put_u32(&mut out, model.layers().len() as u32);
    for layer in model.layers() {
        out.push(match layer.activation() {
            Activation::Relu => 0,
            Activation::Softmax => 1,
        });
        put_u32(&mut out, layer.out_dim() as u32);
        put_u32(&mut out, layer.in_dim() as u32);
        put_f64s(&mut out, layer.weights());
        put_f64s(&mut out, layer.biases());
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<FcnnClassifier, FormatError> {
    let mut r = Reader::new(bytes);
    r.magic(MODEL_MAGIC)?;
    let input_dim = r.u32("input_dim")? as usize;
    let layer_count = r.u32("layer_count")? as usize;
    if layer_count == 0 {
        return Err(FormatError::Invalid("model has no layers".into()));
    }
    let mut layers = Vec::with_capacity(layer_count.min(1024));
    let mut expected_in = input_dim;
    for layer in 0..layer_count {
        let at = r.offset();
        let activation = match r.u8("activation")? {
            0 => Activation::Relu,
            1 => Activation::Softmax,
            other => {
                return Err(FormatError::Parse {
                    offset: at,
                    message: format!("layer {layer}: unknown activation tag {other}"),
                })
            }
        };
        let out_dim = r.u32("out_dim")? as usize;
        let in_dim = r.u32("in_dim")? as usize;
        if in_dim != expected_in {
            return Err(FormatError::Layer {
                layer,
                message: format!("declares in_dim {in_dim} but receives {expected_in} values"),
            });
        }
        let weights = r.f64s(out_dim * in_dim, "weights")?;
        let biases = r.f64s(out_dim, "biases")?;
        let dense = DenseLayer::new(in_dim, out_dim, weights, biases, activation)
            .map_err(|e| FormatError::Layer { layer, message: e.to_string() })?;
        expected_in = out_dim;
        layers.push(dense);
    }
    r.finish()?;
    FcnnClassifier::new(layers).map_err(|e| FormatError::Invalid(e.to_string()))
}

pub fn save_model(model: &FcnnClassifier, path: impl AsRef<Path>) -> Result<(), FormatError> {
    fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FcnnClassifier, FormatError> {
    decode_model(&fs::read(path)?)
}

pub fn encode_dataset(dataset: &LabeledDataset) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(DATASET_MAGIC);
    out.push(FORMAT_VERSION);
    put_u64(&mut out, dataset.len() as u64);
    put_u32(&mut out, dataset.input_dim() as u32);
    put_u32(&mut out, dataset.class_count() as u32);
    for p in dataset.points() {
        put_f64s(&mut out, &p.features);
        put_u32(&mut out, p.label as u32);
    }
    out
}

pub fn decode_dataset(bytes: &[u8]) -> Result<LabeledDataset, FormatError> {
    let mut r = Reader::new(bytes);
    r.magic(DATASET_MAGIC)?;
    let count = r.u64("point_count")? as usize;
    let input_dim = r.u32("input_dim")? as usize;
    let class_count = r.u32("class_count")? as usize;
    let mut points = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let features = r.f64s(input_dim, "features")?;
        let label = r.u32("label")? as usize;
        points.push(DataPoint { features, label });
    }
    r.finish()?;
    LabeledDataset::new(points, input_dim, class_count).map_err(|e: ModelError| FormatError::Invalid(e.to_string()))
}

pub fn save_dataset(dataset: &LabeledDataset, path: impl AsRef<Path>) -> Result<(), FormatError> {
    fs::write(path, encode_dataset(dataset))?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<LabeledDataset, FormatError> {
    decode_dataset(&fs::read(path)?)
}

pub fn encode_outputs(outputs: &OutputMatrix) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(OUTPUTS_MAGIC);
    out.push(FORMAT_VERSION);
    put_u64(&mut out, outputs.len() as u64);
    put_u32(&mut out, outputs.num_outputs() as u32);
    put_f64s(&mut out, outputs.values());
    out
}

pub fn decode_outputs(bytes: &[u8]) -> Result<OutputMatrix, FormatError> {
    let mut r = Reader::new(bytes);
    r.magic(OUTPUTS_MAGIC)?;
    let rows = r.u64("rows")? as usize;
    let q = r.u32("num_outputs")? as usize;
    let mut out = Vec::with_capacity(rows.min(1 << 20));
    for _ in 0..rows {
        out.push(r.f64s(q, "row")?);
    }
    r.finish()?;
    OutputMatrix::from_rows(q, out).map_err(|e| FormatError::Invalid(e.to_string()))
}
