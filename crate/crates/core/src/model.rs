//! Fully-connected softmax classifiers and the labelled datasets they run on.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite value produced in layer {layer}")]
    NonFinite { layer: usize },
    #[error("point {index}: {source}")]
    AtPoint {
        index: usize,
        #[source]
        source: Box<ModelError>,
    },
    #[error("invalid dataset: {0}")]
    Dataset(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Softmax,
}

/// One dense layer, weights stored row-major as `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weights: Vec<f64>,
    biases: Vec<f64>,
    in_dim: usize,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<Self, ModelError> {
        if in_dim == 0 || out_dim == 0 {
            return Err(ModelError::Shape("layer dimensions must be positive".into()));
        }
        if weights.len() != in_dim * out_dim {
            return Err(ModelError::Shape(format!(
                "weight matrix has {} entries, expected {out_dim}x{in_dim}",
                weights.len()
            )));
        }
        if biases.len() != out_dim {
            return Err(ModelError::Shape(format!("bias vector has {} entries, expected {out_dim}", biases.len())));
        }
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(ModelError::Shape("non-finite parameter".into()));
        }
        Ok(Self { weights, biases, in_dim, activation })
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self::new(in_dim, out_dim, vec![0.0; in_dim * out_dim], vec![0.0; out_dim], activation)
            .expect("positive dimensions")
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.biases.len()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.in_dim + col]
    }

    /// Incoming weights of neuron `row`.
    pub fn row(&self, row: usize) -> &[f64] {
        &self.weights[row * self.in_dim..(row + 1) * self.in_dim]
    }

    pub(crate) fn row_mut(&mut self, row: usize) -> &mut [f64] {
        let in_dim = self.in_dim;
        &mut self.weights[row * in_dim..(row + 1) * in_dim]
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub(crate) fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    fn apply(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.biases
                .iter()
                .enumerate()
                .map(|(r, b)| self.row(r).iter().zip(input).fold(*b, |acc, (w, x)| acc + w * x)),
        );
    }
}

/// Anything that maps a feature vector to a probability vector over classes.
///
/// Mutation testing and spectra computation only need this surface, which
/// lets hosts plug in precomputed outputs (see [`TabulatedClassifier`]).
pub trait Classifier: Sync {
    fn input_dim(&self) -> usize;
    fn num_outputs(&self) -> usize;
    fn forward(&self, features: &[f64]) -> Result<Vec<f64>, ModelError>;
}

/// Argmax with ties resolved toward the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax, in place.
pub fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in values.iter_mut() {
        *v /= sum;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcnnClassifier {
    layers: Vec<DenseLayer>,
}

impl FcnnClassifier {
    /// Hidden layers must use ReLU and the last layer softmax; widths must chain.
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self, ModelError> {
        let Some(last) = layers.last() else {
            return Err(ModelError::Shape("model needs at least one layer".into()));
        };
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(ModelError::Shape(format!(
                    "layer {} outputs {} values but layer {} expects {}",
                    i,
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        for (i, layer) in layers[..layers.len() - 1].iter().enumerate() {
            if layer.activation() != Activation::Relu {
                return Err(ModelError::Shape(format!("layer {i}: hidden layers must use relu")));
            }
        }
        if last.activation() != Activation::Softmax {
            return Err(ModelError::Shape("final layer must use softmax".into()));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub(crate) fn layer_mut(&mut self, index: usize) -> &mut DenseLayer {
        &mut self.layers[index]
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Final pre-softmax values.
    pub fn logits(&self, features: &[f64]) -> Result<Vec<f64>, ModelError> {
        if features.len() != self.input_dim() {
            return Err(ModelError::Shape(format!(
                "input has {} features, model expects {}",
                features.len(),
                self.input_dim()
            )));
        }
        let mut current = features.to_vec();
        let mut next = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(&current, &mut next);
            if next.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite { layer: i });
            }
            if layer.activation() == Activation::Relu {
                for v in next.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            std::mem::swap(&mut current, &mut next);
        }
        Ok(current)
    }

    pub fn predict(&self, features: &[f64]) -> Result<usize, ModelError> {
        self.forward(features).map(|out| argmax(&out))
    }
}

impl Classifier for FcnnClassifier {
    fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    fn num_outputs(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    fn forward(&self, features: &[f64]) -> Result<Vec<f64>, ModelError> {
        let mut out = self.logits(features)?;
        softmax_in_place(&mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { layer: self.layers.len() - 1 });
        }
        Ok(out)
    }
}

pub fn predict(model: &dyn Classifier, features: &[f64]) -> Result<usize, ModelError> {
    model.forward(features).map(|out| argmax(&out))
}

/// Classifier backed by a table of precomputed outputs, keyed by the exact
/// bit pattern of the feature vector.
#[derive(Debug, Clone, Default)]
pub struct TabulatedClassifier {
    input_dim: usize,
    num_outputs: usize,
    table: HashMap<Vec<u64>, Vec<f64>>,
}

impl TabulatedClassifier {
    pub fn new(input_dim: usize, num_outputs: usize) -> Self {
        Self { input_dim, num_outputs, table: HashMap::new() }
    }

    pub fn insert(&mut self, features: &[f64], outputs: Vec<f64>) {
        assert_eq!(features.len(), self.input_dim);
        assert_eq!(outputs.len(), self.num_outputs);
        self.table.insert(features.iter().map(|f| f.to_bits()).collect(), outputs);
    }

    /// Table covering every point of `dataset` with the matching matrix row.
    pub fn from_outputs(dataset: &LabeledDataset, outputs: &OutputMatrix) -> Self {
        assert_eq!(dataset.len(), outputs.len());
        let mut table = Self::new(dataset.input_dim(), outputs.num_outputs());
        for (point, row) in dataset.points().iter().zip(outputs.rows()) {
            table.insert(&point.features, row.to_vec());
        }
        table
    }
}

impl Classifier for TabulatedClassifier {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn num_outputs(&self) -> usize {
        self.num_outputs
    }

    fn forward(&self, features: &[f64]) -> Result<Vec<f64>, ModelError> {
        let key: Vec<u64> = features.iter().map(|f| f.to_bits()).collect();
        let out = self.table.get(&key).ok_or_else(|| ModelError::Shape("point not present in output table".into()))?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { layer: 0 });
        }
        Ok(out.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub features: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    points: Vec<DataPoint>,
    input_dim: usize,
    class_count: usize,
}

impl LabeledDataset {
    pub fn new(points: Vec<DataPoint>, input_dim: usize, class_count: usize) -> Result<Self, ModelError> {
        if input_dim == 0 || class_count == 0 {
            return Err(ModelError::Dataset("input_dim and class_count must be positive".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.features.len() != input_dim {
                return Err(ModelError::Dataset(format!(
                    "point {i} has {} features, expected {input_dim}",
                    p.features.len()
                )));
            }
            if p.label >= class_count {
                return Err(ModelError::Dataset(format!("point {i} has label {} outside [0, {class_count})", p.label)));
            }
            if p.features.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::Dataset(format!("point {i} has a non-finite feature")));
            }
        }
        Ok(Self { points, input_dim, class_count })
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Labels that actually occur, ascending.
    pub fn label_set(&self) -> BTreeSet<usize> {
        self.points.iter().map(|p| p.label).collect()
    }

    /// New dataset holding the points at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            input_dim: self.input_dim,
            class_count: self.class_count,
        }
    }
}

/// One softmax row per data point.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputMatrix {
    values: Vec<f64>,
    num_outputs: usize,
}

impl OutputMatrix {
    pub fn from_rows(num_outputs: usize, rows: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let mut values = Vec::with_capacity(rows.len() * num_outputs);
        for (i, r) in rows.into_iter().enumerate() {
            if r.len() != num_outputs {
                return Err(ModelError::Shape(format!("row {i} has {} entries, expected {num_outputs}", r.len())));
            }
            values.extend(r);
        }
        Ok(Self { values, num_outputs })
    }

    pub fn num_outputs(&self) -> usize {
        self.num_outputs
    }

    pub fn len(&self) -> usize {
        self.values.len().checked_div(self.num_outputs).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.num_outputs..(i + 1) * self.num_outputs]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.num_outputs.max(1))
    }

    /// Values of output `i` across all rows, in row order.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.rows().map(|r| r[i]).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Run `model` over `indices` of `dataset`, one forward pass per point.
pub fn batch_outputs(
    model: &dyn Classifier,
    dataset: &LabeledDataset,
    indices: &[usize],
) -> Result<OutputMatrix, ModelError> {
    if model.input_dim() != dataset.input_dim() {
        return Err(ModelError::Shape(format!(
            "model expects {} features, dataset has {}",
            model.input_dim(),
            dataset.input_dim()
        )));
    }
    let q = model.num_outputs();
    let mut values = Vec::with_capacity(indices.len() * q);
    for &index in indices {
        let out = model
            .forward(&dataset.points()[index].features)
            .map_err(|e| ModelError::AtPoint { index, source: Box::new(e) })?;
        values.extend(out);
    }
    Ok(OutputMatrix { values, num_outputs: q })
}
