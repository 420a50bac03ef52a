//! Seeded synthetic classification problems with a ready-made classifier.
//!
//! Points are drawn from isotropic Gaussian blobs, one per class. The model
//! is a ReLU network whose first layer splits each feature into positive
//! and negative parts, whose second layer is a perturbed identity, and
//! whose output layer scores classes by negative squared distance to the
//! class centroids.

use serde::{Deserialize, Serialize};

use crate::model::{Activation, DataPoint, DenseLayer, FcnnClassifier, LabeledDataset, ModelError};
use crate::rng::{derive_seed, SplitMix64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: usize,
    pub per_class: usize,
    pub input_dim: usize,
    /// Spread of class centroids around the origin.
    pub centroid_scale: f64,
    /// Standard deviation of points around their centroid.
    pub noise: f64,
    /// Standard deviation of the perturbation added to the middle identity layer.
    pub hidden_jitter: f64,
    /// Inverse temperature of the output scores.
    pub sharpness: f64,
    /// Copies of each split unit in the hidden layers (hidden width is `2 * input_dim * redundancy`).
    pub redundancy: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            classes: 5,
            per_class: 100,
            input_dim: 8,
            centroid_scale: 1.0,
            noise: 0.3,
            hidden_jitter: 0.05,
            sharpness: 0.4,
            redundancy: 1,
            seed: 7,
        }
    }
}

pub struct SynthProblem {
    pub model: FcnnClassifier,
    pub dataset: LabeledDataset,
    pub centroids: Vec<Vec<f64>>,
}

pub fn synth_problem(spec: &SynthSpec) -> Result<SynthProblem, ModelError> {
    if spec.classes < 2 || spec.per_class == 0 || spec.input_dim == 0 || spec.redundancy == 0 {
        return Err(ModelError::Dataset(
            "need at least two classes, one point per class, one feature and one copy per unit".into(),
        ));
    }
    let d = spec.input_dim;
    let mut rng = SplitMix64::new(derive_seed(spec.seed, 0));
    let centroids: Vec<Vec<f64>> =
        (0..spec.classes).map(|_| (0..d).map(|_| spec.centroid_scale * rng.gaussian()).collect()).collect();

    let mut rng = SplitMix64::new(derive_seed(spec.seed, 1));
    let mut points = Vec::with_capacity(spec.classes * spec.per_class);
    for _ in 0..spec.per_class {
        for (label, mu) in centroids.iter().enumerate() {
            let features = mu.iter().map(|m| m + spec.noise * rng.gaussian()).collect();
            points.push(DataPoint { features, label });
        }
    }
    let dataset = LabeledDataset::new(points, d, spec.classes)?;

    let r = spec.redundancy;
    let h = 2 * d * r;
    // Unit `k` reads feature `k % d` with sign `+` for the first `d * r` units.
    let sign = |k: usize| if k < d * r { 1.0 } else { -1.0 };
    let mut w1 = vec![0.0; h * d];
    for k in 0..h {
        w1[k * d + k % d] = sign(k);
    }
    let l1 = DenseLayer::new(d, h, w1, vec![0.0; h], Activation::Relu)?;

    let mut rng = SplitMix64::new(derive_seed(spec.seed, 2));
    let mut w2 = vec![0.0; h * h];
    for row in 0..h {
        for c in 0..h {
            w2[row * h + c] = if row == c { 1.0 } else { 0.0 } + spec.hidden_jitter * rng.gaussian();
        }
    }
    let l2 = DenseLayer::new(h, h, w2, vec![0.0; h], Activation::Relu)?;

    let beta = spec.sharpness;
    let mut w3 = vec![0.0; spec.classes * h];
    let mut b3 = vec![0.0; spec.classes];
    for (c, mu) in centroids.iter().enumerate() {
        for k in 0..h {
            w3[c * h + k] = sign(k) * 2.0 * beta * mu[k % d] / r as f64;
        }
        b3[c] = -beta * mu.iter().map(|m| m * m).sum::<f64>();
    }
    let l3 = DenseLayer::new(h, spec.classes, w3, b3, Activation::Softmax)?;

    Ok(SynthProblem { model: FcnnClassifier::new(vec![l1, l2, l3])?, dataset, centroids })
}

/// Fraction of points the model labels correctly.
pub fn accuracy(model: &FcnnClassifier, dataset: &LabeledDataset) -> Result<f64, ModelError> {
    let mut correct = 0;
    for t in dataset.points() {
        if model.predict(&t.features)? == t.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}
