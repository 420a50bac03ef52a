#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};

use spectramut_core::model::{Classifier, DataPoint, LabeledDataset, ModelError, OutputMatrix, TabulatedClassifier};
use spectramut_core::mutation::{generate_mutant_set, GenerationConfig, MutantSet};
use spectramut_core::synth::{synth_problem, SynthProblem, SynthSpec};
use spectramut_core::FcnnClassifier;

/// 5 classes x 100 points, 8-16-16-5 network, 100 generated mutants.
pub fn desk_fixture() -> (SynthProblem, MutantSet) {
    let problem = synth_problem(&SynthSpec::default()).unwrap();
    let set = generate_mutant_set(&problem.model, &GenerationConfig::new(100, 1)).unwrap();
    (problem, set)
}

/// Points whose single feature is their index, labels `i % classes`.
pub fn indexed_dataset(n: usize, classes: usize) -> LabeledDataset {
    let points = (0..n).map(|i| DataPoint { features: vec![i as f64], label: i % classes }).collect();
    LabeledDataset::new(points, 1, classes).unwrap()
}

pub fn tabulate(ds: &LabeledDataset, q: usize, row: impl Fn(usize, usize) -> Vec<f64>) -> TabulatedClassifier {
    let rows = ds.points().iter().enumerate().map(|(i, p)| row(i, p.label)).collect();
    TabulatedClassifier::from_outputs(ds, &OutputMatrix::from_rows(q, rows).unwrap())
}

/// Probability vector with `conf` on class `c` and the rest spread evenly.
pub fn probs(q: usize, c: usize, conf: f64) -> Vec<f64> {
    let mut v = vec![(1.0 - conf) / (q - 1) as f64; q];
    v[c] = conf;
    v
}

/// Wraps a network and counts forward passes.
pub struct Counting {
    pub inner: FcnnClassifier,
    pub calls: AtomicUsize,
}

impl Counting {
    pub fn new(inner: FcnnClassifier) -> Self {
        Self { inner, calls: AtomicUsize::new(0) }
    }

    pub fn count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Classifier for Counting {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn num_outputs(&self) -> usize {
        self.inner.num_outputs()
    }

    fn forward(&self, features: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.forward(features)
    }
}
