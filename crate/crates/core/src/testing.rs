//! Kill predicate, killing labels, mutation score and verdict tables for
//! exhaustive and representative-based mutation testing.

use std::collections::{BTreeSet, HashMap};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::RepresentativeMap;
use crate::model::{argmax, Classifier, DataPoint, LabeledDataset, ModelError};
use crate::mutation::{Mutant, MutantId};

#[derive(Debug, Error)]
pub enum TestingError {
    #[error("mutant {id}: {source}")]
    Model {
        id: MutantId,
        #[source]
        source: ModelError,
    },
    #[error("original model: {0}")]
    Original(ModelError),
    #[error("mutation score undefined: {0}")]
    UndefinedScore(String),
    #[error("invalid input: {0}")]
    Input(String),
}

/// Predicted class, or `None` when the output is not finite.
fn prediction(model: &dyn Classifier, point: &DataPoint) -> Result<Option<usize>, ModelError> {
    match model.forward(&point.features) {
        Ok(out) => Ok(Some(argmax(&out))),
        Err(ModelError::NonFinite { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// The original predicts `t` correctly and the mutant does not.
///
/// A mutant whose output on `t` is non-finite counts as mispredicting.
pub fn kill(original: &dyn Classifier, mutant: &dyn Classifier, t: &DataPoint) -> Result<bool, ModelError> {
    if prediction(original, t)? != Some(t.label) {
        return Ok(false);
    }
    let p = prediction(mutant, t)?;
    if p.is_none() {
        log::debug!("non-finite mutant output counted as misprediction");
    }
    Ok(p != Some(t.label))
}

pub fn killing_labels(
    original: &dyn Classifier,
    mutant: &dyn Classifier,
    dataset: &LabeledDataset,
) -> Result<BTreeSet<usize>, ModelError> {
    let mut labels = BTreeSet::new();
    for t in dataset.points() {
        if kill(original, mutant, t)? {
            labels.insert(t.label);
        }
    }
    Ok(labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    Tested,
    Propagated { from: MutantId },
    Untested,
}

impl Provenance {
    pub fn name(&self) -> &'static str {
        match self {
            Provenance::Tested => "tested",
            Provenance::Propagated { .. } => "propagated",
            Provenance::Untested => "untested",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutantVerdict {
    pub id: MutantId,
    /// `|killingLabels|`.
    pub killing_labels: usize,
    /// `killing_labels >= 1`.
    pub killed: bool,
    /// Prediction differs from the original's on at least one point
    /// (the classical killed/survived reading).
    pub diverges: bool,
    pub provenance: Provenance,
}

impl MutantVerdict {
    fn propagate(&self, id: MutantId) -> Self {
        Self { id, provenance: Provenance::Propagated { from: self.id }, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Sampling,
    Spectra,
    Graph,
    Clustering,
    Search,
    Selection,
    Testing,
}

/// Wall-clock seconds per phase plus the number of fully tested mutants.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub phases: Vec<(Phase, f64)>,
    pub tested_mutants: usize,
}

impl TimingRecord {
    pub fn add(&mut self, phase: Phase, elapsed: Duration) {
        let secs = elapsed.as_secs_f64();
        match self.phases.iter_mut().find(|(p, _)| *p == phase) {
            Some((_, s)) => *s += secs,
            None => self.phases.push((phase, secs)),
        }
    }

    pub fn time<T>(&mut self, phase: Phase, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.add(phase, start.elapsed());
        out
    }

    pub fn merge(&mut self, other: &TimingRecord) {
        for (p, s) in &other.phases {
            self.add(*p, Duration::from_secs_f64(*s));
        }
    }

    pub fn phase(&self, phase: Phase) -> f64 {
        self.phases.iter().find(|(p, _)| *p == phase).map(|(_, s)| *s).unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.phases.iter().map(|(_, s)| s).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictTable {
    pub mode: String,
    pub verdicts: Vec<MutantVerdict>,
    /// `|L|` of the dataset the verdicts were computed on.
    pub label_count: usize,
    pub tested_points: usize,
    pub timing: TimingRecord,
    /// Per-mutant wall-clock seconds of full testing, for tested mutants.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub test_seconds: Vec<(MutantId, f64)>,
}

impl VerdictTable {
    pub fn get(&self, id: MutantId) -> Option<&MutantVerdict> {
        self.verdicts.iter().find(|v| v.id == id)
    }

    pub fn tested_count(&self) -> usize {
        self.verdicts.iter().filter(|v| v.provenance == Provenance::Tested).count()
    }

    pub fn mutation_score(&self) -> Result<f64, TestingError> {
        mutation_score(&self.verdicts, self.label_count)
    }
}

/// `sum |killingLabels| / (|M| * |L|)` over every verdict that is not untested.
pub fn mutation_score(verdicts: &[MutantVerdict], label_count: usize) -> Result<f64, TestingError> {
    let counted: Vec<&MutantVerdict> = verdicts.iter().filter(|v| v.provenance != Provenance::Untested).collect();
    if counted.is_empty() {
        return Err(TestingError::UndefinedScore("no mutants".into()));
    }
    if label_count == 0 {
        return Err(TestingError::UndefinedScore("no labels".into()));
    }
    let total: usize = counted.iter().map(|v| v.killing_labels).sum();
    Ok(total as f64 / (counted.len() * label_count) as f64)
}

/// Original predictions over a dataset, computed once and reused per mutant.
pub struct Reference<'a> {
    dataset: &'a LabeledDataset,
    predictions: Vec<Option<usize>>,
    label_count: usize,
}

impl<'a> Reference<'a> {
    pub fn new(original: &dyn Classifier, dataset: &'a LabeledDataset) -> Result<Self, TestingError> {
        if original.input_dim() != dataset.input_dim() {
            return Err(TestingError::Input(format!(
                "model expects {} features, dataset has {}",
                original.input_dim(),
                dataset.input_dim()
            )));
        }
        let predictions = dataset
            .points()
            .par_iter()
            .map(|t| prediction(original, t))
            .collect::<Result<Vec<_>, _>>()
            .map_err(TestingError::Original)?;
        Ok(Self { dataset, predictions, label_count: dataset.label_set().len() })
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn dataset(&self) -> &LabeledDataset {
        self.dataset
    }

    /// Full test of one mutant over every point.
    pub fn test(&self, id: MutantId, mutant: &dyn Classifier) -> Result<MutantVerdict, TestingError> {
        let mut killed = vec![false; self.dataset.class_count()];
        let mut diverges = false;
        for (t, orig) in self.dataset.points().iter().zip(&self.predictions) {
            let p = prediction(mutant, t).map_err(|source| TestingError::Model { id, source })?;
            if p != *orig || p.is_none() {
                diverges = true;
            }
            if *orig == Some(t.label) && p != Some(t.label) {
                killed[t.label] = true;
            }
        }
        let count = killed.iter().filter(|k| **k).count();
        Ok(MutantVerdict { id, killing_labels: count, killed: count > 0, diverges, provenance: Provenance::Tested })
    }

    fn test_all<M: Mutant>(&self, mutants: &[&M]) -> Result<Vec<(MutantVerdict, f64)>, TestingError> {
        mutants
            .par_iter()
            .map(|m| {
                let start = Instant::now();
                let v = self.test(m.id(), m.classifier())?;
                Ok((v, start.elapsed().as_secs_f64()))
            })
            .collect()
    }
}

/// Exhaustive testing of every mutant on the whole dataset.
pub fn vanilla_test<M: Mutant>(
    original: &dyn Classifier,
    mutants: &[M],
    dataset: &LabeledDataset,
) -> Result<VerdictTable, TestingError> {
    let start = Instant::now();
    let reference = Reference::new(original, dataset)?;
    let refs: Vec<&M> = mutants.iter().collect();
    let results = reference.test_all(&refs)?;
    let mut timing = TimingRecord::default();
    timing.add(Phase::Testing, start.elapsed());
    timing.tested_mutants = results.len();
    let test_seconds = results.iter().map(|(v, s)| (v.id, *s)).collect();
    Ok(VerdictTable {
        mode: "vanilla".into(),
        verdicts: results.into_iter().map(|(v, _)| v).collect(),
        label_count: reference.label_count(),
        tested_points: dataset.len(),
        timing,
        test_seconds,
    })
}

/// Test each representative (and every quarantined mutant) on the whole
/// dataset and copy the representative's verdict to its cluster members.
///
/// `overhead` carries the sampling/spectra/graph/search phases measured by
/// the caller; testing time is added to it.
pub fn accelerated_test<M: Mutant>(
    original: &dyn Classifier,
    mutants: &[M],
    dataset: &LabeledDataset,
    reps: &RepresentativeMap,
    quarantined: &[MutantId],
    overhead: TimingRecord,
) -> Result<VerdictTable, TestingError> {
    let start = Instant::now();
    let by_id: HashMap<MutantId, &M> = mutants.iter().map(|m| (m.id(), m)).collect();
    let mut owner: HashMap<MutantId, MutantId> = HashMap::new();
    for (rep, members) in &reps.pairs {
        for m in members {
            if owner.insert(*m, *rep).is_some() {
                return Err(TestingError::Input(format!("mutant {m} appears in two clusters")));
            }
        }
    }
    for q in quarantined {
        owner.insert(*q, *q);
    }
    for m in mutants {
        if !owner.contains_key(&m.id()) {
            return Err(TestingError::Input(format!("mutant {} is neither clustered nor quarantined", m.id())));
        }
    }
    let mut to_test: Vec<MutantId> = reps.pairs.iter().map(|(r, _)| *r).chain(quarantined.iter().copied()).collect();
    to_test.sort();
    to_test.dedup();
    let selected: Vec<&M> = to_test
        .iter()
        .map(|id| {
            by_id.get(id).copied().ok_or_else(|| TestingError::Input(format!("representative {id} not in mutant set")))
        })
        .collect::<Result<_, _>>()?;

    let reference = Reference::new(original, dataset)?;
    let results = reference.test_all(&selected)?;
    let tested: HashMap<MutantId, MutantVerdict> = results.iter().map(|(v, _)| (v.id, v.clone())).collect();
    let verdicts = mutants
        .iter()
        .map(|m| {
            let rep = owner[&m.id()];
            let v = &tested[&rep];
            if rep == m.id() {
                v.clone()
            } else {
                v.propagate(m.id())
            }
        })
        .collect();
    let mut timing = overhead;
    timing.add(Phase::Testing, start.elapsed());
    timing.tested_mutants = results.len();
    Ok(VerdictTable {
        mode: "accelerated".into(),
        verdicts,
        label_count: reference.label_count(),
        tested_points: dataset.len(),
        timing,
        test_seconds: results.iter().map(|(v, s)| (v.id, *s)).collect(),
    })
}

/// Test only `selected` mutants; the rest are recorded as untested.
pub fn subset_test<M: Mutant>(
    original: &dyn Classifier,
    mutants: &[M],
    dataset: &LabeledDataset,
    selected: &BTreeSet<MutantId>,
) -> Result<VerdictTable, TestingError> {
    let start = Instant::now();
    let reference = Reference::new(original, dataset)?;
    let chosen: Vec<&M> = mutants.iter().filter(|m| selected.contains(&m.id())).collect();
    let results = reference.test_all(&chosen)?;
    let tested: HashMap<MutantId, MutantVerdict> = results.iter().map(|(v, _)| (v.id, v.clone())).collect();
    let verdicts = mutants
        .iter()
        .map(|m| {
            tested.get(&m.id()).cloned().unwrap_or(MutantVerdict {
                id: m.id(),
                killing_labels: 0,
                killed: false,
                diverges: false,
                provenance: Provenance::Untested,
            })
        })
        .collect();
    let mut timing = TimingRecord::default();
    timing.add(Phase::Testing, start.elapsed());
    timing.tested_mutants = results.len();
    Ok(VerdictTable {
        mode: "subset".into(),
        verdicts,
        label_count: reference.label_count(),
        tested_points: dataset.len(),
        timing,
        test_seconds: results.iter().map(|(v, s)| (v.id, *s)).collect(),
    })
}
