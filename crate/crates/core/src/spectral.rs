//! Stratified sampling, DFT-magnitude spectra of mutant outputs, and the
//! spectral distance/similarity that weights the mutant similarity graph.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::format::{put_f64s, put_u32, put_u64, FormatError, Reader, FORMAT_VERSION};
use crate::model::{batch_outputs, LabeledDataset, ModelError, OutputMatrix};
use crate::mutation::{Mutant, MutantId};
use crate::rng::SplitMix64;

pub const SPECTRA_MAGIC: &[u8; 4] = b"SMSP";

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("mutant {id}: {source}")]
    Model {
        id: MutantId,
        #[source]
        source: ModelError,
    },
    #[error("mutant {0} not present in spectra")]
    Missing(MutantId),
    #[error("mutant {0} is quarantined; distance undefined")]
    Quarantined(MutantId),
    #[error("similarity graph needs at least 2 usable mutants, got {0}")]
    DegenerateGraph(usize),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Ordered stratified sample of dataset indices shared by all mutants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSet {
    pub indices: Vec<usize>,
    pub per_class: usize,
    pub seed: u64,
    /// Labels whose whole population was taken because it had at most `per_class` points.
    pub saturated_classes: Vec<usize>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// SHA-256 over the ordered indices; equal digests mean identical samples.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for i in &self.indices {
            h.update((*i as u64).to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Draw `per_class` points of every class present, ordered by (label, index).
///
/// Classes are visited in ascending label order with one seeded stream; within
/// a class the leading `per_class` positions of a Fisher-Yates pass over the
/// class's ascending index list are kept.
pub fn stratified_sample(dataset: &LabeledDataset, per_class: usize, seed: u64) -> Result<SampleSet, SpectralError> {
    if per_class == 0 {
        return Err(SpectralError::Precondition("sampling rate must be at least 1".into()));
    }
    if dataset.is_empty() {
        return Err(SpectralError::Precondition("dataset is empty".into()));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, p) in dataset.points().iter().enumerate() {
        by_class.entry(p.label).or_default().push(i);
    }
    let mut rng = SplitMix64::new(seed);
    let mut indices = Vec::new();
    let mut saturated = Vec::new();
    for (label, mut members) in by_class {
        if per_class >= members.len() {
            saturated.push(label);
            indices.extend(members);
            continue;
        }
        for i in 0..per_class {
            let j = i + rng.below_usize(members.len() - i);
            members.swap(i, j);
        }
        let mut chosen = members[..per_class].to_vec();
        chosen.sort_unstable();
        indices.extend(chosen);
    }
    Ok(SampleSet { indices, per_class, seed, saturated_classes: saturated })
}

/// Reusable plan for length-`n` DFT magnitudes.
pub struct SpectrumPlan {
    fft: Arc<dyn Fft<f64>>,
    len: usize,
}

impl SpectrumPlan {
    pub fn new(len: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(len.max(1));
        Self { fft, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `|sum_j series[j] * exp(-2 pi i j k / n)|` for every bin `k`, unnormalized.
    pub fn magnitudes(&self, series: &[f64]) -> Result<Vec<f64>, SpectralError> {
        if series.is_empty() {
            return Err(SpectralError::Precondition("series must be nonempty".into()));
        }
        if series.len() != self.len {
            return Err(SpectralError::Precondition(format!("plan is for length {}, got {}", self.len, series.len())));
        }
        if let Some(pos) = series.iter().position(|v| !v.is_finite()) {
            return Err(SpectralError::NonFinite(pos));
        }
        let mut buf: Vec<Complex<f64>> = series.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fft.process(&mut buf);
        Ok(buf.iter().map(|c| c.norm()).collect())
    }
}

pub fn dft_magnitude(series: &[f64]) -> Result<Vec<f64>, SpectralError> {
    SpectrumPlan::new(series.len()).magnitudes(series)
}

/// Per-output feature vectors a mutant is compared by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    /// DFT magnitudes of each output column over the sample.
    Spectral,
    /// The output column itself (the no-FFT ablation).
    RawOutputs,
}

/// Feature vectors for one mutant, or the reason it was quarantined.
#[derive(Debug, Clone, PartialEq)]
pub enum MutantFeatures {
    /// `q` vectors of length `|S|`, output-major.
    Ready(Vec<f64>),
    Quarantined(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectraSet {
    pub features: FeatureKind,
    pub sample: SampleSet,
    num_outputs: usize,
    entries: Vec<(MutantId, MutantFeatures)>,
}

impl SpectraSet {
    pub fn num_outputs(&self) -> usize {
        self.num_outputs
    }

    pub fn series_len(&self) -> usize {
        self.sample.len()
    }

    pub fn ids(&self) -> impl Iterator<Item = MutantId> + '_ {
        self.entries.iter().map(|(id, _)| *id)
    }

    pub fn usable_ids(&self) -> Vec<MutantId> {
        self.entries.iter().filter(|(_, f)| matches!(f, MutantFeatures::Ready(_))).map(|(id, _)| *id).collect()
    }

    pub fn quarantined_ids(&self) -> Vec<MutantId> {
        self.entries.iter().filter(|(_, f)| matches!(f, MutantFeatures::Quarantined(_))).map(|(id, _)| *id).collect()
    }

    fn entry(&self, id: MutantId) -> Result<&MutantFeatures, SpectralError> {
        self.entries
            .binary_search_by_key(&id, |(i, _)| *i)
            .map(|pos| &self.entries[pos].1)
            .map_err(|_| SpectralError::Missing(id))
    }

    /// All `q * |S|` values for `id`, output-major.
    pub fn features_of(&self, id: MutantId) -> Result<&[f64], SpectralError> {
        match self.entry(id)? {
            MutantFeatures::Ready(v) => Ok(v),
            MutantFeatures::Quarantined(_) => Err(SpectralError::Quarantined(id)),
        }
    }

    /// Feature vector of output `output` for `id`.
    pub fn vector(&self, id: MutantId, output: usize) -> Result<&[f64], SpectralError> {
        let n = self.series_len();
        Ok(&self.features_of(id)?[output * n..(output + 1) * n])
    }

    pub fn from_entries(
        features: FeatureKind,
        sample: SampleSet,
        num_outputs: usize,
        mut entries: Vec<(MutantId, MutantFeatures)>,
    ) -> Result<Self, SpectralError> {
        entries.sort_by_key(|(id, _)| *id);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(SpectralError::Precondition("duplicate mutant id".into()));
        }
        let expected = num_outputs * sample.len();
        for (id, e) in &entries {
            if let MutantFeatures::Ready(v) = e {
                if v.len() != expected {
                    return Err(SpectralError::Precondition(format!(
                        "mutant {id}: {} feature values, expected {expected}",
                        v.len()
                    )));
                }
            }
        }
        Ok(Self { features, sample, num_outputs, entries })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(SPECTRA_MAGIC);
        out.push(FORMAT_VERSION);
        out.push(match self.features {
            FeatureKind::Spectral => 0,
            FeatureKind::RawOutputs => 1,
        });
        put_u32(&mut out, self.sample.per_class as u32);
        put_u64(&mut out, self.sample.seed);
        put_u64(&mut out, self.sample.indices.len() as u64);
        for i in &self.sample.indices {
            put_u64(&mut out, *i as u64);
        }
        put_u32(&mut out, self.sample.saturated_classes.len() as u32);
        for c in &self.sample.saturated_classes {
            put_u32(&mut out, *c as u32);
        }
        put_u32(&mut out, self.num_outputs as u32);
        put_u32(&mut out, self.entries.len() as u32);
        for (id, e) in &self.entries {
            put_u32(&mut out, id.0);
            match e {
                MutantFeatures::Ready(v) => {
                    out.push(0);
                    put_f64s(&mut out, v);
                }
                MutantFeatures::Quarantined(reason) => {
                    out.push(1);
                    put_u32(&mut out, reason.len() as u32);
                    out.extend_from_slice(reason.as_bytes());
                }
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, SpectralError> {
        let mut r = Reader::new(bytes);
        r.magic(SPECTRA_MAGIC)?;
        let features = match r.u8("feature kind")? {
            0 => FeatureKind::Spectral,
            1 => FeatureKind::RawOutputs,
            other => return Err(r.error(format!("unknown feature kind {other}")).into()),
        };
        let per_class = r.u32("per_class")? as usize;
        let seed = r.u64("seed")?;
        let n = r.u64("sample size")? as usize;
        let mut indices = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            indices.push(r.u64("sample index")? as usize);
        }
        let ns = r.u32("saturated count")? as usize;
        let mut saturated = Vec::with_capacity(ns.min(1 << 16));
        for _ in 0..ns {
            saturated.push(r.u32("saturated class")? as usize);
        }
        let q = r.u32("num_outputs")? as usize;
        let count = r.u32("entry count")? as usize;
        let mut entries = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let id = MutantId(r.u32("mutant id")?);
            let e = match r.u8("status")? {
                0 => MutantFeatures::Ready(r.f64s(q * n, "features")?),
                1 => {
                    let len = r.u32("reason length")? as usize;
                    let raw = r.take(len, "reason")?;
                    MutantFeatures::Quarantined(String::from_utf8_lossy(raw).into_owned())
                }
                other => return Err(r.error(format!("unknown status {other}")).into()),
            };
            entries.push((id, e));
        }
        r.finish()?;
        let sample = SampleSet { indices, per_class, seed, saturated_classes: saturated };
        Self::from_entries(features, sample, q, entries)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SpectralError> {
        fs::write(path, self.encode()).map_err(FormatError::from)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SpectralError> {
        Self::decode(&fs::read(path).map_err(FormatError::from)?)
    }
}

fn features_from_outputs(
    outputs: &OutputMatrix,
    plan: &SpectrumPlan,
    kind: FeatureKind,
) -> Result<Vec<f64>, SpectralError> {
    let q = outputs.num_outputs();
    let mut out = Vec::with_capacity(q * outputs.len());
    for i in 0..q {
        let column = outputs.column(i);
        match kind {
            FeatureKind::Spectral => out.extend(plan.magnitudes(&column)?),
            FeatureKind::RawOutputs => out.extend(column),
        }
    }
    Ok(out)
}

/// Feature vectors for every mutant over `sample`.
///
/// Each mutant is run over the sample exactly once (`|S|` forward passes);
/// all `q` output columns are taken from that memoized matrix. Mutants whose
/// outputs blow up to non-finite values are quarantined rather than failing
/// the whole computation.
pub fn mutant_spectra<M: Mutant>(
    mutants: &[M],
    dataset: &LabeledDataset,
    sample: &SampleSet,
    kind: FeatureKind,
) -> Result<SpectraSet, SpectralError> {
    if sample.is_empty() {
        return Err(SpectralError::Precondition("sample is empty".into()));
    }
    if let Some(&bad) = sample.indices.iter().find(|&&i| i >= dataset.len()) {
        return Err(SpectralError::Precondition(format!(
            "sample index {bad} outside dataset of {} points",
            dataset.len()
        )));
    }
    let q = mutants.first().map(|m| m.classifier().num_outputs()).unwrap_or(0);
    let plan = SpectrumPlan::new(sample.len());
    let entries = mutants
        .par_iter()
        .map(|m| {
            let id = m.id();
            if m.classifier().num_outputs() != q {
                return Err(SpectralError::Precondition(format!(
                    "mutant {id} has {} outputs, expected {q}",
                    m.classifier().num_outputs()
                )));
            }
            match batch_outputs(m.classifier(), dataset, &sample.indices) {
                Ok(outputs) => Ok((id, MutantFeatures::Ready(features_from_outputs(&outputs, &plan, kind)?))),
                Err(e) if is_numeric(&e) => {
                    log::warn!("mutant {id} quarantined: {e}");
                    Ok((id, MutantFeatures::Quarantined(e.to_string())))
                }
                Err(e) => Err(SpectralError::Model { id, source: e }),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    SpectraSet::from_entries(kind, sample.clone(), q, entries)
}

/// Spectra for host-supplied output matrices (one row per sample point, in sample order).
pub fn spectra_from_outputs(
    outputs: Vec<(MutantId, OutputMatrix)>,
    sample: &SampleSet,
    kind: FeatureKind,
) -> Result<SpectraSet, SpectralError> {
    let q = outputs.first().map(|(_, m)| m.num_outputs()).unwrap_or(0);
    let plan = SpectrumPlan::new(sample.len());
    let mut entries = Vec::with_capacity(outputs.len());
    for (id, m) in outputs {
        if m.len() != sample.len() || m.num_outputs() != q {
            return Err(SpectralError::Precondition(format!(
                "mutant {id}: output matrix is {}x{}, expected {}x{q}",
                m.len(),
                m.num_outputs(),
                sample.len()
            )));
        }
        let e = if m.values().iter().all(|v| v.is_finite()) {
            MutantFeatures::Ready(features_from_outputs(&m, &plan, kind)?)
        } else {
            MutantFeatures::Quarantined("non-finite output".into())
        };
        entries.push((id, e));
    }
    SpectraSet::from_entries(kind, sample.clone(), q, entries)
}

fn is_numeric(e: &ModelError) -> bool {
    match e {
        ModelError::NonFinite { .. } => true,
        ModelError::AtPoint { source, .. } => is_numeric(source),
        _ => false,
    }
}

fn max_output_distance(a: &[f64], b: &[f64], n: usize) -> f64 {
    a.chunks(n)
        .zip(b.chunks(n))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Largest per-output Euclidean distance between the two mutants' feature vectors.
pub fn mutant_distance(a: MutantId, b: MutantId, spectra: &SpectraSet) -> Result<f64, SpectralError> {
    let fa = spectra.features_of(a)?;
    let fb = spectra.features_of(b)?;
    if a == b {
        return Ok(0.0);
    }
    Ok(max_output_distance(fa, fb, spectra.series_len()))
}

/// `exp(-distance)`, floored at the smallest positive normal so weights stay in `(0, 1]`.
pub fn similarity_from_distance(distance: f64) -> f64 {
    (-distance).exp().max(f64::MIN_POSITIVE)
}

pub fn mutant_similarity(a: MutantId, b: MutantId, spectra: &SpectraSet) -> Result<f64, SpectralError> {
    mutant_distance(a, b, spectra).map(similarity_from_distance)
}

/// Complete weighted graph over mutants, stored as a condensed upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    nodes: Vec<MutantId>,
    weights: Vec<f64>,
    sample_digest: Option<String>,
}

#[inline]
fn condensed_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl SimilarityGraph {
    /// Graph from an explicit weight function over node positions `i < j`.
    pub fn from_fn(nodes: Vec<MutantId>, mut weight: impl FnMut(usize, usize) -> f64) -> Result<Self, SpectralError> {
        let n = nodes.len();
        if n < 2 {
            return Err(SpectralError::DegenerateGraph(n));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SpectralError::Precondition("node ids must be strictly ascending".into()));
        }
        let mut weights = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                let w = weight(i, j);
                if !(w > 0.0 && w <= 1.0) {
                    return Err(SpectralError::Precondition(format!("edge ({i}, {j}) weight {w} outside (0, 1]")));
                }
                weights.push(w);
            }
        }
        Ok(Self { nodes, weights, sample_digest: None })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[MutantId] {
        &self.nodes
    }

    pub fn edge_count(&self) -> usize {
        self.weights.len()
    }

    pub fn sample_digest(&self) -> Option<&str> {
        self.sample_digest.as_deref()
    }

    /// Weight between node positions; `1.0` on the diagonal.
    pub fn weight_at(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 1.0,
            std::cmp::Ordering::Less => self.weights[condensed_index(self.nodes.len(), i, j)],
            std::cmp::Ordering::Greater => self.weights[condensed_index(self.nodes.len(), j, i)],
        }
    }

    pub fn position(&self, id: MutantId) -> Option<usize> {
        self.nodes.binary_search(&id).ok()
    }

    pub fn weight(&self, a: MutantId, b: MutantId) -> Option<f64> {
        Some(self.weight_at(self.position(a)?, self.position(b)?))
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(1.0, f64::min)
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }
}

/// Similarity graph over every non-quarantined mutant in `spectra`.
pub fn build_similarity_graph(spectra: &SpectraSet) -> Result<SimilarityGraph, SpectralError> {
    let nodes = spectra.usable_ids();
    let n = nodes.len();
    if n < 2 {
        return Err(SpectralError::DegenerateGraph(n));
    }
    let len = spectra.series_len();
    let feats: Vec<&[f64]> = nodes.iter().map(|id| spectra.features_of(*id)).collect::<Result<_, _>>()?;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).map(|j| similarity_from_distance(max_output_distance(feats[i], feats[j], len))).collect())
        .collect();
    Ok(SimilarityGraph {
        nodes,
        weights: rows.into_iter().flatten().collect(),
        sample_digest: Some(spectra.sample.digest()),
    })
}
