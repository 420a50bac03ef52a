//! Comparison techniques: random mutant selection, boundary sample
//! selection, random sample selection and the no-FFT clustering variant.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{Classifier, LabeledDataset};
use crate::mutation::{Mutant, MutantId};
use crate::pipeline::{run_accelerated, AccelConfig, PipelineError, RunOutcome};
use crate::rng::SplitMix64;
use crate::spectral::{stratified_sample, FeatureKind, SampleSet};
use crate::testing::{subset_test, vanilla_test, TestingError, VerdictTable};

pub const DEFAULT_RMS_FRACTION: f64 = 0.75;
pub const DEFAULT_BSS_THRESHOLD: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    Rms,
    Bss,
    Rss,
    DmSharpStar,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Rms => "rms",
            BaselineKind::Bss => "bss",
            BaselineKind::Rss => "rss",
            BaselineKind::DmSharpStar => "dmsharp-star",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    pub rms_fraction: f64,
    pub bss_threshold: usize,
    /// Per-class sample size for RSS.
    pub rss_per_class: usize,
    pub seed: u64,
}

impl BaselineConfig {
    pub fn new(kind: BaselineKind, seed: u64) -> Self {
        Self { kind, rms_fraction: DEFAULT_RMS_FRACTION, bss_threshold: DEFAULT_BSS_THRESHOLD, rss_per_class: 1, seed }
    }
}

/// Vanilla-test a uniformly chosen `ceil(fraction * |M|)` subset of mutants.
pub fn rms_test<M: Mutant>(
    original: &dyn Classifier,
    mutants: &[M],
    dataset: &LabeledDataset,
    fraction: f64,
    seed: u64,
) -> Result<VerdictTable, TestingError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(TestingError::Input(format!("RMS fraction {fraction} outside (0, 1]")));
    }
    let take = ((fraction * mutants.len() as f64).ceil() as usize).min(mutants.len());
    let mut ids: Vec<MutantId> = mutants.iter().map(|m| m.id()).collect();
    SplitMix64::new(seed).shuffle(&mut ids);
    let selected: BTreeSet<MutantId> = ids.into_iter().take(take).collect();
    let mut table = subset_test(original, mutants, dataset, &selected)?;
    table.mode = BaselineKind::Rms.name().into();
    Ok(table)
}

/// Top-1 minus top-2 output of the original on every point.
pub fn boundary_margins(original: &dyn Classifier, dataset: &LabeledDataset) -> Result<Vec<f64>, TestingError> {
    dataset
        .points()
        .iter()
        .map(|t| {
            let out = original.forward(&t.features).map_err(TestingError::Original)?;
            let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for v in out {
                if v > first {
                    second = first;
                    first = v;
                } else if v > second {
                    second = v;
                }
            }
            Ok(if second.is_finite() { first - second } else { first })
        })
        .collect()
}

/// The `ceil(|T| / threshold)` smallest-margin points, ties by index.
pub fn bss_select(
    original: &dyn Classifier,
    dataset: &LabeledDataset,
    threshold: usize,
) -> Result<Vec<usize>, TestingError> {
    if threshold == 0 {
        return Err(TestingError::Input("BSS threshold must be at least 1".into()));
    }
    let margins = boundary_margins(original, dataset)?;
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.sort_by(|&a, &b| margins[a].total_cmp(&margins[b]).then(a.cmp(&b)));
    let keep = dataset.len().div_ceil(threshold).max(1).min(dataset.len());
    order.truncate(keep);
    Ok(order)
}

/// Test every mutant on the boundary subset only.
pub fn bss_test<M: Mutant>(
    original: &dyn Classifier,
    mutants: &[M],
    dataset: &LabeledDataset,
    threshold: usize,
) -> Result<VerdictTable, TestingError> {
    let selected = bss_select(original, dataset, threshold)?;
    let mut table = vanilla_test(original, mutants, &dataset.subset(&selected))?;
    table.mode = BaselineKind::Bss.name().into();
    Ok(table)
}

/// Test every mutant on a stratified random sample with `per_class` points per class.
pub fn rss_test<M: Mutant>(
    original: &dyn Classifier,
    mutants: &[M],
    dataset: &LabeledDataset,
    per_class: usize,
    seed: u64,
) -> Result<(VerdictTable, SampleSet), TestingError> {
    let sample = stratified_sample(dataset, per_class, seed).map_err(|e| TestingError::Input(e.to_string()))?;
    let mut table = vanilla_test(original, mutants, &dataset.subset(&sample.indices))?;
    table.mode = BaselineKind::Rss.name().into();
    Ok((table, sample))
}

/// The accelerated pipeline with raw sampled outputs as features.
pub fn dmsharp_star<M: Mutant>(
    original: &dyn Classifier,
    mutants: &[M],
    dataset: &LabeledDataset,
    config: &AccelConfig,
) -> Result<RunOutcome, PipelineError> {
    let config = AccelConfig { features: FeatureKind::RawOutputs, ..config.clone() };
    run_accelerated(original, mutants, dataset, &config)
}
