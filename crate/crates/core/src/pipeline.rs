//! End-to-end accelerated mutation testing: sampling, spectra, similarity
//! graph, threshold search, representative testing and propagation.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{
    parameter_search, select_representatives, ClusterError, ClusterSet, Dendrogram, ReductionConstraint,
    RepresentativeMap, RepresentativeMode, SearchOutcome, SearchTrace, SAMPLING_RATES,
};
use crate::model::{Classifier, LabeledDataset};
use crate::mutation::{Mutant, MutantId};
use crate::spectral::{
    build_similarity_graph, mutant_spectra, stratified_sample, FeatureKind, SampleSet, SimilarityGraph, SpectraSet,
    SpectralError,
};
use crate::testing::{accelerated_test, Phase, TestingError, TimingRecord, VerdictTable};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Testing(#[from] TestingError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccelConfig {
    pub reduction: ReductionConstraint,
    pub rates: Vec<usize>,
    /// Skip the sampling-rate search and use this value.
    pub fixed_x: Option<usize>,
    /// Skip the threshold search and cut at this value.
    pub fixed_tau: Option<f64>,
    pub features: FeatureKind,
    pub sample_seed: u64,
    pub representative_seed: u64,
    pub representative_mode: RepresentativeMode,
}

impl Default for AccelConfig {
    fn default() -> Self {
        Self {
            reduction: ReductionConstraint::default(),
            rates: SAMPLING_RATES.to_vec(),
            fixed_x: None,
            fixed_tau: None,
            features: FeatureKind::Spectral,
            sample_seed: 0,
            representative_seed: 1,
            representative_mode: RepresentativeMode::Random,
        }
    }
}

impl AccelConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.fixed_x == Some(0) {
            return Err(PipelineError::Config("x must be at least 1".into()));
        }
        if self.fixed_x.is_none() && self.rates.is_empty() {
            return Err(PipelineError::Config("sampling-rate grid is empty".into()));
        }
        if let Some(t) = self.fixed_tau {
            if !(t > 0.0 && t < 1.0) {
                return Err(PipelineError::Config(format!("tau {t} outside (0, 1)")));
            }
        }
        Ok(())
    }

    fn grid(&self) -> Vec<usize> {
        match self.fixed_x {
            Some(x) => vec![x],
            None => self.rates.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AcceleratedRun {
    pub table: VerdictTable,
    pub clusters: ClusterSet,
    pub representatives: RepresentativeMap,
    pub sample: SampleSet,
    pub quarantined: Vec<MutantId>,
    /// Absent when the threshold was fixed.
    pub trace: Option<SearchTrace>,
}

impl AcceleratedRun {
    pub fn per_class(&self) -> usize {
        self.sample.per_class
    }

    pub fn tau(&self) -> f64 {
        self.clusters.tau
    }
}

#[derive(Debug, Clone)]
pub enum RunOutcome {
    Completed(Box<AcceleratedRun>),
    NotSatisfiable(SearchTrace),
}

struct Analysis {
    sample: SampleSet,
    spectra: SpectraSet,
    graph: Option<SimilarityGraph>,
}

fn analyse<M: Mutant>(
    mutants: &[M],
    dataset: &LabeledDataset,
    x: usize,
    config: &AccelConfig,
    timing: &mut TimingRecord,
) -> Result<Analysis, PipelineError> {
    let sample = timing.time(Phase::Sampling, || stratified_sample(dataset, x, config.sample_seed))?;
    let spectra = timing.time(Phase::Spectra, || mutant_spectra(mutants, dataset, &sample, config.features))?;
    let graph = timing.time(Phase::Graph, || match build_similarity_graph(&spectra) {
        Ok(g) => Ok(Some(g)),
        Err(SpectralError::DegenerateGraph(_)) => Ok(None),
        Err(e) => Err(e),
    })?;
    Ok(Analysis { sample, spectra, graph })
}

/// Cluster the mutants by output features and fully test one representative per cluster.
pub fn run_accelerated<M: Mutant>(
    original: &dyn Classifier,
    mutants: &[M],
    dataset: &LabeledDataset,
    config: &AccelConfig,
) -> Result<RunOutcome, PipelineError> {
    config.validate()?;
    let mut timing = TimingRecord::default();
    let (analysis, clusters, trace) = match config.fixed_tau {
        Some(tau) => {
            let x = config.grid()[0];
            let analysis = analyse(mutants, dataset, x, config, &mut timing)?;
            let mut clusters = timing.time(Phase::Clustering, || match &analysis.graph {
                Some(g) => Dendrogram::build(g).cut(tau),
                None => ClusterSet { tau, ..ClusterSet::singletons(&analysis.spectra.usable_ids()) },
            });
            clusters.per_class = Some(x);
            (analysis, clusters, None)
        }
        None => {
            let start = Instant::now();
            let mut inner = TimingRecord::default();
            let mut last: Option<Analysis> = None;
            let outcome = parameter_search(&config.grid(), &config.reduction, |x| {
                let a = analyse(mutants, dataset, x, config, &mut inner).map_err(|e| match e {
                    PipelineError::Spectral(s) => ClusterError::from(s),
                    other => ClusterError::Parameter(other.to_string()),
                })?;
                let graph = match &a.graph {
                    Some(g) => g.clone(),
                    None => return Err(ClusterError::Parameter("fewer than two usable mutants".into())),
                };
                let sample = a.sample.clone();
                last = Some(a);
                Ok((sample, graph))
            })?;
            let search = start.elapsed().as_secs_f64() - inner.total();
            timing.merge(&inner);
            timing.add(Phase::Search, std::time::Duration::from_secs_f64(search.max(0.0)));
            match outcome {
                SearchOutcome::NotSatisfiable { trace } => return Ok(RunOutcome::NotSatisfiable(trace)),
                SearchOutcome::Satisfied { clusters, trace, .. } => {
                    let analysis = last.expect("search produced at least one analysis");
                    (analysis, clusters, Some(trace))
                }
            }
        }
    };
    let reps = timing.time(Phase::Selection, || {
        select_representatives(&clusters, config.representative_seed, config.representative_mode)
    });
    let quarantined = analysis.spectra.quarantined_ids();
    let mut table = accelerated_test(original, mutants, dataset, &reps, &quarantined, timing)?;
    table.mode = match config.features {
        FeatureKind::Spectral => "dmsharp".into(),
        FeatureKind::RawOutputs => "dmsharp-star".into(),
    };
    Ok(RunOutcome::Completed(Box::new(AcceleratedRun {
        table,
        clusters,
        representatives: reps,
        sample: analysis.sample,
        quarantined,
        trace,
    })))
}
