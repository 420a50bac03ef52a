//! Spectral clustering of model mutants to speed up mutation testing of
//! feed-forward classifiers.
//!
//! Mutants are compared by the DFT magnitudes of their outputs over a
//! stratified sample of the test set, clustered by average-linkage
//! agglomeration, and only one representative per cluster is fully tested.

pub mod baselines;
pub mod cluster;
pub mod experiment;
pub mod format;
pub mod metrics;
pub mod model;
pub mod mutation;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod spectral;
pub mod synth;
pub mod testing;

pub use cluster::{
    hac_cluster, parameter_search, select_representatives, ClusterSet, Dendrogram, ReductionConstraint,
    RepresentativeMap, RepresentativeMode, SearchOutcome, SearchTrace, NOT_SATISFIABLE_MESSAGE, SAMPLING_RATES,
};
pub use experiment::{sweep, SweepResult, SweepSpec};
pub use model::{Activation, Classifier, DataPoint, DenseLayer, FcnnClassifier, LabeledDataset, OutputMatrix};
pub use mutation::{generate_mutant_set, GenerationConfig, Manifest, Mutant, MutantId, MutantSet, MutatorKind};
pub use pipeline::{run_accelerated, AccelConfig, AcceleratedRun, RunOutcome};
pub use report::{RunReport, REPORT_SCHEMA_VERSION};
pub use spectral::{
    build_similarity_graph, mutant_spectra, stratified_sample, FeatureKind, SimilarityGraph, SpectraSet,
};
pub use testing::{accelerated_test, vanilla_test, MutantVerdict, Provenance, TimingRecord, VerdictTable};
