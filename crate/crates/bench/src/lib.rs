//! Shared fixtures for the benchmarks.

use spectramut_core::mutation::{generate_mutant_set, GenerationConfig, MutantSet};
use spectramut_core::synth::{synth_problem, SynthProblem, SynthSpec};

/// A synthetic problem with `per_class` points per class and `mutants` generated mutants.
pub fn fixture(per_class: usize, mutants: usize) -> (SynthProblem, MutantSet) {
    let problem = synth_problem(&SynthSpec { per_class, ..SynthSpec::default() }).expect("valid synthetic spec");
    let set = generate_mutant_set(&problem.model, &GenerationConfig::new(mutants, 1)).expect("mutants generate");
    (problem, set)
}

/// Deterministic pseudo-random series for transform benchmarks.
pub fn series(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = spectramut_core::rng::SplitMix64::new(seed);
    (0..len).map(|_| rng.gaussian()).collect()
}
