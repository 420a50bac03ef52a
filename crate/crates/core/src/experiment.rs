//! Threshold sweeps: reduction rate and score error over a grid of
//! sampling rates, linkage thresholds and seeded repeats.

use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cluster::{mutant_reduction_rate, select_representatives, ClusterSet, Dendrogram, SAMPLING_RATES};
use crate::metrics::{ms_error, spearman_rho};
use crate::model::LabeledDataset;
use crate::mutation::{Mutant, MutantId};
use crate::pipeline::{AccelConfig, PipelineError};
use crate::rng::derive_seed;
use crate::spectral::{build_similarity_graph, mutant_spectra, stratified_sample, SpectralError};
use crate::testing::{mutation_score, MutantVerdict, VerdictTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub x_grid: Vec<usize>,
    pub tau_grid: Vec<f64>,
    pub repeats: usize,
}

/// `0.05, 0.10, ..., 0.95`.
pub fn default_tau_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 * 0.05).collect()
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { x_grid: SAMPLING_RATES.to_vec(), tau_grid: default_tau_grid(), repeats: 5 }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.x_grid.is_empty() || self.tau_grid.is_empty() {
            return Err(PipelineError::Config("sweep grids must be nonempty".into()));
        }
        if self.x_grid.contains(&0) {
            return Err(PipelineError::Config("sampling rates must be at least 1".into()));
        }
        if let Some(t) = self.tau_grid.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(PipelineError::Config(format!("tau {t} outside (0, 1)")));
        }
        if self.repeats == 0 {
            return Err(PipelineError::Config("repeats must be at least 1".into()));
        }
        Ok(())
    }

    pub fn row_count(&self) -> usize {
        self.x_grid.len() * self.tau_grid.len() * self.repeats
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub x: usize,
    pub tau: f64,
    pub repeat: usize,
    pub clusters: usize,
    pub reduction_rate: f64,
    pub ms_error: Option<f64>,
    /// Analysis overhead plus the vanilla testing time of the representatives.
    pub estimated_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoCell {
    pub x: usize,
    pub repeat: usize,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub rows: Vec<SweepRow>,
    pub rho: Vec<RhoCell>,
    pub vanilla_ms: f64,
}

pub const SWEEP_CSV_HEADER: &str = "run_id,x,tau,repeat,clusters,reduction_rate,ms_error,estimated_seconds";

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "x{}-r{},{},{},{},{},{},{},{:.6}\n",
                r.x,
                r.repeat,
                r.x,
                r.tau,
                r.repeat,
                r.clusters,
                r.reduction_rate,
                r.ms_error.map_or("N/A".to_string(), |e| e.to_string()),
                r.estimated_seconds
            ));
        }
        out
    }

    /// One row per sampling rate, one column per repeat; `N/A` for constant series.
    pub fn rho_csv(&self) -> String {
        let mut out = String::from("x");
        for r in 0..self.spec.repeats {
            out.push_str(&format!(",repeat{r}"));
        }
        out.push('\n');
        for &x in &self.spec.x_grid {
            out.push_str(&x.to_string());
            for cell in self.rho.iter().filter(|c| c.x == x) {
                out.push(',');
                out.push_str(&cell.rho.map_or("N/A".to_string(), |v| format!("{v:.4}")));
            }
            out.push('\n');
        }
        out
    }
}

/// Copy the vanilla verdict of each representative to its members; quarantined mutants keep their own.
fn propagated(
    vanilla: &HashMap<MutantId, &MutantVerdict>,
    clusters: &ClusterSet,
    seed: u64,
    config: &AccelConfig,
    quarantined: &[MutantId],
) -> (Vec<MutantVerdict>, Vec<MutantId>) {
    let reps = select_representatives(clusters, seed, config.representative_mode);
    let mut verdicts = Vec::new();
    let mut tested = Vec::new();
    for (rep, members) in &reps.pairs {
        tested.push(*rep);
        for m in members {
            verdicts.push(MutantVerdict { id: *m, ..vanilla[rep].clone() });
        }
    }
    for q in quarantined {
        tested.push(*q);
        verdicts.push(vanilla[q].clone());
    }
    (verdicts, tested)
}

/// Sweep every `(x, tau, repeat)` against a cached vanilla run.
///
/// Repeat `r` samples with `derive_seed(config.sample_seed, r)` and picks
/// representatives with `derive_seed(config.representative_seed, r)`.
pub fn sweep<M: Mutant>(
    mutants: &[M],
    dataset: &LabeledDataset,
    spec: &SweepSpec,
    config: &AccelConfig,
    vanilla: &VerdictTable,
) -> Result<SweepResult, PipelineError> {
    spec.validate()?;
    let vanilla_ms = vanilla.mutation_score()?;
    let by_id: HashMap<MutantId, &MutantVerdict> = vanilla.verdicts.iter().map(|v| (v.id, v)).collect();
    if let Some(m) = mutants.iter().find(|m| !by_id.contains_key(&m.id())) {
        return Err(PipelineError::Config(format!("vanilla run has no verdict for mutant {}", m.id())));
    }
    let seconds: HashMap<MutantId, f64> = vanilla.test_seconds.iter().copied().collect();
    let mut rows = Vec::with_capacity(spec.row_count());
    let mut rho = Vec::new();
    for repeat in 0..spec.repeats {
        let sample_seed = derive_seed(config.sample_seed, repeat as u64);
        let rep_seed = derive_seed(config.representative_seed, repeat as u64);
        for &x in &spec.x_grid {
            let start = Instant::now();
            let sample = stratified_sample(dataset, x, sample_seed)?;
            let spectra = mutant_spectra(mutants, dataset, &sample, config.features)?;
            let quarantined = spectra.quarantined_ids();
            let dendrogram = match build_similarity_graph(&spectra) {
                Ok(g) => Some(Dendrogram::build(&g)),
                Err(SpectralError::DegenerateGraph(_)) => None,
                Err(e) => return Err(e.into()),
            };
            let overhead = start.elapsed().as_secs_f64();
            let mut rates = Vec::with_capacity(spec.tau_grid.len());
            for &tau in &spec.tau_grid {
                let clusters = match &dendrogram {
                    Some(d) => d.cut(tau),
                    None => ClusterSet::singletons(&spectra.usable_ids()),
                };
                let (verdicts, tested) = propagated(&by_id, &clusters, rep_seed, config, &quarantined);
                let ms = mutation_score(&verdicts, vanilla.label_count)?;
                let test_time: f64 = tested.iter().map(|id| seconds.get(id).copied().unwrap_or(0.0)).sum();
                let count = clusters.len() + quarantined.len();
                let rate = mutant_reduction_rate(mutants.len(), count);
                rates.push(rate);
                rows.push(SweepRow {
                    x,
                    tau,
                    repeat,
                    clusters: count,
                    reduction_rate: rate,
                    ms_error: ms_error(vanilla_ms, ms),
                    estimated_seconds: overhead + test_time,
                });
            }
            rho.push(RhoCell { x, repeat, rho: spearman_rho(&spec.tau_grid, &rates) });
        }
    }
    // Report rows grouped by sampling rate, then repeat, then threshold.
    rows.sort_by_key(|r| (spec.x_grid.iter().position(|x| *x == r.x), r.repeat));
    rho.sort_by_key(|c| (spec.x_grid.iter().position(|x| *x == c.x), c.repeat));
    Ok(SweepResult { spec: spec.clone(), rows, rho, vanilla_ms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DataPoint, OutputMatrix, TabulatedClassifier};
    use crate::mutation::ExternalMutant;
    use crate::testing::vanilla_test;

    fn dataset() -> LabeledDataset {
        let points = (0..30).map(|i| DataPoint { features: vec![i as f64], label: i % 3 }).collect();
        LabeledDataset::new(points, 1, 3).unwrap()
    }

    fn table(ds: &LabeledDataset, f: impl Fn(usize, usize) -> Vec<f64>) -> TabulatedClassifier {
        let rows = ds.points().iter().enumerate().map(|(i, p)| f(i, p.label)).collect();
        TabulatedClassifier::from_outputs(ds, &OutputMatrix::from_rows(3, rows).unwrap())
    }

    fn probs(c: usize, conf: f64) -> Vec<f64> {
        let mut v = vec![(1.0 - conf) / 2.0; 3];
        v[c] = conf;
        v
    }

    #[test]
    fn grid_shape_and_row_count() {
        let spec = SweepSpec::default();
        assert_eq!(spec.tau_grid.len(), 19);
        assert_eq!(spec.row_count(), 1045);
        assert!((spec.tau_grid[18] - 0.95).abs() < 1e-12);
    }

    #[test]
    fn identical_mutants_give_constant_rates() {
        let ds = dataset();
        let original = table(&ds, |_, l| probs(l, 0.9));
        let mutants: Vec<_> = (0..6u32)
            .map(|k| ExternalMutant {
                id: MutantId(k),
                model: table(&ds, |i, l| probs(if i == 0 { 1 } else { l }, 0.7)),
            })
            .collect();
        let vanilla = vanilla_test(&original, &mutants, &ds).unwrap();
        let spec = SweepSpec { x_grid: vec![1, 5], tau_grid: default_tau_grid(), repeats: 2 };
        let result = sweep(&mutants, &ds, &spec, &AccelConfig::default(), &vanilla).unwrap();
        assert_eq!(result.rows.len(), 2 * 19 * 2);
        assert!(result.rho.iter().all(|c| c.rho.is_none()));
        assert!(result.rows.iter().all(|r| r.ms_error == Some(0.0)));
        assert!(result.rho_csv().contains("N/A"));
        assert_eq!(result.to_csv().lines().count(), 1 + 76);
    }

    #[test]
    fn separated_families_decrease() {
        let ds = dataset();
        let original = table(&ds, |_, l| probs(l, 0.9));
        let mutants: Vec<_> = (0..8u32)
            .map(|k| ExternalMutant {
                id: MutantId(k),
                model: table(&ds, |i, l| {
                    let conf = 0.5 + 0.05 * k as f64;
                    probs(if i % 8 == k as usize { (l + 1) % 3 } else { l }, conf)
                }),
            })
            .collect();
        let vanilla = vanilla_test(&original, &mutants, &ds).unwrap();
        let spec = SweepSpec { x_grid: vec![3, 10], tau_grid: default_tau_grid(), repeats: 1 };
        let result = sweep(&mutants, &ds, &spec, &AccelConfig::default(), &vanilla).unwrap();
        for cell in &result.rho {
            assert!(cell.rho.is_none_or(|r| r < 0.0), "{cell:?}");
        }
        for w in result.rows.windows(2) {
            if w[0].x == w[1].x && w[0].repeat == w[1].repeat {
                assert!(w[1].reduction_rate <= w[0].reduction_rate);
            }
        }
    }
}
