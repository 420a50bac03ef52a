//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use common::{desk_fixture, indexed_dataset, probs, tabulate, Counting};
use spectramut_core::baselines::{bss_test, dmsharp_star, rms_test, rss_test};
use spectramut_core::cluster::{hac_cluster, ReductionConstraint};
use spectramut_core::format::{encode_dataset, encode_model};
use spectramut_core::metrics::{fmt_opt, ms_error, predictive_metrics, reduction};
use spectramut_core::mutation::{generate_mutant_set, ExternalMutant, GenerationConfig, MutantId, MutatorKind};
use spectramut_core::pipeline::{run_accelerated, AccelConfig, RunOutcome};
use spectramut_core::report::{sha256_hex, InputHashes, RunReport, SearchSummary};
use spectramut_core::rng::SplitMix64;
use spectramut_core::spectral::{
    dft_magnitude, mutant_distance, mutant_similarity, mutant_spectra, stratified_sample, FeatureKind, MutantFeatures,
    SampleSet, SimilarityGraph, SpectraSet,
};
use spectramut_core::testing::{vanilla_test, MutantVerdict, Provenance, TimingRecord, VerdictTable};
use spectramut_core::{sweep, AcceleratedRun, SweepSpec};

type Check = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Check, Duration);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn completed(outcome: RunOutcome) -> Result<Box<AcceleratedRun>, String> {
    match outcome {
        RunOutcome::Completed(run) => Ok(run),
        RunOutcome::NotSatisfiable(trace) => Err(format!("search not satisfiable after {} rounds", trace.rounds.len())),
    }
}

// 1 ------------------------------------------------------------------------

/// Naive DFT magnitudes of `batch` series of length `n` stored point-major
/// (`values[j * batch + r]` is point `j` of series `r`).
#[allow(clippy::needless_range_loop)]
fn naive_magnitudes(values: &[f64], n: usize, batch: usize) -> Vec<Vec<f64>> {
    let (cos, sin): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|j| {
            let a = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            (a.cos(), a.sin())
        })
        .unzip();
    let mut out = vec![vec![0.0; n]; batch];
    let (mut re, mut im) = (vec![0.0; batch], vec![0.0; batch]);
    for k in 0..n {
        re.fill(0.0);
        im.fill(0.0);
        let mut idx = 0;
        for j in 0..n {
            let (c, s) = (cos[idx], sin[idx]);
            let row = &values[j * batch..(j + 1) * batch];
            for r in 0..batch {
                re[r] += row[r] * c;
                im[r] -= row[r] * s;
            }
            idx += k;
            if idx >= n {
                idx -= n;
            }
        }
        for r in 0..batch {
            out[r][k] = re[r].hypot(im[r]);
        }
    }
    out
}

fn dft_oracle() -> Check {
    const BATCH: usize = 100;
    let worst = (1..=512usize)
        .into_par_iter()
        .map(|n| -> Result<(f64, f64), String> {
            let mut rng = SplitMix64::new(n as u64 * 7919);
            let values: Vec<f64> = (0..n * BATCH).map(|_| rng.gaussian()).collect();
            let slow_all = naive_magnitudes(&values, n, BATCH);
            let (mut rel, mut parseval) = (0.0f64, 0.0f64);
            for (r, slow) in slow_all.iter().enumerate() {
                let series: Vec<f64> = (0..n).map(|j| values[j * BATCH + r]).collect();
                let fast = dft_magnitude(&series).map_err(fail)?;
                let scale = slow.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
                let diff = fast.iter().zip(slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                rel = rel.max(diff / scale);
                let time: f64 = series.iter().map(|v| v * v).sum();
                let freq: f64 = fast.iter().map(|v| v * v).sum::<f64>() / n as f64;
                parseval = parseval.max((time - freq).abs() / time.max(f64::MIN_POSITIVE));
            }
            Ok((rel, parseval))
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold((0.0f64, 0.0f64), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    ensure!(worst.0 <= 1e-9, "max relative error {:e}", worst.0);
    ensure!(worst.1 <= 1e-6, "max Parseval error {:e}", worst.1);
    Ok(format!("max rel err {:.2e}, Parseval {:.2e}", worst.0, worst.1))
}

// 2 ------------------------------------------------------------------------

fn similarity_axioms() -> Check {
    let mut rng = SplitMix64::new(2024);
    let mut worst_triangle = f64::NEG_INFINITY;
    for trial in 0..500 {
        let q = 1 + rng.below_usize(4);
        let n = 1 + rng.below_usize(64);
        let random = |rng: &mut SplitMix64| -> Vec<f64> { (0..q * n).map(|_| rng.next_f64() * 3.0).collect() };
        let a = random(&mut rng);
        let b = random(&mut rng);
        // Every fifth triple carries an exact duplicate to exercise identity.
        let c = if trial % 5 == 0 { a.clone() } else { random(&mut rng) };
        let sample = SampleSet { indices: (0..n).collect(), per_class: n, seed: 0, saturated_classes: Vec::new() };
        let entries = vec![
            (MutantId(0), MutantFeatures::Ready(a.clone())),
            (MutantId(1), MutantFeatures::Ready(b.clone())),
            (MutantId(2), MutantFeatures::Ready(c.clone())),
        ];
        let set = SpectraSet::from_entries(FeatureKind::Spectral, sample, q, entries).map_err(fail)?;
        let ids = [MutantId(0), MutantId(1), MutantId(2)];
        let vecs = [&a, &b, &c];
        let d = |i: usize, j: usize| mutant_distance(ids[i], ids[j], &set).map_err(fail);
        for i in 0..3 {
            ensure!(d(i, i)? == 0.0, "trial {trial}: self distance nonzero");
            let s = mutant_similarity(ids[i], ids[i], &set).map_err(fail)?;
            ensure!(s == 1.0, "trial {trial}: self similarity {s}");
            for j in 0..3 {
                let dij = d(i, j)?;
                ensure!(dij >= 0.0, "trial {trial}: negative distance");
                ensure!(dij == d(j, i)?, "trial {trial}: asymmetric distance");
                ensure!((dij == 0.0) == (vecs[i] == vecs[j]), "trial {trial}: identity fails for ({i}, {j})");
                let s = mutant_similarity(ids[i], ids[j], &set).map_err(fail)?;
                ensure!((s - (-dij).exp()).abs() <= 1e-12, "trial {trial}: similarity {s} vs exp(-{dij})");
                for k in 0..3 {
                    let slack = d(i, k)? - d(i, j)? - d(j, k)?;
                    worst_triangle = worst_triangle.max(slack);
                    ensure!(slack <= 1e-12, "trial {trial}: triangle inequality off by {slack:e}");
                }
            }
        }
    }
    Ok(format!("500 triples, worst triangle slack {worst_triangle:.2e}"))
}

// 3 ------------------------------------------------------------------------

/// Textbook agglomeration: recompute every cross-cluster mean from scratch.
fn oracle_partition(w: &[Vec<f64>], tau: f64) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = (0..w.len()).map(|i| vec![i]).collect();
    while clusters.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let mut sum = 0.0;
                for &p in &clusters[i] {
                    for &r in &clusters[j] {
                        sum += w[p.min(r)][p.max(r)];
                    }
                }
                let link = sum / (clusters[i].len() * clusters[j].len()) as f64;
                if best.is_none_or(|(b, _, _)| link > b) {
                    best = Some((link, i, j));
                }
            }
        }
        let (link, i, j) = best.unwrap();
        if link < tau {
            break;
        }
        let moved = clusters.remove(j);
        clusters[i].extend(moved);
        clusters[i].sort_unstable();
    }
    clusters.sort();
    clusters
}

fn clustering_oracle() -> Check {
    let taus: Vec<f64> = (1..=19).map(|k| k as f64 * 0.05).collect();
    let mut rng = SplitMix64::new(77);
    let mut checked = 0usize;
    for table in 0..200 {
        let dyadic = table % 2 == 0;
        let mut w = vec![vec![0.0; 8]; 8];
        for (i, row) in w.iter_mut().enumerate() {
            for cell in row.iter_mut().skip(i + 1) {
                *cell = if dyadic { (1 + rng.below_usize(8)) as f64 / 8.0 } else { 1.0 - rng.next_f64() * 0.999 };
            }
        }
        for m in 2..=8usize {
            let ids: Vec<MutantId> = (0..m as u32).map(MutantId).collect();
            let graph = SimilarityGraph::from_fn(ids, |i, j| w[i][j]).map_err(fail)?;
            for &tau in &taus {
                let got: Vec<Vec<usize>> = hac_cluster(&graph, tau)
                    .map_err(fail)?
                    .clusters
                    .into_iter()
                    .map(|c| c.into_iter().map(|id| id.0 as usize).collect())
                    .collect();
                let want = oracle_partition(&w[..m].iter().map(|r| r[..m].to_vec()).collect::<Vec<_>>(), tau);
                ensure!(got == want, "table {table}, {m} nodes, tau {tau}: {got:?} vs {want:?}");
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} partitions agree"))
}

// 4 ------------------------------------------------------------------------

fn monotonicity() -> Check {
    let (problem, set) = desk_fixture();
    let vanilla = vanilla_test(&problem.model, &set.mutants, &problem.dataset).map_err(fail)?;
    let result = sweep(&set.mutants, &problem.dataset, &SweepSpec::default(), &AccelConfig::default(), &vanilla)
        .map_err(fail)?;
    ensure!(result.rho.len() == 55, "expected 55 rho cells, got {}", result.rho.len());
    let mut worst = f64::NEG_INFINITY;
    let mut constant = 0;
    for cell in &result.rho {
        match cell.rho {
            Some(r) => {
                ensure!(r <= -0.7, "x={} repeat {}: rho {r:.4}", cell.x, cell.repeat);
                worst = worst.max(r);
            }
            None => constant += 1,
        }
    }
    Ok(format!("worst rho {worst:.4}, {constant} constant series"))
}

// 5 ------------------------------------------------------------------------

fn degenerate_equivalence() -> Check {
    let (problem, set) = desk_fixture();
    let vanilla = vanilla_test(&problem.model, &set.mutants, &problem.dataset).map_err(fail)?;
    let config = AccelConfig { fixed_tau: Some(0.99999), ..AccelConfig::default() };
    let run = completed(run_accelerated(&problem.model, &set.mutants, &problem.dataset, &config).map_err(fail)?)?;
    let v = vanilla.mutation_score().map_err(fail)?;
    let a = run.table.mutation_score().map_err(fail)?;
    let err = ms_error(v, a);
    let red = reduction(set.len(), run.table.timing.tested_mutants);
    ensure!(err == Some(0.0), "MS error {err:?} (vanilla {v}, accelerated {a})");
    ensure!(red == 0.0, "reduction {red}");
    Ok(format!("MS {v}, error 0, reduction 0"))
}

// 6 ------------------------------------------------------------------------

fn faithful_clusters() -> Check {
    let (problem, _) = desk_fixture();
    let config = GenerationConfig { kinds: vec![MutatorKind::GaussianFuzzing], ..GenerationConfig::new(10, 5) };
    let distinct = generate_mutant_set(&problem.model, &config).map_err(fail)?;
    let copies = [3usize, 1, 2, 4, 1, 2, 3, 1, 2, 1];
    let mut mutants = Vec::new();
    for (rec, &c) in distinct.mutants.iter().zip(&copies) {
        for _ in 0..c {
            mutants.push(ExternalMutant { id: MutantId(mutants.len() as u32), model: rec.model.clone() });
        }
    }
    let vanilla = vanilla_test(&problem.model, &mutants, &problem.dataset).map_err(fail)?;
    let config = AccelConfig { fixed_tau: Some(0.9999), ..AccelConfig::default() };
    let run = completed(run_accelerated(&problem.model, &mutants, &problem.dataset, &config).map_err(fail)?)?;
    let v = vanilla.mutation_score().map_err(fail)?;
    let a = run.table.mutation_score().map_err(fail)?;
    ensure!(a == v, "accelerated MS {a} vs vanilla {v}");
    let red = reduction(mutants.len(), run.table.timing.tested_mutants);
    let want = (mutants.len() - distinct.len()) as f64 / mutants.len() as f64;
    ensure!(red == want, "reduction {red} vs {want}");
    Ok(format!("{} mutants, {} distinct, reduction {red:.4}", mutants.len(), distinct.len()))
}

// 7 ------------------------------------------------------------------------

fn end_to_end() -> Check {
    let (problem, set) = desk_fixture();
    let vanilla = vanilla_test(&problem.model, &set.mutants, &problem.dataset).map_err(fail)?;
    let v = vanilla.mutation_score().map_err(fail)?;
    let bounds = ReductionConstraint::default();
    let mut lines = Vec::new();
    for repeat in 0..5u64 {
        let start = Instant::now();
        let config = AccelConfig { sample_seed: repeat, representative_seed: 100 + repeat, ..AccelConfig::default() };
        let run = completed(run_accelerated(&problem.model, &set.mutants, &problem.dataset, &config).map_err(fail)?)?;
        let elapsed = start.elapsed();
        let rate = reduction(set.len(), run.table.timing.tested_mutants);
        let err = ms_error(v, run.table.mutation_score().map_err(fail)?).ok_or("vanilla MS is zero")?;
        let iterations = run.trace.as_ref().map_or(0, |t| t.max_iterations());
        ensure!(bounds.contains(rate), "repeat {repeat}: reduction {rate:.4} outside R");
        ensure!(err <= 0.05, "repeat {repeat}: MS error {err:.4}");
        ensure!(iterations <= 25, "repeat {repeat}: {iterations} iterations");
        ensure!(elapsed < Duration::from_secs(120), "repeat {repeat}: {elapsed:?}");
        lines.push(format!("x={} red {rate:.2} err {err:.4}", run.per_class()));
    }
    Ok(lines.join("; "))
}

// 8 ------------------------------------------------------------------------

/// Base mutants spread along a confidence offset; each has a partner whose
/// sampled rows are the base's rows cyclically shifted by one position.
/// Shifting preserves every spectrum, so only the raw-output variant can
/// tell partners apart.
fn fft_ablation() -> Check {
    const Q: usize = 4;
    const BASES: usize = 6;
    let ds = indexed_dataset(80, Q);
    let mut lines = Vec::new();
    for seed in 0..5u64 {
        let sample = stratified_sample(&ds, 5, seed).map_err(fail)?;
        let s = &sample.indices;
        let pos: BTreeMap<usize, usize> = s.iter().enumerate().map(|(p, &i)| (i, p)).collect();
        // The original is wrong on the first sampled point of every class, so
        // predictions there can never kill.
        let blind: BTreeSet<usize> = (0..Q).map(|c| s[c * 5]).collect();
        let original = tabulate(&ds, Q, |i, l| probs(Q, if blind.contains(&i) { (l + 1) % Q } else { l }, 0.9));
        let mut rng = SplitMix64::new(900 + seed);
        let conf: Vec<f64> = (0..s.len()).map(|_| 0.4 + 0.4 * rng.next_f64()).collect();
        let killed_classes = |b: usize| -> Vec<usize> {
            if b.is_multiple_of(2) {
                vec![b % Q]
            } else {
                vec![0, 1, 2]
            }
        };
        let base_row = |b: usize, p: usize| probs(Q, ds.points()[s[p]].label, conf[p] + 0.02 * b as f64);
        let mut mutants = Vec::new();
        for b in 0..BASES {
            let k = killed_classes(b);
            for shifted in [false, true] {
                let model = tabulate(&ds, Q, |i, l| match pos.get(&i) {
                    Some(&p) if shifted => base_row(b, (p + s.len() - 1) % s.len()),
                    Some(&p) => base_row(b, p),
                    None => probs(Q, if k.contains(&l) { (l + 1) % Q } else { l }, 0.7),
                });
                mutants.push(ExternalMutant { id: MutantId(mutants.len() as u32), model });
            }
        }
        let vanilla = vanilla_test(&original, &mutants, &ds).map_err(fail)?;
        let v = vanilla.mutation_score().map_err(fail)?;
        let config = AccelConfig {
            fixed_x: Some(5),
            sample_seed: seed,
            representative_seed: 50 + seed,
            ..AccelConfig::default()
        };
        let sharp = completed(run_accelerated(&original, &mutants, &ds, &config).map_err(fail)?)?;
        let star = completed(dmsharp_star(&original, &mutants, &ds, &config).map_err(fail)?)?;
        ensure!(
            sharp.clusters.clusters != star.clusters.clusters,
            "seed {seed}: identical clusterings {:?}",
            sharp.clusters.clusters
        );
        let e_sharp = ms_error(v, sharp.table.mutation_score().map_err(fail)?).ok_or("vanilla MS is zero")?;
        let e_star = ms_error(v, star.table.mutation_score().map_err(fail)?).ok_or("vanilla MS is zero")?;
        ensure!(e_sharp <= e_star, "seed {seed}: DM# error {e_sharp:.4} > DM#* error {e_star:.4}");
        lines.push(format!("{e_sharp:.3}<={e_star:.3}"));
    }
    Ok(format!("errors per seed {}", lines.join(" ")))
}

// 9 ------------------------------------------------------------------------

fn baseline_degeneracy() -> Check {
    let (problem, set) = desk_fixture();
    let (model, ds) = (&problem.model, &problem.dataset);
    let v = vanilla_test(model, &set.mutants, ds).map_err(fail)?.mutation_score().map_err(fail)?;
    let rms = rms_test(model, &set.mutants, ds, 1.0, 3).map_err(fail)?.mutation_score().map_err(fail)?;
    let bss = bss_test(model, &set.mutants, ds, 1).map_err(fail)?.mutation_score().map_err(fail)?;
    let (rss, _) = rss_test(model, &set.mutants, ds, 100, 4).map_err(fail)?;
    let rss = rss.mutation_score().map_err(fail)?;
    ensure!(rms == v && bss == v && rss == v, "vanilla {v}, RMS {rms}, BSS {bss}, RSS {rss}");
    Ok(format!("all equal {v}"))
}

// 10 -----------------------------------------------------------------------

fn memoization() -> Check {
    let (problem, set) = desk_fixture();
    let mutants: Vec<_> = set
        .mutants
        .iter()
        .take(20)
        .map(|m| ExternalMutant { id: m.id, model: Counting::new(m.model.clone()) })
        .collect();
    let sample = stratified_sample(&problem.dataset, 10, 8).map_err(fail)?;
    mutant_spectra(&mutants, &problem.dataset, &sample, FeatureKind::Spectral).map_err(fail)?;
    let calls: usize = mutants.iter().map(|m| m.model.count()).sum();
    let want = mutants.len() * sample.len();
    ensure!(calls == want, "{calls} forward passes, want {want}");
    Ok(format!("{calls} forward passes for |M|={} |S|={}", mutants.len(), sample.len()))
}

// 11 -----------------------------------------------------------------------

fn table(verdicts: Vec<MutantVerdict>) -> VerdictTable {
    VerdictTable {
        mode: "hand".into(),
        verdicts,
        label_count: 3,
        tested_points: 10,
        timing: TimingRecord::default(),
        test_seconds: Vec::new(),
    }
}

fn verdict(id: u32, killing_labels: usize, diverges: bool) -> MutantVerdict {
    MutantVerdict {
        id: MutantId(id),
        killing_labels,
        killed: killing_labels > 0,
        diverges,
        provenance: Provenance::Tested,
    }
}

fn metrics_arithmetic() -> Check {
    // (actual, predicted) divergence: 4 TP, 2 FP, 3 TN, 1 FN.
    let flags = [
        (true, true),
        (true, true),
        (true, true),
        (true, true),
        (false, true),
        (false, true),
        (false, false),
        (false, false),
        (false, false),
        (true, false),
    ];
    let actual = table(flags.iter().enumerate().map(|(i, &(a, _))| verdict(i as u32, usize::from(a) * 2, a)).collect());
    let predicted = table(flags.iter().enumerate().map(|(i, &(_, p))| verdict(i as u32, usize::from(p), p)).collect());
    let m = predictive_metrics(&actual, &predicted);
    let close = |got: Option<f64>, want: f64| got.is_some_and(|g| (g - want).abs() <= 1e-12);
    ensure!(close(m.precision, 4.0 / 6.0), "precision {:?}", m.precision);
    ensure!(close(m.recall, 4.0 / 5.0), "recall {:?}", m.recall);
    ensure!(close(m.f1, 8.0 / 11.0), "F1 {:?}", m.f1);
    ensure!(close(m.mcc, 10.0 / 600f64.sqrt()), "MCC {:?}", m.mcc);
    // |2-1| on the four TPs, |0-1| on the two FPs, |2-0| on the FN.
    ensure!(close(Some(m.mae), 8.0 / 10.0), "MAE {}", m.mae);

    let all_killed = table((0..10).map(|i| verdict(i, 1, true)).collect());
    let degenerate = predictive_metrics(&all_killed, &all_killed);
    ensure!(degenerate.mcc.is_none(), "MCC {:?} on zero denominator", degenerate.mcc);
    ensure!(fmt_opt(degenerate.mcc) == "N/A", "rendered {}", fmt_opt(degenerate.mcc));
    Ok(format!("P {:.4} R {:.4} F1 {:.4} MCC {:.4}; degenerate MCC N/A", 4.0 / 6.0, 0.8, 8.0 / 11.0, m.mcc.unwrap()))
}

// 12 -----------------------------------------------------------------------

fn one_report() -> Result<(String, String), String> {
    let (problem, set) = desk_fixture();
    let manifest = set.manifest().to_json();
    let config = AccelConfig::default();
    let run = completed(run_accelerated(&problem.model, &set.mutants, &problem.dataset, &config).map_err(fail)?)?;
    let inputs = InputHashes {
        model_sha256: sha256_hex(&encode_model(&problem.model)),
        dataset_sha256: sha256_hex(&encode_dataset(&problem.dataset)),
        manifest_sha256: sha256_hex(manifest.as_bytes()),
    };
    let kinds = set.mutants.iter().map(|m| (m.id.0, m.kind.short_name().to_string())).collect();
    let settings = BTreeMap::from([
        ("sample_seed".to_string(), config.sample_seed.to_string()),
        ("representative_seed".to_string(), config.representative_seed.to_string()),
    ]);
    let mut report = RunReport::new(&run.table, settings, inputs, kinds);
    report.search = Some(SearchSummary::from_run(&run, set.len()));
    Ok((manifest, report.deterministic_json()))
}

fn determinism() -> Check {
    let (m1, r1) = one_report()?;
    let (m2, r2) = one_report()?;
    ensure!(m1 == m2, "manifests differ");
    ensure!(r1 == r2, "non-timing report fields differ");
    Ok(format!("manifest {} bytes, report {} bytes identical", m1.len(), r1.len()))
}

// --------------------------------------------------------------------------

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        (1, "DFT oracle", dft_oracle, Duration::from_secs(10)),
        (2, "similarity axioms", similarity_axioms, Duration::from_secs(5)),
        (3, "clustering oracle", clustering_oracle, Duration::from_secs(60)),
        (4, "monotonicity", monotonicity, Duration::from_secs(300)),
        (5, "degenerate equivalence", degenerate_equivalence, Duration::MAX),
        (6, "faithful clusters", faithful_clusters, Duration::MAX),
        (7, "end-to-end run", end_to_end, Duration::from_secs(600)),
        (8, "FFT ablation", fft_ablation, Duration::MAX),
        (9, "baseline degeneracy", baseline_degeneracy, Duration::MAX),
        (10, "memoization accounting", memoization, Duration::MAX),
        (11, "metrics arithmetic", metrics_arithmetic, Duration::MAX),
        (12, "determinism", determinism, Duration::MAX),
    ];
    let mut failed = 0;
    for (n, name, check, limit) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > limit => Err(format!("{detail}; took {elapsed:?}, limit {limit:?}")),
            other => other,
        };
        match result {
            Ok(detail) => println!("criterion {n:>2} {name}: PASS ({detail}; {:.2}s)", elapsed.as_secs_f64()),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} {name}: FAIL ({detail}; {:.2}s)", elapsed.as_secs_f64());
            }
        }
    }
    println!("{} of 12 criteria passed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
