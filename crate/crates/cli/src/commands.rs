use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};

use spectramut_core::baselines::{bss_test, dmsharp_star, rms_test, rss_test};
use spectramut_core::format::{load_dataset, load_model, save_dataset, save_model};
use spectramut_core::metrics::fmt_opt;
use spectramut_core::model::{Classifier, FcnnClassifier};
use spectramut_core::mutation::{valid_targets, MutantRecord, MutatorKind};
use spectramut_core::report::{
    compare as compare_reports, comparison_csv, file_sha256, InputHashes, ReportError, SearchSummary,
};
use spectramut_core::rng::derive_seed;
use spectramut_core::synth::{accuracy, synth_problem, SynthSpec};
use spectramut_core::{
    generate_mutant_set, run_accelerated, sweep as run_sweep, vanilla_test, AccelConfig, FeatureKind, GenerationConfig,
    LabeledDataset, Manifest, MutantSet, ReductionConstraint, RunOutcome, RunReport, SearchTrace, SweepSpec,
    VerdictTable,
};

use crate::settings::Settings;
use crate::{Classify, Failure, Outcome};

pub const MODES: [&str; 6] = ["vanilla", "dmsharp", "dmsharp-star", "rms", "bss", "rss"];

fn write(path: &Path, contents: &str) -> Outcome<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display())).internal()
}

fn output_dir(settings: &Settings) -> Outcome<PathBuf> {
    let dir = settings.path("out").input()?.to_path_buf();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display())).input()?;
    Ok(dir)
}

pub fn synth(
    out: &Path,
    classes: usize,
    per_class: usize,
    input_dim: usize,
    noise: Option<f64>,
    seed: u64,
) -> Outcome<()> {
    let defaults = SynthSpec::default();
    let spec = SynthSpec { classes, per_class, input_dim, noise: noise.unwrap_or(defaults.noise), seed, ..defaults };
    let problem = synth_problem(&spec).input()?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display())).input()?;
    save_model(&problem.model, out.join("model.bin")).internal()?;
    save_dataset(&problem.dataset, out.join("dataset.bin")).internal()?;
    let acc = accuracy(&problem.model, &problem.dataset).internal()?;
    println!(
        "wrote {}/model.bin and dataset.bin: {} points, {} classes, accuracy {acc:.4}",
        out.display(),
        problem.dataset.len(),
        classes
    );
    Ok(())
}

/// Deterministic operators have finitely many distinct mutants.
fn duplicate_overflow(model: &FcnnClassifier, kinds: &[MutatorKind], count: usize) -> Option<usize> {
    let usable: Vec<(MutatorKind, usize)> =
        kinds.iter().map(|&k| (k, valid_targets(model, k).len())).filter(|(_, n)| *n > 0).collect();
    if usable.is_empty() || !usable.iter().all(|(k, _)| k.is_deterministic()) {
        return None;
    }
    let distinct = usable.iter().map(|(_, n)| n).sum();
    (count > distinct).then_some(distinct)
}

pub fn generate(settings: &Settings, allow_duplicates: bool) -> Outcome<()> {
    let model_path = settings.path("model").input()?;
    let model = load_model(model_path).with_context(|| format!("loading model {}", model_path.display())).input()?;
    let mut kinds: Vec<MutatorKind> = settings.list("kinds").input()?;
    kinds.dedup();
    let config = GenerationConfig {
        kinds,
        sigma: settings.parse("sigma").input()?,
        ..GenerationConfig::new(settings.parse("count").input()?, settings.parse("generation_seed").input()?)
    };
    if let Some(distinct) = duplicate_overflow(&model, &config.kinds, config.count) {
        if !allow_duplicates {
            return Err(Failure::Input(anyhow!(
                "{} mutants requested but the enabled deterministic operators have only {distinct} distinct targets; \
                 pass --allow-duplicates to accept repeated mutants",
                config.count
            )));
        }
    }
    let set = generate_mutant_set(&model, &config).input()?;
    for w in &set.warnings {
        eprintln!("warning: {w}");
    }
    let path = settings.path("manifest").input()?;
    write(path, &set.manifest().to_json())?;
    let mut per_kind: BTreeMap<&str, usize> = BTreeMap::new();
    for m in &set.mutants {
        *per_kind.entry(m.kind.short_name()).or_default() += 1;
    }
    let counts: Vec<String> = per_kind.iter().map(|(k, n)| format!("{k}={n}")).collect();
    println!("wrote {} mutants to {} ({})", set.len(), path.display(), counts.join(" "));
    Ok(())
}

struct Inputs {
    model: FcnnClassifier,
    dataset: LabeledDataset,
    set: MutantSet,
    hashes: InputHashes,
}

impl Inputs {
    fn mutants(&self) -> &[MutantRecord] {
        &self.set.mutants
    }

    fn kinds(&self) -> BTreeMap<u32, String> {
        self.set.mutants.iter().map(|m| (m.id.0, m.kind.short_name().to_string())).collect()
    }
}

fn load_inputs(settings: &Settings) -> Outcome<Inputs> {
    let model_path = settings.path("model").input()?;
    let dataset_path = settings.path("dataset").input()?;
    let manifest_path = settings.path("manifest").input()?;
    let model = load_model(model_path).with_context(|| format!("loading model {}", model_path.display())).input()?;
    let dataset =
        load_dataset(dataset_path).with_context(|| format!("loading dataset {}", dataset_path.display())).input()?;
    if dataset.input_dim() != model.input_dim() {
        return Err(Failure::Input(anyhow!(
            "dataset has {} features per point but the model expects {}",
            dataset.input_dim(),
            model.input_dim()
        )));
    }
    let text = fs::read_to_string(manifest_path)
        .with_context(|| format!("reading manifest {}", manifest_path.display()))
        .input()?;
    let manifest =
        Manifest::from_json(&text).with_context(|| format!("parsing manifest {}", manifest_path.display())).input()?;
    let set = MutantSet::from_manifest(&model, &manifest).input()?;
    let hashes = InputHashes {
        model_sha256: file_sha256(model_path).input()?,
        dataset_sha256: file_sha256(dataset_path).input()?,
        manifest_sha256: file_sha256(manifest_path).input()?,
    };
    Ok(Inputs { model, dataset, set, hashes })
}

/// Pipeline configuration; `repeat` selects derived seeds, `None` keeps the raw ones.
fn accel_config(settings: &Settings, features: FeatureKind, repeat: Option<u64>) -> Outcome<AccelConfig> {
    let seed: u64 = settings.parse("seed").input()?;
    let rep_seed: u64 = settings.parse("representative_seed").input()?;
    let derive = |s: u64| repeat.map_or(s, |r| derive_seed(s, r));
    let config = AccelConfig {
        reduction: ReductionConstraint::new(
            settings.parse("reduction_lo").input()?,
            settings.parse("reduction_hi").input()?,
        )
        .input()?,
        rates: settings.list("x_grid").input()?,
        fixed_x: settings.optional("x").input()?,
        fixed_tau: settings.optional("tau").input()?,
        features,
        sample_seed: derive(seed),
        representative_seed: derive(rep_seed),
        representative_mode: settings.representative_mode().input()?,
    };
    config.validate().input()?;
    Ok(config)
}

struct Executed {
    table: VerdictTable,
    search: Option<SearchSummary>,
    notes: Vec<String>,
}

enum Attempt {
    Done(Box<Executed>),
    NotSatisfiable(SearchTrace),
}

fn accelerated(inputs: &Inputs, config: &AccelConfig, star: bool) -> Outcome<Attempt> {
    let outcome = if star {
        dmsharp_star(&inputs.model, inputs.mutants(), &inputs.dataset, config)
    } else {
        run_accelerated(&inputs.model, inputs.mutants(), &inputs.dataset, config)
    }
    .internal()?;
    Ok(match outcome {
        RunOutcome::Completed(run) => Attempt::Done(Box::new(Executed {
            search: Some(SearchSummary::from_run(&run, inputs.set.len())),
            table: run.table,
            notes: Vec::new(),
        })),
        RunOutcome::NotSatisfiable(trace) => Attempt::NotSatisfiable(trace),
    })
}

fn execute(mode: &str, inputs: &Inputs, settings: &Settings, repeat: u64) -> Outcome<Attempt> {
    let (model, mutants, ds) = (&inputs.model, inputs.mutants(), &inputs.dataset);
    let plain = |table| Attempt::Done(Box::new(Executed { table, search: None, notes: Vec::new() }));
    match mode {
        "vanilla" => Ok(plain(vanilla_test(model, mutants, ds).internal()?)),
        "dmsharp" => accelerated(inputs, &accel_config(settings, FeatureKind::Spectral, Some(repeat))?, false),
        "dmsharp-star" => accelerated(inputs, &accel_config(settings, FeatureKind::RawOutputs, Some(repeat))?, true),
        "rms" => {
            let fraction: f64 = settings.parse("rms_fraction").input()?;
            let seed = derive_seed(settings.parse("seed").input()?, repeat);
            Ok(plain(rms_test(model, mutants, ds, fraction, seed).input()?))
        }
        "bss" => {
            let threshold: usize = settings.parse("bss_threshold").input()?;
            let mut done = plain(bss_test(model, mutants, ds, threshold).input()?);
            if let Attempt::Done(e) = &mut done {
                e.notes
                    .push(format!("boundary points are the ceil(|T|/{threshold}) smallest top-1 minus top-2 margins"));
            }
            Ok(done)
        }
        "rss" => {
            let config = accel_config(settings, FeatureKind::Spectral, Some(repeat))?;
            let mut notes = Vec::new();
            let x = match config.fixed_x {
                Some(x) => x,
                None => match accelerated(inputs, &config, false)? {
                    Attempt::Done(e) => {
                        let x = e.search.as_ref().map_or(1, |s| s.per_class);
                        notes.push(format!("x = {x} taken from the accelerated search with the same seed"));
                        x
                    }
                    Attempt::NotSatisfiable(trace) => return Ok(Attempt::NotSatisfiable(trace)),
                },
            };
            let (table, _) = rss_test(model, mutants, ds, x, config.sample_seed).input()?;
            Ok(Attempt::Done(Box::new(Executed { table, search: None, notes })))
        }
        other => Err(Failure::Input(anyhow!("unknown mode {other:?}; expected one of {}", MODES.join(", ")))),
    }
}

pub fn run(settings: &Settings) -> Outcome<()> {
    let mode = settings.get("mode").to_string();
    if !MODES.contains(&mode.as_str()) {
        return Err(Failure::Input(anyhow!("unknown mode {mode:?}; expected one of {}", MODES.join(", "))));
    }
    let repeats: usize = settings.parse("repeats").input()?;
    if repeats == 0 {
        return Err(Failure::Input(anyhow!("repeats must be at least 1")));
    }
    let inputs = load_inputs(settings)?;
    let out = output_dir(settings)?;
    // Vanilla and BSS involve no randomness, so one run stands for all repeats.
    let deterministic = matches!(mode.as_str(), "vanilla" | "bss");
    let runs = if deterministic { 1 } else { repeats };
    for repeat in 0..runs as u64 {
        let stem = if deterministic { mode.clone() } else { format!("{mode}-r{repeat}") };
        let executed = match execute(&mode, &inputs, settings, repeat)? {
            Attempt::Done(e) => e,
            Attempt::NotSatisfiable(trace) => {
                let text = serde_json::to_string_pretty(&trace).internal()?;
                write(&out.join(format!("{stem}-trace.json")), &text)?;
                return Err(Failure::NotSatisfiable);
            }
        };
        let mut config = settings.report_config();
        if !deterministic {
            config.insert("repeat".into(), repeat.to_string());
        }
        let mut report = RunReport::new(&executed.table, config, inputs.hashes.clone(), inputs.kinds());
        report.search = executed.search;
        report.notes = executed.notes;
        write(&out.join(format!("{stem}.json")), &report.to_json())?;
        write(&out.join(format!("{stem}-verdicts.csv")), &report.verdict_csv())?;
        write(&out.join(format!("{stem}-timing.csv")), &report.timing_csv())?;
        let search = report.search.as_ref().map_or(String::new(), |s| {
            format!(
                ", x={} tau={:.6} clusters={} iterations={}",
                s.per_class,
                s.tau,
                s.cluster_count,
                s.max_iterations.map_or("fixed".to_string(), |i| i.to_string())
            )
        });
        println!(
            "{stem}: MS {} over {} tested mutants of {}, {} points{search}",
            fmt_opt(report.mutation_score),
            report.tested_mutants,
            report.mutant_count,
            report.tested_points
        );
    }
    Ok(())
}

fn load_report(path: &Path) -> Outcome<RunReport> {
    RunReport::load(path).with_context(|| format!("loading report {}", path.display())).input()
}

pub fn compare(vanilla: &Path, reports: &[PathBuf], out: Option<&Path>) -> Outcome<()> {
    let base = load_report(vanilla)?;
    let others = reports.iter().map(|p| load_report(p)).collect::<Outcome<Vec<_>>>()?;
    let rows = compare_reports(&base, &others).map_err(|e| match e {
        ReportError::HashMismatch { .. } | ReportError::Invalid(_) => Failure::Input(e.into()),
        other => Failure::Internal(other.into()),
    })?;
    let csv = comparison_csv(&rows);
    print!("{csv}");
    if let Some(path) = out {
        write(path, &csv)?;
        let mut detail = String::from("mode,run,compared,mae,rmae,precision,recall,f1,mcc\n");
        for row in &rows {
            for (i, m) in row.predictive.iter().enumerate() {
                detail.push_str(&format!(
                    "{},{i},{},{:.6},{},{},{},{},{}\n",
                    row.mode,
                    m.compared,
                    m.mae,
                    fmt_opt(m.rmae),
                    fmt_opt(m.precision),
                    fmt_opt(m.recall),
                    fmt_opt(m.f1),
                    fmt_opt(m.mcc)
                ));
            }
        }
        write(&path.with_extension("predictive.csv"), &detail)?;
    }
    Ok(())
}

pub fn sweep(settings: &Settings, cached: Option<&Path>) -> Outcome<()> {
    let spec = SweepSpec {
        x_grid: settings.list("x_grid").input()?,
        tau_grid: settings.list("tau_grid").input()?,
        repeats: settings.parse("repeats").input()?,
    };
    spec.validate().input()?;
    let inputs = load_inputs(settings)?;
    let out = output_dir(settings)?;
    let vanilla = match cached {
        Some(path) => {
            let report = load_report(path)?;
            if report.inputs != inputs.hashes {
                return Err(Failure::Input(anyhow!(
                    "vanilla report {} was produced from different inputs",
                    path.display()
                )));
            }
            report.table()
        }
        None => {
            let table = vanilla_test(&inputs.model, inputs.mutants(), &inputs.dataset).internal()?;
            let mut config = settings.report_config();
            config.insert("mode".into(), "vanilla".into());
            let report = RunReport::new(&table, config, inputs.hashes.clone(), inputs.kinds());
            write(&out.join("vanilla.json"), &report.to_json())?;
            table
        }
    };
    let config = accel_config(settings, FeatureKind::Spectral, None)?;
    let result = run_sweep(inputs.mutants(), &inputs.dataset, &spec, &config, &vanilla).input()?;
    write(&out.join("sweep.csv"), &result.to_csv())?;
    write(&out.join("rho.csv"), &result.rho_csv())?;
    let defined: Vec<f64> = result.rho.iter().filter_map(|c| c.rho).collect();
    let worst = defined.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "{} rows; Spearman rho defined for {} of {} series{}",
        result.rows.len(),
        defined.len(),
        result.rho.len(),
        if defined.is_empty() { String::new() } else { format!(", largest {worst:.4}") }
    );
    Ok(())
}
