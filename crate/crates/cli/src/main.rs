//! `spectramut`: generate mutants, run mutation testing (vanilla, accelerated
//! or a baseline), compare reports and sweep clustering parameters.
//!
//! Exit codes: 0 success, 1 internal error, 2 input or usage error,
//! 3 reduction goal not satisfiable.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use settings::Settings;
use spectramut_core::NOT_SATISFIABLE_MESSAGE;

pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NOT_SATISFIABLE: u8 = 3;
pub const THREADS_ENV: &str = "SPECTRAMUT_THREADS";

#[derive(Debug)]
pub enum Failure {
    Input(anyhow::Error),
    Internal(anyhow::Error),
    NotSatisfiable,
}

pub type Outcome<T> = Result<T, Failure>;

pub trait Classify<T> {
    fn input(self) -> Outcome<T>;
    fn internal(self) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> Outcome<T> {
        self.map_err(|e| Failure::Input(e.into()))
    }

    fn internal(self) -> Outcome<T> {
        self.map_err(|e| Failure::Internal(e.into()))
    }
}

#[derive(Parser)]
#[command(name = "spectramut", version, about = "Faster DNN mutation testing by clustering mutant output spectra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic model and dataset.
    Synth(SynthArgs),
    /// Generate a mutant manifest for a model.
    Generate(GenerateArgs),
    /// Run mutation testing in one mode and write reports.
    Run(RunArgs),
    /// Aggregate reports against a vanilla report.
    Compare(CompareArgs),
    /// Sweep sampling rates and thresholds against a vanilla run.
    Sweep(RunArgs),
    /// Print the effective settings (defaults, then config file, then flags).
    ShowConfig(RunArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    classes: usize,
    #[arg(long, default_value_t = 100)]
    per_class: usize,
    #[arg(long, default_value_t = 8)]
    input_dim: usize,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    count: Option<String>,
    /// Comma-separated operator names (gf, ws, neb, nai, ns).
    #[arg(long)]
    kinds: Option<String>,
    /// Generation seed.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    /// Write the manifest even when deterministic operators must repeat targets.
    #[arg(long)]
    allow_duplicates: bool,
    /// Manifest path.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Clone)]
pub struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    manifest: Option<String>,
    /// vanilla, dmsharp, dmsharp-star, rms, bss or rss.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    reduction_lo: Option<String>,
    #[arg(long)]
    reduction_hi: Option<String>,
    /// Fixed per-class sampling rate (disables the rate search).
    #[arg(long)]
    x: Option<String>,
    /// Fixed linkage threshold (disables the threshold search).
    #[arg(long)]
    tau: Option<String>,
    /// Sampling seed; repeat `r` uses a seed derived from it.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    representative_seed: Option<String>,
    #[arg(long)]
    repeats: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Reuse the verdicts of an existing vanilla report (sweep only).
    #[arg(long)]
    vanilla: Option<PathBuf>,
}

impl RunArgs {
    fn settings(&self) -> anyhow::Result<Settings> {
        Settings::load(
            self.config.as_deref(),
            vec![
                ("model", self.model.clone()),
                ("dataset", self.dataset.clone()),
                ("manifest", self.manifest.clone()),
                ("mode", self.mode.clone()),
                ("reduction_lo", self.reduction_lo.clone()),
                ("reduction_hi", self.reduction_hi.clone()),
                ("x", self.x.clone()),
                ("tau", self.tau.clone()),
                ("seed", self.seed.clone()),
                ("representative_seed", self.representative_seed.clone()),
                ("repeats", self.repeats.clone()),
                ("out", self.out.clone()),
            ],
        )
    }
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    vanilla: PathBuf,
    /// Reports to aggregate, grouped by mode.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Also write the comparison CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn configure_threads() -> Outcome<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Failure::Input(anyhow::anyhow!("{THREADS_ENV}={raw:?} is not a thread count")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().internal()
}

fn dispatch(cli: Cli) -> Outcome<()> {
    configure_threads()?;
    match cli.command {
        Command::Synth(a) => commands::synth(&a.out, a.classes, a.per_class, a.input_dim, a.noise, a.seed),
        Command::Generate(a) => {
            let settings = Settings::load(
                a.config.as_deref(),
                vec![
                    ("model", a.model),
                    ("count", a.count),
                    ("kinds", a.kinds),
                    ("generation_seed", a.seed),
                    ("sigma", a.sigma),
                    ("manifest", a.out),
                ],
            )
            .input()?;
            commands::generate(&settings, a.allow_duplicates)
        }
        Command::Run(a) => commands::run(&a.settings().input()?),
        Command::Compare(a) => commands::compare(&a.vanilla, &a.reports, a.out.as_deref()),
        Command::Sweep(a) => commands::sweep(&a.settings().input()?, a.vanilla.as_deref()),
        Command::ShowConfig(a) => {
            print!("{}", a.settings().input()?.render());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::NotSatisfiable) => {
            eprintln!("{NOT_SATISFIABLE_MESSAGE}");
            ExitCode::from(EXIT_NOT_SATISFIABLE)
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(EXIT_INTERNAL)
        }
    }
}
