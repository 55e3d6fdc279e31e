use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use monoreg::config::ExperimentConfig;
use monoreg::io::Manifest;
use monoreg::{pipeline, selftest, Error};

#[derive(Parser)]
#[command(name = "monoreg", version, about = "Monotonicity-regularized inverse medium scattering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate (noisy) far-field data.
    Simulate(Overrides),
    /// Monotonicity bounds and regularized reconstruction from stored data.
    Reconstruct(WithInput),
    /// Tikhonov and factorization-method fields from stored data.
    Baselines(WithInput),
    /// Every stage, from simulation to metrics.
    Pipeline(Overrides),
    /// Oracle checks at small scale.
    Selftest,
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Single-threaded linear algebra for bit-identical reruns.
    #[arg(long)]
    deterministic: bool,
    #[arg(long)]
    inverse_crime: bool,
}

#[derive(Args)]
struct WithInput {
    #[command(flatten)]
    overrides: Overrides,
    /// Far-field CSV; defaults to `far_field.csv` in the output directory.
    #[arg(long)]
    far_field: Option<PathBuf>,
}

impl Overrides {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(delta) = self.delta {
            cfg.noise_level = delta;
        }
        if let Some(k) = self.k {
            cfg.wave_number = k;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if self.inverse_crime {
            cfg.inverse_crime = true;
        }
        cfg.validate()?;
        if self.deterministic {
            pipeline::set_deterministic();
        }
        Ok(cfg)
    }
}

fn print_manifest(m: &Manifest) {
    for e in &m.files {
        println!("{}  {}", e.sha256, e.file);
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Simulate(o) => print_manifest(&pipeline::run_simulate(&o.resolve()?)?),
        Command::Reconstruct(w) => {
            print_manifest(&pipeline::run_reconstruct(&w.overrides.resolve()?, w.far_field.as_deref())?)
        }
        Command::Baselines(w) => {
            print_manifest(&pipeline::run_baselines(&w.overrides.resolve()?, w.far_field.as_deref())?)
        }
        Command::Pipeline(o) => {
            let report = pipeline::run_pipeline(&o.resolve()?)?;
            print_manifest(&report.manifest);
            let m = &report.metrics;
            println!("reconstruction jaccard {:.4}", m.reconstruction.jaccard);
            println!("corner jaccard         {:.4}", m.corner.jaccard);
            if let Some(t) = &m.tikhonov {
                println!("tikhonov jaccard       {:.4}", t.jaccard);
            }
            if let Some(f) = &m.factorization {
                println!("factorization jaccard  {:.4}", f.jaccard);
            }
        }
        Command::Selftest => {
            let report = selftest::selftest()?;
            for c in &report.checks {
                println!("{c}");
            }
            println!("{:.1} s", report.seconds);
            if !report.passed() {
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
