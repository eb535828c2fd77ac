use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use probench::config::{Overrides, PipelineConfig};
use probench::pipeline::{self, Stage, StageError};

/// Probabilistic KPI benchmarks from noisy unit-level data.
#[derive(Parser)]
#[command(name = "probench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults apply to anything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed; every stage derives its own stream from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 lets the runtime decide).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Input CSV.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Benchmark on all rows instead of the denoised ones.
    #[arg(long, global = true)]
    no_denoise: bool,
    /// Also write SVG figures.
    #[arg(long, global = true)]
    svg: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Descriptive statistics of the mapped columns.
    Stats,
    /// Fit the double-hyperbola filter with the swarm search.
    Denoise,
    /// Label units, draw probability surfaces and screen covariates.
    Benchmark,
    /// stats, denoise and benchmark in one run, plus a manifest.
    Pipeline,
    /// Write a synthetic noisy Clayton dataset.
    Simulate,
    /// Print the effective configuration as TOML.
    Config,
}

fn configure(common: &Common) -> Result<PipelineConfig, StageError> {
    let wrap = |source| StageError {
        stage: Stage::Config,
        source,
    };
    let mut config = match &common.config {
        Some(path) => PipelineConfig::load(path).map_err(wrap)?,
        None => PipelineConfig::default(),
    };
    config.apply(&Overrides {
        seed: common.seed,
        out: common.out.clone(),
        threads: common.threads,
        input: common.input.clone(),
        no_denoise: common.no_denoise,
        svg: common.svg,
    });
    config.validate().map_err(wrap)?;
    if config.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build_global()
            .map_err(|e| wrap(probench::Error::Config(e.to_string())))?;
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), StageError> {
    let config = configure(&cli.common)?;
    let out = config.output.dir.display();
    match cli.command {
        Command::Stats => {
            let s = pipeline::cmd_stats(&config)?;
            println!("stats: {} rows ({} dropped) -> {out}", s.rows, s.dropped_rows);
        }
        Command::Denoise => {
            let r = pipeline::cmd_denoise(&config)?;
            let raw = r.raw_fit.map_or(f64::NAN, |f| f.theta);
            println!(
                "denoise: theta {:.4} (raw {:.4}), kept {:.1}% -> {out}",
                r.theta_hat,
                raw,
                100.0 * r.kept_fraction
            );
        }
        Command::Benchmark => {
            let b = pipeline::cmd_benchmark(&config)?;
            println!(
                "benchmark: {} of {} units succeed, {} surfaces, starred: [{}] -> {out}",
                b.positives,
                b.rows,
                b.surfaces.len(),
                b.metrics.starred().join(", ")
            );
        }
        Command::Pipeline => {
            let p = pipeline::cmd_pipeline(&config)?;
            println!(
                "pipeline: {} artifacts, starred: [{}] -> {out}",
                p.manifest.artifacts.len(),
                p.benchmark.metrics.starred().join(", ")
            );
        }
        Command::Simulate => {
            let s = pipeline::cmd_simulate(&config)?;
            println!(
                "simulate: {} rows ({} noise) -> {}",
                s.rows,
                s.noise_rows,
                s.data_path.display()
            );
        }
        Command::Config => {
            let text = config.to_toml().map_err(|source| StageError {
                stage: Stage::Config,
                source,
            })?;
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.stage.exit_code() as u8)
        }
    }
}
