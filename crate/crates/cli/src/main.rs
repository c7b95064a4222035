use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stcast_core::pipeline::{self, Stage};
use stcast_core::{Error, RunConfig};

#[derive(Parser)]
#[command(name = "stcast", version, about = "Spatially informed causal adjustment and probabilistic forecasting of regional panels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic panel with known coefficients.
    Simulate(Common),
    /// Build the row-normalised inverse-distance matrix.
    BuildSpatial(Common),
    /// Fit the spatial difference-in-differences regression.
    Estimate(Common),
    /// Remove the estimated effect and build the spatially adjusted inputs.
    Adjust(Common),
    /// Train the recurrent forecaster.
    Train(Common),
    /// Draw forecast sample paths.
    Forecast(Common),
    /// Score the forecast against held-out observations.
    Evaluate(Common),
    /// Run every stage in order and write a manifest.
    Pipeline(Common),
}

#[derive(Args)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override a configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        cfg.apply_overrides(&self.overrides)?;
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.set("seed", &s.to_string())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let (stage, common) = match &cli.command {
        Command::Simulate(c) => (Some(Stage::Simulate), c),
        Command::BuildSpatial(c) => (Some(Stage::BuildSpatial), c),
        Command::Estimate(c) => (Some(Stage::Estimate), c),
        Command::Adjust(c) => (Some(Stage::Adjust), c),
        Command::Train(c) => (Some(Stage::Train), c),
        Command::Forecast(c) => (Some(Stage::Forecast), c),
        Command::Evaluate(c) => (Some(Stage::Evaluate), c),
        Command::Pipeline(c) => (None, c),
    };
    let cfg = common.resolve()?;
    match stage {
        Some(Stage::Simulate) => {
            let next = pipeline::simulate(&cfg).map_err(|e| e.in_stage("simulate"))?;
            println!("wrote {}", next.out.join(pipeline::RUN_CONFIG).display());
        }
        Some(Stage::Evaluate) => {
            let report = pipeline::evaluate(&cfg).map_err(|e| e.in_stage("evaluate"))?;
            for (metric, level, value) in report.overall.rows() {
                match level {
                    Some(l) => println!("{metric}@{l} {value:.6}"),
                    None => println!("{metric} {value:.6}"),
                }
            }
        }
        Some(s) => s.run(&cfg)?,
        None => {
            let outcome = pipeline::run_pipeline(&cfg)?;
            println!("crps {:.6}", outcome.scores.overall.crps);
            println!("manifest {}", outcome.config.out.join(pipeline::MANIFEST).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.class().exit_code() as u8)
        }
    }
}
