//! `floodline` command-line entry point.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use floodline::pipeline::{self, synth, RunConfig, Stage};
use floodline::Error;
use log::{error, info};

#[derive(Parser, Debug)]
#[command(name = "floodline", version, about = "Lowest-floor elevation, imputation and flood-loss pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Run configuration (TOML); for `synth`, the generator parameter file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Restricts the stage to these AOIs (repeatable).
    #[arg(long = "aoi", value_name = "ID", num_args = 1..)]
    aoi: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract lowest-floor and roadside elevations from panoramas.
    Extract(Common),
    /// Build features, run the imputation workflow and merge HDSL values.
    Impute(Common),
    /// Compute flood depths, losses, categories and summaries.
    Assess(Common),
    /// Render coverage, model and risk tables.
    Report(Common),
    /// Generate a synthetic fixture with ground truth.
    Synth(Common),
}

fn exit_code(e: &Error) -> u8 {
    if e.is_input_error() {
        1
    } else {
        2
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let (stage, common) = match cli.command {
        Command::Extract(c) => (Stage::Extract, c),
        Command::Impute(c) => (Stage::Impute, c),
        Command::Assess(c) => (Stage::Assess, c),
        Command::Report(c) => (Stage::Report, c),
        Command::Synth(c) => {
            if !c.aoi.is_empty() {
                return Err(Error::InvalidInput("synth does not take --aoi".into()));
            }
            let out = synth::generate_from_file(&c.config, c.seed)?;
            for (id, n) in &out.counts {
                info!(
                    "{id}: {} parcels, {} with imagery, {} with a visible door",
                    n.n_parcels, n.with_imagery, n.door_visible
                );
            }
            println!("{}", out.config_path.display());
            return Ok(());
        }
    };
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg = cfg.with_seed(seed);
    }
    pipeline::run(stage, &cfg, &common.aoi)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
