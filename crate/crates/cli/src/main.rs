mod commands;
mod config;
mod error;
mod sidecar;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::{CliError, EXIT_OK};

/// Structural loads pipeline: ingest, transform, envelope, export, compare, evaluate.
#[derive(Debug, Parser)]
#[command(name = "loadsmith", version, about)]
pub struct Cli {
    /// JSON file with default tolerances, node map and judge adapters.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Yaml,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rewrite a delivery in canonical JSON or YAML.
    Convert {
        input: PathBuf,
        #[arg(long)]
        to: Format,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the validation report; exit 0 only if the delivery is valid.
    Validate { input: PathBuf },
    /// Apply rename, scale, unit conversion and ultimate factor, in that order.
    Transform(TransformArgs),
    /// Check force (and, with coordinates, moment) balance of every case.
    Equilibrium {
        input: PathBuf,
        /// JSON object of point name to [x, y, z] in metres.
        #[arg(long)]
        coords: Option<PathBuf>,
        #[arg(long)]
        abs_tol: Option<f64>,
        #[arg(long)]
        rel_tol: Option<f64>,
    },
    /// Write envelope.md and envelope_extremes.json and print the selected case ids.
    Envelope {
        input: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Write one limit_load_<id>.inp deck per selected case.
    ExportAnsys {
        input: PathBuf,
        /// Case ids; defaults to the envelope selection.
        #[arg(long, value_delimiter = ',')]
        select: Vec<u32>,
        #[arg(long)]
        node_map: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        exclude: Vec<String>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Compare two extremes files; exit 3 when the new envelope exceeds the old one.
    Compare {
        new: PathBuf,
        old: PathBuf,
        /// Defaults to comparison_report/v<old>_vs_v<new>.json.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        widen_tol: Option<f64>,
    },
    /// Evaluation harness.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Serve a document catalog as JSON-RPC over stdin/stdout.
    Docserve { catalog_dir: PathBuf },
    /// Write a seeded synthetic delivery.
    Fixture(FixtureArgs),
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    pub input: PathBuf,
    /// old=new, repeatable or comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub rename: Vec<String>,
    /// COMPONENT=factor, repeatable.
    #[arg(long)]
    pub scale: Vec<String>,
    #[arg(long)]
    pub ultimate_factor: Option<f64>,
    /// Target units as "force,moment", e.g. "N,N·m".
    #[arg(long)]
    pub units: Option<String>,
    /// Fail unless the delivery declares this coordinate system.
    #[arg(long)]
    pub expect_cs: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Run a scenario k times and write report.json.
    Run {
        scenario: PathBuf,
        #[arg(short)]
        k: Option<u32>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Run repetitions concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Smallest k whose all-pass lower bound reaches p, or the bound for a given k.
    Passk {
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        k: Option<u32>,
    },
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[arg(long)]
    pub seed: u64,
    /// The 100-case imperial engine-mount delivery with left/right lug naming.
    #[arg(long)]
    pub replay: bool,
    #[arg(long, default_value_t = 20)]
    pub cases: u32,
    #[arg(long, value_delimiter = ',', default_value = "a,b,c")]
    pub points: Vec<String>,
    #[arg(long, default_value_t = 2)]
    pub critical: u32,
    #[arg(long)]
    pub balanced: bool,
    /// Scale of ordinary values.
    #[arg(long)]
    pub magnitude: Option<f64>,
    #[arg(long)]
    pub version: Option<u32>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let err = CliError::usage(e.render().to_string().trim_end());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("{}", err.to_json());
            debug_assert_ne!(err.exit_code(), EXIT_OK);
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
