//! `pathnet` command-line tool.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pathnet::Error;
use serde_json::json;

use report::{emit, run_report, InputDigest};

#[derive(Parser, Debug)]
#[command(name = "pathnet", version, about = "Path-based capacity measures and compression for positive homogeneous networks")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Model directory or manifest file.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Dataset CSV.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Report destination; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Include wall-clock timings in the report.
    #[arg(long, global = true)]
    pub timings: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeArg {
    Apriori,
    Posthoc,
    Both,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Dimensions, activation and path count of a model.
    Inspect,
    /// Path variation, path complexity, path norms and competing norms.
    Measures {
        #[arg(long, default_value_t = 2.0)]
        q: f64,
    },
    /// Draw M paths and report the compressed network.
    Sample {
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long = "M", alias = "m")]
        m: u64,
        /// Write the sparse path counts CSV here.
        #[arg(long)]
        counts: Option<PathBuf>,
        /// Write the reconstructed model to this directory.
        #[arg(long)]
        out_model: Option<PathBuf>,
    },
    /// Compare a reconstruction against the original on the dataset.
    ReconstructEval {
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long = "M", alias = "m")]
        m: u64,
    },
    /// Reconstruction accuracy over a list of sample sizes.
    Sweep {
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long = "Ms", alias = "ms", value_delimiter = ',', default_value = "100,1000,10000")]
        ms: Vec<u64>,
        #[arg(long, default_value_t = 10)]
        rounds: usize,
    },
    /// Raw and normalised margins.
    Margins {
        /// Margin for the margin loss; the median positive margin when omitted.
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Generalisation bound from the path measures.
    Bound {
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::Both)]
        mode: ModeArg,
    },
    /// Run the built-in verification suites.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Inspect => "inspect",
            Command::Measures { .. } => "measures",
            Command::Sample { .. } => "sample",
            Command::ReconstructEval { .. } => "reconstruct-eval",
            Command::Sweep { .. } => "sweep",
            Command::Margins { .. } => "margins",
            Command::Bound { .. } => "bound",
            Command::Verify { .. } => "verify",
        }
    }
}

const EXIT_USAGE: u8 = 2;
const EXIT_FORMAT: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

/// A failure and the exit code it maps to.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Failure { code: EXIT_NUMERIC, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidArgument(_) | Error::MissingLabels(_) => EXIT_USAGE,
            Error::Format(_) | Error::Io(_) | Error::InvalidDataset(_) | Error::InvalidNetwork(_) => EXIT_FORMAT,
            Error::DimensionMismatch { .. } => EXIT_FORMAT,
            _ => EXIT_NUMERIC,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(Failure::usage("--threads must be positive"));
        }
        #[cfg(feature = "parallel")]
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    let g = &cli.global;
    let mut digest = InputDigest::default();
    digest.flags(&json!({ "command": cli.command.name(), "args": format!("{:?}", cli.command), "seed": g.seed }));
    if let Some(p) = &g.model {
        digest.model(p).map_err(|e| commands::in_file(p, e))?;
    }
    if let Some(p) = &g.data {
        digest.file("data", p).map_err(|e| commands::in_file(p, e))?;
    }
    let start = Instant::now();
    let outcome = commands::execute(&cli.command, g)?;
    let timings = g.timings.then(|| json!({ "wall_ms": start.elapsed().as_secs_f64() * 1e3 }));
    let text = match g.format {
        Format::Json => {
            let report = run_report(cli.command.name(), g.seed, digest.finish(), outcome.payload.outputs, timings);
            let mut s = serde_json::to_string_pretty(&report).map_err(|e| Failure::numeric(e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Csv => outcome.payload.table.to_csv(),
    };
    emit(&text, g.out.as_deref())?;
    match outcome.failed_checks {
        Some(names) if !names.is_empty() => Err(Failure::numeric(format!("verification failed: {}", names.join(", ")))),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
