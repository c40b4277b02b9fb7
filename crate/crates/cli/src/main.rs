//! `twosphere`: synthesize two-sphere phaseless datasets, run the verification suite,
//! scan shell eigenvalues, tabulate singularity and radiation probes, and test the
//! conjugate branch.
//!
//! Exit codes: 0 success, 1 a check failed, 2 usage or parse error, 3 ill-posed
//! configuration (k² within the certificate margin of a shell eigenvalue).

mod commands;
mod config;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use twosphere_core::Error;

#[derive(Parser, Debug)]
#[command(name = "twosphere", version, about = "Two-sphere phaseless scattering data and checks")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory. Overrides TWOSPHERE_OUT_DIR and `[output].dir`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Overrides the config seed (probe point selection in `verify`).
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Tolerance override, repeatable. Keys are the check names of `verify` plus
    /// `tol_cert` and `distinctness_floor`.
    #[arg(long = "tol-override", global = true, value_name = "KEY=VAL")]
    pub tol_override: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify k, synthesize the phaseless dataset and write <stem>.jsonl, <stem>.csv and
    /// <stem>_summary.json.
    Synth,
    /// Run the verification suite and write verify_report.json.
    Verify {
        /// Also check a dataset file: parse, nonvanishing witnesses, header against the
        /// config and agreement with a fresh synthesis.
        #[arg(long, value_name = "FILE")]
        dataset: Option<PathBuf>,
    },
    /// Scan the scaled shell determinant margin over a k range and locate roots.
    ///
    /// eigencheck_scan.csv: k, margin, worst_n, worst_family, free.
    /// eigencheck_roots.csv: n, family, k.
    Eigencheck(commands::eigen::EigenArgs),
    /// Singularity and radiation probe tables.
    ///
    /// phi-phi / phi-theta write probe_<kind>.csv with columns angle, r, measured_re,
    /// measured_im, predicted_re, predicted_im, ratio_re, ratio_im, ratio_abs, scaled
    /// (|measured|·4πr³), scattered_abs. radiation writes probe_radiation.csv with columns
    /// r, residual (max over directions of |r(∂w^s/∂r − ik w^s)|), free_residual (same for
    /// Φ(·, y)).
    Probe(commands::probe::ProbeArgs),
    /// Feed the discriminator a candidate trace set for w₂(·, y₀) and write traces.json and
    /// discriminator.json. Both verdicts exit 0.
    Discriminate(commands::discriminate::DiscriminateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BranchArg {
    Identity,
    Conjugate,
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct Fail {
    pub code: u8,
    pub message: String,
}

impl Fail {
    pub fn usage(message: impl Into<String>) -> Self {
        Fail { code: 2, message: message.into() }
    }

    pub fn checks(message: impl Into<String>) -> Self {
        Fail { code: 1, message: message.into() }
    }
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::IllPosed { .. } => 3,
            Error::Domain(_)
            | Error::Pole { .. }
            | Error::Inadmissible(_)
            | Error::Config(_)
            | Error::Io(_)
            | Error::Json(_) => 2,
            Error::Singular(_) | Error::Overflow(_) | Error::Solver(_) | Error::Insufficient(_) | Error::Inconsistent(_) => 1,
        };
        Fail { code, message: e.to_string() }
    }
}

pub type CliResult<T> = std::result::Result<T, Fail>;

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.global.jobs {
        if n == 0 {
            return Err(Fail::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Fail::usage(format!("cannot size the thread pool: {e}")))?;
    }
    let ctx = commands::Context::new(&cli.global)?;
    match cli.command {
        Command::Synth => commands::synth::run(&ctx),
        Command::Verify { dataset } => commands::verify::run(&ctx, dataset.as_deref()),
        Command::Eigencheck(a) => commands::eigen::run(&ctx, &a),
        Command::Probe(a) => commands::probe::run(&ctx, &a),
        Command::Discriminate(a) => commands::discriminate::run(&ctx, &a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
