//! `bidomain-kit`: operator checks, resolvent sweeps, Fourier oracle
//! comparisons, fractional powers and time stepping from one config file.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::manifest::{unix_now, Outputs, RunManifest};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Failed(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("trust region exceeded at t = {time} (blow-up estimate t* = {blowup_estimate})")]
    TrustRegion { time: f64, blowup_estimate: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Failed(_) | Self::Runtime(_) => 1,
            Self::Config(_) => 2,
            Self::TrustRegion { .. } => 3,
        }
    }
}

impl From<bidomain::Error> for CliError {
    fn from(e: bidomain::Error) -> Self {
        use bidomain::Error as E;
        match e {
            E::TrustRegionExceeded { time, blowup_estimate } => Self::TrustRegion { time, blowup_estimate },
            E::InvalidGrid(_)
            | E::GridMismatch
            | E::InvalidNormIndex(_)
            | E::EllipticityViolation { .. }
            | E::EvViolation { .. }
            | E::NonSymmetric { .. }
            | E::LambdaOnCut { .. }
            | E::OutsideSector { .. }
            | E::CompatibilityViolation { .. }
            | E::IncompatibleMeans { .. }
            | E::ThetaOutOfSector(_)
            | E::TooLargeToAssemble { .. }
            | E::SpectralUnsupported
            | E::InvalidArgument(_)
            | E::Format(_) => Self::Config(e.to_string()),
            E::NotMeanZero { .. }
            | E::LinearSolveDivergence { .. }
            | E::NonSymmetricOperator { .. }
            | E::Factorization(_)
            | E::Io(_) => Self::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "bidomain-kit", version, about = "Discrete bidomain operator toolkit")]
struct Cli {
    /// TOML or JSON config file, or a bundled config name
    /// (small-torus, theorem23-desk, fhn-pulse). Defaults to small-torus.
    #[arg(long, global = true)]
    config: Option<String>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "bidomain-out")]
    out_dir: PathBuf,
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Symmetry, nonnegativity, kernel, pseudo-resolvent and residual checks.
    CheckOperator,
    /// Resolvent sweep over a sector of the complex plane.
    Probe,
    /// Compare against the Fourier oracle (torus, or box by reflection).
    OracleCompare,
    /// IMEX time stepping of the coupled system with an ionic model.
    Simulate,
    /// Apply a fractional power of the shifted operator.
    Fractional,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::CheckOperator => "check-operator",
            Self::Probe => "probe",
            Self::OracleCompare => "oracle-compare",
            Self::Simulate => "simulate",
            Self::Fractional => "fractional",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let started = unix_now();
    let cfg = match RunConfig::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let mut out = match Outputs::new(&cli.out_dir) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: cannot create {}: {e}", cli.out_dir.display());
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::CheckOperator => commands::check_operator(&cfg, cli.seed, &mut out),
        Command::Probe => commands::probe(&cfg, cli.seed, &mut out),
        Command::OracleCompare => commands::oracle_compare(&cfg, cli.seed, &mut out),
        Command::Simulate => commands::simulate(&cfg, cli.seed, &mut out),
        Command::Fractional => commands::fractional(&cfg, cli.seed, &mut out),
    };
    let code = match &result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    let manifest_path = out.dir().join("manifest.json");
    let manifest = RunManifest {
        command: cli.command.name().to_string(),
        config: cfg,
        seed: cli.seed,
        version: env!("CARGO_PKG_VERSION"),
        threads: cli.threads,
        started_unix: started,
        finished_unix: unix_now(),
        exit_code: code as i32,
        outputs: out.into_names(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    if let Err(e) = std::fs::write(&manifest_path, text) {
        eprintln!("error: writing manifest: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(code)
}
