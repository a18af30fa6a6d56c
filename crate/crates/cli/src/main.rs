//! `harnack`: verification suites and scans for space-time curvature of Ricci flows.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 on usage or IO errors.

mod commands;
mod config;
mod error;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{FileConfig, FlagConfig, RunConfig};
use error::CliError;
use report::Output;

#[derive(Parser, Debug)]
#[command(name = "harnack", version, about = "Curvature cone and Harnack verification for Ricci flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML file with run settings; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed [default: 42].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for report.json and CSV files; without it the report goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Tolerance override `name=value`; `all` sets every check. Repeatable.
    #[arg(long = "tol", global = true, value_name = "NAME=VALUE")]
    tol: Vec<String>,
    /// `sphere:n=3,r0=1`, `flat:n=3`, `cigar` or `warped:<snapshot>`.
    #[arg(long, global = true)]
    provider: Option<String>,
    /// Tensor dimension for the algebraic suites. Repeatable.
    #[arg(long = "dim", global = true)]
    dims: Vec<usize>,
    /// Random samples, starts or seeds per dimension, depending on the command.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// `with_1_over_t` or `ancient`.
    #[arg(long, global = true)]
    mode: Option<String>,
    /// `steady` or `expanding`.
    #[arg(long, global = true)]
    soliton_mode: Option<String>,
    /// Time slice for soliton detection.
    #[arg(long, global = true, allow_hyphen_values = true)]
    t: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Algebraic identities of Q, the second variation and the block matrix.
    IdentitySuite,
    /// Cone membership of the space-time tensor over a provider's sample grid.
    ConeCheck,
    /// Cone invariance along the ODE dS/dt = Q(S).
    OdeInvariance,
    /// Residuals of the evolution identities of S, M and h.
    VerifyEvolution,
    /// Matrix and trace Harnack minima over a provider's sample grid.
    HarnackScan,
    /// Gradient soliton test at a time slice.
    SolitonDetect,
    /// Evolves a warped product and writes a snapshot for `--provider warped:<path>`.
    EvolveWarped,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::IdentitySuite => "identity-suite",
            Command::ConeCheck => "cone-check",
            Command::OdeInvariance => "ode-invariance",
            Command::VerifyEvolution => "verify-evolution",
            Command::HarnackScan => "harnack-scan",
            Command::SolitonDetect => "soliton-detect",
            Command::EvolveWarped => "evolve-warped",
        }
    }

    fn run(self, cfg: &RunConfig) -> Result<Output, CliError> {
        match self {
            Command::IdentitySuite => commands::identity_suite(cfg),
            Command::ConeCheck => commands::cone_check(cfg),
            Command::OdeInvariance => commands::ode_invariance(cfg),
            Command::VerifyEvolution => commands::verify_evolution(cfg),
            Command::HarnackScan => commands::harnack_scan(cfg),
            Command::SolitonDetect => commands::soliton_detect_cmd(cfg),
            Command::EvolveWarped => commands::evolve_warped(cfg),
        }
    }
}

fn run(cli: Cli) -> Result<Output, CliError> {
    let file = match &cli.common.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let c = cli.common;
    let flags = FlagConfig {
        seed: c.seed,
        dims: c.dims,
        samples: c.samples,
        provider: c.provider,
        mode: c.mode,
        soliton_mode: c.soliton_mode,
        t: c.t,
        out: c.out,
        tol: c.tol,
    };
    let cfg = RunConfig::resolve(cli.command.name(), file, flags)?;
    if matches!(cli.command, Command::EvolveWarped) && cfg.out.is_none() {
        return Err(CliError::Usage("evolve-warped needs --out for the snapshot".into()));
    }
    let out = cli.command.run(&cfg)?;
    match &cfg.out {
        Some(dir) => out.write(dir)?,
        None => {
            let mut stdout = std::io::stdout();
            writeln!(stdout, "{}", out.report.to_json())?;
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stderr = std::io::stderr();
    match run(cli) {
        Ok(out) => {
            let r = &out.report;
            for c in r.checks.iter().filter(|c| !c.pass) {
                let _ = writeln!(stderr, "FAIL {}: value {:e}, tolerance {:e}", c.name, c.value, c.tolerance);
            }
            let _ = writeln!(stderr, "{}: {}/{} checks passed", r.command, r.summary.passed, r.summary.total);
            if r.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            ExitCode::from(2)
        }
    }
}
