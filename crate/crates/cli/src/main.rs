mod commands;
mod formats;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Toda lattices, their spectral theory, and the pseudo-positive Toda flow on
/// the Klein–Dirac quadric.
#[derive(Debug, Parser)]
#[command(name = "toda-kdq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Options,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// RK4 trajectory of a one-dimensional Flaschka state (CSV).
    #[command(name = "simulate-1d")]
    Simulate1d,
    /// Exact Moser solution of a one-dimensional state on a time grid (CSV).
    SpectralSolve,
    /// Pseudo-positive Toda evolution (CSV of H_total, or one component).
    SimulatePseudo {
        /// Export this component as `k,ell` instead of the totals.
        #[arg(long, value_parser = parse_index)]
        component: Option<(usize, usize)>,
    },
    /// Multidimensional Stieltjes–Markov transform at listed KDQ points (CSV).
    TransformEval,
    /// One-dimensional or multidimensional Nevanlinna residual table (JSON).
    NevanlinnaCheck,
    /// Integrability functional under the Riccati mass flow (CSV).
    IsoFlow,
    /// Run the invariant suite on the bundled fixtures.
    VerifyAll,
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    /// Input JSON file.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// End of the time grid.
    #[arg(long, global = true, value_parser = positive_f64)]
    t_final: Option<f64>,
    /// Integration step, or sample spacing for closed-form solutions.
    #[arg(long, global = true, value_parser = positive_f64)]
    dt: Option<f64>,
    /// Truncation degree of the kernel series (verify-all).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    kmax: Option<u64>,
    /// Exactness degree of the sphere quadrature.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    quad_degree: Option<u64>,
    /// Scale factor applied to every verification tolerance.
    #[arg(long, global = true, value_parser = positive_f64)]
    tol: Option<f64>,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} is not a positive finite number"))
    }
}

fn parse_index(s: &str) -> Result<(usize, usize), String> {
    let (k, ell) = s.split_once(',').ok_or("expected k,ell")?;
    Ok((k.trim().parse().map_err(|e| format!("{e}"))?, ell.trim().parse().map_err(|e| format!("{e}"))?))
}

/// A failed check or a numerical failure on valid input.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct NumericFailure(pub String);

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<NumericFailure>().is_some() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<toda_kdq::Error>() {
            return if e.is_numeric() { 3 } else { 2 };
        }
    }
    2
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("TODA_KDQ_THREADS") {
        let n: usize = v.parse().map_err(|_| anyhow::anyhow!("TODA_KDQ_THREADS={v} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    let o = &cli.opts;
    match cli.command {
        Command::Simulate1d => commands::simulate_1d(o),
        Command::SpectralSolve => commands::spectral_solve(o),
        Command::SimulatePseudo { component } => commands::simulate_pseudo(o, component),
        Command::TransformEval => commands::transform_eval(o),
        Command::NevanlinnaCheck => commands::nevanlinna_check(o),
        Command::IsoFlow => commands::iso_flow(o),
        Command::VerifyAll => verify::verify_all(o),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
