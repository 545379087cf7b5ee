//! `toric-bernstein`: evaluate generalized Bernstein operators on Delzant
//! polytopes and check their asymptotic behavior from the command line.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{CliError, Overrides};

#[derive(Parser)]
#[command(
    name = "toric-bernstein",
    version,
    about = "Generalized Bernstein operators on Delzant polytopes",
    after_help = "Exit codes: 0 success, 1 validation/identity failure, \
                  2 config error, 3 numerical non-convergence."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config document (path, or '-' for stdin); flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Comma-separated dilation list, e.g. 4,8,16 (overrides config "N").
    #[arg(long = "N", global = true, value_name = "LIST")]
    n: Option<String>,

    /// Test function expression in x1..xm (overrides config "f").
    #[arg(long, global = true, value_name = "EXPR")]
    f: Option<String>,

    /// Grid counts per axis, e.g. 9 or 9,7 (overrides config "grid").
    #[arg(long, global = true, value_name = "LIST")]
    grid: Option<String>,

    /// Interior margin as a fraction of the diameter, in (0, 0.5).
    #[arg(long, global = true, value_name = "FRAC")]
    margin: Option<f64>,

    /// Gauss-Legendre order (2..=64).
    #[arg(long = "quad-order", global = true, value_name = "K")]
    quad_order: Option<usize>,

    /// Relative tolerance between refinement levels.
    #[arg(long = "quad-tol", global = true, value_name = "TOL")]
    quad_tol: Option<f64>,

    /// Maximum dyadic refinement levels (2..=12).
    #[arg(long = "quad-levels", global = true, value_name = "L")]
    quad_levels: Option<usize>,

    /// CSV / report output path (default: stdout).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Norming-table cache file, reused and extended across runs.
    #[arg(long, global = true, value_name = "PATH")]
    cache: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the polytope and metric: Delzant conditions, facet data,
    /// Hessian positivity.
    Validate,
    /// Evaluate B_N f on an interior grid (plus vertices) for each N.
    Approx,
    /// Residuals against the corrected expansions, with fitted orders.
    Converge,
    /// Lattice sums against the two-term Euler-MacLaurin approximation.
    Riemann,
    /// Curvature and denominator identities with pass/fail residuals.
    Identities,
    /// Norming constants: quadrature vs closed form, with table caching.
    Norming,
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    let overrides = Overrides {
        config: cli.config.clone(),
        n: cli.n.clone(),
        f: cli.f.clone(),
        grid: cli.grid.clone(),
        margin: cli.margin,
        quad_order: cli.quad_order,
        quad_tol: cli.quad_tol,
        quad_levels: cli.quad_levels,
        out: cli.out.clone(),
        cache: cli.cache.clone(),
    };
    let cfg = config::load(&overrides)?;
    match cli.command {
        Command::Validate => commands::cmd_validate(&cfg),
        Command::Approx => commands::cmd_approx(&cfg),
        Command::Converge => commands::cmd_converge(&cfg),
        Command::Riemann => commands::cmd_riemann(&cfg),
        Command::Identities => commands::cmd_identities(&cfg),
        Command::Norming => commands::cmd_norming(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
