use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use urysohn_cli::{load_config, run, CliError, Mode, Overrides, SignChoice};

/// Solve, audit and analyse Urysohn quadratic integral equations.
#[derive(Debug, Parser)]
#[command(name = "urysohn", version)]
struct Args {
    /// Run configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Grid panels.
    #[arg(long = "grid-n")]
    grid_n: Option<usize>,
    /// Solver stopping tolerance on the sup-norm residual.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    eps0: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, value_enum)]
    sign: Option<SignChoice>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let overrides = Overrides {
        mode: args.mode,
        grid_n: args.grid_n,
        tol: args.tol,
        eps0: args.eps0,
        rho: args.rho,
        count: args.count,
        sign: args.sign,
        out: args.out,
        seed: args.seed,
    };
    let outcome = load_config(&args.config, &overrides)
        .map_err(CliError::from)
        .and_then(|cfg| run(&cfg));
    match outcome {
        Ok(o) => {
            for line in &o.summary {
                println!("{line}");
            }
            for path in &o.artifacts {
                println!("wrote {}", path.display());
            }
            for f in &o.failures {
                eprintln!("FAIL {f}");
            }
            ExitCode::from(o.exit_code())
        }
        Err(e) => {
            match &e {
                CliError::Config(_) => eprintln!("config error:\n{e}"),
                _ => eprintln!("error: {e}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}
