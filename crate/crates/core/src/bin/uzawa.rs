use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use deep_uzawa::cli::{
    config::parse_config,
    plot::{discover_runs, emit_plot, PlotKind},
    runner::{bench_dims, run_experiment, run_oracle, sweep},
    ConfigError, RunnerError,
};

/// Train neural-network PDE solvers with Uzawa-updated boundary
/// multipliers, run the penalty and hard-BC baselines, and check the
/// iteration against a finite-difference oracle.
#[derive(Parser)]
#[command(name = "uzawa", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` configuration file (TOML subset). Optional;
    /// defaults cover every key.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override single keys, e.g. `--override rho=0.5`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write history/state/params/meta files.
    Solve {
        #[command(flatten)]
        config: ConfigArgs,
        /// Timing benchmark over even dimensions, e.g. `2..16`
        /// (observational; writes bench.csv instead of training).
        #[arg(long, value_name = "LO..HI")]
        bench_dims: Option<String>,
    },
    /// Run a grid of experiments, one subdirectory per combination.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Grid axis, e.g. `--grid rho=0.01,0.1,1,10`. Repeatable; axes
        /// combine as a cartesian product.
        #[arg(long, value_name = "KEY=V1,V2,...", required = true)]
        grid: Vec<String>,
    },
    /// Run the finite-difference continuum oracle (interval problem).
    Oracle {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Render an SVG from run outputs.
    Plot {
        /// A run directory, or a directory of run subdirectories.
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
        /// `error_vs_step` or `state_vs_x`.
        #[arg(long)]
        kind: String,
        /// Output file; defaults to `<in>/<kind>.svg`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const EXIT_DIVERGED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let config_error = matches!(
                e,
                RunnerError::Config(_)
                    | RunnerError::Problem(_)
                    | RunnerError::OracleNeedsInterval
            ) || matches!(&e, RunnerError::Uzawa(u) if matches!(u, deep_uzawa::uzawa::UzawaError::Config(_)));
            ExitCode::from(if config_error { EXIT_CONFIG } else { EXIT_DIVERGED })
        }
    }
}

fn dispatch() -> Result<ExitCode, RunnerError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve { config, bench_dims: bench } => {
            let cfg = parse_config(config.config.as_deref(), &config.overrides)?;
            if let Some(range) = bench {
                let dims = parse_range(&range)
                    .map_err(|m| RunnerError::Config(ConfigError::Schema(m)))?;
                let path = bench_dims(&cfg, dims)?;
                println!("wrote {}", path.display());
                return Ok(ExitCode::SUCCESS);
            }
            let out = run_experiment(&cfg)?;
            report(&out.out_dir, out.diverged, out.final_l2_error);
            Ok(exit_for(out.diverged))
        }
        Command::Sweep { config, grid } => {
            let grids = grid
                .iter()
                .map(|g| {
                    g.split_once('=')
                        .map(|(k, vs)| {
                            (
                                k.trim().to_string(),
                                vs.split(',').map(|v| v.trim().to_string()).collect(),
                            )
                        })
                        .ok_or_else(|| ConfigError::BadOverride(g.clone()))
                })
                .collect::<Result<Vec<(String, Vec<String>)>, _>>()?;
            let cfg = parse_config(config.config.as_deref(), &config.overrides)?;
            let outs = sweep(&cfg, &config.overrides, &grids, config.config.as_deref())?;
            let mut any_diverged = false;
            for out in &outs {
                report(&out.out_dir, out.diverged, out.final_l2_error);
                any_diverged |= out.diverged;
            }
            Ok(exit_for(any_diverged))
        }
        Command::Oracle { config } => {
            let cfg = parse_config(config.config.as_deref(), &config.overrides)?;
            let out = run_oracle(&cfg)?;
            report(&out.out_dir, out.diverged, out.final_l2_error);
            Ok(exit_for(out.diverged))
        }
        Command::Plot { input, kind, out } => {
            let kind: PlotKind = kind
                .parse()
                .map_err(|m: String| RunnerError::Config(ConfigError::Schema(m)))?;
            let runs = discover_runs(&input).map_err(RunnerError::from)?;
            let out = out.unwrap_or_else(|| {
                input.join(match kind {
                    PlotKind::ErrorVsStep => "error_vs_step.svg",
                    PlotKind::StateVsX => "state_vs_x.svg",
                })
            });
            emit_plot(&runs, kind, &out).map_err(RunnerError::from)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn report(dir: &std::path::Path, diverged: bool, final_l2: Option<f64>) {
    let status = if diverged { "DIVERGED" } else { "ok" };
    match final_l2 {
        Some(l2) => println!("{}: {status}, final relative L2 error {l2:.3e}", dir.display()),
        None => println!("{}: {status}", dir.display()),
    }
}

fn exit_for(diverged: bool) -> ExitCode {
    if diverged {
        ExitCode::from(EXIT_DIVERGED)
    } else {
        ExitCode::SUCCESS
    }
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s
        .split_once("..")
        .ok_or_else(|| format!("expected LO..HI, got `{s}`"))?;
    let lo: usize = lo.parse().map_err(|_| format!("bad range start `{lo}`"))?;
    let hi: usize = hi.parse().map_err(|_| format!("bad range end `{hi}`"))?;
    if lo > hi {
        return Err(format!("empty range `{s}`"));
    }
    Ok((lo, hi))
}
