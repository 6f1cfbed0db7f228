//! `singulim`: certified descent and singularity diagnostics for rational
//! objectives.
//!
//! Exit status: 0 on success, 1 when well-formed input hits a domain or
//! validation failure, 2 when input is malformed (unparseable files or
//! flags, wrong shapes, unreadable paths).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use singulim::Error;

use crate::commands::*;

#[derive(Parser)]
#[command(name = "singulim", version, about = "Descent and singularity analysis for rational functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run Armijo steepest descent and write the trace CSV.
    Optimize {
        #[arg(long)]
        problem: PathBuf,
        /// Start point, e.g. `2,-0.1`.
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        /// RunConfig JSON; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Armijo constant.
        #[arg(long)]
        sigma: Option<f64>,
        /// Backtracking factor.
        #[arg(long)]
        beta: Option<f64>,
        /// Initial trial step.
        #[arg(long)]
        step0: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        grad_tol: Option<f64>,
        /// Start every line search from `step0` instead of the Barzilai-Borwein step.
        #[arg(long)]
        fixed_step: bool,
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Safe-direction analysis at a point given with exact coordinates.
    Analyze {
        #[arg(long)]
        problem: PathBuf,
        /// Exact coordinates, e.g. `0,0` or `3,1/2`.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        /// Direction to classify; repeatable.
        #[arg(long = "direction", allow_hyphen_values = true)]
        directions: Vec<String>,
        /// Also classify K random directions.
        #[arg(long, default_value_t = 0)]
        random_directions: usize,
        /// Seed for random directions (default: SINGULIM_SEED, then 0).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Certify descent conditions and convergence behavior of a trace.
    Diagnose {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        /// Limit point with exact coordinates (default: detected cluster point).
        #[arg(long, allow_hyphen_values = true)]
        x_star: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Fraction of the trace treated as its tail.
        #[arg(long)]
        tail_fraction: Option<f64>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build the homogenized CP objective for a target tensor.
    Tensor {
        /// Tensor dimensions, e.g. `2,2,2`.
        #[arg(long)]
        dims: String,
        #[arg(long)]
        rank: usize,
        /// Target tensor as nested JSON arrays, row-major.
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        emit_problem: PathBuf,
    },
    /// Taylor coefficients along a line and the radius lower bound.
    Series {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long, allow_hyphen_values = true)]
        direction: String,
        #[arg(long, default_value_t = 16)]
        terms: usize,
    },
    /// Write the bundled problem files.
    Examples {
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Trajectory and level-set samples as CSV for external plotting.
    PlotData {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        #[arg(long)]
        trajectory_out: Option<PathBuf>,
        #[arg(long)]
        grid_out: Option<PathBuf>,
        #[arg(long, default_value = "-2.5,-2.5", allow_hyphen_values = true)]
        lo: String,
        #[arg(long, default_value = "2.5,2.5", allow_hyphen_values = true)]
        hi: String,
        /// Samples per axis.
        #[arg(long, default_value_t = 101)]
        n: usize,
    },
    /// Print the default RunConfig as JSON.
    Config,
}

fn run(cmd: Command) -> singulim::Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cmd {
        Command::Optimize {
            problem,
            x0,
            config,
            sigma,
            beta,
            step0,
            max_iters,
            grad_tol,
            fixed_step,
            trace_out,
        } => cmd_optimize(
            &OptimizeArgs {
                problem,
                x0,
                config,
                sigma,
                beta,
                step0,
                max_iters,
                grad_tol,
                fixed_step,
                trace_out,
            },
            &mut out,
        ),
        Command::Analyze {
            problem,
            point,
            directions,
            random_directions,
            seed,
        } => cmd_analyze(
            &AnalyzeArgs {
                problem,
                point,
                directions,
                random_directions,
                seed,
            },
            &mut out,
        ),
        Command::Diagnose {
            trace,
            problem,
            x_star,
            config,
            tail_fraction,
            report,
        } => cmd_diagnose(
            &DiagnoseArgs {
                trace,
                problem,
                x_star,
                config,
                tail_fraction,
                report,
            },
            &mut out,
        ),
        Command::Tensor {
            dims,
            rank,
            target,
            emit_problem,
        } => cmd_tensor(
            &TensorArgs {
                dims,
                rank,
                target,
                emit_problem,
            },
            &mut out,
        ),
        Command::Series {
            problem,
            point,
            direction,
            terms,
        } => cmd_series(
            &SeriesArgs {
                problem,
                point,
                direction,
                terms,
            },
            &mut out,
        ),
        Command::Examples { out_dir } => cmd_examples(&out_dir, &mut out),
        Command::PlotData {
            problem,
            x0,
            trajectory_out,
            grid_out,
            lo,
            hi,
            n,
        } => cmd_plot_data(
            &PlotArgs {
                problem,
                x0,
                trajectory_out,
                grid_out,
                lo,
                hi,
                n,
            },
            &mut out,
        ),
        Command::Config => cmd_config(&mut out),
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_malformed_input() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
