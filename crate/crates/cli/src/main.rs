mod commands;
mod error;
mod io;
mod reproduce;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

/// Locally optimal, transferred and maximin designs for gamma models.
#[derive(Debug, Parser)]
#[command(name = "optdesign", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Describe a model, optionally evaluating a design at a parameter.
    Info(InfoArgs),
    /// Locally optimal design, certified by the equivalence check.
    Optimize(OptimizeArgs),
    /// Push a design through an affine transformation.
    Transfer(TransferArgs),
    /// Equivalence check of a design.
    Check(CheckArgs),
    /// Maximin D-efficient design in the equal-slopes invariant family.
    Maximin(MaximinArgs),
    /// Recompute a published table or figure.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Model JSON file, or `one-factor` / `two-factor`.
    #[arg(long)]
    model: String,
    /// Parameter, comma separated; fractions such as -3/7 are accepted.
    #[arg(long, allow_hyphen_values = true)]
    beta: String,
}

#[derive(Debug, Args)]
struct InfoArgs {
    #[arg(long)]
    model: String,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    #[arg(long)]
    design: Option<PathBuf>,
    #[arg(long)]
    criterion: Option<String>,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Criterion JSON file, `D`, or `IMSE` (uniform weighting on the region).
    #[arg(long, default_value = "D")]
    criterion: String,
    /// JSON array of candidate points; defaults to the extremal points.
    #[arg(long)]
    candidates: Option<PathBuf>,
    /// Optimizer options JSON.
    #[arg(long)]
    options: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TransferArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    design: PathBuf,
    /// Transform JSON file or a name: identity, reflect:i[,j], swap:i,j,
    /// shift_scale:a,c.
    #[arg(long)]
    transform: String,
    #[arg(long, default_value = "D")]
    criterion: String,
    /// Override the parameter mode: linear or intercept_rescaled.
    #[arg(long)]
    param_mode: Option<String>,
    /// Apply the inverse pair.
    #[arg(long)]
    inverse: bool,
    /// Re-certify the image design at the mapped parameter.
    #[arg(long)]
    assert_optimal: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    design: PathBuf,
    #[arg(long, default_value = "D")]
    criterion: String,
    /// Check grid points per axis.
    #[arg(long, default_value_t = 101)]
    grid: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MaximinArgs {
    /// Linear grid of slopes `lo:hi:n`; defaults to a log-spaced grid over
    /// (-1/2, 1e4].
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Add the efficiency limit as the common slope tends to infinity.
    #[arg(long)]
    include_gamma_infinity_limit: bool,
    /// Evaluate this family member instead of optimizing.
    #[arg(long)]
    w: Option<f64>,
    /// Result JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Efficiency curve CSV.
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Target {
    Table1,
    Table2,
    Prop1,
    Fig3,
    Fig4,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    target: Target,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = 20240101)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Info(a) => commands::info(&a.model, a.beta.as_deref(), a.design.as_deref(), a.criterion.as_deref()),
        Command::Optimize(a) => commands::optimize(
            &a.model.model,
            &a.model.beta,
            &a.criterion,
            a.candidates.as_deref(),
            a.options.as_deref(),
            a.out.as_deref(),
        ),
        Command::Transfer(a) => commands::transfer(commands::TransferRequest {
            model: &a.model.model,
            beta: &a.model.beta,
            design: &a.design,
            transform: &a.transform,
            criterion: &a.criterion,
            param_mode: a.param_mode.as_deref(),
            inverse: a.inverse,
            assert_optimal: a.assert_optimal,
            out: a.out.as_deref(),
        }),
        Command::Check(a) => commands::check(
            &a.model.model,
            &a.model.beta,
            &a.design,
            &a.criterion,
            a.grid,
            a.out.as_deref(),
        ),
        Command::Maximin(a) => commands::maximin(
            a.grid.as_deref(),
            a.include_gamma_infinity_limit,
            a.w,
            a.out.as_deref(),
            a.curve.as_deref(),
        ),
        Command::Reproduce(a) => {
            std::fs::create_dir_all(&a.out)?;
            match a.target {
                Target::Table1 => reproduce::table1(&a.out),
                Target::Table2 => reproduce::table2(&a.out),
                Target::Prop1 => reproduce::prop1(&a.out, a.seed),
                Target::Fig3 => reproduce::fig3(&a.out),
                Target::Fig4 => reproduce::fig4(&a.out),
            }
        }
    }
}
