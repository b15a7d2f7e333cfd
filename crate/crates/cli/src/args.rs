use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "dagsobol", version, about = "Sobol sensitivity indices of DAG-structured processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate a process and write the observations as CSV
    Simulate(SimulateArgs),
    /// Estimate Sobol indices with one engine
    Fit(FitArgs),
    /// Mean squared error of engines against a Monte Carlo reference
    Compare(CompareArgs),
    /// Pareto table or chart from a saved report
    Pareto(ParetoArgs),
    /// Minimum number of observations per engine
    Minobs(MinobsArgs),
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Built-in process: welding, injection_molding or fig1
    #[arg(long)]
    pub builtin: Option<String>,
    /// Process spec JSON file
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SourceArgs {
    #[command(flatten)]
    pub source: Source,
    /// Output node (defaults to the spec's output or its only sink)
    #[arg(long)]
    pub output: Option<String>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub process: SourceArgs,
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineArg {
    Naive,
    Network,
    Sn,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeArg {
    Dense,
    Sparse,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Polynomial order at every level
    #[arg(long, default_value_t = 3)]
    pub p: u32,
    /// Order at one level, as LEVEL=ORDER (level 1 is next to the output)
    #[arg(long = "p-level", value_parser = parse_level)]
    pub p_level: Vec<(usize, u32)>,
    /// Residual bound of sparse fits
    #[arg(long, default_value_t = 0.001)]
    pub gamma: f64,
    /// Override the engine's fit mode (dense for naive and network, sparse for sn)
    #[arg(long = "fit-mode")]
    pub fit_mode: Option<ModeArg>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub process: SourceArgs,
    /// Observations as CSV; resampled with replacement when --reps > 1
    #[arg(long, conflicts_with = "m")]
    pub data: Option<PathBuf>,
    /// Simulate this many rows per replication
    #[arg(long, required_unless_present = "data")]
    pub m: Option<usize>,
    #[arg(long, value_enum)]
    pub engine: EngineArg,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report JSON path (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Pareto output; `.svg` writes a chart, anything else CSV
    #[arg(long)]
    pub pareto: Vec<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub process: SourceArgs,
    /// Comma-separated engines
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    pub engines: Vec<EngineArg>,
    /// Comma-separated sample sizes
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Base rows of the pick-freeze reference
    #[arg(long = "reference-n", default_value_t = 100_000)]
    pub reference_n: usize,
    /// CSV path (stdout table when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the comparison as JSON
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ParetoArgs {
    /// Report JSON written by `fit`
    #[arg(long)]
    pub report: PathBuf,
    /// `.svg` writes a chart, anything else CSV
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct MinobsArgs {
    #[command(flatten)]
    pub process: SourceArgs,
    #[arg(long, default_value_t = 3)]
    pub p: u32,
}

fn parse_level(s: &str) -> Result<(usize, u32), String> {
    let (l, k) = s
        .split_once('=')
        .ok_or_else(|| format!("expected LEVEL=ORDER, got `{s}`"))?;
    let l: usize = l.trim().parse().map_err(|_| format!("bad level `{l}`"))?;
    let k: u32 = k.trim().parse().map_err(|_| format!("bad order `{k}`"))?;
    if l == 0 || k == 0 {
        return Err("level and order start at 1".into());
    }
    Ok((l, k))
}
