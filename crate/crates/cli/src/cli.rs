//! Command-line definitions.

use std::path::PathBuf;

use breakscan::post::ArOrder;
use breakscan::sim::CoefficientScale;
use breakscan::{Scenario, SelectionMethod, Variant};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "breakscan", version, about = "Detect common structural breaks in systems of regressions")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = "BREAKSCAN_THREADS")]
    pub threads: Option<usize>,

    /// Flat key=value file with default flag values; flags given on the
    /// command line take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate breaks in a panel read from CSV.
    Fit(FitArgs),
    /// Simulate a panel from a named scenario.
    Simulate(SimulateArgs),
    /// Run a Monte Carlo cell.
    Mc(McArgs),
    /// Time the two-step estimator against the dynamic programming baseline.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Backward,
    Exhaustive,
    Auto,
}

impl From<Method> for SelectionMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Backward => SelectionMethod::Backward,
            Method::Exhaustive => SelectionMethod::Exhaustive,
            Method::Auto => SelectionMethod::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scale {
    Normalized,
    Raw,
}

impl From<Scale> for CoefficientScale {
    fn from(s: Scale) -> Self {
        match s {
            Scale::Normalized => CoefficientScale::Normalized,
            Scale::Raw => CoefficientScale::Raw,
        }
    }
}

/// Penalty options shared by `fit` and `mc`.
#[derive(Debug, Clone, Args)]
pub struct IcArgs {
    /// Fixed penalty per break.
    #[arg(long, conflicts_with = "omega_constant")]
    pub omega: Option<f64>,

    /// Constant of the data-driven penalty.
    #[arg(long)]
    pub omega_constant: Option<f64>,

    #[arg(long, value_enum, default_value_t = Method::Backward)]
    pub method: Method,

    /// Largest candidate count searched exhaustively by `--method auto`.
    #[arg(long)]
    pub exhaustive_threshold: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Input CSV files, inner-joined on their first column.
    #[arg(required = true, value_name = "CSV")]
    pub inputs: Vec<PathBuf>,

    /// Rename a column, FROM=TO; TO = `_` drops the column.
    #[arg(long = "map", value_name = "FROM=TO", value_parser = parse_rename)]
    pub map: Vec<(String, String)>,

    /// Skip rows with missing values instead of failing.
    #[arg(long)]
    pub drop_missing: bool,

    /// Add a linear trend to the regressors.
    #[arg(long)]
    pub trend: bool,

    /// Leave out the intercept.
    #[arg(long)]
    pub no_intercept: bool,

    /// Leads of the differenced integrated regressors (dynamic OLS).
    #[arg(long)]
    pub leads: Option<usize>,

    /// Lags of the differenced integrated regressors (dynamic OLS).
    #[arg(long)]
    pub lags: Option<usize>,

    /// Maximum number of candidate breaks from the first step.
    #[arg(long, default_value_t = 40)]
    pub max_breaks: usize,

    /// Minimum number of observations between breaks.
    #[arg(long)]
    pub min_distance: Option<usize>,

    #[command(flatten)]
    pub ic: IcArgs,

    /// Penalize the first regime's coefficients in the first step.
    #[arg(long)]
    pub penalize_baseline: bool,

    /// Skip the local refinement of the selected breaks.
    #[arg(long)]
    pub no_refine: bool,

    /// Bootstrap replications for standard errors; 0 skips them.
    #[arg(long, default_value_t = 199)]
    pub bootstrap_reps: usize,

    /// Order of the autoregressive sieve: `auto` or a number.
    #[arg(long, default_value = "auto", value_parser = parse_ar_order)]
    pub ar_order: ArOrder,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Output directory for report.json and plot.csv.
    #[arg(long, short, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: Scenario,

    /// Sample size.
    #[arg(long = "T", alias = "t-len")]
    pub t_len: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    #[arg(long, default_value = "full", value_parser = parse_variant)]
    pub variant: Variant,

    #[arg(long, value_enum, default_value_t = Scale::Normalized)]
    pub scale: Scale,

    /// Break magnitude.
    #[arg(long)]
    pub c: Option<f64>,

    /// Simulate without noise.
    #[arg(long)]
    pub noiseless: bool,

    /// Output directory for panel.csv and truth.json.
    #[arg(long, short, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: Scenario,

    #[arg(long = "T", alias = "t-len")]
    pub t_len: usize,

    #[arg(long, default_value_t = 100)]
    pub reps: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    #[arg(long, default_value = "full", value_parser = parse_variant)]
    pub variant: Variant,

    #[arg(long, value_enum, default_value_t = Scale::Normalized)]
    pub scale: Scale,

    #[arg(long)]
    pub noiseless: bool,

    /// Defaults to `4 m + 3` for `m` true breaks.
    #[arg(long)]
    pub max_breaks: Option<usize>,

    #[arg(long)]
    pub min_distance: Option<usize>,

    #[command(flatten)]
    pub ic: IcArgs,

    /// Also run the dynamic programming baseline.
    #[arg(long)]
    pub dp: bool,

    /// Output directory for mc.json and mc.csv.
    #[arg(long, short, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Sample sizes, comma separated.
    #[arg(long = "T", alias = "t-len", value_delimiter = ',', default_value = "500,1000,2000")]
    pub sizes: Vec<usize>,

    #[arg(long, default_value = "SB1", value_parser = parse_scenario)]
    pub scenario: Scenario,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Output directory for bench.csv.
    #[arg(long, short, default_value = ".")]
    pub out: PathBuf,
}

fn parse_rename(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((from, to)) if !from.trim().is_empty() && !to.trim().is_empty() => {
            Ok((from.trim().to_string(), to.trim().to_string()))
        }
        _ => Err(format!("expected FROM=TO, got '{s}'")),
    }
}

fn parse_ar_order(s: &str) -> Result<ArOrder, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(ArOrder::Auto);
    }
    s.parse()
        .map(ArOrder::Fixed)
        .map_err(|_| format!("expected 'auto' or a nonnegative integer, got '{s}'"))
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse().map_err(|e: breakscan::Error| e.to_string())
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: breakscan::Error| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definitions_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn later_flags_win() {
        let cli = Cli::try_parse_from(["breakscan", "mc", "--scenario", "SB1", "--T", "100", "--reps", "5", "--reps", "7"])
            .unwrap();
        let Command::Mc(args) = cli.command else { panic!() };
        assert_eq!(args.reps, 7);
    }
}
