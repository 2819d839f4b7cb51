//! Command-line front end for the `breakscan` estimators.
//!
//! Subcommands: `fit` (estimate breaks in CSV data), `simulate`, `mc`
//! (Monte Carlo cells) and `bench` (runtime comparison with the dynamic
//! programming baseline).

pub mod cli;
pub mod commands;
pub mod config;
pub mod csvio;
pub mod report;

use anyhow::{Context, Result};
use clap::Parser;

use crate::cli::{Cli, Command};

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the lines to print on success.
pub fn run(argv: Vec<String>) -> Result<Vec<String>> {
    let argv = config::expand(argv)?;
    let cli = Cli::try_parse_from(argv)?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    match &cli.command {
        Command::Fit(args) => {
            let out = commands::fit(args)?;
            Ok(vec![
                format!("wrote {}", out.report.display()),
                format!("wrote {}", out.plot.display()),
            ])
        }
        Command::Simulate(args) => {
            let (panel, truth) = commands::simulate(args)?;
            Ok(vec![format!("wrote {}", panel.display()), format!("wrote {}", truth.display())])
        }
        Command::Mc(args) => {
            let (json, csv) = commands::mc(args)?;
            Ok(vec![format!("wrote {}", json.display()), format!("wrote {}", csv.display())])
        }
        Command::Bench(args) => {
            let (path, lines) = commands::bench(args)?;
            let mut out = vec![format!("{:>6} {:>14} {:>14} {:>8}", "T", "two-step (s)", "DP (s)", "ratio")];
            out.extend(lines.iter().map(|l| {
                format!("{:>6} {:>14.4} {:>14.4} {:>8.4}", l.t_len, l.two_step_secs, l.dp_secs, l.ratio)
            }));
            out.push(format!("wrote {}", path.display()));
            Ok(out)
        }
    }
}
