//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use breakscan::model::validate_panel;
use breakscan::post::ArOrder;
use breakscan::{
    dynamic_ols_augment, post_lasso_fit, runtime_compare, scenario_preset, sieve_bootstrap_se,
    simulate_dgp, two_step, BootstrapConfig, IcConfig, ScenarioConfig, TwoStepConfig,
};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::cli::{BenchArgs, FitArgs, IcArgs, McArgs, SimulateArgs};
use crate::csvio::{fmt_f64, read_panel, write_panel, write_rows, ReadOptions};
use crate::report::{
    write_json, BreakEntry, CoefficientEntry, ConfigEcho, FitReport, IcTraceEntry, RegimeEntry,
    SampleInfo, Timings, SCHEMA_VERSION,
};

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn ic_config(args: &IcArgs) -> IcConfig {
    let mut ic = match (args.omega, args.omega_constant) {
        (Some(w), _) => IcConfig::fixed(w),
        (None, Some(c)) => IcConfig::auto(c),
        (None, None) => IcConfig::default(),
    };
    if let Some(n) = args.exhaustive_threshold {
        ic.exhaustive_threshold = n;
    }
    ic
}

fn ar_order_name(order: ArOrder) -> String {
    match order {
        ArOrder::Auto => "auto".into(),
        ArOrder::Fixed(p) => p.to_string(),
    }
}

/// Paths written by `fit`.
pub struct FitOutputs {
    pub report: PathBuf,
    pub plot: PathBuf,
}

pub fn fit(args: &FitArgs) -> Result<FitOutputs> {
    let total = Instant::now();
    let options = ReadOptions {
        renames: args.map.clone(),
        trend: args.trend,
        intercept: !args.no_intercept,
        drop_missing: args.drop_missing,
    };
    let data = read_panel(&args.inputs, &options).context("stage: reading input")?;
    let read_secs = total.elapsed().as_secs_f64();
    validate_panel(&data.panel).context("stage: validating panel")?;

    let dols = args.leads.is_some() || args.lags.is_some();
    let (panel, offset) = if dols {
        let (leads, lags) = (args.leads.unwrap_or(0), args.lags.unwrap_or(0));
        let p = dynamic_ols_augment(&data.panel, leads, lags).context("stage: dynamic OLS augmentation")?;
        (p, lags + 1)
    } else {
        (data.panel.clone(), 0)
    };
    let t_len = panel.t_len();

    let mut config = TwoStepConfig::new(args.max_breaks);
    config.min_distance = args.min_distance;
    config.ic = ic_config(&args.ic);
    config.method = args.ic.method.into();
    config.penalize_baseline = args.penalize_baseline;
    config.refine = !args.no_refine;
    config.ic.validate().context("stage: configuration")?;
    let h = config.effective_min_distance(&panel);
    if args.max_breaks == 0 || (args.max_breaks + 1) * h > t_len {
        anyhow::bail!(
            "stage: configuration: infeasible: {} candidate breaks with minimum distance {h} do not fit in T = {t_len}",
            args.max_breaks
        );
    }
    let result = two_step(&panel, &config).context("stage: break estimation")?;
    let breaks = result.breaks().clone();

    let start = Instant::now();
    let fit = post_lasso_fit(&panel, &breaks, false).context("stage: post-selection fit")?;
    let refit_secs = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let std_errors = if args.bootstrap_reps > 0 {
        let boot = BootstrapConfig {
            replications: args.bootstrap_reps,
            ar_order: args.ar_order,
            seed: args.seed,
        };
        Some(sieve_bootstrap_se(&panel, &breaks, &boot).context("stage: bootstrap standard errors")?)
    } else {
        None
    };
    let bootstrap_secs = start.elapsed().as_secs_f64();

    let label = |sample_row: usize| data.labels[sample_row + offset].clone();
    let equations: Vec<String> = (1..=panel.q()).map(|e| format!("y{e}")).collect();
    let regressors = panel.layout().names();
    let fractions = breaks.fractions();
    let break_entries = breaks
        .indices()
        .iter()
        .zip(&fractions)
        .map(|(&b, &fraction)| BreakEntry {
            index: b + offset,
            sample_index: b,
            fraction,
            label: label(b - 1),
            date: data.dated.then(|| label(b - 1)),
        })
        .collect();
    let regimes = breaks
        .regimes()
        .into_iter()
        .enumerate()
        .map(|(k, range)| {
            let coef = &fit.coefficients[k];
            let se = std_errors.as_ref().map(|s| &s[k]);
            let mut coefficients = Vec::with_capacity(coef.len());
            for (e, eq) in equations.iter().enumerate() {
                for (i, name) in regressors.iter().enumerate() {
                    coefficients.push(CoefficientEntry {
                        equation: eq.clone(),
                        regressor: name.clone(),
                        estimate: coef[(e, i)],
                        std_error: se.map(|s| s[(e, i)]),
                    });
                }
            }
            RegimeEntry {
                start: range.start + offset + 1,
                end: range.end + offset,
                start_label: label(range.start),
                end_label: label(range.end - 1),
                observations: range.len(),
                coefficients,
            }
        })
        .collect();

    let timings = Timings {
        read_secs,
        first_step_secs: result.timings.first_step.as_secs_f64(),
        second_step_secs: result.timings.second_step.as_secs_f64(),
        refit_secs: result.timings.refit.as_secs_f64() + refit_secs,
        bootstrap_secs,
        total_secs: total.elapsed().as_secs_f64(),
    };
    let report = FitReport {
        schema_version: SCHEMA_VERSION,
        breaks: break_entries,
        regimes,
        ic_trace: result
            .selection
            .trace
            .iter()
            .map(|s| IcTraceEntry {
                breaks: s.breaks.clone(),
                ssr: s.ssr,
                ic: s.ic,
            })
            .collect(),
        timings,
        config_echo: ConfigEcho {
            inputs: args.inputs.iter().map(|p| p.display().to_string()).collect(),
            map: args.map.clone(),
            drop_missing: args.drop_missing,
            trend: args.trend,
            intercept: !args.no_intercept,
            leads: args.leads,
            lags: args.lags,
            max_breaks: args.max_breaks,
            min_distance: args.min_distance,
            omega: args.ic.omega,
            omega_constant: args.ic.omega_constant,
            method: format!("{:?}", args.ic.method).to_lowercase(),
            penalize_baseline: args.penalize_baseline,
            refine: !args.no_refine,
            bootstrap_reps: args.bootstrap_reps,
            ar_order: ar_order_name(args.ar_order),
            seed: args.seed,
        },
        sample: SampleInfo {
            rows: data.panel.t_len(),
            t_len,
            offset,
            equations: equations.clone(),
            regressors,
            min_distance: result.min_distance,
        },
        candidates: result.first_step.candidates.indices().to_vec(),
        omega: result.selection.omega,
        ic: result.selection.ic,
        ssr: fit.ssr,
    };

    out_dir(&args.out)?;
    let report_path = args.out.join("report.json");
    write_json(&report_path, &report).context("stage: writing report")?;

    // Plot data: the series, fitted values, a regime counter and a marker on
    // the first observation of every new regime.
    let fitted = fit.fitted(panel.y());
    let mut header = vec![if data.dated { "date".to_string() } else { "t".to_string() }];
    header.extend(equations.iter().cloned());
    header.extend(equations.iter().map(|e| format!("{e}_fitted")));
    header.extend(["regime".to_string(), "break".to_string()]);
    let mut regime = 1;
    let rows: Vec<Vec<String>> = (0..t_len)
        .map(|t| {
            let is_break = breaks.indices().contains(&(t + 1));
            if is_break {
                regime += 1;
            }
            let mut row = vec![label(t)];
            row.extend(panel.y().column(t).iter().map(|v| fmt_f64(*v)));
            row.extend(fitted.column(t).iter().map(|v| fmt_f64(*v)));
            row.push(regime.to_string());
            row.push(u8::from(is_break).to_string());
            row
        })
        .collect();
    let plot_path = args.out.join("plot.csv");
    write_rows(&plot_path, &header, &rows).context("stage: writing plot data")?;
    Ok(FitOutputs {
        report: report_path,
        plot: plot_path,
    })
}

#[derive(Serialize)]
struct TruthFile {
    scenario: String,
    variant: String,
    t_len: usize,
    seed: u64,
    breaks: Vec<usize>,
    fractions: Vec<f64>,
    regressors: Vec<String>,
    /// Per regime, one row of coefficients per equation.
    coefficients: Vec<Vec<Vec<f64>>>,
    normalized: bool,
    dgp: breakscan::DgpConfig,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn simulate(args: &SimulateArgs) -> Result<(PathBuf, PathBuf)> {
    let mut dgp = scenario_preset(args.scenario, args.t_len)?.with_variant(args.variant);
    dgp.seed = args.seed;
    dgp.coefficient_scale = args.scale.into();
    if let Some(c) = args.c {
        dgp.c = c;
    }
    if args.noiseless {
        dgp = dgp.noiseless();
    }
    let (panel, truth) = simulate_dgp(&dgp)?;
    out_dir(&args.out)?;
    let panel_path = args.out.join("panel.csv");
    write_panel(&panel_path, &panel, None)?;
    let truth_file = TruthFile {
        scenario: args.scenario.to_string(),
        variant: args.variant.to_string(),
        t_len: args.t_len,
        seed: args.seed,
        breaks: truth.breaks.indices().to_vec(),
        fractions: truth.breaks.fractions(),
        regressors: panel.layout().names(),
        coefficients: truth.coefficients.iter().map(rows_of).collect(),
        normalized: truth.normalized,
        dgp,
    };
    let truth_path = args.out.join("truth.json");
    write_json(&truth_path, &truth_file)?;
    Ok((panel_path, truth_path))
}

pub fn mc(args: &McArgs) -> Result<(PathBuf, PathBuf)> {
    let mut config = ScenarioConfig::new(args.scenario, args.t_len, args.reps, args.seed);
    config.variant = args.variant;
    config.coefficient_scale = args.scale.into();
    config.noiseless = args.noiseless;
    config.max_breaks = args.max_breaks;
    config.min_distance = args.min_distance;
    config.ic = ic_config(&args.ic);
    config.method = args.ic.method.into();
    config.run_dp = args.dp;
    let report = breakscan::run_scenario(&config)?;

    out_dir(&args.out)?;
    let json_path = args.out.join("mc.json");
    write_json(&json_path, &report)?;

    let m0 = args.scenario.n_breaks();
    let mut header: Vec<String> = [
        "scenario", "variant", "T", "reps", "seed", "pce", "hausdorff", "hausdorff_reverse", "failures",
        "mean_secs", "median_secs",
    ]
    .map(String::from)
    .to_vec();
    for k in 1..=m0 {
        header.push(format!("tau{k}_mean"));
        header.push(format!("tau{k}_std"));
    }
    let mut row = vec![
        report.scenario.clone(),
        report.variant.clone(),
        report.t_len.to_string(),
        report.reps.to_string(),
        args.seed.to_string(),
        report.pce.to_string(),
        report.hausdorff_mean.to_string(),
        report.hausdorff_reverse_mean.to_string(),
        report.failures.to_string(),
        report.runtime.mean_secs.to_string(),
        report.runtime.median_secs.to_string(),
    ];
    for (m, s) in report.tau_mean.iter().zip(&report.tau_std) {
        row.push(m.to_string());
        row.push(s.to_string());
    }
    if let Some(dp) = &report.dp {
        header.extend(["dp_within_two".into(), "dp_median_secs".into()]);
        row.extend([dp.within_two.to_string(), dp.runtime.median_secs.to_string()]);
    }
    let csv_path = args.out.join("mc.csv");
    write_rows(&csv_path, &header, &[row])?;
    Ok((json_path, csv_path))
}

/// One line of the runtime table.
#[derive(Debug, Clone, Serialize)]
pub struct BenchLine {
    pub t_len: usize,
    pub two_step_secs: f64,
    pub dp_secs: f64,
    pub ratio: f64,
}

pub fn bench(args: &BenchArgs) -> Result<(PathBuf, Vec<BenchLine>)> {
    if args.sizes.is_empty() {
        anyhow::bail!("no sample sizes given");
    }
    // Fail on infeasible sizes before spending time on the others.
    for &t in &args.sizes {
        scenario_preset(args.scenario, t)?;
    }
    let rows = runtime_compare(args.scenario, &args.sizes, args.seed)?;
    let lines: Vec<BenchLine> = rows
        .iter()
        .map(|r| BenchLine {
            t_len: r.t_len,
            two_step_secs: r.two_step.as_secs_f64(),
            dp_secs: r.dp.as_secs_f64(),
            ratio: r.ratio,
        })
        .collect();
    out_dir(&args.out)?;
    let path = args.out.join("bench.csv");
    let header = ["T", "two_step_secs", "dp_secs", "ratio"].map(String::from);
    let cells: Vec<Vec<String>> = lines
        .iter()
        .map(|l| vec![l.t_len.to_string(), l.two_step_secs.to_string(), l.dp_secs.to_string(), l.ratio.to_string()])
        .collect();
    write_rows(&path, &header, &cells)?;
    Ok((path, lines))
}
