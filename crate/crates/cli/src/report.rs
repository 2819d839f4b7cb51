//! JSON documents written by the subcommands.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

/// Version of the `fit` report layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub breaks: Vec<BreakEntry>,
    pub regimes: Vec<RegimeEntry>,
    pub ic_trace: Vec<IcTraceEntry>,
    pub timings: Timings,
    pub config_echo: ConfigEcho,
    pub sample: SampleInfo,
    /// First-step candidates, as estimation-sample indices.
    pub candidates: Vec<usize>,
    pub omega: f64,
    pub ic: f64,
    pub ssr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BreakEntry {
    /// 1-based row of the input data where the new regime starts.
    pub index: usize,
    /// Same position counted within the estimation sample.
    pub sample_index: usize,
    /// `sample_index / T` for the estimation sample.
    pub fraction: f64,
    /// Key value of the input row (a date when the key column holds dates).
    pub label: String,
    pub date: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeEntry {
    /// Inclusive 1-based input rows.
    pub start: usize,
    pub end: usize,
    pub start_label: String,
    pub end_label: String,
    pub observations: usize,
    pub coefficients: Vec<CoefficientEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientEntry {
    pub equation: String,
    pub regressor: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IcTraceEntry {
    pub breaks: Vec<usize>,
    pub ssr: f64,
    pub ic: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub read_secs: f64,
    pub first_step_secs: f64,
    pub second_step_secs: f64,
    pub refit_secs: f64,
    pub bootstrap_secs: f64,
    pub total_secs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleInfo {
    /// Observations after joining and missing-value handling.
    pub rows: usize,
    /// Observations used for estimation.
    pub t_len: usize,
    /// Input rows dropped at the start by the lag structure.
    pub offset: usize,
    pub equations: Vec<String>,
    pub regressors: Vec<String>,
    pub min_distance: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub inputs: Vec<String>,
    pub map: Vec<(String, String)>,
    pub drop_missing: bool,
    pub trend: bool,
    pub intercept: bool,
    pub leads: Option<usize>,
    pub lags: Option<usize>,
    pub max_breaks: usize,
    pub min_distance: Option<usize>,
    pub omega: Option<f64>,
    pub omega_constant: Option<f64>,
    pub method: String,
    pub penalize_baseline: bool,
    pub refine: bool,
    pub bootstrap_reps: usize,
    pub ar_order: String,
    pub seed: u64,
}

/// Writes `value` as pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}
