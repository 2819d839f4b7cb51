//! Data model for the regression system and the break parameterization.
//!
//! Time is indexed 1..=T in everything that is reported (break dates,
//! fractions); internal storage is column-major with column `t - 1` holding
//! observation `t`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The observed system: `q` responses, `r` integrated regressors, `s`
/// stationary regressors and optional deterministic terms, over `T` periods.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    y: DMatrix<f64>,
    x: DMatrix<f64>,
    w: DMatrix<f64>,
    include_trend: bool,
    include_intercept: bool,
}

impl TimeSeriesPanel {
    /// Builds a panel from `q x T`, `r x T` and `s x T` matrices, validating
    /// shapes and finiteness.
    pub fn new(
        y: DMatrix<f64>,
        x: DMatrix<f64>,
        w: DMatrix<f64>,
        include_trend: bool,
        include_intercept: bool,
    ) -> Result<Self> {
        let panel = Self {
            y,
            x,
            w,
            include_trend,
            include_intercept,
        };
        validate_panel(&panel)?;
        Ok(panel)
    }

    pub fn t_len(&self) -> usize {
        self.y.ncols()
    }

    pub fn q(&self) -> usize {
        self.y.nrows()
    }

    pub fn r(&self) -> usize {
        self.x.nrows()
    }

    pub fn s(&self) -> usize {
        self.w.nrows()
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn include_trend(&self) -> bool {
        self.include_trend
    }

    pub fn include_intercept(&self) -> bool {
        self.include_intercept
    }

    pub fn layout(&self) -> RegressorLayout {
        RegressorLayout {
            r: self.r(),
            trend: self.include_trend,
            intercept: self.include_intercept,
            s: self.s(),
        }
    }

    /// Number of regressors per equation, `r + trend + intercept + s`.
    pub fn regressors(&self) -> usize {
        self.layout().len()
    }

    /// Stacked coefficient dimension per time group, `q * regressors()`.
    pub fn group_dim(&self) -> usize {
        self.q() * self.regressors()
    }

    /// Observations `start..end` (0-based, end exclusive) as a new panel.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.t_len() {
            return Err(Error::InvalidConfig(format!(
                "slice {start}..{end} outside 0..{}",
                self.t_len()
            )));
        }
        let n = end - start;
        Self::new(
            self.y.columns(start, n).into_owned(),
            self.x.columns(start, n).into_owned(),
            self.w.columns(start, n).into_owned(),
            self.include_trend,
            self.include_intercept,
        )
    }

    /// Same regressors, different responses (used by the bootstrap).
    pub fn with_responses(&self, y: DMatrix<f64>) -> Result<Self> {
        Self::new(
            y,
            self.x.clone(),
            self.w.clone(),
            self.include_trend,
            self.include_intercept,
        )
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, bool, bool) {
        (
            self.y,
            self.x,
            self.w,
            self.include_trend,
            self.include_intercept,
        )
    }
}

/// Checks every panel invariant: common column count, `T >= 1`, finite entries.
pub fn validate_panel(panel: &TimeSeriesPanel) -> Result<()> {
    let t = panel.y.ncols();
    if t == 0 {
        return Err(Error::DimensionMismatch {
            matrix: "Y",
            expected: "at least 1 column".into(),
            found: "0 columns".into(),
        });
    }
    if panel.y.nrows() == 0 {
        return Err(Error::DimensionMismatch {
            matrix: "Y",
            expected: "at least 1 equation".into(),
            found: "0 rows".into(),
        });
    }
    for (name, m) in [("X", &panel.x), ("W", &panel.w)] {
        if m.ncols() != t {
            return Err(Error::DimensionMismatch {
                matrix: name,
                expected: format!("{t} columns"),
                found: format!("{} columns", m.ncols()),
            });
        }
    }
    for (name, m) in [("Y", &panel.y), ("X", &panel.x), ("W", &panel.w)] {
        for col in 0..m.ncols() {
            for row in 0..m.nrows() {
                if !m[(row, col)].is_finite() {
                    return Err(Error::NonFinite {
                        matrix: name,
                        row,
                        col,
                    });
                }
            }
        }
    }
    if panel.layout().is_empty() {
        return Err(Error::InvalidConfig("model has no regressors".into()));
    }
    Ok(())
}

/// Row ordering of `Z_t`: integrated, trend, intercept, stationary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressorLayout {
    pub r: usize,
    pub trend: bool,
    pub intercept: bool,
    pub s: usize,
}

impl RegressorLayout {
    pub fn len(&self) -> usize {
        self.r + usize::from(self.trend) + usize::from(self.intercept) + self.s
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn trend_row(&self) -> Option<usize> {
        self.trend.then_some(self.r)
    }

    pub fn intercept_row(&self) -> Option<usize> {
        self.intercept.then_some(self.r + usize::from(self.trend))
    }

    pub fn stationary_rows(&self) -> std::ops::Range<usize> {
        let start = self.r + usize::from(self.trend) + usize::from(self.intercept);
        start..start + self.s
    }

    /// Factor mapping a coefficient on the scaled regressor to the raw one:
    /// `T^{-1/2}` for integrated rows, `T^{-1}` for the trend, 1 otherwise.
    pub fn scale_factors(&self, t_len: usize) -> Vec<f64> {
        let t = t_len as f64;
        let mut f = vec![1.0; self.len()];
        f[..self.r].fill(t.powf(-0.5));
        if let Some(row) = self.trend_row() {
            f[row] = 1.0 / t;
        }
        f
    }

    /// Human readable regressor names in row order.
    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.r).map(|i| format!("x{i}")).collect();
        if self.trend {
            names.push("trend".into());
        }
        if self.intercept {
            names.push("const".into());
        }
        names.extend((1..=self.s).map(|i| format!("w{i}")));
        names
    }
}

/// The regressor sequence `Z_t`, one column per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledRegressors {
    pub z: DMatrix<f64>,
    pub scaling_applied: bool,
    pub layout: RegressorLayout,
}

impl ScaledRegressors {
    pub fn dim(&self) -> usize {
        self.z.nrows()
    }

    pub fn t_len(&self) -> usize {
        self.z.ncols()
    }
}

/// Stacks `(T^{-1/2} X_t, t/T, 1, w_t)` (or the raw levels when
/// `apply_scaling` is false) into `Z`.
pub fn build_scaled_regressors(panel: &TimeSeriesPanel, apply_scaling: bool) -> ScaledRegressors {
    let layout = panel.layout();
    let t_len = panel.t_len();
    let p = layout.len();
    let factors = if apply_scaling {
        layout.scale_factors(t_len)
    } else {
        vec![1.0; p]
    };
    let mut z = DMatrix::zeros(p, t_len);
    for t in 0..t_len {
        for i in 0..layout.r {
            z[(i, t)] = panel.x[(i, t)] * factors[i];
        }
        if let Some(row) = layout.trend_row() {
            z[(row, t)] = (t + 1) as f64 * factors[row];
        }
        if let Some(row) = layout.intercept_row() {
            z[(row, t)] = 1.0;
        }
        for (k, row) in layout.stationary_rows().enumerate() {
            z[(row, t)] = panel.w[(k, t)];
        }
    }
    ScaledRegressors {
        z,
        scaling_applied: apply_scaling,
        layout,
    }
}

/// Ordered break dates. Index `t_k` (1-based) is the first observation of
/// regime `k + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BreakSet {
    indices: Vec<usize>,
    t_len: usize,
}

impl BreakSet {
    pub fn new(indices: Vec<usize>, t_len: usize) -> Result<Self> {
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidBreaks(format!(
                    "indices not strictly increasing: {indices:?}"
                )));
            }
        }
        if let Some(&bad) = indices.iter().find(|&&t| t < 2 || t > t_len) {
            return Err(Error::InvalidBreaks(format!(
                "index {bad} outside [2, {t_len}]"
            )));
        }
        Ok(Self { indices, t_len })
    }

    /// Sorts and deduplicates before validating.
    pub fn from_unsorted(mut indices: Vec<usize>, t_len: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        Self::new(indices, t_len)
    }

    pub fn empty(t_len: usize) -> Self {
        Self {
            indices: Vec::new(),
            t_len,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    /// Relative break dates `t_k / T`.
    pub fn fractions(&self) -> Vec<f64> {
        let t = self.t_len as f64;
        self.indices.iter().map(|&i| i as f64 / t).collect()
    }

    /// Half-open 0-based observation ranges of the `m + 1` regimes.
    pub fn regimes(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::with_capacity(self.indices.len() + 1);
        let mut start = 0;
        for &b in &self.indices {
            out.push(start..b - 1);
            start = b - 1;
        }
        out.push(start..self.t_len);
        out
    }

    /// Shortest regime length.
    pub fn min_regime_len(&self) -> usize {
        self.regimes().iter().map(|r| r.len()).min().unwrap_or(0)
    }

    pub fn without(&self, pos: usize) -> Self {
        let mut indices = self.indices.clone();
        indices.remove(pos);
        Self {
            indices,
            t_len: self.t_len,
        }
    }

    pub fn subset(&self, keep: &[usize]) -> Self {
        Self {
            indices: keep.iter().map(|&k| self.indices[k]).collect(),
            t_len: self.t_len,
        }
    }
}

/// Which coefficients (equation x regressor) may change at a break.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionMask {
    q: usize,
    p: usize,
    mask: Vec<bool>,
}

impl SelectionMask {
    /// Row-major `q x p` mask.
    pub fn new(q: usize, p: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != q * p {
            return Err(Error::DimensionMismatch {
                matrix: "SelectionMask",
                expected: format!("{} entries", q * p),
                found: format!("{} entries", mask.len()),
            });
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::InvalidConfig("selection mask has no true entry".into()));
        }
        Ok(Self { q, p, mask })
    }

    pub fn all(q: usize, p: usize) -> Self {
        Self {
            q,
            p,
            mask: vec![true; q * p],
        }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn get(&self, eq: usize, reg: usize) -> bool {
        self.mask[eq * self.p + reg]
    }

    pub fn is_full(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// Number of coefficients allowed to change.
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Positions inside a stacked, equation-major group vector.
    pub fn stacked_coords(&self) -> Vec<usize> {
        (0..self.q * self.p).filter(|&i| self.mask[i]).collect()
    }

    pub fn check_shape(&self, q: usize, p: usize) -> Result<()> {
        if self.q != q || self.p != p {
            return Err(Error::DimensionMismatch {
                matrix: "SelectionMask",
                expected: format!("{q}x{p}"),
                found: format!("{}x{}", self.q, self.p),
            });
        }
        Ok(())
    }
}

/// Per-regime least-squares fit of the system for a fixed break set.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedFit {
    pub breaks: BreakSet,
    /// One `q x p` matrix per regime, columns in `Z_t` row order.
    pub coefficients: Vec<DMatrix<f64>>,
    pub residuals: DMatrix<f64>,
    /// Sum of squared residuals over all equations and observations.
    pub ssr: f64,
    pub ic: Option<f64>,
    /// Whether `coefficients` refer to the scaled regressors.
    pub scaled: bool,
    pub std_errors: Option<Vec<DMatrix<f64>>>,
}

impl SegmentedFit {
    pub fn fitted(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        y - &self.residuals
    }
}
