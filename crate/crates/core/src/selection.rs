//! Second step: prune the first-step candidates with an information
//! criterion `IC(m, t) = S_T(t_1, ..., t_m) + m * omega_T`.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ols, segment_ssr as segment_ssr_normal, sum_sq};
use crate::model::{build_scaled_regressors, BreakSet, SegmentedFit, SelectionMask, TimeSeriesPanel};

/// Default constant in the automatic penalty
/// `omega_T = c * sigma^2 * d * T^{3/4} * log T`, calibrated on the
/// one-break scenario at `T = 200` (see `examples/calibrate_omega.rs`).
pub const DEFAULT_OMEGA_CONSTANT: f64 = 0.0356;

/// Default maximum candidate count for exhaustive search.
pub const DEFAULT_EXHAUSTIVE_THRESHOLD: usize = 12;

/// A removal lowers the criterion only if it does so by more than this
/// fraction of its magnitude.
const IC_TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Omega {
    /// Penalty per break.
    Fixed(f64),
    /// `c * sigma^2 * d * T^{3/4} * log T`, with `sigma^2` the residual
    /// variance of the model with every candidate break.
    Auto(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcConfig {
    pub omega: Omega,
    pub exhaustive_threshold: usize,
}

impl Default for IcConfig {
    fn default() -> Self {
        Self {
            omega: Omega::Auto(DEFAULT_OMEGA_CONSTANT),
            exhaustive_threshold: DEFAULT_EXHAUSTIVE_THRESHOLD,
        }
    }
}

impl IcConfig {
    pub fn fixed(omega: f64) -> Self {
        Self {
            omega: Omega::Fixed(omega),
            ..Self::default()
        }
    }

    pub fn auto(constant: f64) -> Self {
        Self {
            omega: Omega::Auto(constant),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = match self.omega {
            Omega::Fixed(v) | Omega::Auto(v) => v,
        };
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidConfig(format!("omega must be positive, got {v}")));
        }
        Ok(())
    }
}

/// Per-regime least squares for a fixed break set on the normalized
/// regressors. With a mask, breaks only shift the masked coefficients and
/// each equation is fitted as one joint regression.
pub fn segment_ssr(
    panel: &TimeSeriesPanel,
    breaks: &BreakSet,
    mask: Option<&SelectionMask>,
) -> Result<SegmentedFit> {
    let z = build_scaled_regressors(panel, true).z;
    segment_fit(&z, panel.y(), breaks, mask)
}

pub(crate) fn segment_fit(
    z: &DMatrix<f64>,
    y: &DMatrix<f64>,
    breaks: &BreakSet,
    mask: Option<&SelectionMask>,
) -> Result<SegmentedFit> {
    let (p, t_len) = z.shape();
    let q = y.nrows();
    if breaks.t_len() != t_len {
        return Err(Error::InvalidBreaks(format!(
            "break set is for T = {}, panel has T = {t_len}",
            breaks.t_len()
        )));
    }
    let regimes = breaks.regimes();
    for (k, r) in regimes.iter().enumerate() {
        if r.len() < p {
            return Err(Error::RegimeTooShort {
                regime: k,
                len: r.len(),
                required: p,
            });
        }
    }
    if let Some(m) = mask.filter(|m| !m.is_full()) {
        m.check_shape(q, p)?;
        return partial_fit(z, y, breaks, m);
    }
    let mut coefficients = Vec::with_capacity(regimes.len());
    let mut residuals = DMatrix::zeros(q, t_len);
    for (k, r) in regimes.iter().enumerate() {
        let design = z.columns(r.start, r.len()).transpose();
        let resp = y.columns(r.start, r.len()).transpose();
        let fit = ols(&design, &resp).ok_or(Error::SingularRegime { regime: k })?;
        coefficients.push(fit.coef.transpose());
        residuals
            .columns_mut(r.start, r.len())
            .copy_from(&fit.resid.transpose());
    }
    let ssr = sum_sq(&residuals);
    Ok(SegmentedFit {
        breaks: breaks.clone(),
        coefficients,
        residuals,
        ssr,
        ic: None,
        scaled: true,
        std_errors: None,
    })
}

fn partial_fit(
    z: &DMatrix<f64>,
    y: &DMatrix<f64>,
    breaks: &BreakSet,
    mask: &SelectionMask,
) -> Result<SegmentedFit> {
    let (p, t_len) = z.shape();
    let q = y.nrows();
    let starts: Vec<usize> = breaks.indices().iter().map(|&b| b - 1).collect();
    let n_regimes = starts.len() + 1;
    let mut coefficients = vec![DMatrix::zeros(q, p); n_regimes];
    let mut residuals = DMatrix::zeros(q, t_len);
    for e in 0..q {
        let shifting: Vec<usize> = (0..p).filter(|&i| mask.get(e, i)).collect();
        let cols = p + starts.len() * shifting.len();
        let design = DMatrix::from_fn(t_len, cols, |t, c| {
            if c < p {
                z[(c, t)]
            } else {
                let k = (c - p) / shifting.len();
                let i = shifting[(c - p) % shifting.len()];
                if t >= starts[k] {
                    z[(i, t)]
                } else {
                    0.0
                }
            }
        });
        let resp = y.row(e).transpose();
        let resp = DMatrix::from_column_slice(t_len, 1, resp.as_slice());
        let fit = ols(&design, &resp).ok_or(Error::SingularRegime { regime: 0 })?;
        let mut coef: Vec<f64> = (0..p).map(|i| fit.coef[(i, 0)]).collect();
        for (k, regime) in coefficients.iter_mut().enumerate() {
            if k > 0 {
                for (j, &i) in shifting.iter().enumerate() {
                    coef[i] += fit.coef[(p + (k - 1) * shifting.len() + j, 0)];
                }
            }
            for i in 0..p {
                regime[(e, i)] = coef[i];
            }
        }
        residuals.row_mut(e).copy_from(&fit.resid.column(0).transpose());
    }
    let ssr = sum_sq(&residuals);
    Ok(SegmentedFit {
        breaks: breaks.clone(),
        coefficients,
        residuals,
        ssr,
        ic: None,
        scaled: true,
        std_errors: None,
    })
}

/// `S_T + m * omega`.
pub fn information_criterion(fit: &SegmentedFit, omega: f64) -> f64 {
    fit.ssr + fit.breaks.len() as f64 * omega
}

/// Automatic penalty `c * sigma^2 * d * T^{3/4} * log T`.
///
/// `sigma^2` is the residual variance of the model with every candidate,
/// `SSR / (qT - n_coef)`, floored at `1e-10 * ||Y||^2 / (qT)` so exactly
/// fitting candidate sets still produce a positive penalty.
pub fn auto_omega(
    panel: &TimeSeriesPanel,
    candidates: &BreakSet,
    mask: Option<&SelectionMask>,
    constant: f64,
) -> Result<f64> {
    let z = build_scaled_regressors(panel, true).z;
    let mut eval = SsrEvaluator::new(&z, panel.y(), mask);
    auto_from(&mut eval, candidates.indices(), panel.group_dim(), constant)
}

fn auto_from(eval: &mut SsrEvaluator<'_>, candidates: &[usize], d: usize, constant: f64) -> Result<f64> {
    let per_break = eval.mask.map_or(d, |m| m.stacked_coords().len());
    let (ssr, n_coef) = match eval.ssr(candidates) {
        Some(v) => (v, d + candidates.len() * per_break),
        None => (eval.ssr(&[]).ok_or(Error::SingularRegime { regime: 0 })?, d),
    };
    let (q, t_len) = eval.y.shape();
    let n = (q * t_len) as f64;
    let dof = (n - n_coef as f64).max(1.0);
    let floor = 1e-10 * sum_sq(eval.y) / n;
    let sigma2 = (ssr / dof).max(floor).max(f64::MIN_POSITIVE);
    let t = t_len as f64;
    Ok(constant * sigma2 * d as f64 * t.powf(0.75) * t.ln())
}

/// One evaluated break set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IcStep {
    pub breaks: Vec<usize>,
    pub ssr: f64,
    pub ic: f64,
}

/// Outcome of the second step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub breaks: BreakSet,
    pub ic: f64,
    pub omega: f64,
    /// For backward elimination, the committed sets in order (starting with
    /// the full candidate set); for exhaustive search, the best set per size.
    pub trace: Vec<IcStep>,
}

/// Memoized SSR of break subsets drawn from a fixed candidate pool.
pub(crate) struct SsrEvaluator<'a> {
    z: &'a DMatrix<f64>,
    y: &'a DMatrix<f64>,
    mask: Option<&'a SelectionMask>,
    segments: HashMap<(usize, usize), Option<f64>>,
    prefix: Option<Prefix>,
}

/// Running cross products: row `t` holds the sums over observations
/// `0..t`.
struct Prefix {
    gram: Vec<f64>,
    cross: Vec<f64>,
    yy: Vec<f64>,
}

impl Prefix {
    fn new(z: &DMatrix<f64>, y: &DMatrix<f64>) -> Self {
        let (p, t_len) = z.shape();
        let q = y.nrows();
        let (pp, pq) = (p * p, p * q);
        let mut gram = vec![0.0; (t_len + 1) * pp];
        let mut cross = vec![0.0; (t_len + 1) * pq];
        let mut yy = vec![0.0; (t_len + 1) * q];
        for t in 0..t_len {
            let zc = z.column(t);
            let (g0, g1) = gram.split_at_mut((t + 1) * pp);
            let (prev, next) = (&g0[t * pp..], &mut g1[..pp]);
            for i in 0..p {
                for k in 0..=i {
                    next[i * p + k] = prev[i * p + k] + zc[i] * zc[k];
                }
            }
            for e in 0..q {
                let ye = y[(e, t)];
                for i in 0..p {
                    cross[(t + 1) * pq + e * p + i] = cross[t * pq + e * p + i] + zc[i] * ye;
                }
                yy[(t + 1) * q + e] = yy[t * q + e] + ye * ye;
            }
        }
        Self { gram, cross, yy }
    }
}

impl<'a> SsrEvaluator<'a> {
    pub(crate) fn new(z: &'a DMatrix<f64>, y: &'a DMatrix<f64>, mask: Option<&'a SelectionMask>) -> Self {
        Self {
            z,
            y,
            mask: mask.filter(|m| !m.is_full()),
            segments: HashMap::new(),
            prefix: None,
        }
    }

    fn segment(&mut self, start: usize, end: usize) -> Option<f64> {
        if let Some(v) = self.segments.get(&(start, end)) {
            return *v;
        }
        let n = end - start;
        let value = if n < self.z.nrows() {
            None
        } else {
            let (z, y) = (self.z, self.y);
            let prefix = self.prefix.get_or_insert_with(|| Prefix::new(z, y));
            let (p, q) = (z.nrows(), y.nrows());
            let diff = |v: &[f64], w: usize| -> Vec<f64> {
                (0..w).map(|i| v[end * w + i] - v[start * w + i]).collect()
            };
            let gram = diff(&prefix.gram, p * p);
            let cross = diff(&prefix.cross, p * q);
            let yy = diff(&prefix.yy, q);
            let ssr = segment_ssr_normal(&gram, &cross, &yy, p, &mut vec![0.0; p * p], &mut vec![0.0; p]);
            ssr.is_finite().then_some(ssr)
        };
        self.segments.insert((start, end), value);
        value
    }

    /// SSR for sorted 1-based breaks, `None` when some regime is too short
    /// or singular.
    pub(crate) fn ssr(&mut self, breaks: &[usize]) -> Option<f64> {
        let t_len = self.z.ncols();
        if let Some(mask) = self.mask {
            let set = BreakSet::new(breaks.to_vec(), t_len).ok()?;
            return segment_fit(self.z, self.y, &set, Some(mask)).ok().map(|f| f.ssr);
        }
        let mut start = 0;
        let mut total = 0.0;
        for &b in breaks.iter().chain(std::iter::once(&(t_len + 1))) {
            total += self.segment(start, b - 1)?;
            start = b - 1;
        }
        Some(total)
    }
}

fn resolve_omega(eval: &mut SsrEvaluator<'_>, candidates: &BreakSet, d: usize, config: &IcConfig) -> Result<f64> {
    config.validate()?;
    match config.omega {
        Omega::Fixed(v) => Ok(v),
        Omega::Auto(c) => auto_from(eval, candidates.indices(), d, c),
    }
}

/// Global IC minimizer over every subset of `candidates`, the empty set
/// included. Ties go to fewer breaks, then to the lexicographically
/// smallest set.
pub fn exhaustive_select(
    panel: &TimeSeriesPanel,
    candidates: &BreakSet,
    config: &IcConfig,
) -> Result<Selection> {
    exhaustive_select_masked(panel, candidates, config, None)
}

pub fn exhaustive_select_masked(
    panel: &TimeSeriesPanel,
    candidates: &BreakSet,
    config: &IcConfig,
    mask: Option<&SelectionMask>,
) -> Result<Selection> {
    let k = candidates.len();
    if k > config.exhaustive_threshold {
        return Err(Error::TooManyCandidates {
            count: k,
            threshold: config.exhaustive_threshold,
        });
    }
    check_candidates(panel, candidates)?;
    let z = build_scaled_regressors(panel, true).z;
    let mut eval = SsrEvaluator::new(&z, panel.y(), mask);
    let omega = resolve_omega(&mut eval, candidates, panel.group_dim(), config)?;
    let pool = candidates.indices();
    let mut best: Option<IcStep> = None;
    let mut trace = Vec::new();
    for size in 0..=k {
        let mut best_size: Option<IcStep> = None;
        for combo in Combinations::new(k, size) {
            let set: Vec<usize> = combo.iter().map(|&i| pool[i]).collect();
            let Some(ssr) = eval.ssr(&set) else { continue };
            let ic = ssr + size as f64 * omega;
            if best_size.as_ref().is_none_or(|b| ic < b.ic) {
                best_size = Some(IcStep { breaks: set, ssr, ic });
            }
        }
        if let Some(step) = best_size {
            if best
                .as_ref()
                .is_none_or(|b| step.ic < b.ic - IC_TIE_TOL * b.ic.abs())
            {
                best = Some(step.clone());
            }
            trace.push(step);
        }
    }
    let best = best.ok_or_else(|| Error::Infeasible("no admissible break subset".into()))?;
    Ok(Selection {
        breaks: BreakSet::new(best.breaks.clone(), panel.t_len())?,
        ic: best.ic,
        omega,
        trace,
    })
}

/// Repeatedly removes the candidate whose deletion lowers the criterion the
/// most, until no removal helps.
pub fn backward_eliminate(
    panel: &TimeSeriesPanel,
    candidates: &BreakSet,
    config: &IcConfig,
) -> Result<Selection> {
    backward_eliminate_masked(panel, candidates, config, None)
}

pub fn backward_eliminate_masked(
    panel: &TimeSeriesPanel,
    candidates: &BreakSet,
    config: &IcConfig,
    mask: Option<&SelectionMask>,
) -> Result<Selection> {
    check_candidates(panel, candidates)?;
    let z = build_scaled_regressors(panel, true).z;
    let mut eval = SsrEvaluator::new(&z, panel.y(), mask);
    let omega = resolve_omega(&mut eval, candidates, panel.group_dim(), config)?;
    backward_from(&mut eval, candidates.indices().to_vec(), omega, panel.t_len())
}

pub(crate) fn backward_from(
    eval: &mut SsrEvaluator<'_>,
    start: Vec<usize>,
    omega: f64,
    t_len: usize,
) -> Result<Selection> {
    let ic_of = |eval: &mut SsrEvaluator<'_>, set: &[usize]| {
        eval.ssr(set).map(|s| (s, s + set.len() as f64 * omega))
    };
    let mut current = start;
    let (mut ssr, mut ic) = ic_of(eval, &current).unwrap_or((f64::INFINITY, f64::INFINITY));
    let mut trace = vec![IcStep {
        breaks: current.clone(),
        ssr,
        ic,
    }];
    while !current.is_empty() {
        let mut best: Option<(usize, f64, f64)> = None;
        for pos in 0..current.len() {
            let mut set = current.clone();
            set.remove(pos);
            if let Some((s, v)) = ic_of(eval, &set) {
                if best.is_none_or(|(_, _, b)| v < b) {
                    best = Some((pos, s, v));
                }
            }
        }
        let Some((pos, s, v)) = best else { break };
        let improves = if ic.is_finite() {
            v < ic - IC_TIE_TOL * ic.abs()
        } else {
            true
        };
        if !improves {
            break;
        }
        current.remove(pos);
        ssr = s;
        ic = v;
        trace.push(IcStep {
            breaks: current.clone(),
            ssr,
            ic,
        });
    }
    if !ic.is_finite() {
        return Err(Error::Infeasible("no admissible break subset".into()));
    }
    Ok(Selection {
        breaks: BreakSet::new(current, t_len)?,
        ic,
        omega,
        trace,
    })
}

/// Moves each break, one at a time, to the SSR-minimizing position within
/// `radius - 1` of where it stands, keeping every regime at least `radius`
/// observations long. Sweeps repeat until no break moves.
pub fn refine_breaks(
    panel: &TimeSeriesPanel,
    breaks: &BreakSet,
    radius: usize,
    mask: Option<&SelectionMask>,
) -> Result<BreakSet> {
    check_candidates(panel, breaks)?;
    if radius == 0 {
        return Err(Error::InvalidConfig("refinement radius must be positive".into()));
    }
    let z = build_scaled_regressors(panel, true).z;
    let mut eval = SsrEvaluator::new(&z, panel.y(), mask);
    let refined = refine_with(&mut eval, breaks.indices().to_vec(), radius);
    BreakSet::new(refined, panel.t_len())
}

pub(crate) fn refine_with(eval: &mut SsrEvaluator<'_>, mut breaks: Vec<usize>, radius: usize) -> Vec<usize> {
    const MAX_SWEEPS: usize = 50;
    let t_len = eval.z.ncols();
    let Some(mut best) = eval.ssr(&breaks) else {
        return breaks;
    };
    for _ in 0..MAX_SWEEPS {
        let mut moved = false;
        for i in 0..breaks.len() {
            // 1-based break b starts a regime at row b - 1; regimes need
            // at least `radius` rows on both sides.
            let left = if i == 0 { radius + 1 } else { breaks[i - 1] + radius };
            let right = if i + 1 == breaks.len() {
                (t_len + 1).saturating_sub(radius)
            } else {
                breaks[i + 1].saturating_sub(radius)
            };
            let b = breaks[i];
            let lo = left.max(b.saturating_sub(radius - 1));
            let hi = right.min(b + radius - 1);
            let mut trial = breaks.clone();
            for j in lo..=hi {
                if j == b {
                    continue;
                }
                trial[i] = j;
                if let Some(v) = eval.ssr(&trial) {
                    if v < best - 1e-12 * best.abs() {
                        best = v;
                        breaks[i] = j;
                        moved = true;
                    }
                }
            }
        }
        if !moved {
            break;
        }
    }
    breaks
}

/// Backward elimination in which every set is refined with
/// [`refine_breaks`] before its criterion is compared, so a removal may let
/// the remaining breaks move into the gap.
pub(crate) fn refined_backward(
    eval: &mut SsrEvaluator<'_>,
    start: Vec<usize>,
    omega: f64,
    radius: usize,
    t_len: usize,
) -> Result<Selection> {
    let mut current = refine_with(eval, start, radius);
    let ic_of = |eval: &mut SsrEvaluator<'_>, set: &[usize]| {
        eval.ssr(set).map(|s| (s, s + set.len() as f64 * omega))
    };
    let (mut ssr, mut ic) = ic_of(eval, &current).ok_or_else(|| Error::Infeasible("no admissible break subset".into()))?;
    let mut trace = vec![IcStep {
        breaks: current.clone(),
        ssr,
        ic,
    }];
    while !current.is_empty() {
        let mut best: Option<(Vec<usize>, f64, f64)> = None;
        for pos in 0..current.len() {
            let mut set = current.clone();
            set.remove(pos);
            let set = refine_with(eval, set, radius);
            if let Some((s, v)) = ic_of(eval, &set) {
                if best.as_ref().is_none_or(|(_, _, b)| v < *b) {
                    best = Some((set, s, v));
                }
            }
        }
        let Some((set, s, v)) = best else { break };
        if v >= ic - IC_TIE_TOL * ic.abs() {
            break;
        }
        current = set;
        ssr = s;
        ic = v;
        trace.push(IcStep {
            breaks: current.clone(),
            ssr,
            ic,
        });
    }
    Ok(Selection {
        breaks: BreakSet::new(current, t_len)?,
        ic,
        omega,
        trace,
    })
}

fn check_candidates(panel: &TimeSeriesPanel, candidates: &BreakSet) -> Result<()> {
    if candidates.t_len() != panel.t_len() {
        return Err(Error::InvalidBreaks(format!(
            "candidate set is for T = {}, panel has T = {}",
            candidates.t_len(),
            panel.t_len()
        )));
    }
    Ok(())
}

/// Lexicographic `k`-subsets of `0..n`.
struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            current: (k <= n).then(|| (0..k).collect()),
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

/// Per-regime backward elimination of regressors by BIC, applied jointly
/// across equations. The intercept is never removed, and at least one
/// regressor always survives.
pub fn regime_variable_bic(panel: &TimeSeriesPanel, breaks: &BreakSet) -> Result<Vec<SelectionMask>> {
    let z = build_scaled_regressors(panel, true).z;
    let layout = panel.layout();
    let (p, q) = (layout.len(), panel.q());
    let keep_always = layout.intercept_row();
    let mut out = Vec::new();
    for (k, r) in breaks.regimes().iter().enumerate() {
        let n = r.len();
        if n <= p {
            return Err(Error::RegimeTooShort {
                regime: k,
                len: n,
                required: p + 1,
            });
        }
        let resp = panel.y().columns(r.start, n).transpose();
        let nq = (n * q) as f64;
        let bic = |kept: &[usize]| -> Option<f64> {
            let design = DMatrix::from_fn(n, kept.len(), |t, c| z[(kept[c], r.start + t)]);
            let fit = ols(&design, &resp)?;
            let ssr = sum_sq(&fit.resid).max(f64::MIN_POSITIVE);
            Some(nq * (ssr / nq).ln() + (kept.len() * q) as f64 * nq.ln())
        };
        let mut kept: Vec<usize> = (0..p).collect();
        let mut current = bic(&kept).ok_or(Error::SingularRegime { regime: k })?;
        loop {
            if kept.len() <= 1 {
                break;
            }
            let mut best: Option<(usize, f64)> = None;
            for (pos, &var) in kept.iter().enumerate() {
                if Some(var) == keep_always {
                    continue;
                }
                let trial: Vec<usize> = kept.iter().copied().filter(|&v| v != var).collect();
                if let Some(v) = bic(&trial) {
                    if best.is_none_or(|(_, b)| v < b) {
                        best = Some((pos, v));
                    }
                }
            }
            match best {
                Some((pos, v)) if v < current => {
                    kept.remove(pos);
                    current = v;
                }
                _ => break,
            }
        }
        let row: Vec<bool> = (0..p).map(|i| kept.contains(&i)).collect();
        let mask: Vec<bool> = (0..q).flat_map(|_| row.iter().copied()).collect();
        out.push(SelectionMask::new(q, p, mask)?);
    }
    Ok(out)
}
