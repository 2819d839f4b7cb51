//! First-step estimator: group LASSO over time-indexed break groups.
//!
//! The objective is
//!
//! ```text
//! Q(theta) = (1/T) || Y - Z theta ||^2 + lambda * sum_i w_i || theta_i ||
//! ```
//!
//! where group `i` carries the `d = q * p` coefficient changes taking effect
//! at observation `i`. Every break group has weight one; the baseline group
//! has weight one or zero depending on [`PathConfig::penalize_baseline`].
//!
//! The solution path is traced in decreasing `lambda` with a modified group
//! LARS scheme:
//!
//! * a predictor moves the active groups along the tangent of the optimality
//!   system (for a freshly entered group this is its correlation direction,
//!   i.e. the equiangular LARS step) and extrapolates when the next inactive
//!   group reaches the boundary `||c_j|| = T lambda / 2`;
//! * a Newton corrector restores exact optimality on the active groups, and
//!   a safeguarded secant search pins the knot where the entry happens;
//! * on entry, every group closer than `min_distance` to the entrant is
//!   excluded from later entry, and the path stops once `M` break groups
//!   are active.
//!
//! Every knot recorded in the trace is therefore an exact group LASSO
//! solution on the groups that are not excluded, which [`kkt_verify`] checks.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::design::{suffix_correlations, SuffixCache};
use crate::error::{Error, Result};
use crate::linalg::cholesky_solve;
use crate::model::{BreakSet, SelectionMask, TimeSeriesPanel};

/// Knots are accepted once the entering group is within this relative
/// distance of the boundary.
const KNOT_TOL: f64 = 1e-8;
/// Relative stationarity tolerance of the restricted solver.
const SOLVE_TOL: f64 = 1e-12;
const MAX_SOLVE_ITERS: usize = 500;
const MAX_KNOT_SEARCH: usize = 200;
/// The path stops once the penalty level falls below this fraction of its
/// starting value.
const RELATIVE_FLOOR: f64 = 1e-10;

/// Settings for [`group_lars_path`].
#[derive(Debug, Clone)]
pub struct PathConfig {
    /// Maximum number of break candidates `M`.
    pub max_breaks: usize,
    /// Minimum distance between active groups, and minimum regime length.
    pub min_distance: usize,
    pub mask: Option<SelectionMask>,
    /// Whether the baseline group carries the group penalty. When false the
    /// baseline coefficients are profiled out by least squares.
    pub penalize_baseline: bool,
}

impl PathConfig {
    pub fn new(max_breaks: usize, min_distance: usize) -> Self {
        Self {
            max_breaks,
            min_distance,
            mask: None,
            penalize_baseline: false,
        }
    }

    pub fn with_mask(mut self, mask: SelectionMask) -> Self {
        self.mask = Some(mask);
        self
    }

    pub fn with_penalized_baseline(mut self, penalize: bool) -> Self {
        self.penalize_baseline = penalize;
        self
    }
}

/// Default minimum distance: one more than the stacked coefficient count, so
/// every regime identifies its own least-squares fit.
pub fn default_min_distance(panel: &TimeSeriesPanel) -> usize {
    panel.group_dim() + 1
}

/// One point of the solution path where a group entered.
#[derive(Debug, Clone, Serialize)]
pub struct Knot {
    pub lambda: f64,
    /// 1-based group indices of the active set, ascending.
    pub groups: Vec<usize>,
    /// Stacked coefficients of each active group.
    pub theta: Vec<Vec<f64>>,
    /// 1-based index of the group that entered at this knot.
    pub entered: usize,
    /// Groups whose coefficients reached zero since the previous knot.
    pub dropped: Vec<usize>,
    pub ssr: f64,
}

/// Snapshot of the path at its last knot.
#[derive(Debug, Clone)]
pub struct PathState {
    /// 1-based active groups, ascending (baseline group 1 included once entered).
    pub active: Vec<usize>,
    /// `T x d` coefficient changes, zero outside `active`.
    pub theta: DMatrix<f64>,
    pub residual: DMatrix<f64>,
    pub lambda_trace: Vec<f64>,
    /// Groups barred from entry by the minimum-distance rule.
    pub excluded: Vec<usize>,
}

/// Output of the first step.
#[derive(Debug, Clone)]
pub struct FirstStepResult {
    /// Active break groups (baseline excluded).
    pub candidates: BreakSet,
    pub theta_hat: DMatrix<f64>,
    pub lambda_trace: Vec<f64>,
    pub kkt_report: KktReport,
    pub knots: Vec<Knot>,
    pub state: PathState,
    /// True when the path ended before `M` candidates were found.
    pub stopped_early: bool,
}

impl FirstStepResult {
    /// Dense `T x d` coefficients at knot `k`.
    pub fn theta_at(&self, k: usize) -> DMatrix<f64> {
        let knot = &self.knots[k];
        let mut theta = DMatrix::zeros(self.theta_hat.nrows(), self.theta_hat.ncols());
        for (g, v) in knot.groups.iter().zip(&knot.theta) {
            for (c, x) in v.iter().enumerate() {
                theta[(g - 1, c)] = *x;
            }
        }
        theta
    }
}

/// Per-group optimality report.
#[derive(Debug, Clone, Serialize)]
pub struct KktReport {
    pub lambda: f64,
    /// For inactive groups `(||c_j|| - T lambda / 2) / (T lambda / 2)`; for
    /// active groups `||c_j - (T lambda / 2) theta_j / ||theta_j|| || / (T lambda / 2)`.
    /// An unpenalized baseline reports `||c_1|| / (T lambda / 2)`.
    pub slack: Vec<f64>,
    pub active: Vec<bool>,
    /// Groups left out of the check (blocked by the minimum-distance rule).
    pub skipped: Vec<bool>,
    pub max_inactive_slack: f64,
    pub max_alignment_error: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Options of [`kkt_verify_with`].
#[derive(Debug, Clone, Default)]
pub struct KktOptions {
    pub mask: Option<SelectionMask>,
    /// 1-based groups constrained to zero, left out of the check.
    pub skip: Vec<usize>,
    /// Whether group 1 carries the penalty.
    pub penalize_baseline: bool,
}

impl KktOptions {
    pub fn penalized() -> Self {
        Self {
            penalize_baseline: true,
            ..Self::default()
        }
    }
}

/// Checks the group LASSO optimality conditions of `theta` (`T x d`) at
/// `lambda`, every group penalized, with violations measured relative to
/// `T lambda / 2`.
pub fn kkt_verify(
    panel: &TimeSeriesPanel,
    theta: &DMatrix<f64>,
    lambda: f64,
    tol: f64,
) -> Result<KktReport> {
    kkt_verify_with(panel, theta, lambda, tol, &KktOptions::penalized())
}

pub fn kkt_verify_with(
    panel: &TimeSeriesPanel,
    theta: &DMatrix<f64>,
    lambda: f64,
    tol: f64,
    options: &KktOptions,
) -> Result<KktReport> {
    let cache = SuffixCache::new(panel, true);
    kkt_from_cache(&cache, panel.y(), theta, lambda, tol, options)
}

fn kkt_from_cache(
    cache: &SuffixCache,
    y: &DMatrix<f64>,
    theta: &DMatrix<f64>,
    lambda: f64,
    tol: f64,
    options: &KktOptions,
) -> Result<KktReport> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig(format!("lambda must be positive, got {lambda}")));
    }
    let (t_len, d) = (cache.t_len(), cache.group_dim());
    if theta.nrows() != t_len || theta.ncols() != d {
        return Err(Error::DimensionMismatch {
            matrix: "theta",
            expected: format!("{t_len}x{d}"),
            found: format!("{}x{}", theta.nrows(), theta.ncols()),
        });
    }
    let residual = residual_from_dense(cache, y, theta);
    let corr = cache.group_correlations(&residual, options.mask.as_ref())?;
    let kappa = t_len as f64 * lambda / 2.0;
    let mut skipped = vec![false; t_len];
    for &g in &options.skip {
        if (1..=t_len).contains(&g) {
            skipped[g - 1] = true;
        }
    }
    let mut slack = vec![0.0; t_len];
    let mut active = vec![false; t_len];
    let (mut max_inactive, mut max_align) = (f64::NEG_INFINITY, 0.0f64);
    for j in 0..t_len {
        let th = theta.row(j);
        let c = corr.row(j);
        let norm = th.norm();
        if j == 0 && !options.penalize_baseline {
            active[0] = true;
            slack[0] = c.norm() / kappa;
            max_align = max_align.max(slack[0]);
        } else if norm > 0.0 {
            active[j] = true;
            let err = (c - th * (kappa / norm)).norm() / kappa;
            slack[j] = err;
            if !skipped[j] {
                max_align = max_align.max(err);
            }
        } else {
            let s = (c.norm() - kappa) / kappa;
            slack[j] = s;
            if !skipped[j] {
                max_inactive = max_inactive.max(s);
            }
        }
    }
    let passed = max_inactive <= tol && max_align <= tol;
    Ok(KktReport {
        lambda,
        slack,
        active,
        skipped,
        max_inactive_slack: max_inactive,
        max_alignment_error: max_align,
        tol,
        passed,
    })
}

fn residual_from_dense(cache: &SuffixCache, y: &DMatrix<f64>, theta: &DMatrix<f64>) -> DMatrix<f64> {
    let (q, p) = (cache.q(), cache.p());
    let z = cache.z();
    let mut coef = vec![0.0; q * p];
    let mut resid = y.clone();
    for t in 0..cache.t_len() {
        for (k, c) in coef.iter_mut().enumerate() {
            *c += theta[(t, k)];
        }
        let zc = z.column(t);
        for e in 0..q {
            let fit: f64 = (0..p).map(|i| coef[e * p + i] * zc[i]).sum();
            resid[(e, t)] -= fit;
        }
    }
    resid
}

/// Traces the group LASSO path until `M` break groups are active.
pub fn group_lars_path(panel: &TimeSeriesPanel, config: &PathConfig) -> Result<FirstStepResult> {
    let cache = SuffixCache::new(panel, true);
    group_lars_path_cached(&cache, panel.y(), config)
}

pub(crate) fn group_lars_path_cached(
    cache: &SuffixCache,
    y: &DMatrix<f64>,
    config: &PathConfig,
) -> Result<FirstStepResult> {
    let t_len = cache.t_len();
    let (m, h) = (config.max_breaks, config.min_distance);
    if m == 0 || h == 0 {
        return Err(Error::InvalidConfig(
            "max_breaks and min_distance must be at least 1".into(),
        ));
    }
    if (m + 1) * h > t_len {
        return Err(Error::Infeasible(format!(
            "T = {t_len} cannot hold {m} breaks with minimum distance {h}"
        )));
    }
    if let Some(mask) = &config.mask {
        mask.check_shape(cache.q(), cache.p())?;
    }
    Path::new(cache, y, config).run()
}

/// Solves a symmetric positive (semi)definite system, falling back to a
/// pivoted LU factorization when Cholesky breaks down on rounding.
fn solve_sym(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(x) = cholesky_solve(&a, b) {
        if x.iter().all(|v| v.is_finite()) {
            return Some(x);
        }
    }
    let x = a.full_piv_lu().solve(b)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[derive(Debug, Clone)]
struct Group {
    /// 0-based: the group acts on rows `g..T`.
    g: usize,
    coords: Vec<usize>,
    weight: f64,
}

/// Restricted quadratic `theta' H theta - 2 b' theta` over a group list.
struct System {
    groups: Vec<Group>,
    offsets: Vec<usize>,
    h: DMatrix<f64>,
    b: DVector<f64>,
}

impl System {
    fn n(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    fn range(&self, k: usize) -> std::ops::Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    fn objective(&self, theta: &DVector<f64>, kappa: f64) -> f64 {
        let quad = theta.dot(&(&self.h * theta)) - 2.0 * self.b.dot(theta);
        let pen: f64 = (0..self.groups.len())
            .map(|k| self.groups[k].weight * theta.rows_range(self.range(k)).norm())
            .sum();
        quad + 2.0 * kappa * pen
    }
}

struct Path<'a> {
    cache: &'a SuffixCache,
    y: &'a DMatrix<f64>,
    config: &'a PathConfig,
    t_len: usize,
    d: usize,
    full_coords: Vec<usize>,
    break_coords: Vec<usize>,
    /// `T x d` correlations of `Y` itself.
    ycorr: Vec<f64>,
}

impl<'a> Path<'a> {
    fn new(cache: &'a SuffixCache, y: &'a DMatrix<f64>, config: &'a PathConfig) -> Self {
        let (t_len, d) = (cache.t_len(), cache.group_dim());
        let full_coords: Vec<usize> = (0..d).collect();
        let break_coords = config
            .mask
            .as_ref()
            .map(|m| m.stacked_coords())
            .unwrap_or_else(|| full_coords.clone());
        let mut ycorr = vec![0.0; t_len * d];
        suffix_correlations(cache.z(), y, &mut ycorr);
        Self {
            cache,
            y,
            config,
            t_len,
            d,
            full_coords,
            break_coords,
            ycorr,
        }
    }

    fn coords(&self, g: usize) -> &[usize] {
        if g == 0 {
            &self.full_coords
        } else {
            &self.break_coords
        }
    }

    fn group(&self, g: usize) -> Group {
        Group {
            g,
            coords: self.coords(g).to_vec(),
            weight: if g == 0 && !self.config.penalize_baseline {
                0.0
            } else {
                1.0
            },
        }
    }

    fn corr_norm(&self, corr: &[f64], g: usize) -> f64 {
        let row = &corr[g * self.d..(g + 1) * self.d];
        self.coords(g).iter().map(|&k| row[k] * row[k]).sum::<f64>().sqrt()
    }

    /// Whether group `g` may enter given the current system groups.
    fn allowed(&self, g: usize, system: &[usize]) -> bool {
        if system.contains(&g) {
            return false;
        }
        if g == 0 {
            return true;
        }
        let h = self.config.min_distance;
        if g < h || g + h > self.t_len {
            return false;
        }
        system.iter().all(|&a| a == 0 || a.abs_diff(g) >= h)
    }

    fn build_system(&self, groups: Vec<Group>) -> System {
        let p = self.cache.p();
        let mut offsets = vec![0];
        for grp in &groups {
            offsets.push(offsets.last().unwrap() + grp.coords.len());
        }
        let n = *offsets.last().unwrap();
        let mut h = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for (ka, ga) in groups.iter().enumerate() {
            let oa = offsets[ka];
            for (ia, &ca) in ga.coords.iter().enumerate() {
                b[oa + ia] = self.ycorr[ga.g * self.d + ca];
            }
            for (kb, gb) in groups.iter().enumerate() {
                let ob = offsets[kb];
                let gram = self.cache.gram_slice(ga.g.max(gb.g));
                for (ia, &ca) in ga.coords.iter().enumerate() {
                    let (ea, ra) = (ca / p, ca % p);
                    for (ib, &cb) in gb.coords.iter().enumerate() {
                        let (eb, rb) = (cb / p, cb % p);
                        if ea == eb {
                            h[(oa + ia, ob + ib)] = gram[ra * p + rb];
                        }
                    }
                }
            }
        }
        System {
            groups,
            offsets,
            h,
            b,
        }
    }

    /// Residual `Y - Z theta` for system coefficients.
    fn residual(&self, sys: &System, theta: &DVector<f64>) -> DMatrix<f64> {
        self.residual_with(self.y, sys, theta)
    }

    /// `base - Z theta`.
    fn residual_with(&self, base: &DMatrix<f64>, sys: &System, theta: &DVector<f64>) -> DMatrix<f64> {
        let mut dense_coef = vec![0.0; self.d];
        let mut order: Vec<usize> = (0..sys.groups.len()).collect();
        order.sort_by_key(|&k| sys.groups[k].g);
        let mut resid = base.clone();
        let (q, p) = (self.cache.q(), self.cache.p());
        let zs = self.cache.z().as_slice();
        let rs = resid.as_mut_slice();
        let mut next = 0;
        for t in 0..self.t_len {
            while next < order.len() && sys.groups[order[next]].g == t {
                let k = order[next];
                let off = sys.offsets[k];
                for (i, &c) in sys.groups[k].coords.iter().enumerate() {
                    dense_coef[c] += theta[off + i];
                }
                next += 1;
            }
                let zc = &zs[t * p..(t + 1) * p];
            let out = &mut rs[t * q..(t + 1) * q];
            for (e, r) in out.iter_mut().enumerate() {
                let row = &dense_coef[e * p..(e + 1) * p];
                *r -= row.iter().zip(zc).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        resid
    }

    fn correlations(&self, resid: &DMatrix<f64>) -> Vec<f64> {
        let mut corr = vec![0.0; self.t_len * self.d];
        suffix_correlations(self.cache.z(), resid, &mut corr);
        corr
    }

    /// Largest boundary excess over groups that may still enter, and its
    /// arg max (ties to the smallest index).
    fn entry_excess(&self, corr: &[f64], kappa: f64, system: &[usize]) -> Option<(usize, f64)> {
        self.entry_excess_in(corr, kappa, &self.allowed_mask(system))
    }

    fn allowed_mask(&self, system: &[usize]) -> Vec<bool> {
        (0..self.t_len).map(|j| self.allowed(j, system)).collect()
    }

    fn entry_excess_in(&self, corr: &[f64], kappa: f64, allowed: &[bool]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.t_len {
            if !allowed[j] {
                continue;
            }
            let excess = self.corr_norm(corr, j) - kappa;
            match best {
                Some((_, b)) if excess <= b + 1e-13 * kappa.max(f64::MIN_POSITIVE) => {}
                _ => best = Some((j, excess)),
            }
        }
        best
    }

    fn knot_record(&self, sys: &System, theta: &DVector<f64>, kappa: f64, entered: usize, dropped: Vec<usize>) -> Knot {
        let resid = self.residual(sys, theta);
        Knot {
            lambda: 2.0 * kappa / self.t_len as f64,
            groups: sys.groups.iter().map(|g| g.g + 1).collect(),
            theta: (0..sys.groups.len())
                .map(|k| self.dense_group(sys, theta, k))
                .collect(),
            entered: entered + 1,
            dropped,
            ssr: resid.iter().map(|v| v * v).sum(),
        }
    }

    /// System, coefficients and penalty level at the first knot.
    fn start(&self) -> Result<(System, DVector<f64>, f64, usize)> {
        if self.config.penalize_baseline {
            let (first, kappa0) = self
                .entry_excess(&self.ycorr, 0.0, &[])
                .ok_or_else(|| Error::Infeasible("no admissible group".into()))?;
            let sys = self.build_system(vec![self.group(first)]);
            let theta = DVector::zeros(sys.n());
            return Ok((sys, theta, kappa0, first));
        }
        // Baseline fitted by least squares; the first break group enters at
        // the largest correlation of the baseline residual.
        let base = self.build_system(vec![self.group(0)]);
        let theta0 = solve_sym(base.h.clone(), &base.b).ok_or(Error::RankDeficient { dim: base.n() })?;
        let corr = self.correlations(&self.residual(&base, &theta0));
        let (first, kappa0) = self
            .entry_excess(&corr, 0.0, &[0])
            .ok_or_else(|| Error::Infeasible("no admissible break group".into()))?;
        let sys = self.build_system(vec![self.group(0), self.group(first)]);
        let mut theta = DVector::zeros(sys.n());
        theta.rows_range_mut(sys.range(0)).copy_from(&theta0);
        Ok((sys, theta, kappa0, first))
    }

    fn run(&self) -> Result<FirstStepResult> {
        let m = self.config.max_breaks;
        let t = self.t_len as f64;
        let (mut sys, mut theta, mut kappa, first) = self.start()?;
        let mut knots = vec![self.knot_record(&sys, &theta, kappa, first, Vec::new())];
        let mut stopped_early = kappa <= 0.0;
        let floor = RELATIVE_FLOOR * kappa;

        while !stopped_early && active_breaks(&sys) < m {
            match self.next_knot(&sys, &theta, kappa, floor)? {
                None => {
                    stopped_early = true;
                }
                Some((new_kappa, new_theta, entrant)) => {
                    // Drop collapsed groups, add the entrant, rebuild.
                    let mut groups = Vec::new();
                    let mut values: Vec<Vec<f64>> = Vec::new();
                    let mut dropped = Vec::new();
                    for (k, grp) in sys.groups.iter().enumerate() {
                        let v = new_theta.rows_range(sys.range(k));
                        if grp.weight == 0.0 || v.norm() > 0.0 {
                            groups.push(grp.clone());
                            values.push(v.iter().copied().collect());
                        } else {
                            dropped.push(grp.g + 1);
                        }
                    }
                    let ent = self.group(entrant);
                    values.push(vec![0.0; ent.coords.len()]);
                    groups.push(ent);
                    let mut order: Vec<usize> = (0..groups.len()).collect();
                    order.sort_by_key(|&k| groups[k].g);
                    let groups: Vec<Group> = order.iter().map(|&k| groups[k].clone()).collect();
                    let values: Vec<Vec<f64>> = order.iter().map(|&k| values[k].clone()).collect();
                    sys = self.build_system(groups);
                    theta = DVector::from_iterator(sys.n(), values.iter().flatten().copied());
                    kappa = new_kappa;
                    knots.push(self.knot_record(&sys, &theta, kappa, entrant, dropped));
                }
            }
        }

        let theta_dense = self.dense_theta(&sys, &theta);
        let residual = self.residual(&sys, &theta);
        let active_idx: Vec<usize> = sys.groups.iter().map(|g| g.g).collect();
        let mut excluded = Vec::new();
        let mut blocked = Vec::new();
        for j in 0..self.t_len {
            if active_idx.contains(&j) {
                continue;
            }
            if !self.allowed(j, &active_idx) {
                blocked.push(j + 1);
                let near = active_idx
                    .iter()
                    .any(|&a| a != 0 && a.abs_diff(j) < self.config.min_distance);
                if near {
                    excluded.push(j + 1);
                }
            }
        }
        let lambda = 2.0 * kappa / t;
        let options = KktOptions {
            mask: self.config.mask.clone(),
            skip: blocked,
            penalize_baseline: self.config.penalize_baseline,
        };
        let kkt_report = if lambda > 0.0 {
            kkt_from_cache(self.cache, self.y, &theta_dense, lambda, 1e-6, &options)?
        } else {
            KktReport {
                lambda,
                slack: vec![0.0; self.t_len],
                active: vec![false; self.t_len],
                skipped: vec![false; self.t_len],
                max_inactive_slack: 0.0,
                max_alignment_error: 0.0,
                tol: 1e-6,
                passed: true,
            }
        };
        let breaks: Vec<usize> = active_idx.iter().filter(|&&g| g > 0).map(|&g| g + 1).collect();
        let candidates = BreakSet::from_unsorted(breaks, self.t_len)?;
        let lambda_trace: Vec<f64> = knots.iter().map(|k| k.lambda).collect();
        Ok(FirstStepResult {
            candidates,
            theta_hat: theta_dense.clone(),
            lambda_trace: lambda_trace.clone(),
            kkt_report,
            knots,
            state: PathState {
                active: active_idx.iter().map(|g| g + 1).collect(),
                theta: theta_dense,
                residual,
                lambda_trace,
                excluded,
            },
            stopped_early,
        })
    }

    fn dense_group(&self, sys: &System, theta: &DVector<f64>, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for (i, &c) in sys.groups[k].coords.iter().enumerate() {
            out[c] = theta[sys.offsets[k] + i];
        }
        out
    }

    fn dense_theta(&self, sys: &System, theta: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.t_len, self.d);
        for k in 0..sys.groups.len() {
            let g = sys.groups[k].g;
            for (c, v) in self.dense_group(sys, theta, k).into_iter().enumerate() {
                out[(g, c)] = v;
            }
        }
        out
    }

    /// Finds the next knot below `kappa`. Returns `None` when the penalty
    /// reaches the floor before another group enters.
    fn next_knot(
        &self,
        sys: &System,
        theta_knot: &DVector<f64>,
        kappa_knot: f64,
        floor: f64,
    ) -> Result<Option<(f64, DVector<f64>, usize)>> {
        let members: Vec<usize> = sys.groups.iter().map(|g| g.g).collect();
        let allowed = self.allowed_mask(&members);
        let excess_at = |theta: &DVector<f64>, kappa: f64| -> (Option<(usize, f64)>, Vec<f64>) {
            let resid = self.residual(sys, theta);
            let corr = self.correlations(&resid);
            (self.entry_excess_in(&corr, kappa, &allowed), corr)
        };

        // Upper end of the bracket: last point known to have no violation.
        let (mut hi_kappa, mut hi_theta) = (kappa_knot, theta_knot.clone());
        let (hi_excess, mut hi_corr) = excess_at(&hi_theta, hi_kappa);
        if hi_excess.is_none() {
            return Ok(None);
        }
        let mut hi_phi = hi_excess.map(|e| e.1).unwrap_or(f64::NEG_INFINITY).min(0.0);
        let mut lo: Option<(f64, f64, DVector<f64>)> = None;
        let mut side = 0i8;

        for _ in 0..MAX_KNOT_SEARCH {
            // Propose the next trial penalty level.
            let (trial, warm) = match &lo {
                None => {
                    if hi_kappa <= floor {
                        return Ok(None);
                    }
                    let (delta, rate) = self.predict(sys, &hi_theta, hi_kappa, &hi_corr, &allowed)?;
                    let step = match delta {
                        Some(dl) if dl < hi_kappa => dl,
                        _ => 0.5 * hi_kappa,
                    };
                    let trial = (hi_kappa - step).max(0.5 * floor);
                    (trial, &hi_theta - &rate * (hi_kappa - trial))
                }
                Some((lo_kappa, lo_phi, lo_theta)) => {
                    // Illinois-weighted regula falsi in kappa.
                    let (fl, fh) = (*lo_phi, hi_phi);
                    let mut trial = if fl != fh {
                        hi_kappa - fh * (hi_kappa - lo_kappa) / (fh - fl)
                    } else {
                        0.5 * (hi_kappa + lo_kappa)
                    };
                    let width = hi_kappa - lo_kappa;
                    if !(trial > lo_kappa + 1e-3 * width && trial < hi_kappa - 1e-3 * width) {
                        trial = 0.5 * (hi_kappa + lo_kappa);
                    }
                    let frac = (hi_kappa - trial) / width;
                    (trial, &hi_theta + (lo_theta - &hi_theta) * frac)
                }
            };
            let mut theta = warm;
            sanitize_warm_start(sys, &mut theta, &hi_theta);
            self.solve(sys, &mut theta, trial)?;
            let (excess, corr) = excess_at(&theta, trial);
            let Some((entrant, phi)) = excess else {
                return Ok(None);
            };
            let converged = phi.abs() <= KNOT_TOL * trial
                || lo
                    .as_ref()
                    .is_some_and(|(lk, _, _)| (hi_kappa - lk) <= 4.0 * f64::EPSILON * hi_kappa);
            if converged {
                return Ok(Some((trial, theta, entrant)));
            }
            if phi > 0.0 {
                // Two updates in a row on the same side: halve the value
                // kept at the other end.
                if side == 1 {
                    hi_phi *= 0.5;
                }
                lo = Some((trial, phi, theta));
                side = 1;
            } else {
                if side == -1 {
                    if let Some(l) = lo.as_mut() {
                        l.1 *= 0.5;
                    }
                }
                if trial <= floor {
                    return Ok(None);
                }
                hi_kappa = trial;
                hi_theta = theta;
                hi_phi = phi;
                hi_corr = corr;
                side = -1;
            }
        }
        Err(Error::Infeasible(
            "group LASSO path: knot search did not converge".into(),
        ))
    }

    /// Tangent of the solution path in `kappa` and the predicted decrease
    /// of `kappa` until the next inactive group reaches the boundary.
    fn predict(
        &self,
        sys: &System,
        theta: &DVector<f64>,
        kappa: f64,
        corr: &[f64],
        allowed: &[bool],
    ) -> Result<(Option<f64>, DVector<f64>)> {
        let n = sys.n();
        // Columns of the reduced basis: full blocks for nonzero or
        // unpenalized groups, one direction for penalized groups sitting on
        // the boundary at zero.
        let mut free: Vec<usize> = Vec::new();
        let mut directions: Vec<(std::ops::Range<usize>, DVector<f64>)> = Vec::new();
        let mut curv: Vec<(usize, f64, DVector<f64>)> = Vec::new();
        let mut u_full = DVector::zeros(n);
        for k in 0..sys.groups.len() {
            let r = sys.range(k);
            let v = theta.rows_range(r.clone()).clone_owned();
            let norm = v.norm();
            let weight = sys.groups[k].weight;
            if weight == 0.0 || norm > 0.0 {
                free.extend(r.clone());
                if weight > 0.0 {
                    let u = &v / norm;
                    curv.push((k, weight * kappa / norm, u.clone()));
                    u_full.rows_range_mut(r).copy_from(&(u * weight));
                }
            } else {
                let g = sys.groups[k].g;
                let row = &corr[g * self.d..(g + 1) * self.d];
                let c = DVector::from_iterator(
                    r.len(),
                    sys.groups[k].coords.iter().map(|&i| row[i]),
                );
                let cn = c.norm();
                if cn >= weight * kappa * (1.0 - 1e-6) && cn > 0.0 {
                    u_full.rows_range_mut(r.clone()).copy_from(&(&c * (weight / cn)));
                    directions.push((r, c / cn));
                }
            }
        }
        if free.is_empty() && directions.is_empty() {
            return Ok((None, DVector::zeros(n)));
        }
        let nf = free.len();
        let nr = nf + directions.len();
        let mut rhs = DVector::zeros(nr);
        for (a, &i) in free.iter().enumerate() {
            rhs[a] = -u_full[i];
        }
        for (d, (r, v)) in directions.iter().enumerate() {
            rhs[nf + d] = -v.dot(&u_full.rows_range(r.clone()));
        }
        let sol = match self.structured_rate(sys, theta, &free, &curv, &directions, &rhs) {
            Some(sol) => sol,
            None => {
                let mut curvature = sys.h.clone();
                for (k, scale, u) in &curv {
                    let r = sys.range(*k);
                    let m = r.len();
                    let proj = DMatrix::identity(m, m) - u * u.transpose();
                    let mut block = curvature.view_mut((r.start, r.start), (m, m));
                    block += proj * *scale;
                }
                // Reduced system in the basis {unit vectors of `free`}
                // followed by one column per boundary direction.
                let mut j_red = DMatrix::zeros(nr, nr);
                for (a, &i) in free.iter().enumerate() {
                    for (b, &j) in free.iter().enumerate() {
                        j_red[(a, b)] = curvature[(i, j)];
                    }
                }
                for (db, (rb, vb)) in directions.iter().enumerate() {
                    let cv = curvature.columns(rb.start, rb.len()) * vb;
                    for (a, &i) in free.iter().enumerate() {
                        j_red[(a, nf + db)] = cv[i];
                        j_red[(nf + db, a)] = cv[i];
                    }
                    for (da, (ra, va)) in directions.iter().enumerate() {
                        j_red[(nf + da, nf + db)] = va.dot(&cv.rows_range(ra.clone()));
                    }
                }
                solve_sym(j_red, &rhs).ok_or(Error::RankDeficient { dim: n })?
            }
        };
        let mut rate = DVector::zeros(n);
        for (a, &i) in free.iter().enumerate() {
            rate[i] = sol[a];
        }
        for (d, (r, v)) in directions.iter().enumerate() {
            rate.rows_range_mut(r.clone()).axpy(sol[nf + d], v, 1.0);
        }

        // d c_j / d kappa = -Z_j' Z rate.
        let neg_fitted_rate = self.residual_with(&DMatrix::zeros(self.y.nrows(), self.t_len), sys, &rate);
        let dcorr = self.correlations(&neg_fitted_rate);
        let mut best: Option<f64> = None;
        for j in 0..self.t_len {
            if !allowed[j] {
                continue;
            }
            let (mut cc, mut cd, mut dd) = (0.0, 0.0, 0.0);
            let row_c = &corr[j * self.d..(j + 1) * self.d];
            let row_d = &dcorr[j * self.d..(j + 1) * self.d];
            for &i in self.coords(j) {
                cc += row_c[i] * row_c[i];
                cd += row_c[i] * row_d[i];
                dd += row_d[i] * row_d[i];
            }
            // ||c - delta * dc||^2 = (kappa - delta)^2
            let a = dd - 1.0;
            let b = 2.0 * (kappa - cd);
            let c = cc - kappa * kappa;
            if let Some(delta) = smallest_positive_root(a, b, c) {
                best = Some(best.map_or(delta, |x: f64| x.min(delta)));
            }
        }
        Ok((best, rate))
    }

    /// Path tangent through [`Self::kron_solve`], with the boundary
    /// directions eliminated by a Schur complement.
    fn structured_rate(
        &self,
        sys: &System,
        theta: &DVector<f64>,
        free: &[usize],
        curv: &[(usize, f64, DVector<f64>)],
        directions: &[(std::ops::Range<usize>, DVector<f64>)],
        rhs: &DVector<f64>,
    ) -> Option<DVector<f64>> {
        let nf = free.len();
        let nd = directions.len();
        let idx: Vec<usize> = (0..sys.groups.len())
            .filter(|&k| sys.groups[k].weight == 0.0 || theta.rows_range(sys.range(k)).norm() > 0.0)
            .collect();
        let (mut scales, mut dirs) = (Vec::new(), Vec::new());
        for &k in &idx {
            match curv.iter().find(|c| c.0 == k) {
                Some((_, s, u)) => {
                    scales.push(*s);
                    dirs.push(u.clone());
                }
                None => {
                    scales.push(0.0);
                    dirs.push(DVector::zeros(sys.range(k).len()));
                }
            }
        }
        let mut g = DMatrix::zeros(nf, 1 + nd);
        g.view_mut((0, 0), (nf, 1)).copy_from(&rhs.rows(0, nf));
        // Couplings H[free, r_b] v_b; boundary groups carry no penalty
        // curvature in the reduced basis.
        let mut couple = DMatrix::zeros(nd, nd);
        for (db, (rb, vb)) in directions.iter().enumerate() {
            let hv = sys.h.columns(rb.start, rb.len()) * vb;
            for (a, &i) in free.iter().enumerate() {
                g[(a, 1 + db)] = hv[i];
            }
            for (da, (ra, va)) in directions.iter().enumerate() {
                couple[(da, db)] = va.dot(&hv.rows_range(ra.clone()));
            }
        }
        let x = if nf > 0 {
            self.kron_solve(sys, &idx, &scales, &dirs, &g)?
        } else {
            DMatrix::zeros(0, 1 + nd)
        };
        let mut sol = DVector::zeros(nf + nd);
        if nd == 0 {
            sol.copy_from(&x.column(0));
            return Some(sol);
        }
        let cross = g.columns(1, nd);
        let schur = &couple - cross.transpose() * x.columns(1, nd);
        let rd = rhs.rows(nf, nd) - cross.transpose() * x.column(0);
        let sd = solve_sym(schur, &rd)?;
        let sf = x.column(0) - x.columns(1, nd) * &sd;
        sol.rows_mut(0, nf).copy_from(&sf);
        sol.rows_mut(nf, nd).copy_from(&sd);
        Some(sol)
    }

    /// Solves `J X = G` on the groups `idx`, exploiting `H = I_q (x) H_p`:
    /// with `s_k` the curvature scale and `u_k` the unit direction of group
    /// `k`,
    ///
    /// ```text
    /// J = I_q (x) (H_p + diag(s)) - sum_k s_k u_k u_k'
    /// ```
    ///
    /// which the Woodbury identity reduces to one Cholesky factorization of
    /// order `|idx| p` and one of order `|idx|`. Returns `None` when some
    /// group carries a partial mask, a factorization fails, or the solution
    /// does not reproduce `G` to working accuracy.
    fn kron_solve(
        &self,
        sys: &System,
        idx: &[usize],
        scales: &[f64],
        dirs: &[DVector<f64>],
        g: &DMatrix<f64>,
    ) -> Option<DMatrix<f64>> {
        let (q, p, d) = (self.cache.q(), self.cache.p(), self.d);
        if q < 2 || idx.iter().any(|&k| sys.groups[k].coords.len() != d) {
            return None;
        }
        let nf = idx.len();
        let m = nf * p;
        let nrhs = g.ncols();
        let mut hp = DMatrix::zeros(m, m);
        for (a, &ka) in idx.iter().enumerate() {
            let oa = sys.offsets[ka];
            for (b, &kb) in idx.iter().enumerate() {
                let ob = sys.offsets[kb];
                for j in 0..p {
                    for i in 0..p {
                        hp[(a * p + i, b * p + j)] = sys.h[(oa + i, ob + j)];
                    }
                }
            }
        }
        let mut ap = hp.clone();
        for (a, s) in scales.iter().enumerate() {
            for i in 0..p {
                ap[(a * p + i, a * p + i)] += s;
            }
        }
        let chol = crate::linalg::Cholesky::new(&ap)?;
        let pen: Vec<usize> = (0..nf).filter(|&a| scales[a] > 0.0).collect();

        // With `J = A - U S U'` (`A = I_q (x) A_p`, columns of `U` the
        // embedded directions), `J^{-1} g = A^{-1}(g + U z)` where
        // `(S^{-1} - U'A^{-1}U) z = U'A^{-1} g`. Every inner product with
        // `A^{-1}` splits across equations into products of forward solves.
        let slice = |src: &dyn Fn(usize) -> f64, e: usize| -> Vec<f64> {
            (0..m).map(|r| src((r / p) * d + e * p + r % p)).collect()
        };
        let fwd_g: Vec<Vec<Vec<f64>>> = (0..nrhs)
            .map(|c| {
                (0..q)
                    .map(|e| {
                        let mut v = slice(&|i| g[(i, c)], e);
                        chol.forward_from(&mut v, 0);
                        v
                    })
                    .collect()
            })
            .collect();
        let fwd_u: Vec<Vec<Vec<f64>>> = pen
            .iter()
            .map(|&a| {
                (0..q)
                    .map(|e| {
                        let mut v = vec![0.0; m];
                        v[a * p..(a + 1) * p].copy_from_slice(&dirs[a].as_slice()[e * p..(e + 1) * p]);
                        chol.forward_from(&mut v, a * p);
                        v
                    })
                    .collect()
            })
            .collect();
        let inner = |x: &[Vec<f64>], y: &[Vec<f64>]| -> f64 {
            x.iter().zip(y).map(|(a, b)| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>()).sum()
        };
        let k = pen.len();
        let z = if k > 0 {
            let mut cap = DMatrix::zeros(k, k);
            let mut uy = DMatrix::zeros(k, nrhs);
            for i in 0..k {
                for j in 0..=i {
                    let v = -inner(&fwd_u[i], &fwd_u[j]);
                    cap[(i, j)] = v;
                    cap[(j, i)] = v;
                }
                cap[(i, i)] += 1.0 / scales[pen[i]];
                for c in 0..nrhs {
                    uy[(i, c)] = inner(&fwd_u[i], &fwd_g[c]);
                }
            }
            cap.cholesky()?.solve(&uy)
        } else {
            DMatrix::zeros(0, nrhs)
        };
        let mut x = DMatrix::zeros(nf * d, nrhs);
        for c in 0..nrhs {
            for e in 0..q {
                let mut v = fwd_g[c][e].clone();
                for i in 0..k {
                    let zi = z[(i, c)];
                    for (a, b) in v.iter_mut().zip(&fwd_u[i][e]) {
                        *a += zi * b;
                    }
                }
                chol.backward(&mut v);
                for r in 0..m {
                    x[((r / p) * d + e * p + r % p, c)] = v[r];
                }
            }
        }

        // Residual check, column by column.
        for c in 0..nrhs {
            let xc = x.column(c);
            let mut jx = DVector::zeros(nf * d);
            for e in 0..q {
                let xe = DVector::from_fn(m, |r, _| xc[(r / p) * d + e * p + r % p]);
                let he = &hp * xe;
                for r in 0..m {
                    jx[(r / p) * d + e * p + r % p] = he[r];
                }
            }
            for &a in &pen {
                let r = a * d..(a + 1) * d;
                let xa = xc.rows_range(r.clone()).clone_owned();
                let along = dirs[a].dot(&xa);
                let mut block = jx.rows_range_mut(r);
                block.axpy(scales[a], &xa, 1.0);
                block.axpy(-scales[a] * along, &dirs[a], 1.0);
            }
            let gc = g.column(c);
            let ok = xc.iter().all(|v| v.is_finite())
                && (jx - gc).norm() <= 1e-9 * gc.norm().max(f64::MIN_POSITIVE);
            if !ok {
                return None;
            }
        }
        Some(x)
    }

    /// Exact minimizer of the restricted objective over the system groups.
    fn solve(&self, sys: &System, theta: &mut DVector<f64>, kappa: f64) -> Result<()> {
        let ng = sys.groups.len();
        let n = sys.n();
        let bscale = sys.b.amax().max(sys.h.amax()).max(f64::MIN_POSITIVE);
        let tol = (SOLVE_TOL * kappa).max(64.0 * f64::EPSILON * bscale * (n as f64).sqrt());
        for _ in 0..MAX_SOLVE_ITERS {
            let htheta = &sys.h * &*theta;
            let mut norms = vec![0.0; ng];
            let mut free = vec![false; ng];
            let mut max_grad = 0.0f64;
            let mut grad = DVector::zeros(n);
            let mut violator: Option<(usize, f64)> = None;
            for k in 0..ng {
                let r = sys.range(k);
                let v = theta.rows_range(r.clone());
                let norm = v.norm();
                let weight = sys.groups[k].weight;
                norms[k] = norm;
                let base = htheta.rows_range(r.clone()) - sys.b.rows_range(r.clone());
                if weight == 0.0 || norm > 0.0 {
                    free[k] = true;
                    let gk = if weight == 0.0 {
                        base
                    } else {
                        &base + v * (weight * kappa / norm)
                    };
                    max_grad = max_grad.max(gk.norm());
                    grad.rows_range_mut(r).copy_from(&gk);
                } else {
                    let excess = base.norm() - weight * kappa;
                    if excess > tol && violator.is_none_or(|(_, e)| excess > e) {
                        violator = Some((k, excess));
                    }
                }
            }
            if let Some((k, _)) = violator {
                let r = sys.range(k);
                let c = sys.b.rows_range(r.clone()) - htheta.rows_range(r.clone());
                let hkk = sys.h.view((r.start, r.start), (r.len(), r.len())).clone_owned();
                let x = block_minimizer(&hkk, &c.clone_owned(), sys.groups[k].weight * kappa);
                theta.rows_range_mut(r).copy_from(&x);
                continue;
            }
            if max_grad <= tol {
                return Ok(());
            }

            // Newton step on the free groups.
            let idx: Vec<usize> = (0..ng).filter(|&k| free[k]).collect();
            let mut cols = Vec::new();
            for &k in &idx {
                cols.extend(sys.range(k));
            }
            let nn = cols.len();
            let g_red = DVector::from_iterator(nn, cols.iter().map(|&i| grad[i]));
            let scales: Vec<f64> = idx
                .iter()
                .map(|&k| {
                    let w = sys.groups[k].weight;
                    if w > 0.0 { w * kappa / norms[k] } else { 0.0 }
                })
                .collect();
            let dirs: Vec<DVector<f64>> = idx
                .iter()
                .map(|&k| theta.rows_range(sys.range(k)) / norms[k].max(f64::MIN_POSITIVE))
                .collect();
            let structured = self.kron_solve(sys, &idx, &scales, &dirs, &DMatrix::from_column_slice(nn, 1, g_red.as_slice()));
            let step_red = match structured {
                Some(x) => -x.column(0).into_owned(),
                None => {
                    let mut jac = DMatrix::zeros(nn, nn);
                    for (a, &ia) in cols.iter().enumerate() {
                        for (b, &ib) in cols.iter().enumerate() {
                            jac[(a, b)] = sys.h[(ia, ib)];
                        }
                    }
                    let mut pos = 0;
                    for (j, &k) in idx.iter().enumerate() {
                        let m = sys.range(k).len();
                        if scales[j] > 0.0 {
                            let u = &dirs[j];
                            let proj = (DMatrix::identity(m, m) - u * u.transpose()) * scales[j];
                            let mut block = jac.view_mut((pos, pos), (m, m));
                            block += proj;
                        }
                        pos += m;
                    }
                    -solve_sym(jac, &g_red).ok_or(Error::RankDeficient { dim: nn })?
                }
            };
            let mut step = DVector::zeros(n);
            for (a, &i) in cols.iter().enumerate() {
                step[i] = step_red[a];
            }

            // A group the step would carry through (or nearly through) zero
            // is stopped at its closest approach to the origin and zeroed
            // there, provided that does not raise the objective. The
            // violator check above re-activates it if it belongs in.
            let mut crossing: Option<(usize, f64)> = None;
            for &k in &idx {
                if sys.groups[k].weight == 0.0 {
                    continue;
                }
                let r = sys.range(k);
                let cur = theta.rows_range(r.clone());
                let s = step.rows_range(r);
                let ss = s.norm_squared();
                if ss == 0.0 {
                    continue;
                }
                let alpha = -cur.dot(&s) / ss;
                if alpha > 0.0 && alpha <= 1.0 {
                    let closest = (cur + s * alpha).norm();
                    if closest < 0.05 * norms[k] && crossing.is_none_or(|(_, a)| alpha < a) {
                        crossing = Some((k, alpha));
                    }
                }
            }
            if let Some((k, alpha)) = crossing {
                let f0 = sys.objective(theta, kappa);
                let mut cand = &*theta + &step * alpha;
                cand.rows_range_mut(sys.range(k)).fill(0.0);
                if sys.objective(&cand, kappa) <= f0 + 1e-14 * f0.abs() {
                    *theta = cand;
                    continue;
                }
            }

            let f0 = sys.objective(theta, kappa);
            let slope = 2.0 * grad.dot(&step);
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let cand = &*theta + &step * alpha;
                let f1 = sys.objective(&cand, kappa);
                if f1 <= f0 + 1e-4 * alpha * slope || (f1 - f0).abs() <= 1e-15 * f0.abs() {
                    *theta = cand;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                // No further decrease is representable; accept the current
                // point if it is close to stationary.
                if max_grad <= 1e3 * tol {
                    return Ok(());
                }
                return Err(Error::Infeasible(
                    "group LASSO path: line search failed".into(),
                ));
            }
        }
        Err(Error::Infeasible(
            "group LASSO path: restricted solve did not converge".into(),
        ))
    }
}

fn active_breaks(sys: &System) -> usize {
    sys.groups.iter().filter(|g| g.g > 0).count()
}

/// Keeps the warm start from flipping the direction of groups that were
/// nonzero at the last accepted point.
fn sanitize_warm_start(sys: &System, theta: &mut DVector<f64>, reference: &DVector<f64>) {
    for k in 0..sys.groups.len() {
        if sys.groups[k].weight == 0.0 {
            continue;
        }
        let r = sys.range(k);
        let refv = reference.rows_range(r.clone()).clone_owned();
        let cur = theta.rows_range(r.clone()).clone_owned();
        if refv.norm() > 0.0 && cur.dot(&refv) <= 0.0 {
            theta.rows_range_mut(r).copy_from(&(refv * 0.5));
        }
    }
}

/// `argmin_x x' H x - 2 x' c + 2 kappa ||x||` for symmetric positive
/// definite `H`.
fn block_minimizer(h: &DMatrix<f64>, c: &DVector<f64>, kappa: f64) -> DVector<f64> {
    let cn = c.norm();
    if cn <= kappa {
        return DVector::zeros(c.len());
    }
    let eig = h.clone().symmetric_eigen();
    let a = eig.eigenvectors.transpose() * c;
    let lam = &eig.eigenvalues;
    // x(mu) = (H + mu I)^{-1} c, solve mu * ||x(mu)|| = kappa.
    let f = |mu: f64| -> f64 {
        let s: f64 = a
            .iter()
            .zip(lam.iter())
            .map(|(ai, li)| (ai * mu / (li.max(0.0) + mu)).powi(2))
            .sum();
        s.sqrt() - kappa
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while f(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let mu = 0.5 * (lo + hi);
    let scaled = DVector::from_iterator(
        a.len(),
        a.iter().zip(lam.iter()).map(|(ai, li)| ai / (li.max(0.0) + mu)),
    );
    &eig.eigenvectors * scaled
}

/// Smallest strictly positive root of `a x^2 + b x + c = 0`.
fn smallest_positive_root(a: f64, b: f64, c: f64) -> Option<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return None;
    }
    let roots = if a.abs() <= 1e-14 * scale {
        if b == 0.0 {
            return None;
        }
        [-c / b, f64::NAN]
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        // Numerically stable pair.
        let qv = -0.5 * (b + b.signum() * sq);
        if qv != 0.0 {
            [qv / a, c / qv]
        } else {
            [(-b + sq) / (2.0 * a), (-b - sq) / (2.0 * a)]
        }
    };
    roots
        .into_iter()
        .filter(|r| r.is_finite() && *r > 0.0)
        .min_by(|a, b| a.total_cmp(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positive_root_selection() {
        // (x - 1)(x - 3)
        assert!((smallest_positive_root(1.0, -4.0, 3.0).unwrap() - 1.0).abs() < 1e-12);
        // linear
        assert!((smallest_positive_root(0.0, 2.0, -4.0).unwrap() - 2.0).abs() < 1e-12);
        assert!(smallest_positive_root(1.0, 0.0, 1.0).is_none());
    }

    #[test]
    fn block_minimizer_satisfies_stationarity() {
        let h = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let c = DVector::from_row_slice(&[4.0, -2.0]);
        let kappa = 1.5;
        let x = block_minimizer(&h, &c, kappa);
        let g = &h * &x - &c + &x * (kappa / x.norm());
        assert!(g.norm() < 1e-10, "{g}");
        assert_eq!(block_minimizer(&h, &c, 10.0).norm(), 0.0);
    }

    #[test]
    fn symmetric_solver_falls_back() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let x = solve_sym(a, &DVector::from_row_slice(&[1.0, 2.0])).unwrap();
        assert!((x[1] + 2.0).abs() < 1e-14);
    }
}
