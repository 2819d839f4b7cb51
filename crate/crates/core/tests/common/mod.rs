//! Test-side oracles built on the materialized break design.

#![allow(dead_code)]

use breakscan::model::{build_scaled_regressors, TimeSeriesPanel};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Dense `Tq x Td` design: row `t * q + e`, column `j * d + e * p + i`
/// holds `Z_t[i]` whenever `t >= j`.
pub fn dense_design(panel: &TimeSeriesPanel) -> DMatrix<f64> {
    let z = build_scaled_regressors(panel, true).z;
    let (p, t_len) = z.shape();
    let q = panel.q();
    let d = q * p;
    let mut out = DMatrix::zeros(t_len * q, t_len * d);
    for t in 0..t_len {
        for j in 0..=t {
            for e in 0..q {
                for i in 0..p {
                    out[(t * q + e, j * d + e * p + i)] = z[(i, t)];
                }
            }
        }
    }
    out
}

/// `vec(Y)` stacked by time, matching [`dense_design`].
pub fn stacked_response(panel: &TimeSeriesPanel) -> DVector<f64> {
    let y = panel.y();
    DVector::from_iterator(y.len(), (0..y.ncols()).flat_map(|t| (0..y.nrows()).map(move |e| y[(e, t)])))
}

/// Group LASSO objective; with `free_baseline` the first group carries no
/// penalty.
pub fn objective(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    theta: &DVector<f64>,
    d: usize,
    lambda: f64,
    t_len: usize,
    free_baseline: bool,
) -> f64 {
    let r = y - x * theta;
    let first = usize::from(free_baseline);
    let pen: f64 = (first..theta.len() / d).map(|j| theta.rows(j * d, d).norm()).sum();
    r.norm_squared() / t_len as f64 + lambda * pen
}

/// `argmin_v v' A v - 2 v' c + 2 k ||v||` by bisection on the multiplier.
fn block_min(a: &DMatrix<f64>, c: &DVector<f64>, k: f64) -> DVector<f64> {
    if k == 0.0 {
        return a.clone().lu().solve(c).unwrap();
    }
    if c.norm() <= k {
        return DVector::zeros(c.len());
    }
    let n = c.len();
    let solve = |mu: f64| (a + DMatrix::identity(n, n) * mu).cholesky().unwrap().solve(c);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while solve(hi).norm() * hi < k {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if solve(mid).norm() * mid < k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    solve(0.5 * (lo + hi))
}

/// Exact block coordinate descent on the dense group LASSO problem.
/// `blocked` groups (0-based) are held at zero.
pub fn dense_group_lasso(
    panel: &TimeSeriesPanel,
    lambda: f64,
    blocked: &[usize],
    sweeps: usize,
    free_baseline: bool,
) -> DVector<f64> {
    let x = dense_design(panel);
    let y = stacked_response(panel);
    let t_len = panel.t_len();
    let d = panel.group_dim();
    let kappa = t_len as f64 * lambda / 2.0;
    let mut theta = DVector::zeros(t_len * d);
    let mut resid = y.clone();
    let blocks: Vec<DMatrix<f64>> = (0..t_len)
        .map(|j| {
            let xj = x.columns(j * d, d);
            xj.transpose() * xj
        })
        .collect();
    for _ in 0..sweeps {
        let mut change = 0.0f64;
        for j in 0..t_len {
            if blocked.contains(&j) {
                continue;
            }
            let xj = x.columns(j * d, d);
            let old = theta.rows(j * d, d).clone_owned();
            let c = xj.transpose() * &resid + &blocks[j] * &old;
            let k = if j == 0 && free_baseline { 0.0 } else { kappa };
            let new = block_min(&blocks[j], &c, k);
            let delta = &new - &old;
            if delta.norm() > 0.0 {
                resid -= xj * &delta;
                theta.rows_mut(j * d, d).copy_from(&new);
                change = change.max(delta.amax());
            }
        }
        if change < 1e-15 {
            break;
        }
    }
    theta
}

/// Newton iterations on the stationarity equations of the groups that are
/// nonzero in `theta`, with backtracking on the objective. Block coordinate
/// descent finds the support quickly but converges slowly on the highly
/// correlated cumulative design.
pub fn newton_polish(panel: &TimeSeriesPanel, lambda: f64, mut theta: DVector<f64>, free_baseline: bool) -> DVector<f64> {
    let x = dense_design(panel);
    let y = stacked_response(panel);
    let t_len = panel.t_len();
    let d = panel.group_dim();
    let kappa = t_len as f64 * lambda / 2.0;
    let support: Vec<usize> = (0..t_len).filter(|&j| theta.rows(j * d, d).norm() > 1e-12).collect();
    let cols: Vec<usize> = support.iter().flat_map(|g| g * d..(g + 1) * d).collect();
    let xs = x.select_columns(&cols);
    let gram = xs.transpose() * &xs;
    let xty = xs.transpose() * &y;
    let n = cols.len();
    let penalized = |j: usize| !(free_baseline && j == 0);
    let obj = |v: &DVector<f64>| {
        let pen: f64 = support
            .iter()
            .enumerate()
            .filter(|(_, &g)| penalized(g))
            .map(|(k, _)| v.rows(k * d, d).norm())
            .sum();
        0.5 * (v.dot(&(&gram * v)) - 2.0 * v.dot(&xty)) + kappa * pen
    };
    let mut v = DVector::from_iterator(n, cols.iter().map(|&c| theta[c]));
    for _ in 0..100 {
        let mut grad = &gram * &v - &xty;
        let mut hess = gram.clone();
        for (k, &g) in support.iter().enumerate() {
            if !penalized(g) {
                continue;
            }
            let b = v.rows(k * d, d).clone_owned();
            let nb = b.norm();
            grad.rows_mut(k * d, d).axpy(kappa / nb, &b, 1.0);
            let block = (DMatrix::identity(d, d) - &b * b.transpose() / (nb * nb)) * (kappa / nb);
            let mut h = hess.view_mut((k * d, k * d), (d, d));
            h += block;
        }
        if grad.amax() < 1e-13 * (1.0 + xty.amax()) {
            break;
        }
        let Some(step) = hess.clone().lu().solve(&grad) else { break };
        let f0 = obj(&v);
        let mut t = 1.0;
        while t > 1e-12 {
            let trial = &v - &step * t;
            let alive = support
                .iter()
                .enumerate()
                .all(|(k, &g)| !penalized(g) || trial.rows(k * d, d).norm() > 0.0);
            if alive && obj(&trial) <= f0 {
                v = trial;
                break;
            }
            t *= 0.5;
        }
        if t <= 1e-12 {
            break;
        }
    }
    for (i, &c) in cols.iter().enumerate() {
        theta[c] = v[i];
    }
    theta
}

/// Small panel with `q` responses, one stationary regressor and nothing else.
pub fn toy_panel(q: usize, t_len: usize, seed: u64) -> TimeSeriesPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = DMatrix::from_fn(1, t_len, |_, _| 1.0 + 0.5 * rng.sample::<f64, _>(StandardNormal));
    let y = DMatrix::from_fn(q, t_len, |e, t| {
        let level = if t >= t_len / 2 { 2.0 } else { 0.5 } + e as f64;
        level * w[(0, t)] + 0.3 * rng.sample::<f64, _>(StandardNormal)
    });
    TimeSeriesPanel::new(y, DMatrix::zeros(0, t_len), w, false, false).unwrap()
}

pub fn gaussian_panel(q: usize, r: usize, s: usize, t_len: usize, trend: bool, intercept: bool, seed: u64) -> TimeSeriesPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(r, t_len);
    for i in 0..r {
        let mut acc = 0.0;
        for t in 0..t_len {
            acc += rng.sample::<f64, _>(StandardNormal);
            x[(i, t)] = acc;
        }
    }
    let w = DMatrix::from_fn(s, t_len, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = DMatrix::from_fn(q, t_len, |_, _| rng.sample::<f64, _>(StandardNormal));
    TimeSeriesPanel::new(y, x, w, trend, intercept).unwrap()
}

/// Least squares on the dense design restricted to the baseline group and
/// the break groups; returns the SSR and the stacked coefficients.
pub fn dense_fit(panel: &TimeSeriesPanel, breaks: &[usize]) -> (f64, DVector<f64>) {
    let x = dense_design(panel);
    let y = stacked_response(panel);
    let d = panel.group_dim();
    let groups: Vec<usize> = std::iter::once(0).chain(breaks.iter().map(|b| b - 1)).collect();
    let cols: Vec<usize> = groups.iter().flat_map(|g| g * d..(g + 1) * d).collect();
    let sub = x.select_columns(&cols);
    let coef = sub.clone().svd(true, true).solve(&y, 1e-14).unwrap();
    let r = &y - &sub * &coef;
    (r.norm_squared(), coef)
}

/// Two equations with an intercept and one stationary regressor; levels and
/// slopes shift after each break.
pub fn shifted_panel(t_len: usize, breaks: &[usize], noise: f64, seed: u64) -> TimeSeriesPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = DMatrix::from_fn(1, t_len, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = DMatrix::from_fn(2, t_len, |e, t| {
        let regime = breaks.iter().filter(|&&b| t + 1 >= b).count() as f64;
        let level = 1.0 + 2.0 * regime * if regime as usize % 2 == 0 { 1.0 } else { -1.0 };
        level + (0.5 + e as f64 + regime) * w[(0, t)] + noise * rng.sample::<f64, _>(StandardNormal)
    });
    TimeSeriesPanel::new(y, DMatrix::zeros(0, t_len), w, false, true).unwrap()
}

/// `k` sorted candidates, consecutive ones and both sample ends at least
/// `gap` apart.
pub fn random_candidates(rng: &mut ChaCha8Rng, t_len: usize, k: usize, gap: usize) -> Vec<usize> {
    let slack = t_len - (k + 1) * gap;
    let mut offs: Vec<usize> = rand::seq::index::sample(rng, slack + k, k).into_iter().collect();
    offs.sort_unstable();
    offs.iter().enumerate().map(|(i, o)| o - i + (i + 1) * gap + 1).collect()
}

/// Global IC minimizer by enumerating every subset with the dense SSR.
/// Ties go to fewer breaks, then to the lexicographically smaller set.
pub fn enumerate_ic(panel: &TimeSeriesPanel, cand: &[usize], omega: f64) -> (f64, Vec<usize>) {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for bits in 0u32..(1 << cand.len()) {
        let set: Vec<usize> = (0..cand.len()).filter(|i| bits >> i & 1 == 1).map(|i| cand[i]).collect();
        let ic = dense_fit(panel, &set).0 + omega * set.len() as f64;
        let better = match &best {
            None => true,
            Some((b, s)) => {
                ic < b - 1e-9 * b.abs() || ((ic - b).abs() <= 1e-9 * b.abs() && (set.len(), &set) < (s.len(), s))
            }
        };
        if better {
            best = Some((ic, set));
        }
    }
    best.unwrap()
}

/// SSR of `[start, end)` by a separate least-squares solve per equation.
pub fn segment_ssr_direct(panel: &TimeSeriesPanel, start: usize, end: usize) -> f64 {
    let z = build_scaled_regressors(panel, true).z;
    let x = z.columns(start, end - start).transpose();
    let mut total = 0.0;
    for e in 0..panel.q() {
        let y = panel.y().row(e).columns(start, end - start).transpose();
        let coef = x.clone().svd(true, true).solve(&y, 1e-14).unwrap();
        total += (&y - &x * coef).norm_squared();
    }
    total
}

/// Minimal segmented SSR over every split into `m + 1` regimes of at least
/// `h` observations, by enumeration.
pub fn enumerate_segmentations(panel: &TimeSeriesPanel, m: usize, h: usize) -> (f64, Vec<usize>) {
    fn rec(start: usize, left: usize, t_len: usize, h: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            if t_len - start >= h {
                out.push(cur.clone());
            }
            return;
        }
        for a in (start + h)..=t_len.saturating_sub(left * h) {
            cur.push(a + 1);
            rec(a, left - 1, t_len, h, cur, out);
            cur.pop();
        }
    }
    let t_len = panel.t_len();
    let mut all = Vec::new();
    rec(0, m, t_len, h, &mut Vec::new(), &mut all);
    let mut best = (f64::INFINITY, Vec::new());
    for seg in all {
        let mut bounds = vec![0];
        bounds.extend(seg.iter().map(|b| b - 1));
        bounds.push(t_len);
        let ssr: f64 = bounds.windows(2).map(|w| segment_ssr_direct(panel, w[0], w[1])).sum();
        if best.1.is_empty() || ssr < best.0 - 1e-12 * best.0 {
            best = (ssr, seg);
        }
    }
    best
}

/// One toy instance of the KKT oracle check: the path solution at an
/// interior knot and the coordinate-descent solution at the same penalty
/// both satisfy the optimality conditions at `1e-6` and coincide.
pub fn kkt_oracle_case(seed: u64) -> Result<(), String> {
    use breakscan::glasso::{group_lars_path, kkt_verify_with, KktOptions, PathConfig};
    let q = 1 + (seed % 2) as usize;
    let penalize = seed % 3 == 0;
    let panel = toy_panel(q, 30, 7000 + seed);
    let config = PathConfig::new(4, 1).with_penalized_baseline(penalize);
    let res = group_lars_path(&panel, &config).map_err(|e| e.to_string())?;
    let k = (res.knots.len() / 2).max(1);
    let lambda = res.knots[k].lambda;
    let options = KktOptions {
        penalize_baseline: penalize,
        ..KktOptions::default()
    };
    let path = res.theta_at(k);
    let oracle = dense_group_lasso(&panel, lambda, &[], 20_000, !penalize);
    let oracle = newton_polish(&panel, lambda, oracle, !penalize);
    let d = panel.group_dim();
    let oracle_mat = DMatrix::from_row_slice(30, d, oracle.as_slice());
    for (name, theta) in [("path", &path), ("oracle", &oracle_mat)] {
        let report = kkt_verify_with(&panel, theta, lambda, 1e-6, &options).map_err(|e| e.to_string())?;
        if !report.passed {
            return Err(format!(
                "seed {seed}: {name} fails KKT (inactive {:.2e}, alignment {:.2e})",
                report.max_inactive_slack, report.max_alignment_error
            ));
        }
    }
    let gap = (&path - &oracle_mat).amax();
    if gap > 1e-5 * (1.0 + path.amax()) {
        return Err(format!("seed {seed}: path and oracle differ by {gap:.2e}"));
    }
    Ok(())
}
