//! Post-selection estimation: per-regime refits, dynamic OLS augmentation
//! and sieve-bootstrap standard errors.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ols;
use crate::model::{build_scaled_regressors, BreakSet, SegmentedFit, TimeSeriesPanel};
use crate::selection::segment_ssr;

/// Per-regime OLS at fixed breaks. With `scaled` the regressions use the
/// normalized regressors and the coefficients are mapped back; either way
/// the returned coefficients refer to the raw regressors.
pub fn post_lasso_fit(panel: &TimeSeriesPanel, breaks: &BreakSet, scaled: bool) -> Result<SegmentedFit> {
    if scaled {
        let mut fit = segment_ssr(panel, breaks, None)?;
        let factors = panel.layout().scale_factors(panel.t_len());
        for coef in &mut fit.coefficients {
            for (i, f) in factors.iter().enumerate() {
                coef.column_mut(i).scale_mut(*f);
            }
        }
        fit.scaled = false;
        Ok(fit)
    } else {
        let z = build_scaled_regressors(panel, false).z;
        let mut fit = crate::selection::segment_fit(&z, panel.y(), breaks, None)?;
        fit.scaled = false;
        Ok(fit)
    }
}

/// Appends `dX_{t+j}`, `j = -lags..=leads`, to the stationary regressors.
///
/// Observation `t` of the result is observation `t + lags + 1` of the input;
/// the first `lags + 1` and the last `leads` observations are dropped.
/// New columns are ordered by `j`, then by integrated regressor.
pub fn dynamic_ols_augment(panel: &TimeSeriesPanel, leads: usize, lags: usize) -> Result<TimeSeriesPanel> {
    let r = panel.r();
    if r == 0 {
        return Err(Error::InvalidConfig(
            "dynamic OLS needs at least one integrated regressor".into(),
        ));
    }
    let t_len = panel.t_len();
    let drop = leads + lags + 1;
    if t_len <= drop {
        return Err(Error::Infeasible(format!(
            "T = {t_len} leaves no observations after {lags} lags and {leads} leads"
        )));
    }
    let n = t_len - drop;
    let offset = lags + 1;
    let x = panel.x();
    let old_w = panel.w();
    let s = old_w.nrows();
    let mut w = DMatrix::zeros(s + (leads + lags + 1) * r, n);
    for t in 0..n {
        let o = t + offset;
        for k in 0..s {
            w[(k, t)] = old_w[(k, o)];
        }
        for (jj, j) in (-(lags as isize)..=leads as isize).enumerate() {
            let src = (o as isize + j) as usize;
            for i in 0..r {
                w[(s + jj * r + i, t)] = x[(i, src)] - x[(i, src - 1)];
            }
        }
    }
    TimeSeriesPanel::new(
        panel.y().columns(offset, n).into_owned(),
        x.columns(offset, n).into_owned(),
        w,
        panel.include_trend(),
        panel.include_intercept(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArOrder {
    /// Chosen by AIC up to `floor(n^{1/3})`.
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replications: usize,
    pub ar_order: ArOrder,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn new(replications: usize, seed: u64) -> Self {
        Self {
            replications,
            ar_order: ArOrder::Auto,
            seed,
        }
    }
}

/// Number of innovations discarded before the bootstrap errors are used.
const SIEVE_BURN_IN: usize = 50;

/// Sieve-bootstrap standard errors of the raw-parameter coefficients, one
/// `q x p` matrix per regime.
///
/// Each regime is treated on its own with the regressors held fixed: an
/// AR sieve is fitted to each equation's residuals, centered innovations
/// are resampled (the same time index across equations, which keeps their
/// contemporaneous correlation), and the regime is re-estimated on
/// `fitted + u*`.
pub fn sieve_bootstrap_se(
    panel: &TimeSeriesPanel,
    breaks: &BreakSet,
    config: &BootstrapConfig,
) -> Result<Vec<DMatrix<f64>>> {
    if config.replications == 0 {
        return Err(Error::InvalidConfig("bootstrap needs at least one replication".into()));
    }
    if breaks.t_len() != panel.t_len() {
        return Err(Error::InvalidBreaks(format!(
            "break set is for T = {}, panel has T = {}",
            breaks.t_len(),
            panel.t_len()
        )));
    }
    let z = build_scaled_regressors(panel, true).z;
    let factors = panel.layout().scale_factors(panel.t_len());
    let p = z.nrows();
    let q = panel.q();
    let mut out = Vec::new();
    for (k, range) in breaks.regimes().into_iter().enumerate() {
        let n = range.len();
        let design = z.columns(range.start, n).transpose();
        let resp = panel.y().columns(range.start, n).transpose();
        let fit = ols(&design, &resp).ok_or(Error::SingularRegime { regime: k })?;
        let fitted = &resp - &fit.resid;

        let orders: Vec<usize> = (0..q)
            .map(|e| match config.ar_order {
                ArOrder::Fixed(o) => o,
                ArOrder::Auto => aic_order(fit.resid.column(e).as_slice(), max_sieve_order(n)),
            })
            .collect();
        let top = orders.iter().copied().max().unwrap_or(0);
        let required = (5 * (top + 1)).max(p + 1);
        if n < required {
            return Err(Error::RegimeTooShort {
                regime: k,
                len: n,
                required,
            });
        }
        let sieves: Vec<Sieve> = (0..q)
            .map(|e| Sieve::fit(fit.resid.column(e).as_slice(), orders[e]))
            .collect();
        // Innovations aligned on the indices every equation has.
        let innovations: Vec<Vec<f64>> = sieves
            .iter()
            .map(|s| s.innovations[top - s.coef.len()..].to_vec())
            .collect();
        let pool = n - top;

        let draws: Vec<DMatrix<f64>> = (0..config.replications)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(((k as u64) << 32) | b as u64);
                let total = n + SIEVE_BURN_IN;
                let idx: Vec<usize> = (0..total).map(|_| rng.random_range(0..pool)).collect();
                let mut ystar = fitted.clone();
                for (e, sieve) in sieves.iter().enumerate() {
                    let u = sieve.simulate(&innovations[e], &idx);
                    for t in 0..n {
                        ystar[(t, e)] += u[SIEVE_BURN_IN + t];
                    }
                }
                // The design is fixed and was already found to be full rank.
                ols(&design, &ystar).map(|f| f.coef.transpose()).unwrap_or_else(|| DMatrix::zeros(q, p))
            })
            .collect();

        let b = draws.len() as f64;
        let mut mean = DMatrix::zeros(q, p);
        for d in &draws {
            mean += d;
        }
        mean /= b;
        let mut var = DMatrix::zeros(q, p);
        for d in &draws {
            let diff = d - &mean;
            var += diff.component_mul(&diff);
        }
        var /= (b - 1.0).max(1.0);
        let mut se = var.map(f64::sqrt);
        for (i, f) in factors.iter().enumerate() {
            se.column_mut(i).scale_mut(*f);
        }
        out.push(se);
    }
    Ok(out)
}

fn max_sieve_order(n: usize) -> usize {
    (n as f64).cbrt().floor() as usize
}

struct Sieve {
    coef: Vec<f64>,
    /// Centered innovations for `t = order..n`.
    innovations: Vec<f64>,
}

impl Sieve {
    fn fit(u: &[f64], order: usize) -> Self {
        let coef = ar_coefficients(u, order, order).unwrap_or_else(|| vec![0.0; order]);
        let mut innovations: Vec<f64> = (order..u.len())
            .map(|t| u[t] - (0..order).map(|i| coef[i] * u[t - 1 - i]).sum::<f64>())
            .collect();
        let mean = innovations.iter().sum::<f64>() / innovations.len().max(1) as f64;
        for e in &mut innovations {
            *e -= mean;
        }
        Self { coef, innovations }
    }

    fn simulate(&self, innovations: &[f64], idx: &[usize]) -> Vec<f64> {
        let order = self.coef.len();
        let mut u = vec![0.0; idx.len()];
        for t in 0..idx.len() {
            let ar: f64 = (0..order.min(t)).map(|i| self.coef[i] * u[t - 1 - i]).sum();
            u[t] = ar + innovations[idx[t]];
        }
        u
    }
}

/// Least-squares AR(`order`) coefficients on `t = start..n`; `None` when the
/// lag matrix is singular (for instance, all-zero residuals).
fn ar_coefficients(u: &[f64], order: usize, start: usize) -> Option<Vec<f64>> {
    if order == 0 {
        return Some(Vec::new());
    }
    let n = u.len() - start;
    let x = DMatrix::from_fn(n, order, |t, i| u[start + t - 1 - i]);
    let y = DMatrix::from_fn(n, 1, |t, _| u[start + t]);
    ols(&x, &y).map(|f| f.coef.column(0).iter().copied().collect())
}

/// AIC-minimizing AR order in `0..=max_order`, every candidate fitted on
/// the same sample `t = max_order..n`.
fn aic_order(u: &[f64], max_order: usize) -> usize {
    let max_order = max_order.min(u.len().saturating_sub(2));
    let n = (u.len() - max_order) as f64;
    let mut best = (0, f64::INFINITY);
    for order in 0..=max_order {
        let Some(coef) = ar_coefficients(u, order, max_order) else {
            continue;
        };
        let coef = DVector::from_vec(coef);
        let ssr: f64 = (max_order..u.len())
            .map(|t| {
                let pred: f64 = (0..order).map(|i| coef[i] * u[t - 1 - i]).sum();
                (u[t] - pred).powi(2)
            })
            .sum();
        if ssr <= 0.0 {
            return order;
        }
        let aic = n * (ssr / n).ln() + 2.0 * order as f64;
        if aic < best.1 {
            best = (order, aic);
        }
    }
    best.0
}
