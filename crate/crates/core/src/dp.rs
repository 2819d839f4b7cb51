//! Exact least-squares segmentation with a known number of breaks.
//!
//! Every admissible segment SSR is precomputed from running cross products
//! (one pass per start index), then a Bellman recursion over the number of
//! breaks finds the global minimizer of the segmented SSR.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::segment_ssr;
use crate::estimator::{two_step, TwoStepConfig};
use crate::model::{build_scaled_regressors, BreakSet, TimeSeriesPanel};
use crate::sim::{scenario_preset, simulate_dgp, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DPConfig {
    /// Number of breaks.
    pub m: usize,
    /// Minimum number of observations per regime.
    pub min_regime: usize,
}

impl DPConfig {
    pub fn new(m: usize, min_regime: usize) -> Self {
        Self { m, min_regime }
    }

    /// Trimming `ceil(fraction * T)`, as in the classic 15% rule.
    pub fn trimmed(m: usize, t_len: usize, fraction: f64) -> Self {
        Self {
            m,
            min_regime: (fraction * t_len as f64).ceil() as usize,
        }
    }

    pub fn validate(&self, t_len: usize) -> Result<()> {
        if self.m == 0 || self.min_regime == 0 {
            return Err(Error::InvalidConfig(
                "m and min_regime must be at least 1".into(),
            ));
        }
        if (self.m + 1) * self.min_regime > t_len {
            return Err(Error::Infeasible(format!(
                "T = {t_len} cannot hold {} regimes of length {}",
                self.m + 1,
                self.min_regime
            )));
        }
        Ok(())
    }
}

/// Result of [`dp_segment_with_ssr`].
#[derive(Debug, Clone, PartialEq)]
pub struct DpSolution {
    pub breaks: BreakSet,
    pub ssr: f64,
}

/// Break set minimizing the segmented SSR over all segmentations with
/// `config.m` breaks and regimes of at least `config.min_regime`
/// observations. Ties go to the earliest breaks.
pub fn dp_segment(panel: &TimeSeriesPanel, config: &DPConfig) -> Result<BreakSet> {
    dp_segment_with_ssr(panel, config).map(|s| s.breaks)
}

pub fn dp_segment_with_ssr(panel: &TimeSeriesPanel, config: &DPConfig) -> Result<DpSolution> {
    let t_len = panel.t_len();
    config.validate(t_len)?;
    let z = build_scaled_regressors(panel, true).z;
    let p = z.nrows();
    if config.min_regime < p {
        return Err(Error::RegimeTooShort {
            regime: 0,
            len: config.min_regime,
            required: p,
        });
    }
    let table = SegmentTable::new(&z, panel.y(), config.min_regime);
    let (m, h) = (config.m, config.min_regime);

    // best[k][j]: minimal SSR of rows 0..j split into k + 1 regimes;
    // from[k][j]: start row of the last regime.
    let mut best = vec![vec![f64::INFINITY; t_len + 1]; m + 1];
    let mut from = vec![vec![0usize; t_len + 1]; m + 1];
    for j in h..=t_len {
        best[0][j] = table.get(0, j);
    }
    for k in 1..=m {
        let last = k == m;
        for j in ((k + 1) * h)..=t_len {
            if last && j != t_len {
                continue;
            }
            let mut value = f64::INFINITY;
            let mut arg = 0;
            for a in (k * h)..=(j - h) {
                let v = best[k - 1][a] + table.get(a, j);
                if v < value {
                    value = v;
                    arg = a;
                }
            }
            best[k][j] = value;
            from[k][j] = arg;
        }
    }
    let ssr = best[m][t_len];
    if !ssr.is_finite() {
        return Err(Error::Infeasible("no segmentation with finite SSR".into()));
    }
    let mut breaks = vec![0; m];
    let mut j = t_len;
    for k in (1..=m).rev() {
        let a = from[k][j];
        breaks[k - 1] = a + 1;
        j = a;
    }
    Ok(DpSolution {
        breaks: BreakSet::new(breaks, t_len)?,
        ssr,
    })
}

/// SSR of every segment `[a, j)` with admissible ends, stored per start.
struct SegmentTable {
    t_len: usize,
    h: usize,
    rows: Vec<Vec<f64>>,
}

impl SegmentTable {
    fn new(z: &DMatrix<f64>, y: &DMatrix<f64>, h: usize) -> Self {
        let (p, t_len) = z.shape();
        let q = y.nrows();
        let rows = (0..=t_len - h)
            .into_par_iter()
            .map(|a| {
                if a != 0 && a < h {
                    return Vec::new();
                }
                let mut gram = vec![0.0; p * p];
                let mut cross = vec![0.0; p * q];
                let mut yy = vec![0.0; q];
                let mut chol = vec![0.0; p * p];
                let mut v = vec![0.0; p];
                let mut out = Vec::with_capacity(t_len - a - h + 1);
                for t in a..t_len {
                    let zc = z.column(t);
                    for i in 0..p {
                        for k in 0..=i {
                            gram[i * p + k] += zc[i] * zc[k];
                        }
                        for e in 0..q {
                            cross[e * p + i] += zc[i] * y[(e, t)];
                        }
                    }
                    for e in 0..q {
                        yy[e] += y[(e, t)] * y[(e, t)];
                    }
                    let j = t + 1;
                    if j - a >= h {
                        let admissible_end = j == t_len || j + h <= t_len;
                        out.push(if admissible_end {
                            segment_ssr(&gram, &cross, &yy, p, &mut chol, &mut v)
                        } else {
                            f64::INFINITY
                        });
                    }
                }
                out
            })
            .collect();
        Self { t_len, h, rows }
    }

    fn get(&self, a: usize, j: usize) -> f64 {
        if j > self.t_len || j < a + self.h {
            return f64::INFINITY;
        }
        self.rows
            .get(a)
            .and_then(|r| r.get(j - a - self.h))
            .copied()
            .unwrap_or(f64::INFINITY)
    }
}

/// Median wall-times of the two-step estimator and the DP baseline at one
/// sample size.
#[derive(Debug, Clone, Serialize)]
pub struct RuntimeRow {
    pub t_len: usize,
    pub two_step: Duration,
    pub dp: Duration,
    /// `two_step / dp`.
    pub ratio: f64,
}

const RUNTIME_REPEATS: usize = 3;

/// Times both estimators on one simulated panel per sample size, single
/// threaded, reporting the median of three runs each.
pub fn runtime_compare(scenario: Scenario, sizes: &[usize], seed: u64) -> Result<Vec<RuntimeRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| {
        sizes
            .iter()
            .map(|&t_len| {
                let mut config = scenario_preset(scenario, t_len)?;
                config.seed = seed;
                let (panel, _) = simulate_dgp(&config)?;
                let m0 = scenario.n_breaks();
                let h = panel.group_dim() + 1;
                let two_step_config =
                    TwoStepConfig::new(crate::montecarlo::default_max_breaks(m0, h, t_len));
                let dp_config = DPConfig::new(m0, h);
                let two = median_time(|| two_step(&panel, &two_step_config).map(|_| ()))?;
                let dp = median_time(|| dp_segment(&panel, &dp_config).map(|_| ()))?;
                Ok(RuntimeRow {
                    t_len,
                    two_step: two,
                    dp,
                    ratio: two.as_secs_f64() / dp.as_secs_f64().max(f64::MIN_POSITIVE),
                })
            })
            .collect()
    })
}

fn median_time(mut f: impl FnMut() -> Result<()>) -> Result<Duration> {
    let mut times = Vec::with_capacity(RUNTIME_REPEATS);
    for _ in 0..RUNTIME_REPEATS {
        let start = Instant::now();
        f()?;
        times.push(start.elapsed());
    }
    times.sort();
    Ok(times[RUNTIME_REPEATS / 2])
}
