//! Replicated simulation of the break estimators.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dp::{dp_segment, DPConfig};
use crate::error::{Error, Result};
use crate::estimator::{two_step, SelectionMethod, TwoStepConfig};
use crate::model::BreakSet;
use crate::selection::IcConfig;
use crate::sim::{scenario_preset, simulate_dgp, CoefficientScale, Scenario, Variant};

/// Directed Hausdorff distance `max_{b in B} min_{a in A} |b - a|` in
/// observations; 1 when either set is empty.
pub fn hausdorff_distance(a: &BreakSet, b: &BreakSet) -> f64 {
    directed(a.indices(), b.indices())
}

fn directed(a: &[usize], b: &[usize]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 1.0;
    }
    b.iter()
        .map(|&y| a.iter().map(|&x| x.abs_diff(y)).min().unwrap_or(0))
        .max()
        .unwrap_or(0) as f64
}

/// Candidate budget `M = 4 m0 + 3`, reduced until `(M + 1) h <= T`.
pub fn default_max_breaks(m0: usize, min_distance: usize, t_len: usize) -> usize {
    let cap = (t_len / min_distance.max(1)).saturating_sub(1);
    (4 * m0 + 3).min(cap).max(1)
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub t_len: usize,
    pub reps: usize,
    /// Master seed; replication `r` uses a seed derived from `(seed, r)`.
    pub seed: u64,
    pub variant: Variant,
    pub coefficient_scale: CoefficientScale,
    pub noiseless: bool,
    /// Defaults to [`default_max_breaks`].
    pub max_breaks: Option<usize>,
    pub min_distance: Option<usize>,
    pub ic: IcConfig,
    pub method: SelectionMethod,
    /// Also run the DP baseline with the true number of breaks.
    pub run_dp: bool,
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario, t_len: usize, reps: usize, seed: u64) -> Self {
        Self {
            scenario,
            t_len,
            reps,
            seed,
            variant: Variant::Full,
            coefficient_scale: CoefficientScale::Normalized,
            noiseless: false,
            max_breaks: None,
            min_distance: None,
            ic: IcConfig::default(),
            method: SelectionMethod::Backward,
            run_dp: false,
        }
    }

    pub fn replication_seed(&self, rep: usize) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(rep as u64);
        rng.next_u64()
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RuntimeStats {
    pub total_secs: f64,
    pub mean_secs: f64,
    pub median_secs: f64,
    pub max_secs: f64,
}

impl RuntimeStats {
    fn from_secs(mut secs: Vec<f64>) -> Self {
        if secs.is_empty() {
            return Self::default();
        }
        secs.sort_by(f64::total_cmp);
        let total: f64 = secs.iter().sum();
        let n = secs.len();
        let median = if n % 2 == 1 {
            secs[n / 2]
        } else {
            0.5 * (secs[n / 2 - 1] + secs[n / 2])
        };
        Self {
            total_secs: total,
            mean_secs: total / n as f64,
            median_secs: median,
            max_secs: secs[n - 1],
        }
    }
}

/// Location accuracy of the DP baseline given the true number of breaks.
#[derive(Debug, Clone, Serialize)]
pub struct DpSummary {
    pub tau_mean: Vec<f64>,
    pub tau_std: Vec<f64>,
    /// Percentage of replications with every break within two observations.
    pub within_two: f64,
    pub failures: usize,
    pub runtime: RuntimeStats,
}

#[derive(Debug, Clone, Serialize)]
pub struct MCReport {
    pub scenario: String,
    pub variant: String,
    pub t_len: usize,
    pub reps: usize,
    /// Percentage of replications with the correct number of breaks.
    pub pce: f64,
    pub break_counts: BTreeMap<usize, usize>,
    /// Per true break, over replications with the correct number of breaks.
    pub tau_mean: Vec<f64>,
    pub tau_std: Vec<f64>,
    /// Mean of `d_H(estimate, truth) / T` (1 for an empty estimate).
    pub hausdorff_mean: f64,
    /// Mean of `d_H(truth, estimate) / T`.
    pub hausdorff_reverse_mean: f64,
    /// Replications where the estimator returned an error; they count as
    /// incorrect.
    pub failures: usize,
    pub runtime: RuntimeStats,
    pub dp: Option<DpSummary>,
}

struct Replication {
    truth: Vec<usize>,
    estimate: Option<Vec<usize>>,
    secs: f64,
    dp: Option<(Option<Vec<usize>>, f64)>,
}

/// Runs `config.reps` independent replications (in parallel) and
/// aggregates them in replication order.
pub fn run_scenario(config: &ScenarioConfig) -> Result<MCReport> {
    if config.reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    let mut base = scenario_preset(config.scenario, config.t_len)?.with_variant(config.variant);
    base.coefficient_scale = config.coefficient_scale;
    if config.noiseless {
        base = base.noiseless();
    }
    base.validate()?;
    config.ic.validate()?;
    let t_len = config.t_len;
    let m0 = config.scenario.n_breaks();

    let reps: Vec<Replication> = (0..config.reps)
        .into_par_iter()
        .map(|rep| {
            let mut dgp = base.clone();
            dgp.seed = config.replication_seed(rep);
            let truth = dgp.break_indices();
            let Ok((panel, _)) = simulate_dgp(&dgp) else {
                return Replication {
                    truth,
                    estimate: None,
                    secs: 0.0,
                    dp: config.run_dp.then_some((None, 0.0)),
                };
            };
            let mut two = TwoStepConfig::new(0);
            two.min_distance = config.min_distance;
            let h = two.effective_min_distance(&panel);
            two.max_breaks = config
                .max_breaks
                .unwrap_or_else(|| default_max_breaks(m0, h, t_len));
            two.ic = config.ic;
            two.method = config.method;
            let start = Instant::now();
            let estimate = two_step(&panel, &two)
                .ok()
                .map(|r| r.breaks().indices().to_vec());
            let secs = start.elapsed().as_secs_f64();
            let dp = config.run_dp.then(|| {
                let start = Instant::now();
                let b = dp_segment(&panel, &DPConfig::new(m0, h))
                    .ok()
                    .map(|b| b.indices().to_vec());
                (b, start.elapsed().as_secs_f64())
            });
            Replication {
                truth,
                estimate,
                secs,
                dp,
            }
        })
        .collect();

    let t = t_len as f64;
    let mut counts = BTreeMap::new();
    let mut correct: Vec<Vec<f64>> = vec![Vec::new(); m0];
    let (mut hd, mut hd_rev) = (0.0, 0.0);
    let mut failures = 0;
    for r in &reps {
        match &r.estimate {
            None => {
                failures += 1;
                hd += 1.0;
                hd_rev += 1.0;
            }
            Some(est) => {
                *counts.entry(est.len()).or_insert(0) += 1;
                if est.len() == m0 {
                    for (k, &b) in est.iter().enumerate() {
                        correct[k].push(b as f64 / t);
                    }
                }
                hd += normalized(directed(est, &r.truth), est.is_empty(), t);
                hd_rev += normalized(directed(&r.truth, est), est.is_empty(), t);
            }
        }
    }
    let n = reps.len() as f64;
    let n_correct = counts.get(&m0).copied().unwrap_or(0);
    let (tau_mean, tau_std) = moments(&correct);

    let dp = config.run_dp.then(|| {
        let mut located: Vec<Vec<f64>> = vec![Vec::new(); m0];
        let mut within = 0;
        let mut dp_failures = 0;
        let mut secs = Vec::new();
        for r in &reps {
            let Some((est, s)) = &r.dp else { continue };
            secs.push(*s);
            match est {
                None => dp_failures += 1,
                Some(est) => {
                    for (k, &b) in est.iter().enumerate() {
                        located[k].push(b as f64 / t);
                    }
                    if est.iter().zip(&r.truth).all(|(a, b)| a.abs_diff(*b) <= 2) {
                        within += 1;
                    }
                }
            }
        }
        let (tau_mean, tau_std) = moments(&located);
        DpSummary {
            tau_mean,
            tau_std,
            within_two: 100.0 * within as f64 / n,
            failures: dp_failures,
            runtime: RuntimeStats::from_secs(secs),
        }
    });

    Ok(MCReport {
        scenario: config.scenario.to_string(),
        variant: config.variant.to_string(),
        t_len,
        reps: config.reps,
        pce: 100.0 * n_correct as f64 / n,
        break_counts: counts,
        tau_mean,
        tau_std,
        hausdorff_mean: hd / n,
        hausdorff_reverse_mean: hd_rev / n,
        failures,
        runtime: RuntimeStats::from_secs(reps.iter().map(|r| r.secs).collect()),
        dp,
    })
}

fn normalized(d: f64, empty: bool, t: f64) -> f64 {
    if empty {
        1.0
    } else {
        d / t
    }
}

/// Mean and sample standard deviation per column; NaN for empty columns,
/// zero spread for a single value.
fn moments(cols: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    cols.iter()
        .map(|v| {
            if v.is_empty() {
                return (f64::NAN, f64::NAN);
            }
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            if v.len() < 2 {
                return (mean, 0.0);
            }
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean, var.sqrt())
        })
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directed_distance_examples() {
        let a = BreakSet::new(vec![12], 30).unwrap();
        let b = BreakSet::new(vec![10, 20], 30).unwrap();
        assert_eq!(hausdorff_distance(&a, &b), 8.0);
        assert_eq!(hausdorff_distance(&b, &b), 0.0);
        assert_eq!(hausdorff_distance(&BreakSet::empty(30), &BreakSet::new(vec![5], 30).unwrap()), 1.0);
    }

    #[test]
    fn budget_respects_sample_size() {
        assert_eq!(default_max_breaks(1, 13, 100), 6);
        assert_eq!(default_max_breaks(1, 13, 400), 7);
        assert_eq!(default_max_breaks(4, 13, 250), 18);
    }

    #[test]
    fn replication_seeds_differ() {
        let c = ScenarioConfig::new(Scenario::SB1, 100, 3, 9);
        assert_ne!(c.replication_seed(0), c.replication_seed(1));
        assert_eq!(c.replication_seed(2), c.replication_seed(2));
    }
}
