mod common;

use breakscan::glasso::{group_lars_path, kkt_verify_with, KktOptions, PathConfig};
use common::{dense_design, dense_group_lasso, objective, stacked_response, toy_panel};
use breakscan::montecarlo::default_max_breaks;
use breakscan::sim::{scenario_preset, simulate_dgp, DgpConfig, Scenario, Variant};
use nalgebra::DVector;

fn options(penalize_baseline: bool, skip: Vec<usize>) -> KktOptions {
    KktOptions {
        skip,
        penalize_baseline,
        ..KktOptions::default()
    }
}

#[test]
fn every_knot_satisfies_kkt_on_toy_problems() {
    for penalize in [false, true] {
        for q in [1, 2] {
            for seed in 0..5 {
                let panel = toy_panel(q, 40, seed);
                let config = PathConfig::new(6, 1).with_penalized_baseline(penalize);
                let res = group_lars_path(&panel, &config).unwrap();
                assert!(res.knots.len() >= 2);
                for k in 1..res.knots.len() {
                    let theta = res.theta_at(k);
                    let report =
                        kkt_verify_with(&panel, &theta, res.knots[k].lambda, 1e-6, &options(penalize, vec![])).unwrap();
                    assert!(
                        report.passed,
                        "penalize={penalize} q={q} seed={seed} knot={k}: inactive {} align {}",
                        report.max_inactive_slack, report.max_alignment_error
                    );
                }
            }
        }
    }
}

#[test]
fn knots_match_dense_block_descent() {
    for penalize in [false, true] {
        for q in [1, 2] {
            let panel = toy_panel(q, 24, 11 + q as u64);
            let config = PathConfig::new(4, 1).with_penalized_baseline(penalize);
            let res = group_lars_path(&panel, &config).unwrap();
            let x = dense_design(&panel);
            let y = stacked_response(&panel);
            let d = panel.group_dim();
            for k in 1..res.knots.len() {
                let lambda = res.knots[k].lambda;
                let oracle = dense_group_lasso(&panel, lambda, &[], 200_000, !penalize);
                let path = DVector::from_iterator(oracle.len(), res.theta_at(k).transpose().iter().copied());
                let f_path = objective(&x, &y, &path, d, lambda, panel.t_len(), !penalize);
                let f_oracle = objective(&x, &y, &oracle, d, lambda, panel.t_len(), !penalize);
                assert!(f_path <= f_oracle + 1e-9 * f_oracle.abs(), "knot {k}: {f_path} vs {f_oracle}");
                assert!((&path - &oracle).amax() < 1e-4, "knot {k}: {}", (&path - &oracle).amax());
            }
        }
    }
}

#[test]
fn lambda_trace_decreases_and_stops_at_budget() {
    let panel = toy_panel(2, 60, 3);
    let res = group_lars_path(&panel, &PathConfig::new(3, 5)).unwrap();
    for w in res.lambda_trace.windows(2) {
        assert!(w[1] < w[0]);
    }
    assert!(res.candidates.len() <= 3);
    let idx = res.candidates.indices();
    for w in idx.windows(2) {
        assert!(w[1] - w[0] >= 5);
    }
    assert!(res.kkt_report.passed);
    let last = res.knots.len() - 1;
    let blocked: Vec<usize> = (1..=60).filter(|j| res.kkt_report.skipped[j - 1]).collect();
    let report = kkt_verify_with(&panel, &res.theta_at(last), res.knots[last].lambda, 1e-6, &options(false, blocked)).unwrap();
    assert!(report.passed);
}

#[test]
fn kkt_oracle_on_one_hundred_toys() {
    let failures: Vec<String> = (0..100).filter_map(|s| common::kkt_oracle_case(s).err()).collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn zero_solution_is_optimal_for_large_penalty() {
    let panel = toy_panel(2, 30, 5);
    let theta = nalgebra::DMatrix::zeros(30, panel.group_dim());
    let corr = breakscan::design::group_correlations(&panel, panel.y(), None).unwrap();
    let max = (0..30).map(|j| corr.row(j).norm()).fold(0.0, f64::max);
    let lambda = 2.0 * max / 30.0 * 1.01;
    assert!(kkt_verify_with(&panel, &theta, lambda, 1e-6, &KktOptions::penalized()).unwrap().passed);
    assert!(kkt_verify_with(&panel, &theta, -1.0, 1e-6, &KktOptions::penalized()).is_err());
}

#[test]
fn perturbed_solution_fails() {
    let panel = toy_panel(1, 30, 6);
    let res = group_lars_path(&panel, &PathConfig::new(3, 1)).unwrap();
    let k = res.knots.len() - 1;
    let mut theta = res.theta_at(k);
    let opts = options(false, vec![]);
    assert!(kkt_verify_with(&panel, &theta, res.knots[k].lambda, 1e-6, &opts).unwrap().passed);
    // The group with the largest coefficients; a group entering at the
    // knot itself is still zero there.
    let g = (1..30).max_by(|&a, &b| theta.row(a).norm().total_cmp(&theta.row(b).norm())).unwrap();
    theta[(g, 0)] *= 1.1;
    let report = kkt_verify_with(&panel, &theta, res.knots[k].lambda, 1e-6, &opts).unwrap();
    assert!(!report.passed);
    assert!(report.max_alignment_error > 1e-6);
}

#[test]
fn ssr_is_non_increasing_along_the_path() {
    for seed in 0..10 {
        let panel = common::gaussian_panel(2, 1, 1, 120, true, true, seed);
        let res = group_lars_path(&panel, &PathConfig::new(6, 9)).unwrap();
        for w in res.knots.windows(2) {
            assert!(w[1].ssr <= w[0].ssr * (1.0 + 1e-12), "seed {seed}");
        }
        let idx = res.candidates.indices();
        assert!(idx.len() <= 6);
        for w in idx.windows(2) {
            assert!(w[1] - w[0] >= 9);
        }
        assert!(idx.iter().all(|&t| t > 9 && t + 9 <= 121));
    }
}

#[test]
fn noiseless_break_is_a_candidate() {
    let config = DgpConfig::new(100, vec![0.5], 1).noiseless();
    let (panel, _) = simulate_dgp(&config).unwrap();
    let res = group_lars_path(&panel, &PathConfig::new(3, panel.group_dim() + 1)).unwrap();
    assert!(res.candidates.indices().contains(&50), "{:?}", res.candidates);
}

#[test]
fn noiseless_single_break_enters_first() {
    for variant in [Variant::Full, Variant::Sur, Variant::Q3] {
        for t_len in Scenario::SB1.sample_ladder() {
            let config = scenario_preset(Scenario::SB1, t_len).unwrap().with_variant(variant).noiseless();
            let (panel, truth) = simulate_dgp(&config).unwrap();
            let res = group_lars_path(&panel, &PathConfig::new(3, panel.group_dim() + 1)).unwrap();
            let first = res.knots.iter().map(|k| k.entered).find(|&g| g != 1).unwrap();
            assert_eq!(first, truth.breaks.indices()[0], "{variant} T={t_len}");
        }
    }
}

#[test]
fn noiseless_candidates_cover_every_break() {
    for scenario in Scenario::all() {
        for variant in [Variant::Full, Variant::Sur, Variant::Q3] {
            for t_len in scenario.sample_ladder() {
                let config = scenario_preset(scenario, t_len).unwrap().with_variant(variant).noiseless();
                let (panel, truth) = simulate_dgp(&config).unwrap();
                let m0 = scenario.n_breaks();
                let h = panel.group_dim() + 1;
                let res = group_lars_path(&panel, &PathConfig::new(default_max_breaks(m0, h, t_len), h)).unwrap();
                for b in truth.breaks.indices() {
                    assert!(
                        res.candidates.indices().iter().any(|c| c.abs_diff(*b) < h),
                        "{scenario} {variant} T={t_len}: {b} not covered by {:?}",
                        res.candidates
                    );
                }
            }
        }
    }
}

#[test]
fn candidates_cover_the_break_more_often_with_more_data() {
    let mut shares = Vec::new();
    for t_len in [100, 200, 400] {
        let mut hits = 0;
        for seed in 0..200 {
            let mut config = scenario_preset(Scenario::SB1, t_len).unwrap();
            config.seed = 90_000 + seed;
            let (panel, truth) = simulate_dgp(&config).unwrap();
            let h = panel.group_dim() + 1;
            let res = group_lars_path(&panel, &PathConfig::new(default_max_breaks(1, h, t_len), h)).unwrap();
            let b = truth.breaks.indices()[0];
            if res.candidates.indices().iter().any(|&c| c.abs_diff(b) <= h) {
                hits += 1;
            }
        }
        shares.push(hits as f64 / 200.0);
    }
    assert!(shares.windows(2).all(|w| w[1] >= w[0]), "{shares:?}");
    assert!(shares[2] >= 0.98, "{shares:?}");
}
