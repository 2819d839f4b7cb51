use breakscan::model::BreakSet;
use breakscan::montecarlo::{hausdorff_distance, run_scenario, ScenarioConfig};
use breakscan::sim::{Scenario, Variant};
use proptest::prelude::*;

#[test]
fn noiseless_cells_are_perfect() {
    for (scenario, t_len) in [(Scenario::SB1, 200), (Scenario::SB2, 300), (Scenario::SB4, 500)] {
        let mut config = ScenarioConfig::new(scenario, t_len, 8, 3);
        config.noiseless = true;
        let report = run_scenario(&config).unwrap();
        assert_eq!(report.pce, 100.0, "{scenario}");
        assert_eq!(report.hausdorff_mean, 0.0);
        assert_eq!(report.hausdorff_reverse_mean, 0.0);
        assert_eq!(report.failures, 0);
        for (m, f) in report.tau_mean.iter().zip(scenario.fractions()) {
            assert!((m - f).abs() < 0.005);
        }
    }
}

#[test]
fn reports_are_reproducible() {
    let mut config = ScenarioConfig::new(Scenario::SB1, 100, 12, 7);
    config.run_dp = true;
    let a = run_scenario(&config).unwrap();
    let b = run_scenario(&config).unwrap();
    assert_eq!(a.pce, b.pce);
    assert_eq!(a.break_counts, b.break_counts);
    assert_eq!(a.tau_mean, b.tau_mean);
    assert_eq!(a.hausdorff_mean, b.hausdorff_mean);
    let dp = a.dp.as_ref().unwrap();
    assert_eq!(dp.tau_mean, b.dp.as_ref().unwrap().tau_mean);
    assert_eq!(a.break_counts.values().sum::<usize>() + a.failures, 12);
    assert!((0.0..=100.0).contains(&a.pce));
    let json = serde_json::to_value(&a).unwrap();
    assert_eq!(json["scenario"], "SB1");
    assert_eq!(json["reps"], 12);
}

#[test]
fn variants_run() {
    for variant in [Variant::Sur, Variant::Q3] {
        let mut config = ScenarioConfig::new(Scenario::SB1, 200, 4, 1);
        config.variant = variant;
        let report = run_scenario(&config).unwrap();
        assert_eq!(report.variant, variant.to_string());
        assert_eq!(report.reps, 4);
    }
}

#[test]
fn zero_reps_are_rejected() {
    assert!(run_scenario(&ScenarioConfig::new(Scenario::SB1, 100, 0, 1)).is_err());
}

proptest! {
    #[test]
    fn hausdorff_properties(mut a in proptest::collection::vec(2usize..=100, 1..6), mut b in proptest::collection::vec(2usize..=100, 1..6)) {
        a.sort_unstable();
        a.dedup();
        b.sort_unstable();
        b.dedup();
        let sa = BreakSet::new(a.clone(), 100).unwrap();
        let sb = BreakSet::new(b.clone(), 100).unwrap();
        prop_assert_eq!(hausdorff_distance(&sa, &sa), 0.0);
        let d = hausdorff_distance(&sa, &sb);
        prop_assert!(d >= 0.0 && d <= 98.0);
        // Every point of B lies within d of A.
        for y in &b {
            prop_assert!(a.iter().any(|x| (x.abs_diff(*y) as f64) <= d));
        }
        prop_assert_eq!(hausdorff_distance(&BreakSet::empty(100), &sb), 1.0);
    }
}

#[test]
fn precision_improves_with_sample_size() {
    let reports: Vec<_> = [100, 200, 400]
        .iter()
        .map(|&t| run_scenario(&ScenarioConfig::new(Scenario::SB1, t, 200, 1)).unwrap())
        .collect();
    let inversions: Vec<f64> = reports.windows(2).map(|w| w[0].pce - w[1].pce).filter(|d| *d > 0.0).collect();
    assert!(inversions.len() <= 1 && inversions.iter().all(|d| *d <= 2.0), "{inversions:?}");
    for w in reports.windows(2) {
        let ratio = w[0].tau_std[0] / w[1].tau_std[0];
        assert!((1.5..=3.5).contains(&ratio), "T={}: ratio {ratio}", w[0].t_len);
    }
}
