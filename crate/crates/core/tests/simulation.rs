use breakscan::estimator::{two_step, TwoStepConfig};
use breakscan::montecarlo::default_max_breaks;
use breakscan::sim::{regime_coefficients, scenario_preset, simulate_dgp, DgpConfig, Scenario, Variant};

fn lag1_autocorrelation(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var: f64 = v.iter().map(|x| (x - mean).powi(2)).sum();
    let cov: f64 = v.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    cov / var
}

#[test]
fn preset_shapes() {
    let c = scenario_preset(Scenario::SB1, 100).unwrap();
    assert_eq!((c.q, c.r, c.s, c.c), (2, 2, 2, 1.0));
    assert_eq!(c.break_fractions, vec![0.5]);
    assert_eq!(scenario_preset(Scenario::SB2, 300).unwrap().break_fractions, vec![0.33, 0.67]);
    assert_eq!(scenario_preset(Scenario::SB4, 250).unwrap().break_fractions, vec![0.2, 0.4, 0.6, 0.8]);
    assert_eq!(scenario_preset(Scenario::SB1Edge, 200).unwrap().break_indices(), vec![180]);
    assert!(scenario_preset(Scenario::SB4, 200).is_err());
    assert!("SB3".parse::<Scenario>().is_err());
}

#[test]
fn coefficient_recursion() {
    let c = DgpConfig::new(100, vec![0.5], 0);
    let a = regime_coefficients(&c, 1);
    assert_eq!((a[(0, 0)], a[(1, 1)], a[(0, 1)]), (4.0, 4.0, 0.0));
    assert_eq!((a[(0, 2)], a[(0, 3)]), (4.0, 2.0));
    assert_eq!((a[(0, 4)], a[(1, 5)], a[(1, 4)]), (4.0, 4.0, 0.0));
    let c2 = DgpConfig { c: 0.5, ..c };
    assert_eq!(regime_coefficients(&c2, 2)[(0, 0)], 4.0);

    let sur = DgpConfig::new(100, vec![0.5], 0).with_variant(Variant::Sur);
    let s = regime_coefficients(&sur, 1);
    assert_eq!(s.row(0).iter().copied().collect::<Vec<_>>(), vec![2.0, 4.0, 0.0]);
    let q3 = DgpConfig::new(100, vec![0.5], 0).with_variant(Variant::Q3);
    let m = regime_coefficients(&q3, 1);
    assert_eq!(m.nrows(), 3);
    // The third equation loads on the first integrated and stationary regressor.
    assert_eq!((m[(2, 0)], m[(2, 2)], m[(2, 4)]), (4.0, 4.0, 4.0));
}

#[test]
fn same_seed_is_bit_identical() {
    let c = scenario_preset(Scenario::SB4, 500).unwrap();
    let (a, ta) = simulate_dgp(&c).unwrap();
    let (b, tb) = simulate_dgp(&c).unwrap();
    assert_eq!(a, b);
    assert_eq!(ta, tb);
    let other = DgpConfig { seed: 1, ..c };
    assert_ne!(simulate_dgp(&other).unwrap().0, a);
}

#[test]
fn integrated_and_stationary_regressors() {
    let mut c = scenario_preset(Scenario::SB1, 2000).unwrap();
    c.seed = 8;
    let (panel, _) = simulate_dgp(&c).unwrap();
    for i in 0..panel.r() {
        let x = panel.x().row(i);
        let dx: Vec<f64> = (1..x.len()).map(|t| x[t] - x[t - 1]).collect();
        let n = dx.len() as f64;
        let mean = dx.iter().sum::<f64>() / n;
        let var = dx.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.1 && (var - 1.0).abs() < 0.15, "x{i}: {mean} {var}");
        assert!(lag1_autocorrelation(&dx).abs() < 0.1);
        assert!(lag1_autocorrelation(&x.iter().copied().collect::<Vec<_>>()) > 0.9);
    }
    for i in 0..panel.s() {
        let w: Vec<f64> = panel.w().row(i).iter().copied().collect();
        let rho = lag1_autocorrelation(&w);
        assert!((rho - 0.5).abs() < 0.1, "w{i}: {rho}");
    }
}

#[test]
fn variants_shape_the_panel() {
    let sur = scenario_preset(Scenario::SB2, 300).unwrap().with_variant(Variant::Sur);
    let (p, _) = simulate_dgp(&sur).unwrap();
    assert_eq!((p.q(), p.r(), p.include_trend(), p.group_dim()), (2, 0, false, 6));
    let q3 = scenario_preset(Scenario::SB2, 300).unwrap().with_variant(Variant::Q3);
    let (p, truth) = simulate_dgp(&q3).unwrap();
    assert_eq!((p.q(), p.group_dim()), (3, 18));
    assert_eq!(truth.coefficients.len(), 3);
}

fn recover(scenario: Scenario, variant: Variant, t_len: usize) -> Option<(Vec<usize>, Vec<usize>, f64)> {
    let mut c = scenario_preset(scenario, t_len).unwrap().with_variant(variant).noiseless();
    c.seed = t_len as u64;
    let (panel, truth) = simulate_dgp(&c).unwrap();
    let h = panel.group_dim() + 1;
    if truth.breaks.min_regime_len() < h {
        return None;
    }
    let mut config = TwoStepConfig::new(default_max_breaks(scenario.n_breaks(), h, t_len));
    config.min_distance = Some(h);
    let res = two_step(&panel, &config).unwrap();
    let err = if res.breaks() == &truth.breaks {
        res.fit
            .coefficients
            .iter()
            .zip(&truth.coefficients)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    Some((res.breaks().indices().to_vec(), truth.breaks.indices().to_vec(), err))
}

#[test]
fn noiseless_recovery_is_exact() {
    let mut skipped = Vec::new();
    for scenario in Scenario::all() {
        for variant in [Variant::Full, Variant::Sur, Variant::Q3] {
            for t_len in scenario.sample_ladder() {
                match recover(scenario, variant, t_len) {
                    None => skipped.push((scenario, variant, t_len)),
                    Some((found, truth, err)) => {
                        assert_eq!(found, truth, "{scenario} {variant} T={t_len}");
                        assert!(err < 1e-8, "{scenario} {variant} T={t_len}: coefficient error {err}");
                    }
                }
            }
        }
    }
    // Only the edge preset at T = 100 puts a regime below the minimum distance.
    assert!(skipped.iter().all(|(s, _, t)| *s == Scenario::SB1Edge && *t == 100), "{skipped:?}");
}
