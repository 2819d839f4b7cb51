mod common;

use breakscan::error::Error;
use breakscan::glasso::{group_lars_path, PathConfig};
use breakscan::model::{build_scaled_regressors, validate_panel, BreakSet, SelectionMask, TimeSeriesPanel};
use common::gaussian_panel;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn example_panel() -> TimeSeriesPanel {
    let t_len = 100;
    let mut x = DMatrix::zeros(2, t_len);
    let mut w = DMatrix::zeros(2, t_len);
    for t in 0..t_len {
        x[(0, t)] = t as f64 * 0.1;
        x[(1, t)] = 1.0;
        w[(0, t)] = 1.0;
        w[(1, t)] = 2.0;
    }
    x[(0, 49)] = 4.0;
    x[(1, 49)] = 9.0;
    TimeSeriesPanel::new(DMatrix::zeros(2, t_len), x, w, true, true).unwrap()
}

#[test]
fn scaled_regressor_column() {
    let z = build_scaled_regressors(&example_panel(), true);
    assert!(z.scaling_applied);
    let want = [0.4, 0.9, 0.5, 1.0, 1.0, 2.0];
    for (i, v) in want.iter().enumerate() {
        assert!((z.z[(i, 49)] - v).abs() < 1e-15, "row {i}");
    }
}

#[test]
fn raw_regressor_column() {
    let z = build_scaled_regressors(&example_panel(), false);
    assert!(!z.scaling_applied);
    assert_eq!(z.z.column(49).as_slice(), &[4.0, 9.0, 50.0, 1.0, 1.0, 2.0]);
}

#[test]
fn intercept_and_stationary_only() {
    let w = DMatrix::from_row_slice(1, 3, &[0.5, -1.0, 2.0]);
    let panel = TimeSeriesPanel::new(DMatrix::zeros(1, 3), DMatrix::zeros(0, 3), w, false, true).unwrap();
    let z = build_scaled_regressors(&panel, true).z;
    assert_eq!(z.nrows(), 2);
    assert_eq!(z.column(1).as_slice(), &[1.0, -1.0]);
}

#[test]
fn validation_errors_name_the_matrix() {
    let ok = gaussian_panel(2, 2, 2, 100, true, true, 1);
    assert!(validate_panel(&ok).is_ok());
    let (y, x, w, trend, intercept) = ok.into_parts();
    let short = TimeSeriesPanel::new(y.columns(0, 99).into_owned(), x.clone(), w.clone(), trend, intercept);
    assert!(matches!(short, Err(Error::DimensionMismatch { matrix: "X", .. })));
    let mut bad = y.clone();
    bad[(1, 7)] = f64::NAN;
    let nan = TimeSeriesPanel::new(bad, x, w, trend, intercept);
    assert_eq!(nan.unwrap_err(), Error::NonFinite { matrix: "Y", row: 1, col: 7 });
}

#[test]
fn group_dimension_matches_path_output() {
    for (q, r, s, trend) in [(2, 2, 2, true), (1, 0, 1, false), (3, 1, 0, true)] {
        let panel = gaussian_panel(q, r, s, 80, trend, true, 3);
        let d = panel.group_dim();
        assert_eq!(d, q * (r + usize::from(trend) + 1 + s));
        let res = group_lars_path(&panel, &PathConfig::new(2, d + 1)).unwrap();
        assert_eq!(res.theta_hat.ncols(), d);
        for knot in &res.knots {
            assert!(knot.theta.iter().all(|v| v.len() == d));
        }
    }
}

#[test]
fn all_true_mask_is_full() {
    let m = SelectionMask::all(2, 3);
    assert!(m.is_full());
    assert_eq!(m.count(), 6);
    assert!(SelectionMask::new(1, 2, vec![false, false]).is_err());
}

proptest! {
    #[test]
    fn break_sets_partition_the_sample(mut idx in proptest::collection::vec(2usize..=60, 0..8)) {
        idx.sort_unstable();
        idx.dedup();
        let b = BreakSet::new(idx.clone(), 60).unwrap();
        let regimes = b.regimes();
        prop_assert_eq!(regimes.len(), idx.len() + 1);
        prop_assert_eq!(regimes[0].start, 0);
        prop_assert_eq!(regimes.last().unwrap().end, 60);
        for (k, w) in regimes.windows(2).enumerate() {
            prop_assert_eq!(w[0].end, w[1].start);
            prop_assert_eq!(w[1].start + 1, idx[k]);
        }
        for (f, t) in b.fractions().iter().zip(&idx) {
            prop_assert!((f - *t as f64 / 60.0).abs() < 1e-15);
        }
    }

    #[test]
    fn unordered_indices_are_rejected(a in 2usize..50, b in 2usize..50) {
        prop_assume!(a >= b);
        prop_assert!(BreakSet::new(vec![a, b], 50).is_err());
    }
}
