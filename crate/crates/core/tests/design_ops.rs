mod common;

use breakscan::design::{group_correlations, suffix_gram, SuffixCache};
use breakscan::model::{build_scaled_regressors, SelectionMask};
use common::{dense_design, gaussian_panel};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_residuals(q: usize, t_len: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(q, t_len, |_, _| rng.sample(StandardNormal))
}

fn stacked(u: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(u.len(), (0..u.ncols()).flat_map(|t| (0..u.nrows()).map(move |e| u[(e, t)])))
}

#[test]
fn correlations_match_dense_design() {
    for (seed, (q, r, s, trend, intercept)) in [(2, 1, 1, true, true), (1, 0, 2, false, true), (3, 2, 0, true, false)]
        .into_iter()
        .enumerate()
    {
        for t_len in [5, 20, 30] {
            let panel = gaussian_panel(q, r, s, t_len, trend, intercept, seed as u64);
            let u = random_residuals(q, t_len, 100 + seed as u64);
            let fast = group_correlations(&panel, &u, None).unwrap();
            let x = dense_design(&panel);
            let dense = x.transpose() * stacked(&u);
            let d = panel.group_dim();
            for j in 0..t_len {
                for c in 0..d {
                    let want = dense[j * d + c];
                    assert!((fast[(j, c)] - want).abs() <= 1e-10 * (1.0 + want.abs()), "T={t_len} j={j} c={c}");
                }
            }
        }
    }
}

#[test]
fn masked_correlations_zero_the_fixed_coordinates() {
    let panel = gaussian_panel(2, 1, 1, 20, false, true, 4);
    let u = random_residuals(2, 20, 5);
    let mask = SelectionMask::new(2, 3, vec![true, false, true, false, true, true]).unwrap();
    let full = group_correlations(&panel, &u, None).unwrap();
    let masked = group_correlations(&panel, &u, Some(&mask)).unwrap();
    for c in 0..6 {
        assert_eq!(masked[(0, c)], full[(0, c)]);
        let keep = mask.get(c / 3, c % 3);
        for j in 1..20 {
            assert_eq!(masked[(j, c)], if keep { full[(j, c)] } else { 0.0 });
        }
    }
}

#[test]
fn suffix_grams_match_direct_sums() {
    let panel = gaussian_panel(2, 2, 1, 15, true, true, 9);
    let z = build_scaled_regressors(&panel, true).z;
    for k in 1..=15 {
        let mut want = DMatrix::zeros(z.nrows(), z.nrows());
        for t in (k - 1)..15 {
            want += z.column(t) * z.column(t).transpose();
        }
        let got = suffix_gram(&panel, k).unwrap();
        assert!((&got - &want).amax() <= 1e-12 * want.amax().max(1.0), "k={k}");
    }
    assert!(suffix_gram(&panel, 0).is_err());
    assert!(suffix_gram(&panel, 16).is_err());
}

#[test]
fn compensated_accumulation_agrees() {
    let panel = gaussian_panel(2, 1, 2, 30, true, true, 12);
    let u = random_residuals(2, 30, 13);
    let cache = SuffixCache::new(&panel, true);
    let plain = cache.group_correlations(&u, None).unwrap();
    let comp = cache.group_correlations_with(&u, None, true).unwrap();
    assert!((&plain - &comp).amax() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn correlations_telescope(seed in 0u64..1000, t_len in 2usize..40, q in 1usize..4) {
        let panel = gaussian_panel(q, 1, 1, t_len, true, true, seed);
        let u = random_residuals(q, t_len, seed + 1);
        let corr = group_correlations(&panel, &u, None).unwrap();
        let z = build_scaled_regressors(&panel, true).z;
        let p = z.nrows();
        for k in 0..t_len {
            for e in 0..q {
                for i in 0..p {
                    let next = if k + 1 < t_len { corr[(k + 1, e * p + i)] } else { 0.0 };
                    let diff = corr[(k, e * p + i)] - next;
                    prop_assert!((diff - z[(i, k)] * u[(e, k)]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn first_suffix_gram_is_full_gram(seed in 0u64..1000, t_len in 1usize..50) {
        let panel = gaussian_panel(1, 2, 1, t_len, true, true, seed);
        let z = build_scaled_regressors(&panel, true).z;
        let g = suffix_gram(&panel, 1).unwrap();
        let full = &z * z.transpose();
        prop_assert!((&g - &full).amax() <= 1e-12 * full.amax().max(1.0));
        prop_assert!((&g - g.transpose()).amax() == 0.0);
        prop_assert!(g.clone().symmetric_eigenvalues().min() >= -1e-10 * full.amax().max(1.0));
    }
}
