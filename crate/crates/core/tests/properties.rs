mod support;

use proptest::prelude::*;

use repscope_core::activation_stats::{detect_outlier_features, kurtosis};
use repscope_core::checkpoint_interp::interpolate;
use repscope_core::cka::cka;
use repscope_core::concept_probe::average_precision;
use repscope_core::data_model::{CheckpointTensorMap, DType, Matrix, Tensor};
use repscope_core::head_analysis::{prune_count, projection_outliers, svd_head, DEFAULT_RANK_TOL};
use repscope_core::zeroshot::{inv_logit, logit};

use support::{acts, head, oracle};

/// Rows of `d` values bounded away from being constant.
fn matrix(rows: usize, d: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-10.0f64..10.0, rows * d).prop_filter_map("constant row", move |data| {
        let m = Matrix::new(rows, d, data).ok()?;
        let varied = m.rows().all(|r| {
            let (lo, hi) = r.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
            hi - lo > 1e-3
        });
        varied.then_some(m)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kurtosis_matches_two_pass_oracle(m in matrix(5, 12)) {
        let k = kurtosis(&acts(m.clone()), true).unwrap();
        for (got, row) in k.per_sample.unwrap().iter().zip(m.rows()) {
            let want = oracle::row_kurtosis(row);
            prop_assert!((got - want).abs() <= 1e-9 * want);
        }
    }

    #[test]
    fn kurtosis_is_shift_and_scale_invariant(m in matrix(4, 16), a in 0.01f64..100.0, b in -50.0f64..50.0) {
        let base = kurtosis(&acts(m.clone()), false).unwrap().mean_kurtosis;
        let moved = kurtosis(&acts(m.map(|x| a * x + b)), false).unwrap().mean_kurtosis;
        prop_assert!((base - moved).abs() <= 1e-9 * base, "{base} vs {moved}");
    }

    #[test]
    fn higher_threshold_never_adds_outliers(m in matrix(6, 20), z1 in 0.5f64..4.0, dz in 0.0f64..3.0) {
        let a = acts(m);
        let low = detect_outlier_features(&a, z1).unwrap();
        let high = detect_outlier_features(&a, z1 + dz).unwrap();
        for (l, h) in low.outlier_coords.iter().zip(&high.outlier_coords) {
            prop_assert!(h.iter().all(|c| l.contains(c)));
        }
        for (fl, fh) in low.frequency.iter().zip(&high.frequency) {
            prop_assert!(fh <= fl);
        }
    }

    #[test]
    fn identity_projection_matches_canonical(m in matrix(6, 10), z in 0.5f64..3.0) {
        let a = acts(m);
        let canonical = detect_outlier_features(&a, z).unwrap();
        let projected = projection_outliers(&a, &Matrix::identity(10), z).unwrap();
        prop_assert_eq!(canonical, projected);
    }

    #[test]
    fn singular_values_scale_with_the_head(m in matrix(4, 7), c in 0.01f64..100.0) {
        let s1 = svd_head(&head(m.clone()), DEFAULT_RANK_TOL).unwrap();
        let s2 = svd_head(&head(m.map(|x| c * x)), DEFAULT_RANK_TOL).unwrap();
        prop_assert_eq!(s1.rank(), s2.rank());
        for (a, b) in s1.singular_values.iter().zip(&s2.singular_values) {
            prop_assert!((c * a - b).abs() <= 1e-12 * b.max(1.0) * c.max(1.0));
        }
    }

    #[test]
    fn ap_matches_oracle_and_ignores_monotone_maps(
        scores in prop::collection::vec(-5i32..5, 2..40),
        mask in prop::collection::vec(any::<bool>(), 40),
        shift in -3.0f64..3.0,
        scale in 0.1f64..5.0,
    ) {
        let s: Vec<f64> = scores.iter().map(|&x| x as f64 / 2.0).collect();
        let mut labels: Vec<bool> = mask[..s.len()].to_vec();
        labels[0] = true;
        let ap = average_precision(&s, &labels).unwrap();
        prop_assert!(ap > 0.0 && ap <= 1.0);
        prop_assert!((ap - oracle::average_precision(&s, &labels)).abs() <= 1e-12);
        let mapped: Vec<f64> = s.iter().map(|x| (scale * x + shift).exp()).collect();
        prop_assert_eq!(average_precision(&mapped, &labels).unwrap(), ap);
    }

    #[test]
    fn cka_is_bounded_and_matches_gram_form(a in matrix(12, 5), b in matrix(12, 3)) {
        let v = cka(&acts(a.clone()), &acts(b.clone())).unwrap().value;
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
        prop_assert!((v - oracle::cka_gram(&a, &b)).abs() <= 1e-10);
    }

    #[test]
    fn interpolation_is_symmetric_in_alpha(
        x in prop::collection::vec(-100.0f64..100.0, 6),
        y in prop::collection::vec(-100.0f64..100.0, 6),
        alpha in 0.0f64..=1.0,
    ) {
        let map = |data: Vec<f64>| {
            let mut m = CheckpointTensorMap::default();
            m.insert("w", Tensor::new(vec![2, 3], DType::F64, data).unwrap()).unwrap();
            m
        };
        let (t0, t1) = (map(x), map(y));
        let forward = interpolate(&t0, &t1, alpha).unwrap();
        let backward = interpolate(&t1, &t0, 1.0 - alpha).unwrap();
        for (p, q) in forward.entries["w"].data.iter().zip(&backward.entries["w"].data) {
            prop_assert!((p - q).abs() <= 1e-12 * p.abs().max(1.0));
        }
    }

    #[test]
    fn logit_round_trips(x in 1e-6f64..(1.0 - 1e-6)) {
        prop_assert!((inv_logit(logit(x)) - x).abs() <= 1e-12);
    }

    #[test]
    fn prune_count_is_floor_of_exact_products(k in 0usize..=100, n in 1usize..300) {
        let p = k as f64 / 100.0;
        prop_assert_eq!(prune_count(p, n), k * n / 100);
    }
}
