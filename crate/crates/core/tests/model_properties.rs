use nalgebra::DMatrix;
use proptest::prelude::*;
use sparsereg::model::{build_problem, pairwise_moments, standardize, DesignData, Method};

fn matrix(n: usize, d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-3.0f64..3.0, n * d).prop_map(move |v| DMatrix::from_vec(n, d, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pairwise_moments_match_dense_on_complete_columns(x in matrix(12, 4), y in prop::collection::vec(-3.0f64..3.0, 12)) {
        let dense = pairwise_moments(&DesignData::new(x.clone(), Some(y.clone())).unwrap()).unwrap();
        // a missing response forces the pairwise path while every column stays complete
        let mut y_mask = vec![false; 12];
        y_mask[0] = true;
        let masked = DesignData::with_missing(x, DMatrix::from_element(12, 4, false), Some(y), Some(y_mask)).unwrap();
        let pairwise = pairwise_moments(&masked).unwrap();
        for (a, b) in dense.gram.iter().zip(pairwise.gram.iter()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        for (a, b) in dense.cov.iter().zip(pairwise.cov.iter()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        for (a, b) in dense.corr.iter().zip(pairwise.corr.iter()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn dantzig_operator_matches_materialized_gram(n in 3usize..10, d in 1usize..20, seed in any::<u64>()) {
        let x = DMatrix::from_fn(n, d, |i, j| ((seed.wrapping_add((i * 31 + j * 7) as u64) % 1000) as f64) / 250.0 - 2.0);
        let y: Vec<f64> = (0..n).map(|i| i as f64 - 1.5).collect();
        let data = DesignData::new(x.clone(), Some(y)).unwrap();
        let spec = build_problem(&data, Method::Dantzig, 0.1).unwrap();
        let v: Vec<f64> = (0..d).map(|j| (j as f64 * 0.37).sin()).collect();
        let mut out = vec![0.0; d];
        spec.op().apply(&v, &mut out);
        let explicit = x.tr_mul(&(&x * nalgebra::DVector::from_vec(v))) / n as f64;
        for j in 0..d {
            prop_assert!((out[j] - explicit[j]).abs() <= 1e-10);
        }
    }

    #[test]
    fn standardize_is_idempotent(x in matrix(10, 3), y in prop::collection::vec(-3.0f64..3.0, 10)) {
        let data = DesignData::new(x, Some(y)).unwrap();
        if let Ok(once) = standardize(&data, true, true) {
            let twice = standardize(&once, true, true).unwrap();
            for (a, b) in once.x().iter().zip(twice.x().iter()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            for (a, b) in once.y().unwrap().iter().zip(twice.y().unwrap()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
