use nalgebra::DMatrix;
use proptest::prelude::*;
use sparsereg::admm::{dual_update, solve, AdmmState, InnerSolver, SolverConfig, Termination};
use sparsereg::model::{build_problem, DesignData, Method};
use sparsereg::simulate::{gen_regression, Ar1Design};

fn instance(seed: u64) -> DesignData {
    gen_regression(&Ar1Design::new(30, 20, 0.5, seed)).unwrap()
}

#[test]
fn dual_update_is_the_formula_bitwise() {
    let data = instance(1);
    let spec = build_problem(&data, Method::SQRT, 0.3).unwrap();
    let mut state = AdmmState::zeros(&spec, 1.0);
    state.beta = (0..20).map(|j| (j as f64 * 0.1).cos() * 0.2).collect();
    state.alpha = (0..30).map(|i| (i as f64).sin()).collect();
    state.u = (0..30).map(|i| 0.01 * i as f64).collect();
    let mut ab = vec![0.0; 30];
    spec.op().apply(&state.beta, &mut ab);
    let expect: Vec<f64> = (0..30)
        .map(|i| state.u[i] + (spec.r()[i] - state.alpha[i] - ab[i]))
        .collect();
    assert_eq!(dual_update(&state, &spec).unwrap(), expect);
}

#[test]
fn solve_is_deterministic() {
    let data = instance(2);
    let spec = build_problem(&data, Method::LAD, 0.2).unwrap();
    let config = SolverConfig {
        record_trace: true,
        max_iter: 500,
        ..SolverConfig::default()
    };
    let a = solve(&spec, &config, None).unwrap();
    let b = solve(&spec, &config, None).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn termination_and_boundedness(seed in 0u64..1000, q in prop::sample::select(vec![1.0, 1.5, 2.0]), cd in any::<bool>(), dantzig in any::<bool>()) {
        let data = instance(seed);
        let method = if dantzig { Method::Dantzig } else { Method::lq(q).unwrap() };
        let top = sparsereg::path::lambda_max(&data, method).unwrap();
        let spec = build_problem(&data, method, 0.5 * top).unwrap();
        let config = SolverConfig {
            inner: if cd { InnerSolver::CoordinateDescent } else { InnerSolver::Linearized },
            max_iter: 3000,
            record_trace: true,
            ..SolverConfig::default()
        };
        let state = solve(&spec, &config, None).unwrap();
        if state.termination != Termination::MaxIterReached {
            let mut ab = vec![0.0; spec.alpha_len()];
            spec.op().apply(&state.beta, &mut ab);
            let norm: f64 = (0..spec.alpha_len())
                .map(|i| (spec.r()[i] - state.alpha[i] - ab[i]).powi(2))
                .sum::<f64>()
                .sqrt();
            prop_assert!(norm <= config.tol * (spec.alpha_len() as f64).sqrt() * (1.0 + 1e-12));
        }
        prop_assert!(state.beta.iter().all(|b| b.is_finite()));
        let l1: f64 = state.beta.iter().map(|b| b.abs()).sum();
        prop_assert!(l1 < 1e3);
        prop_assert!(state.trace.iter().all(|r| r.primal.is_finite()));
    }
}

#[test]
fn warm_start_from_solution_stays_put() {
    let x = DMatrix::<f64>::identity(4, 4) * 2.0;
    let data = DesignData::new(x, Some(vec![3.0, -1.0, 0.2, 0.0])).unwrap();
    let spec = build_problem(&data, Method::Dantzig, 0.5).unwrap();
    let first = solve(&spec, &SolverConfig::default(), None).unwrap();
    assert!(first.converged());
    let again = solve(&spec, &SolverConfig::default(), Some(&first)).unwrap();
    let diff = first
        .beta
        .iter()
        .zip(&again.beta)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(diff < 1e-4);
}
