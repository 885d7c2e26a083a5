//! Structural properties over random plants and windows.

use ddpc::data::{collect_sequences, DataShape, ExcitationSpec};
use ddpc::equivalence::{scenario_window, verify_kernel_inclusion, verify_theorem1};
use ddpc::lti::{NoiseSpec, StateSpaceModel};
use ddpc::ocp::{solve_deepc, solve_deepc_regularized, solve_spc, BoxConstraints, RegWeights, RegulationObjective};
use ddpc::plant::random_stable_minimal;
use ddpc::predictor::identify;
use proptest::prelude::*;

fn plant_and_shape(n: usize, m: usize, p: usize, seed: u64, horizon: usize) -> (StateSpaceModel, DataShape) {
    let model = random_stable_minimal(n, m, p, seed).unwrap();
    let t_ini = model.system_lag().unwrap() + 1;
    let l = t_ini + horizon;
    let shape = DataShape::for_model(&model, l * m + n + 30, t_ini, horizon).unwrap();
    (model, shape)
}

fn plants() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (2usize..=6, 1usize..=2, 1usize..=2, 0u64..10_000)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn deterministic_deepc_equals_spc_on_random_plants((n, m, p, seed) in plants()) {
        let (model, shape) = plant_and_shape(n, m, p, seed, 8);
        let report = verify_theorem1(&model, shape, 3, seed).unwrap();
        prop_assert!(report.passed(), "{}", report.render());
    }

    #[test]
    fn unconstrained_input_is_linear_in_the_window((n, m, p, seed) in plants(), alpha in -3.0f64..3.0) {
        let (model, shape) = plant_and_shape(n, m, p, seed, 6);
        let data = collect_sequences(&model, shape, &ExcitationSpec::default(), None, seed).unwrap();
        let obj = RegulationObjective::scaled_identity(p, m, 1.0, 0.1).unwrap();
        let free = BoxConstraints::unbounded(m, p);
        let (win, _) = scenario_window(&model, shape.t_ini, seed ^ 1, 0.0).unwrap();
        let base = solve_spc(&identify(&data).unwrap(), &win, &obj, &free).unwrap();
        let scaled = solve_deepc(&data, &win.scaled(alpha), &obj, &free).unwrap();
        let tol = 1e-7 * (1.0 + base.u.amax() * alpha.abs());
        prop_assert!((&scaled.u - &base.u * alpha).amax() <= tol);
    }

    #[test]
    fn predictor_reproduces_clean_training_columns((n, m, p, seed) in plants()) {
        let (model, shape) = plant_and_shape(n, m, p, seed, 6);
        let data = collect_sequences(&model, shape, &ExcitationSpec::default(), None, seed).unwrap();
        let pred = identify(&data).unwrap();
        let fit = pred.matrix() * data.m() - data.y_n();
        prop_assert!(fit.amax() <= 1e-8 * (1.0 + data.y_n().amax()));
        prop_assert_eq!(pred.effective_rank(), shape.l() * m + n);
    }

    #[test]
    fn nullspace_dimension_is_columns_minus_data_rank((n, m, p, seed) in plants()) {
        let (model, shape) = plant_and_shape(n, m, p, seed, 6);
        let data = collect_sequences(&model, shape, &ExcitationSpec::default(), None, seed).unwrap();
        let report = verify_kernel_inclusion(&data).unwrap();
        let sv = data.m().clone().svd(false, false).singular_values;
        let rank = sv.iter().filter(|s| **s > 1e-9 * sv.max()).count();
        prop_assert_eq!(report.rank, Some(rank));
        prop_assert_eq!(report.nullspace_dim, Some(shape.t - rank));
        prop_assert!(report.passed());
    }

    #[test]
    fn larger_datasets_extend_smaller_ones((n, m, p, seed) in plants(), extra in 1usize..40) {
        let (model, shape) = plant_and_shape(n, m, p, seed, 5);
        let small = collect_sequences(&model, shape, &ExcitationSpec::default(), None, seed).unwrap();
        let big = collect_sequences(&model, shape.with_t(shape.t + extra), &ExcitationSpec::default(), None, seed).unwrap();
        let cut = big.truncated(shape.t).unwrap();
        prop_assert_eq!(cut.m(), small.m());
    }

    #[test]
    fn regularized_solutions_satisfy_kkt_and_bounds((n, m, p, seed) in plants(), bound in 0.05f64..1.0) {
        let (model, shape) = plant_and_shape(n, m, p, seed, 6);
        let noise = NoiseSpec::new(1e-2, seed).unwrap();
        let data = collect_sequences(&model, shape, &ExcitationSpec::default(), Some(&noise), seed).unwrap();
        let obj = RegulationObjective::scaled_identity(p, m, 1.0, 0.1).unwrap();
        let (win, _) = scenario_window(&model, shape.t_ini, seed ^ 7, 1e-2).unwrap();
        let w = RegWeights::new(1.0, 1e3, 1e3).unwrap();
        let sol = solve_deepc_regularized(&data, &win, &obj, &w, &BoxConstraints::input_box(m, p, bound)).unwrap();
        prop_assert!(sol.u.amax() <= bound * (1.0 + 1e-9));
        prop_assert!(sol.kkt.stationarity < 1e-6 && sol.kkt.primal < 1e-8 && sol.kkt.complementarity < 1e-8, "{:?}", sol.kkt);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn svd_reproduces_rank_deficient_matrices(rows in 2usize..20, cols in 2usize..60, rank in 1usize..10, seed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rank = rank.min(rows).min(cols);
        let a = nalgebra::DMatrix::from_fn(rows, rank, |_, _| rng.random_range(-1.0..1.0));
        let b = nalgebra::DMatrix::from_fn(rank, cols, |_, _| rng.random_range(-1.0..1.0));
        let m = a * b;
        let d = ddpc::linalg::svd(&m);
        let back = &d.u * nalgebra::DMatrix::from_diagonal(&d.s) * &d.v_t;
        prop_assert!((back - &m).amax() <= 1e-12 * (1.0 + m.amax()));
        prop_assert!(d.s.as_slice().windows(2).all(|w| w[0] >= w[1]));
        prop_assert_eq!(ddpc::linalg::numeric_rank(&m), rank);
        let pinv = ddpc::linalg::pinv(&m).unwrap();
        prop_assert!((&m * &pinv * &m - &m).amax() <= 1e-10 * (1.0 + m.amax()));
    }
}
