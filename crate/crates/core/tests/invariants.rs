//! Property tests over random instances.

mod common;

use netmimo::algorithms::{dmmse_solve, emmseia_solve, min_leakage_solve, AlgorithmConfig, AlgorithmKind};
use netmimo::experiment::compute_cdf;
use netmimo::experiment::output::format_real;
use netmimo::linalg::{waterfill_budget, waterfill_eval, CMatrix};
use netmimo::model::{build_ifc_gc, constraint_usage, max_violation, mmse_equalizers, mse_matrix_mmse, sum_rate, wsmse_objective, IfcGcProblem};
use proptest::prelude::*;

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig::with_cases(n)
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn stacked_system_reproduces_signals_and_station_power(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let sys = common::partial_cooperation(&mut rng, 3, 4, 2, 2);
        let prob = build_ifc_gc(&sys).unwrap();
        let b: Vec<CMatrix> = (0..4).map(|k| common::gaussian(&mut rng, prob.tx_dim(k), prob.streams[k])).collect();
        let usage = constraint_usage(&prob, &b).unwrap();
        for m in 0..3 {
            let mut direct = 0.0;
            for (l, bl) in b.iter().enumerate() {
                if let Some(off) = sys.block_offset(l, m) {
                    direct += bl.rows(off, sys.nt).norm_squared();
                }
            }
            prop_assert!((usage[m] - direct).abs() <= 1e-12 * direct.max(1.0));
        }
        for k in 0..4 {
            for l in 0..4 {
                let mut direct = CMatrix::zeros(sys.nr, prob.streams[l]);
                for &m in &sys.serving_sets[l] {
                    let off = sys.block_offset(l, m).unwrap();
                    direct += &sys.raw_channels[k][m] * b[l].rows(off, sys.nt);
                }
                prop_assert!(common::rel_diff(&(&prob.channels[k][l] * &b[l]), &direct) <= 1e-12);
            }
        }
    }

    #[test]
    fn sum_rate_is_minus_log_det_of_mse(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let prob = common::interference_channel(&mut rng, 3, 3, 2, 2);
        let b = common::precoders(&mut rng, &prob, 1.0);
        let oracle: f64 = (0..3).map(|k| -mse_matrix_mmse(&prob, &b, k).unwrap().determinant().re.log2()).sum();
        let rate = sum_rate(&prob, &b).unwrap();
        prop_assert!((rate - oracle).abs() <= 1e-10 * oracle.abs().max(1.0), "{rate} vs {oracle}");
    }

    #[test]
    fn rate_and_unweighted_mse_ignore_stream_rotations(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let prob = common::interference_channel(&mut rng, 2, 3, 3, 2);
        let prob = prob.with_weights(vec![netmimo::linalg::identity(2); 2]).unwrap();
        let b = common::precoders(&mut rng, &prob, 1.0);
        let rotated: Vec<CMatrix> = b.iter().map(|bk| bk * common::unitary(&mut rng, 2)).collect();
        let (r0, r1) = (sum_rate(&prob, &b).unwrap(), sum_rate(&prob, &rotated).unwrap());
        prop_assert!((r0 - r1).abs() <= 1e-10 * r0.max(1.0));
        let w0 = wsmse_objective(&prob, &b, &mmse_equalizers(&prob, &b).unwrap()).unwrap();
        let w1 = wsmse_objective(&prob, &rotated, &mmse_equalizers(&prob, &rotated).unwrap()).unwrap();
        prop_assert!((w0 - w1).abs() <= 1e-10 * w0);
    }

    #[test]
    fn waterfilling_meets_budget_at_its_own_level(
        weights in prop::collection::vec(0.1f64..10.0, 1..6),
        budget in 1e-3f64..100.0,
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut rng = common::rng(seed);
        let gains: Vec<f64> = weights.iter().map(|_| 10f64.powf(rng.random_range(-2.0..2.0))).collect();
        let alloc = waterfill_budget(&weights, &gains, budget).unwrap();
        prop_assert!((alloc.total() - budget).abs() <= 1e-9 * budget);
        prop_assert!(alloc.levels.iter().all(|&p| p >= 0.0));
        let again = waterfill_eval(&weights, &gains, alloc.multiplier).unwrap();
        for (a, b) in alloc.levels.iter().zip(&again.levels) {
            prop_assert!((a - b).abs() <= 1e-9 * budget);
        }
    }

    #[test]
    fn problem_json_round_trips_exactly(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let prob = common::interference_channel(&mut rng, 2, 3, 2, 1);
        let back = IfcGcProblem::from_json(&prob.to_json()).unwrap();
        prop_assert_eq!(back, prob);
    }

    #[test]
    fn csv_reals_are_stable(x in prop::num::f64::NORMAL | prop::num::f64::ZERO) {
        let text = format_real(x);
        let back: f64 = text.parse().unwrap();
        prop_assert!((back - x).abs() <= 1e-11 * x.abs());
        prop_assert_eq!(format_real(back), text);
    }

    #[test]
    fn cdf_is_a_distribution(rates in prop::collection::vec(-50.0f64..50.0, 1..40)) {
        let cdf = compute_cdf(&rates);
        prop_assert_eq!(cdf.len(), rates.len());
        prop_assert!(cdf.windows(2).all(|w| w[0].rate <= w[1].rate && w[0].fraction < w[1].fraction));
        prop_assert_eq!(cdf.last().unwrap().fraction, 1.0);
    }
}

proptest! {
    #![proptest_config(cases(16))]

    #[test]
    fn solvers_stay_within_budgets(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let prob = common::interference_channel(&mut rng, 3, 3, 2, 2);
        let dmmse = dmmse_solve(&prob, &AlgorithmConfig::new(AlgorithmKind::Dmmse)).unwrap();
        prop_assert!(max_violation(&prob, &dmmse.precoders).unwrap() <= 0.01);
        let emmseia = emmseia_solve(&prob, &AlgorithmConfig::new(AlgorithmKind::Emmseia)).unwrap();
        prop_assert!(max_violation(&prob, &emmseia.precoders).unwrap() <= 0.01);
    }

    #[test]
    fn leakage_never_rises(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let sys = common::partial_cooperation(&mut rng, 3, 3, 2, 2);
        let sol = min_leakage_solve(&sys, &AlgorithmConfig::new(AlgorithmKind::MinLeakage)).unwrap();
        let t = &sol.leakage_trace;
        prop_assert!(t.windows(2).all(|w| w[1] <= w[0] + 1e-12 * t[0].max(1e-300)), "{t:?}");
        prop_assert!(sol.max_orthonormality_defect <= 1e-10);
        let prob = build_ifc_gc(&sys).unwrap();
        prop_assert!(max_violation(&prob, &sol.solution.precoders).unwrap() <= 1e-10);
    }
}
