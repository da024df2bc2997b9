//! Property tests for structural invariants.

mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use spacetsiv::chi2::{chi2_cdf, chi2_quantile};
use spacetsiv::sumstats::io::{read_joint_json, write_joint_json};
use spacetsiv::sumstats::{select_instruments, MarginalSummaryStats};
use spacetsiv::{marginal_to_joint, q_statistic};

fn marginal_strategy() -> impl Strategy<Value = MarginalSummaryStats> {
    // unit correlations keep every draw valid; effect/variance scales vary
    (2usize..6, 1usize..4).prop_flat_map(|(m, d)| {
        (
            proptest::collection::vec(-2.0..2.0f64, m),
            proptest::collection::vec(0.01..4.0f64, m),
            proptest::collection::vec(-2.0..2.0f64, m * d),
            proptest::collection::vec(0.01..4.0f64, m * d),
        )
            .prop_map(move |(eta, var_eta, h, var_h)| {
                MarginalSummaryStats::new(
                    DVector::from_vec(eta),
                    DVector::from_vec(var_eta),
                    DMatrix::from_row_slice(m, d, &h),
                    DMatrix::from_row_slice(m, d, &var_h),
                    DMatrix::identity(m, m),
                    DMatrix::identity(m, m),
                    DMatrix::identity(d, d),
                    1000,
                    2000,
                    (0..m).map(|i| format!("rs{i}")).collect(),
                    (0..d).map(|i| format!("g{i}")).collect(),
                )
                .unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn select_instruments_is_idempotent(marg in marginal_strategy(), k in 1usize..3) {
        let k = k.min(marg.m());
        let once = select_instruments(&marg, k).unwrap();
        let twice = select_instruments(&once, k.min(once.m())).unwrap();
        prop_assert_eq!(once.snp_ids(), twice.snp_ids());
        prop_assert_eq!(once.eta(), twice.eta());
        prop_assert_eq!(once.h(), twice.h());
    }

    #[test]
    fn joint_json_round_trips_exactly(seed in 0u64..10_000, m in 1usize..5, d in 1usize..4) {
        let mut rng = common::rng(seed);
        let joint = common::random_joint(&mut rng, m, d, 123);
        let mut buf = Vec::new();
        write_joint_json(&joint, &mut buf).unwrap();
        let back = read_joint_json(buf.as_slice()).unwrap();
        // shortest-round-trip float formatting: bit-exact equality
        prop_assert_eq!(joint.pi(), back.pi());
        prop_assert_eq!(joint.sigma_pi(), back.sigma_pi());
        prop_assert_eq!(joint.big_pi(), back.big_pi());
        prop_assert_eq!(joint.sigma_big_pi(), back.sigma_big_pi());
        prop_assert_eq!(joint.n_a(), back.n_a());
        prop_assert_eq!(joint.snp_ids(), back.snp_ids());
    }

    #[test]
    fn scalar_conversion_is_identity(eta in -3.0..3.0f64, var in 0.01..5.0f64,
                                     h in -3.0..3.0f64, var_h in 0.01..5.0f64) {
        let marg = MarginalSummaryStats::new(
            DVector::from_vec(vec![eta]),
            DVector::from_vec(vec![var]),
            DMatrix::from_row_slice(1, 1, &[h]),
            DMatrix::from_row_slice(1, 1, &[var_h]),
            DMatrix::identity(1, 1),
            DMatrix::identity(1, 1),
            DMatrix::identity(1, 1),
            50,
            60,
            vec!["rs1".into()],
            vec!["g1".into()],
        ).unwrap();
        let joint = marginal_to_joint(&marg).unwrap();
        prop_assert!((joint.pi()[0] - eta).abs() < 1e-12 * (1.0 + eta.abs()));
        prop_assert!((joint.big_pi()[(0, 0)] - h).abs() < 1e-12 * (1.0 + h.abs()));
    }

    #[test]
    fn q_is_invariant_to_representation(seed in 0u64..5000, m in 2usize..5, d in 1usize..4) {
        // block double-sum against the dense Kronecker construction
        let mut rng = common::rng(seed);
        let joint = common::random_joint(&mut rng, m, d, 100);
        let beta = common::randn_vec(&mut rng, d);
        let q = q_statistic(&joint, &beta).unwrap();
        let dense = common::dense_q_oracle(&joint, &beta);
        prop_assert!((q - dense).abs() < 1e-10 * dense.max(1.0));
    }

    #[test]
    fn chi2_quantile_inverts_cdf(p in 0.001..0.999f64, df in 1u32..30) {
        let q = chi2_quantile(p, df);
        prop_assert!((chi2_cdf(q, df) - p).abs() < 1e-9);
    }
}
