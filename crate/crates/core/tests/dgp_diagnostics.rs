//! Identifiability diagnostics on the benchmark processes.

mod common;

use spacetsiv::chi2::chi2_quantile;
use spacetsiv::identifiability::{check_assumption_a, check_assumption_c, diagnose};
use spacetsiv::simulate::DgpSpec;
use spacetsiv::{fit_restricted, SupportSet};

#[test]
fn dgp1_parent_set_passes_both_checks() {
    let big_pi = DgpSpec::dgp1(0).population_big_pi();
    let pa = SupportSet::new(vec![0, 1]).unwrap();

    // independent rank oracle: Gram determinant of the two parent columns
    let c0 = big_pi.column(0);
    let c1 = big_pi.column(1);
    let gram_det = c0.norm_squared() * c1.norm_squared() - c0.dot(&c1).powi(2);
    assert!(gram_det > 1e-9, "oracle says parent columns are dependent");

    assert!(check_assumption_a(&big_pi, &pa, 1e-9).unwrap());
    assert_eq!(check_assumption_c(&big_pi, &pa, 1e-9).unwrap(), Some(true));
    let report = diagnose(&big_pi, &pa, 1e-9).unwrap();
    assert!(report.rank_ok);
    assert_eq!(report.uniqueness_ok, Some(true));
    // all C(5,2) - 1 = 9 competitors examined
    assert_eq!(report.checked_subsets, 9);
}

#[test]
fn passing_checks_imply_unique_zero_minimum_on_exact_data() {
    // operational uniqueness: the true parent set attains Q = 0 and no
    // strictly smaller support comes close
    let spec = DgpSpec::dgp1(0);
    let joint = spec.population_joint(1_000_000, 1_000_000).unwrap();
    let pa = SupportSet::new(vec![0, 1]).unwrap();
    let fit = fit_restricted(&joint, &pa).unwrap();
    assert!(fit.q_value < 1e-8);

    let threshold = chi2_quantile(0.95, 3);
    for j in 0..5 {
        let single = fit_restricted(&joint, &SupportSet::new(vec![j]).unwrap()).unwrap();
        assert!(
            single.q_value > threshold,
            "size-1 support {{{j}}} unexpectedly fits (q = {})",
            single.q_value
        );
    }
    // and no other size-2 support reaches zero
    for i in 0..5 {
        for j in (i + 1)..5 {
            if (i, j) == (0, 1) {
                continue;
            }
            let other = fit_restricted(&joint, &SupportSet::new(vec![i, j]).unwrap()).unwrap();
            assert!(
                other.q_value > threshold,
                "support {{{i},{j}}} unexpectedly fits (q = {})",
                other.q_value
            );
        }
    }
}

#[test]
fn enumeration_cap_reports_indeterminate() {
    // C(60, 12) is far beyond the cap
    let big_pi = common::randn_mat(&mut common::rng(1), 14, 60);
    let pa = SupportSet::new((0..12).collect()).unwrap();
    assert_eq!(check_assumption_c(&big_pi, &pa, 1e-9).unwrap(), None);
    let report = diagnose(&big_pi, &pa, 1e-9).unwrap();
    assert_eq!(report.uniqueness_ok, None);
    assert_eq!(report.checked_subsets, 0);
}
