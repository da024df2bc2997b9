//! Numerical diagnostics for sparse identifiability of a candidate parent
//! set: (a) full column rank of the parent submatrix, and (c) distinctness
//! of its column space from every other same-size subset. The remaining
//! condition quantifies over all subsets and weight vectors and is not
//! decidable by finite rank checks; it is reported as not checked.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::combin::{count_combinations, Combinations};
use crate::error::{Error, Result};
use crate::linalg::numerical_rank;
use crate::qstat::SupportSet;

/// Default relative SVD tolerance: double-precision noise floor with a
/// safety margin.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Subset-enumeration cap for the uniqueness check.
const ENUMERATION_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentifiabilityReport {
    /// Condition (a): the parent submatrix has full column rank.
    pub rank_ok: bool,
    /// Condition (c) over same-size subsets; `None` when the enumeration
    /// cap was exceeded (indeterminate).
    pub uniqueness_ok: Option<bool>,
    pub checked_subsets: usize,
    pub tolerance: f64,
}

fn columns(big_pi: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(big_pi.nrows(), idx.len(), |i, k| big_pi[(i, idx[k])])
}

/// Condition (a): numerical rank of the parent-set column submatrix equals
/// the support size.
pub fn check_assumption_a(big_pi: &DMatrix<f64>, pa: &SupportSet, tol: f64) -> Result<bool> {
    validate(big_pi, pa, tol)?;
    if pa.len() > big_pi.nrows().min(big_pi.ncols()) {
        return Err(Error::invalid("parent set larger than min(m, d)"));
    }
    let sub = columns(big_pi, pa.indices());
    Ok(numerical_rank(&sub, tol) == pa.len())
}

/// Condition (c): for every same-size subset S ≠ pa, the column space of
/// Π^S differs from that of Π^pa, verified as
/// rank([Π^S | Π^pa]) > rank(Π^pa). Returns `None` (indeterminate) when
/// the number of subsets exceeds the enumeration cap.
pub fn check_assumption_c(
    big_pi: &DMatrix<f64>,
    pa: &SupportSet,
    tol: f64,
) -> Result<Option<bool>> {
    validate(big_pi, pa, tol)?;
    let d = big_pi.ncols();
    if count_combinations(d, pa.len()) > ENUMERATION_CAP {
        return Ok(None);
    }
    Ok(Some(check_c_exhaustive(big_pi, pa, tol).0))
}

fn check_c_exhaustive(big_pi: &DMatrix<f64>, pa: &SupportSet, tol: f64) -> (bool, usize) {
    let d = big_pi.ncols();
    let pa_cols = columns(big_pi, pa.indices());
    let pa_rank = numerical_rank(&pa_cols, tol);
    let m = big_pi.nrows();
    let mut checked = 0usize;
    for subset in Combinations::new(d, pa.len()) {
        if subset == pa.indices() {
            continue;
        }
        checked += 1;
        let mut stacked = DMatrix::zeros(m, subset.len() + pa.len());
        stacked
            .view_mut((0, 0), (m, subset.len()))
            .copy_from(&columns(big_pi, &subset));
        stacked
            .view_mut((0, subset.len()), (m, pa.len()))
            .copy_from(&pa_cols);
        if numerical_rank(&stacked, tol) <= pa_rank {
            // Im(Π^S) sits inside Im(Π^pa) with equal rank: same image
            return (false, checked);
        }
    }
    (true, checked)
}

/// Run both decidable checks and assemble the report.
pub fn diagnose(big_pi: &DMatrix<f64>, pa: &SupportSet, tol: f64) -> Result<IdentifiabilityReport> {
    let rank_ok = check_assumption_a(big_pi, pa, tol)?;
    let d = big_pi.ncols();
    let (uniqueness_ok, checked_subsets) = if count_combinations(d, pa.len()) > ENUMERATION_CAP {
        (None, 0)
    } else {
        let (ok, checked) = check_c_exhaustive(big_pi, pa, tol);
        (Some(ok), checked)
    };
    Ok(IdentifiabilityReport {
        rank_ok,
        uniqueness_ok,
        checked_subsets,
        tolerance: tol,
    })
}

fn validate(big_pi: &DMatrix<f64>, pa: &SupportSet, tol: f64) -> Result<()> {
    if pa.is_empty() {
        return Err(Error::invalid("parent set must be non-empty"));
    }
    if let Some(&last) = pa.indices().last() {
        if last >= big_pi.ncols() {
            return Err(Error::invalid(format!(
                "parent index {last} out of range for d = {}",
                big_pi.ncols()
            )));
        }
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::invalid("tolerance must be in (0, 1)"));
    }
    Ok(())
}
