//! The spaceTSIV estimators and companion tools: subset-selection (L0) and
//! lasso-path (L1) sparse estimation built on the restricted Q fit, the
//! plain TSIV pseudo-inverse estimator, and per-coordinate confidence
//! intervals by test inversion.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chi2::{chi2_cdf, chi2_quantile};
use crate::combin::Combinations;
use crate::error::{Error, Result};
use crate::qstat::{fit_empty, fit_profiled, fit_restricted, FitResult, SupportSet};
use crate::sumstats::JointSummaryStats;

/// Coordinate-descent convergence: largest single-coordinate move.
const CD_TOL: f64 = 1e-8;
/// Maximum coordinate-descent sweeps.
const CD_MAX_SWEEPS: usize = 10_000;
/// Relative truncation of singular values in the TSIV pseudo-inverse.
const PINV_TOL: f64 = 1e-10;
/// Subsets fitted per parallel batch in the L0 sweep.
const L0_BATCH: usize = 4096;
/// Relative tolerance of confidence-interval endpoints.
const CI_ENDPOINT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Accepted,
    Rejected,
    /// L1 support grew past the instrument count; no refit is possible.
    OverParameterized,
}

/// One step of an estimator sweep: a size (L0) or a penalty (L1), the best
/// support found there, and the test outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryStep {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub support: SupportSet,
    pub q_value: f64,
    pub p_value: f64,
    pub decision: Decision,
}

/// Output of `spacetsiv_l0` / `spacetsiv_l1`.
#[derive(Debug, Clone)]
pub struct SpaceTsivResult {
    /// Final estimate (length d).
    pub estimate: DVector<f64>,
    /// Final test result: `false` means the last fitted model was accepted.
    pub phi: bool,
    /// Q and p value of the final fit.
    pub q_value: f64,
    pub p_value: f64,
    /// Support of the final fit.
    pub selected: SupportSet,
    /// Every support of the first accepted size whose own Q passes the
    /// test; empty when nothing was accepted.
    pub accepted_supports: Vec<FitResult>,
    pub trajectory: Vec<TrajectoryStep>,
}

impl SpaceTsivResult {
    pub fn selected_support(&self) -> SupportSet {
        self.selected.clone()
    }
}

fn support_less(a: &FitResult, b: &FitResult) -> bool {
    match a.q_value.partial_cmp(&b.q_value) {
        Some(std::cmp::Ordering::Less) => true,
        Some(std::cmp::Ordering::Greater) => false,
        // ties (including both infinite/NaN) break lexicographically
        _ => a.support < b.support,
    }
}

/// spaceTSIV with L0 penalization: for growing support size, fit every
/// subset, keep the Q-minimal one, and stop at the first size the level-α
/// test accepts.
pub fn spacetsiv_l0(
    joint: &JointSummaryStats,
    s_max: usize,
    alpha: f64,
) -> Result<SpaceTsivResult> {
    let m = joint.m();
    let d = joint.d();
    if alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::invalid("alpha must be in (0, 1)"));
    }
    if s_max == 0 || s_max > d.min(m) {
        return Err(Error::invalid(format!(
            "s_max = {s_max} must be in 1..=min(d, m) = {}",
            d.min(m)
        )));
    }
    let threshold = chi2_quantile(1.0 - alpha, m as u32);

    let mut trajectory = Vec::new();
    let mut final_fit: Option<FitResult> = None;
    let mut accepted_supports: Vec<FitResult> = Vec::new();
    let mut phi = true;

    for size in 1..=s_max {
        let mut best: Option<FitResult> = None;
        let mut passing: Vec<FitResult> = Vec::new();
        let mut combos = Combinations::new(d, size);
        loop {
            let batch: Vec<Vec<usize>> = combos.by_ref().take(L0_BATCH).collect();
            if batch.is_empty() {
                break;
            }
            // a failed subset never aborts the sweep; it simply cannot win
            let fits: Vec<Option<FitResult>> = batch
                .par_iter()
                .map(|idx| {
                    let support = SupportSet::new(idx.clone()).expect("combinations are sorted");
                    fit_restricted(joint, &support).ok()
                })
                .collect();
            for (idx, fit) in batch.iter().zip(fits) {
                match fit {
                    Some(fit) => {
                        log::debug!(
                            "l0 size={size} support={:?} q={:.6e}",
                            fit.support.indices(),
                            fit.q_value
                        );
                        if fit.q_value <= threshold {
                            passing.push(fit.clone());
                        }
                        if best.as_ref().map_or(true, |b| support_less(&fit, b)) {
                            best = Some(fit);
                        }
                    }
                    None => log::debug!("l0 size={size} support={idx:?} fit failed (q = inf)"),
                }
            }
        }

        let Some(best_fit) = best else {
            // every subset of this size failed numerically
            trajectory.push(TrajectoryStep {
                size: Some(size),
                lambda: None,
                support: SupportSet::empty(),
                q_value: f64::INFINITY,
                p_value: 0.0,
                decision: Decision::Rejected,
            });
            continue;
        };
        let reject = best_fit.q_value > threshold;
        trajectory.push(TrajectoryStep {
            size: Some(size),
            lambda: None,
            support: best_fit.support.clone(),
            q_value: best_fit.q_value,
            p_value: best_fit.p_value,
            decision: if reject {
                Decision::Rejected
            } else {
                Decision::Accepted
            },
        });
        final_fit = Some(best_fit);
        if !reject {
            phi = false;
            accepted_supports = passing;
            break;
        }
    }

    Ok(assemble_result(
        joint.d(),
        final_fit,
        phi,
        accepted_supports,
        trajectory,
    ))
}

fn assemble_result(
    d: usize,
    final_fit: Option<FitResult>,
    phi: bool,
    accepted_supports: Vec<FitResult>,
    trajectory: Vec<TrajectoryStep>,
) -> SpaceTsivResult {
    match final_fit {
        Some(fit) => SpaceTsivResult {
            estimate: fit.beta_vector(),
            phi,
            q_value: fit.q_value,
            p_value: fit.p_value,
            selected: fit.support,
            accepted_supports,
            trajectory,
        },
        None => SpaceTsivResult {
            estimate: DVector::zeros(d),
            phi,
            q_value: f64::INFINITY,
            p_value: 0.0,
            selected: SupportSet::empty(),
            accepted_supports,
            trajectory,
        },
    }
}

/// Cyclic coordinate descent for the L1 loss
/// `½‖π − Πβ‖² + λ‖β‖₁`, with soft-thresholding updates.
///
/// Coordinates with a zero design column are frozen at 0.
pub fn tsiv_l1_solve(
    joint: &JointSummaryStats,
    lambda: f64,
    warm_start: Option<&DVector<f64>>,
) -> DVector<f64> {
    assert!(lambda >= 0.0, "lambda must be nonnegative");
    let d = joint.d();
    let big_pi = joint.big_pi();
    let gram = big_pi.tr_mul(big_pi);
    let corr = big_pi.tr_mul(joint.pi());

    let mut beta = warm_start
        .map(|b| {
            assert_eq!(b.len(), d, "warm start length must equal d");
            b.clone()
        })
        .unwrap_or_else(|| DVector::zeros(d));
    // running gradient bookkeeping: g = Gram · β
    let mut gram_beta = &gram * &beta;

    for _sweep in 0..CD_MAX_SWEEPS {
        let mut max_change = 0.0_f64;
        for j in 0..d {
            let eta_j = gram[(j, j)];
            if eta_j <= 0.0 {
                if beta[j] != 0.0 {
                    gram_beta -= gram.column(j) * beta[j];
                    beta[j] = 0.0;
                }
                log::debug!("l1 coordinate {j} has a zero design column; frozen at 0");
                continue;
            }
            let rho_j = corr[j] - (gram_beta[j] - eta_j * beta[j]);
            let new = if rho_j < -lambda {
                (rho_j + lambda) / eta_j
            } else if rho_j > lambda {
                (rho_j - lambda) / eta_j
            } else {
                0.0
            };
            let delta = new - beta[j];
            if delta != 0.0 {
                gram_beta += gram.column(j) * delta;
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < CD_TOL {
            break;
        }
    }
    beta
}

/// TSIV: the minimum-norm least-squares solution `Π⁺ π` via SVD with
/// singular values below `1e-10·σ_max` truncated.
pub fn tsiv(joint: &JointSummaryStats) -> DVector<f64> {
    crate::linalg::min_norm_lstsq(joint.big_pi(), joint.pi(), PINV_TOL)
}

/// Geometric penalty grid from `λ_max = ‖Πᵀπ‖_∞` down to `1e-3·λ_max`.
/// Degenerate case `π = 0` yields the single-element path `{0}`.
pub fn default_lambda_path(joint: &JointSummaryStats, n_points: usize) -> Result<Vec<f64>> {
    if n_points < 2 {
        return Err(Error::invalid("lambda path needs at least 2 points"));
    }
    let lambda_max = joint.big_pi().tr_mul(joint.pi()).amax();
    if lambda_max == 0.0 {
        return Ok(vec![0.0]);
    }
    let ratio = 1e-3_f64.powf(1.0 / (n_points - 1) as f64);
    Ok((0..n_points)
        .map(|i| lambda_max * ratio.powi(i as i32))
        .collect())
}

/// spaceTSIV with L1 penalization: walk the penalty path, extract the lasso
/// support, refit it with the restricted Q minimizer and test; stop at the
/// first accepted penalty.
pub fn spacetsiv_l1(
    joint: &JointSummaryStats,
    lambdas: &[f64],
    alpha: f64,
) -> Result<SpaceTsivResult> {
    let m = joint.m();
    if alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::invalid("alpha must be in (0, 1)"));
    }
    if lambdas.is_empty() {
        return Err(Error::invalid("lambda path is empty"));
    }
    if lambdas.iter().any(|&l| !(l >= 0.0)) {
        return Err(Error::invalid("lambda values must be nonnegative"));
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("lambda path must be strictly decreasing"));
    }
    let threshold = chi2_quantile(1.0 - alpha, m as u32);

    let mut trajectory = Vec::new();
    let mut final_fit: Option<FitResult> = None;
    let mut accepted_supports = Vec::new();
    let mut phi = true;
    let mut warm: Option<DVector<f64>> = None;

    for &lambda in lambdas {
        let beta_l1 = tsiv_l1_solve(joint, lambda, warm.as_ref());
        let support = SupportSet::from_nonzero(&beta_l1);
        warm = Some(beta_l1);

        if support.len() > m {
            // cannot refit more parameters than moment conditions
            log::debug!(
                "l1 lambda={lambda:.6e} support size {} exceeds m = {m}; stopping",
                support.len()
            );
            trajectory.push(TrajectoryStep {
                size: None,
                lambda: Some(lambda),
                support,
                q_value: f64::INFINITY,
                p_value: 0.0,
                decision: Decision::OverParameterized,
            });
            phi = true;
            break;
        }

        let fit = if support.is_empty() {
            fit_empty(joint)
        } else {
            fit_restricted(joint, &support)
        };
        let fit = match fit {
            Ok(fit) => fit,
            Err(err) => {
                log::warn!("l1 refit failed at lambda={lambda:.6e}: {err}");
                trajectory.push(TrajectoryStep {
                    size: None,
                    lambda: Some(lambda),
                    support,
                    q_value: f64::INFINITY,
                    p_value: 0.0,
                    decision: Decision::Rejected,
                });
                continue;
            }
        };
        let reject = fit.q_value > threshold;
        log::debug!(
            "l1 lambda={lambda:.6e} support={:?} q={:.6e} reject={reject}",
            fit.support.indices(),
            fit.q_value
        );
        trajectory.push(TrajectoryStep {
            size: None,
            lambda: Some(lambda),
            support: fit.support.clone(),
            q_value: fit.q_value,
            p_value: fit.p_value,
            decision: if reject {
                Decision::Rejected
            } else {
                Decision::Accepted
            },
        });
        final_fit = Some(fit.clone());
        if !reject {
            phi = false;
            accepted_supports = vec![fit];
            break;
        }
    }

    Ok(assemble_result(
        joint.d(),
        final_fit,
        phi,
        accepted_supports,
        trajectory,
    ))
}

/// A per-coordinate confidence set from inverting the level-α test.
/// Unbounded endpoints are encoded as ±∞; `empty` marks the degenerate
/// case where even the minimized Q exceeds the acceptance threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub coordinate: usize,
    pub lower: f64,
    pub upper: f64,
    /// Confidence level (1 − α).
    pub level: f64,
    pub empty: bool,
}

impl ConfidenceInterval {
    pub fn unbounded_lower(&self) -> bool {
        self.lower == f64::NEG_INFINITY
    }

    pub fn unbounded_upper(&self) -> bool {
        self.upper == f64::INFINITY
    }
}

/// Profile-Q confidence intervals on each coordinate of `s`:
/// `CI_j = { b : min_{β_j = b, supp(β) ⊆ s} Q(β) ≤ κ_m⁻¹(1−α) }`.
///
/// Supports larger than m are admitted to cover the unrestricted TSIV
/// profile; there the inner minimization is under-determined and the
/// intervals are typically unbounded, which is the expected diagnostic for
/// weak identification.
pub fn ci_by_inversion(
    joint: &JointSummaryStats,
    s: &SupportSet,
    alpha: f64,
) -> Result<Vec<ConfidenceInterval>> {
    if alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::invalid("alpha must be in (0, 1)"));
    }
    if s.is_empty() {
        return Err(Error::invalid("confidence intervals need a non-empty support"));
    }
    let m = joint.m();
    let threshold = chi2_quantile(1.0 - alpha, m as u32);
    let level = 1.0 - alpha;

    let center_fit = if s.len() <= m {
        fit_restricted(joint, s)?
    } else {
        // profile of the unrestricted estimate
        let beta = tsiv(joint);
        let q_value = crate::qstat::q_statistic(joint, &beta)?;
        FitResult {
            beta: beta.iter().copied().collect(),
            support: s.clone(),
            q_value,
            p_value: 1.0 - chi2_cdf(q_value, m as u32),
            converged: true,
            iterations: 0,
            df: m,
        }
    };

    let intervals: Vec<ConfidenceInterval> = s
        .indices()
        .par_iter()
        .map(|&j| {
            let center = center_fit.beta[j];
            if center_fit.q_value > threshold {
                // the whole support is rejected; the projected set is empty
                return ConfidenceInterval {
                    coordinate: j,
                    lower: center,
                    upper: center,
                    level,
                    empty: true,
                };
            }
            let profile = |b: f64| -> f64 {
                fit_profiled(joint, s, (j, b), true)
                    .map(|fit| fit.q_value)
                    .unwrap_or(f64::INFINITY)
            };
            let upper = search_endpoint(&profile, center, 1.0, threshold);
            let lower = search_endpoint(&profile, center, -1.0, threshold);
            ConfidenceInterval {
                coordinate: j,
                lower,
                upper,
                level,
                empty: false,
            }
        })
        .collect();
    Ok(intervals)
}

/// Walk outward from the center in direction `dir`, expanding the probe
/// offset geometrically; once the profile Q crosses the threshold, close in
/// by bisection. Returns ±∞ if Q stays below the threshold at the sentinel
/// offset `1e6·(1+|center|)`.
fn search_endpoint(profile: &dyn Fn(f64) -> f64, center: f64, dir: f64, threshold: f64) -> f64 {
    let scale = 1.0 + center.abs();
    let mut inside = center;
    let mut outside = None;
    let mut offset = 10.0 * scale;
    loop {
        let probe = center + dir * offset;
        if profile(probe) > threshold {
            outside = Some(probe);
            break;
        }
        inside = probe;
        if offset >= 1e6 * scale {
            break;
        }
        offset *= 10.0;
    }
    let Some(mut outside) = outside else {
        return dir * f64::INFINITY;
    };
    while (outside - inside).abs() > CI_ENDPOINT_TOL * (1.0 + inside.abs().max(outside.abs())) {
        let mid = 0.5 * (inside + outside);
        if profile(mid) > threshold {
            outside = mid;
        } else {
            inside = mid;
        }
    }
    0.5 * (inside + outside)
}

// --- result serialization (the JSON interface of the fit subcommands) ---

#[derive(Serialize, Deserialize)]
struct AcceptedSupportJson {
    indices: Vec<usize>,
    beta: Vec<f64>,
    q_value: Option<f64>,
    p_value: f64,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryJson {
    #[serde(skip_serializing_if = "Option::is_none")]
    size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    support: Vec<usize>,
    q_value: Option<f64>,
    p_value: f64,
    decision: Decision,
}

#[derive(Serialize, Deserialize)]
struct ConfidenceIntervalJson {
    coordinate: usize,
    lower: Option<f64>,
    upper: Option<f64>,
    level: f64,
    unbounded_lower: bool,
    unbounded_upper: bool,
    empty: bool,
}

#[derive(Serialize, Deserialize)]
struct ResultJson {
    estimate: Vec<f64>,
    phi: bool,
    q_value: Option<f64>,
    p_value: f64,
    accepted_supports: Vec<AcceptedSupportJson>,
    trajectory: Vec<TrajectoryJson>,
    confidence_intervals: Vec<ConfidenceIntervalJson>,
}

fn finite_or_none(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl SpaceTsivResult {
    /// Serialize to the result JSON document; infinite Q values map to
    /// `null`, and interval endpoints use `null` plus unboundedness flags.
    pub fn to_json(&self, intervals: &[ConfidenceInterval]) -> serde_json::Value {
        let doc = ResultJson {
            estimate: self.estimate.iter().copied().collect(),
            phi: self.phi,
            q_value: finite_or_none(self.q_value),
            p_value: self.p_value,
            accepted_supports: self
                .accepted_supports
                .iter()
                .map(|fit| AcceptedSupportJson {
                    indices: fit.support.indices().to_vec(),
                    beta: fit.beta.clone(),
                    q_value: finite_or_none(fit.q_value),
                    p_value: fit.p_value,
                })
                .collect(),
            trajectory: self
                .trajectory
                .iter()
                .map(|step| TrajectoryJson {
                    size: step.size,
                    lambda: step.lambda,
                    support: step.support.indices().to_vec(),
                    q_value: finite_or_none(step.q_value),
                    p_value: step.p_value,
                    decision: step.decision,
                })
                .collect(),
            confidence_intervals: intervals
                .iter()
                .map(|ci| ConfidenceIntervalJson {
                    coordinate: ci.coordinate,
                    lower: finite_or_none(ci.lower).filter(|_| !ci.empty),
                    upper: finite_or_none(ci.upper).filter(|_| !ci.empty),
                    level: ci.level,
                    unbounded_lower: ci.unbounded_lower(),
                    unbounded_upper: ci.unbounded_upper(),
                    empty: ci.empty,
                })
                .collect(),
        };
        serde_json::to_value(doc).expect("result serialization cannot fail")
    }
}
