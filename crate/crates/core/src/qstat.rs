//! The two-sample Q statistic and its support-restricted minimization.
//!
//! `Q(β) = (π − Πβ)ᵀ W(β)⁻¹ (π − Πβ)` with the β-dependent weight
//! `W(β) = Σ_π / n_a + Σ_Π(β) / n_b`, where `Σ_Π(β)` contracts the md×md
//! covariance of Π over the support of β. At any β solving the moment
//! condition, Q is asymptotically chi-squared with m degrees of freedom,
//! which yields the level-α acceptance test used by the estimators.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chi2::{chi2_cdf, chi2_quantile};
use crate::error::{Error, Result};
use crate::linalg::{min_norm_lstsq, weight_solver, SymEig};
use crate::optim::nelder_mead;
use crate::sumstats::JointSummaryStats;

/// Convergence tolerance on successive iterated-GMM estimates.
const GMM_STEP_TOL: f64 = 1e-10;
/// Maximum iterated-GMM reweighting steps before the simplex fallback.
const GMM_MAX_ITER: usize = 200;
/// Function-evaluation budget of the Nelder–Mead fallback.
const NM_BUDGET: usize = 10_000;

/// An ordered set of covariate indices: a candidate support of β.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SupportSet {
    indices: Vec<usize>,
}

impl SupportSet {
    /// Build from a list of indices; sorts and rejects duplicates.
    pub fn new(mut indices: Vec<usize>) -> Result<SupportSet> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("support set contains duplicate indices"));
        }
        Ok(SupportSet { indices })
    }

    pub fn empty() -> SupportSet {
        SupportSet { indices: vec![] }
    }

    /// All of `0..d`.
    pub fn full(d: usize) -> SupportSet {
        SupportSet {
            indices: (0..d).collect(),
        }
    }

    /// The exact nonzero pattern of a coefficient vector.
    pub fn from_nonzero(beta: &DVector<f64>) -> SupportSet {
        SupportSet {
            indices: (0..beta.len()).filter(|&j| beta[j] != 0.0).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.indices.binary_search(&idx).is_ok()
    }

    fn check_bounds(&self, d: usize) -> Result<()> {
        if let Some(&last) = self.indices.last() {
            if last >= d {
                return Err(Error::invalid(format!(
                    "support index {last} out of range for d = {d}"
                )));
            }
        }
        Ok(())
    }
}

/// A restricted minimizer of the Q statistic with its test quantities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    /// Length-d coefficient vector, zero outside `support`.
    pub beta: Vec<f64>,
    pub support: SupportSet,
    pub q_value: f64,
    pub p_value: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Degrees of freedom of the reference chi-squared law (= m).
    pub df: usize,
}

impl FitResult {
    pub fn beta_vector(&self) -> DVector<f64> {
        DVector::from_vec(self.beta.clone())
    }
}

/// `Σ_Π(β) = ξ(β) Σ_Π ξ(β)ᵀ`, computed as the block double sum
/// `Σ_{k,l ∈ supp(β)} β_k β_l Σ_Π^[kl]` (cost |supp|² m² instead of a full
/// Kronecker contraction).
pub fn sigma_pi_of_beta(joint: &JointSummaryStats, beta: &DVector<f64>) -> DMatrix<f64> {
    let m = joint.m();
    assert_eq!(beta.len(), joint.d(), "beta length must equal d");
    let mut out = DMatrix::zeros(m, m);
    let support: Vec<usize> = (0..beta.len()).filter(|&k| beta[k] != 0.0).collect();
    for &k in &support {
        for &l in &support {
            let scale = beta[k] * beta[l];
            out += joint.sigma_big_pi_block(k, l) * scale;
        }
    }
    out
}

fn weight_matrix(joint: &JointSummaryStats, beta: &DVector<f64>) -> DMatrix<f64> {
    let mut w = sigma_pi_of_beta(joint, beta) / joint.n_b() as f64;
    w += joint.sigma_pi() / joint.n_a() as f64;
    w
}

/// The two-sample Q statistic at `beta`, solved through a symmetric
/// factorization of the weight matrix.
pub fn q_statistic(joint: &JointSummaryStats, beta: &DVector<f64>) -> Result<f64> {
    if beta.len() != joint.d() {
        return Err(Error::dim("beta length must equal the covariate count"));
    }
    let residual = joint.pi() - joint.big_pi() * beta;
    let solver = weight_solver(&weight_matrix(joint, beta))?;
    Ok(solver.quad_form(&residual).max(0.0))
}

/// Level-α test: reject (returns `true`) iff `q_value` exceeds the
/// 1−α chi-squared quantile with `df` degrees of freedom.
pub fn level_test(fit: &FitResult, alpha: f64) -> bool {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must be in (0, 1)");
    fit.q_value > chi2_quantile(1.0 - alpha, fit.df as u32)
}

/// Minimize Q over β with support `s` by iterated GMM with a Nelder–Mead
/// fallback. `|s|` must be between 1 and m.
pub fn fit_restricted(joint: &JointSummaryStats, s: &SupportSet) -> Result<FitResult> {
    if s.is_empty() {
        return Err(Error::invalid("fit_restricted requires a non-empty support"));
    }
    if s.len() > joint.m() {
        return Err(Error::OverParameterized {
            support_size: s.len(),
            m: joint.m(),
        });
    }
    fit_on_support(joint, s, None, false)
}

/// Fit with one coordinate of the support pinned to a fixed value; used by
/// test-inversion confidence intervals. `allow_underdetermined` permits
/// supports larger than m (profiling the unrestricted TSIV estimate), in
/// which case inner least-squares solves are minimum-norm.
pub(crate) fn fit_profiled(
    joint: &JointSummaryStats,
    s: &SupportSet,
    pinned: (usize, f64),
    allow_underdetermined: bool,
) -> Result<FitResult> {
    if !s.contains(pinned.0) {
        return Err(Error::invalid("pinned coordinate is not in the support"));
    }
    if !allow_underdetermined && s.len() > joint.m() {
        return Err(Error::OverParameterized {
            support_size: s.len(),
            m: joint.m(),
        });
    }
    fit_on_support(joint, s, Some(pinned), true)
}

fn fit_on_support(
    joint: &JointSummaryStats,
    s: &SupportSet,
    pinned: Option<(usize, f64)>,
    min_norm: bool,
) -> Result<FitResult> {
    let m = joint.m();
    let d = joint.d();
    s.check_bounds(d)?;

    let free: Vec<usize> = s
        .indices()
        .iter()
        .copied()
        .filter(|&j| pinned.map_or(true, |(p, _)| p != j))
        .collect();
    let n_free = free.len();

    let embed = |coeffs: &DVector<f64>| -> DVector<f64> {
        let mut beta = DVector::zeros(d);
        for (i, &j) in free.iter().enumerate() {
            beta[j] = coeffs[i];
        }
        if let Some((p, v)) = pinned {
            beta[p] = v;
        }
        beta
    };

    // Residual target and design restricted to the free coordinates.
    let mut target = joint.pi().clone();
    if let Some((p, v)) = pinned {
        target -= joint.big_pi().column(p) * v;
    }
    let design = DMatrix::from_fn(m, n_free, |i, k| joint.big_pi()[(i, free[k])]);

    let wls = |solver: &SymEig| -> DVector<f64> {
        if n_free == 0 {
            return DVector::zeros(0);
        }
        let winv_design = solver.solve_mat(&design);
        let normal = design.tr_mul(&winv_design);
        let rhs = winv_design.tr_mul(&target);
        if min_norm {
            // profile fits may be under-determined; take the minimum-norm
            // stationary point
            return min_norm_lstsq(&normal, &rhs, 1e-12);
        }
        match nalgebra::Cholesky::new(normal.clone()) {
            Some(chol) => chol.solve(&rhs),
            None => min_norm_lstsq(&normal, &rhs, 1e-12),
        }
    };

    // Step 0: weight at β = 0 (instrument-side covariance only); always PD
    // for valid inputs.
    let w0 = joint.sigma_pi() / joint.n_a() as f64;
    let mut current = wls(&weight_solver(&w0)?);
    let mut iterations = 0usize;
    let mut converged = n_free == 0;

    // The reweighting fixed point need not be the minimum of the
    // continuously-weighted Q, so keep the best iterate seen.
    let mut best = current.clone();
    let mut best_q = f64::INFINITY;

    while iterations < GMM_MAX_ITER {
        let beta_full = embed(&current);
        let solver = weight_solver(&weight_matrix(joint, &beta_full))?;
        let q_here = solver.quad_form(&(&target - &design * &current));
        if q_here < best_q {
            best_q = q_here;
            best.copy_from(&current);
        }
        if converged {
            break;
        }
        let next = wls(&solver);
        iterations += 1;
        let step = (&next - &current).amax();
        current = next;
        if step < GMM_STEP_TOL {
            converged = true;
        }
    }

    if n_free > 0 {
        // Simplex polish from the best iterate: guards against oscillation
        // and closes the gap between the fixed point and the Q minimum.
        let objective = |coeffs: &DVector<f64>| -> f64 {
            q_statistic(joint, &embed(coeffs)).unwrap_or(f64::INFINITY)
        };
        let nm = nelder_mead(objective, &best, NM_BUDGET);
        if nm.value < best_q {
            best = nm.x;
        }
    }

    let beta = embed(&best);
    let q_value = q_statistic(joint, &beta)?;
    let p_value = 1.0 - chi2_cdf(q_value, m as u32);
    Ok(FitResult {
        beta: beta.iter().copied().collect(),
        support: s.clone(),
        q_value,
        p_value,
        converged,
        iterations,
        df: m,
    })
}

/// Synthetic fit for the empty support: β = 0, Q(0) against the same
/// chi-squared reference.
pub(crate) fn fit_empty(joint: &JointSummaryStats) -> Result<FitResult> {
    let q_value = q_statistic(joint, &DVector::zeros(joint.d()))?;
    Ok(FitResult {
        beta: vec![0.0; joint.d()],
        support: SupportSet::empty(),
        q_value,
        p_value: 1.0 - chi2_cdf(q_value, joint.m() as u32),
        converged: true,
        iterations: 0,
        df: joint.m(),
    })
}

/// One-sample Anderson–Rubin statistic:
/// `AR(β) = ((n−m)/m) · (rᵀ P_Z r) / (rᵀ M_Z r)` with `r = Y − Xβ`,
/// `P_Z` the instrument projection and `M_Z` its complement.
pub fn ar_statistic(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
    beta: &DVector<f64>,
) -> Result<f64> {
    let n = y.len();
    let m = z.ncols();
    if x.nrows() != n || z.nrows() != n {
        return Err(Error::dim("y, x, z must share the observation count"));
    }
    if beta.len() != x.ncols() {
        return Err(Error::dim("beta length must equal the covariate count"));
    }
    if n <= m {
        return Err(Error::invalid("AR statistic requires n > m"));
    }
    let residual = y - x * beta;
    let gram = z.tr_mul(z);
    let chol = nalgebra::Cholesky::new(gram).ok_or(Error::RankDeficientDesign)?;
    let ztr = z.tr_mul(&residual);
    let projected = ztr.dot(&chol.solve(&ztr));
    let total = residual.norm_squared();
    let complement = total - projected;
    if complement <= f64::EPSILON * total.max(1.0) * 16.0 {
        return Err(Error::ZeroArDenominator);
    }
    Ok(((n - m) as f64 / m as f64) * projected / complement)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};

    fn simple_joint(m: usize, d: usize, pi: Vec<f64>, big_pi: Vec<f64>) -> JointSummaryStats {
        // identity covariances; big_pi row-major
        JointSummaryStats::new(
            DVector::from_vec(pi),
            DMatrix::identity(m, m),
            DMatrix::from_row_slice(m, d, &big_pi),
            DMatrix::identity(m * d, m * d),
            100,
            100,
            (0..m).map(|i| format!("s{i}")).collect(),
            (0..d).map(|i| format!("x{i}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn support_set_sorts_and_rejects_duplicates() {
        let s = SupportSet::new(vec![3, 1, 2]).unwrap();
        assert_eq!(s.indices(), &[1, 2, 3]);
        assert!(SupportSet::new(vec![1, 1]).is_err());
    }

    #[test]
    fn sigma_pi_of_beta_zero_and_scalar_cases() {
        let joint = simple_joint(2, 1, vec![1.0, 2.0], vec![1.0, 0.5]);
        let zero = sigma_pi_of_beta(&joint, &DVector::zeros(1));
        assert_eq!(zero.amax(), 0.0);
        // d = 1: c² Σ_Π^[11]
        let c = -1.7;
        let scaled = sigma_pi_of_beta(&joint, &DVector::from_vec(vec![c]));
        assert_relative_eq!(
            scaled,
            DMatrix::<f64>::identity(2, 2) * (c * c),
            epsilon = 1e-14
        );
    }

    #[test]
    fn q_zero_at_exact_solution() {
        let joint = simple_joint(2, 1, vec![2.0, 1.0], vec![2.0, 1.0]);
        let q = q_statistic(&joint, &DVector::from_vec(vec![1.0])).unwrap();
        assert!(q.abs() < 1e-12);
    }

    #[test]
    fn q_scalar_formula() {
        // m = 1: Q(β) = (π − Πβ)² / (σ²_π/n_a + Σ_Π(β)/n_b)
        let joint = JointSummaryStats::new(
            DVector::from_vec(vec![0.8]),
            DMatrix::from_element(1, 1, 2.0),
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 3.0),
            50,
            200,
            vec!["s".into()],
            vec!["x".into()],
        )
        .unwrap();
        let beta = 0.4;
        let by_hand = (0.8_f64 - 0.5 * beta).powi(2)
            / (2.0 / 50.0 + beta * beta * 3.0 / 200.0);
        let q = q_statistic(&joint, &DVector::from_vec(vec![beta])).unwrap();
        assert_relative_eq!(q, by_hand, epsilon = 1e-12);
    }

    #[test]
    fn q_matches_explicit_2x2_inverse() {
        // m = 2, d = 1 fixed instance against cofactor-formula inversion.
        let sigma_pi = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.5]);
        let block = DMatrix::from_row_slice(2, 2, &[1.2, -0.2, -0.2, 0.9]);
        let joint = JointSummaryStats::new(
            DVector::from_vec(vec![1.0, -0.5]),
            sigma_pi.clone(),
            DMatrix::from_column_slice(2, 1, &[0.7, 0.4]),
            block.clone(),
            80,
            120,
            vec!["s1".into(), "s2".into()],
            vec!["x".into()],
        )
        .unwrap();
        let beta = -1.3;
        let r = DVector::from_vec(vec![1.0 - 0.7 * beta, -0.5 - 0.4 * beta]);
        let w = &sigma_pi / 80.0 + &block * (beta * beta / 120.0);
        let det = w[(0, 0)] * w[(1, 1)] - w[(0, 1)] * w[(1, 0)];
        let winv = DMatrix::from_row_slice(
            2,
            2,
            &[w[(1, 1)] / det, -w[(0, 1)] / det, -w[(1, 0)] / det, w[(0, 0)] / det],
        );
        let expected = (winv * &r).dot(&r);
        let q = q_statistic(&joint, &DVector::from_vec(vec![beta])).unwrap();
        assert_relative_eq!(q, expected, epsilon = 1e-12);
    }

    #[test]
    fn fit_recovers_exact_solution_with_zero_q() {
        let joint = simple_joint(3, 2, vec![1.0, 2.0, 0.0], vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        // pi = big_pi * (1, 2)
        let s = SupportSet::new(vec![0, 1]).unwrap();
        let fit = fit_restricted(&joint, &s).unwrap();
        assert!(fit.q_value < 1e-18, "q = {}", fit.q_value);
        assert_relative_eq!(fit.beta[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(fit.beta[1], 2.0, epsilon = 1e-9);
        assert!(fit.converged);
        assert_relative_eq!(fit.p_value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn just_identified_fit_solves_linear_system() {
        // d = m = 2, invertible design, exact data
        let big_pi = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 2.0]);
        let beta_true = DVector::from_vec(vec![0.7, -1.1]);
        let pi = &big_pi * &beta_true;
        let joint = JointSummaryStats::new(
            pi,
            DMatrix::identity(2, 2),
            big_pi,
            DMatrix::identity(4, 4),
            60,
            60,
            vec!["a".into(), "b".into()],
            vec!["x1".into(), "x2".into()],
        )
        .unwrap();
        let fit = fit_restricted(&joint, &SupportSet::full(2)).unwrap();
        assert_relative_eq!(fit.beta[0], beta_true[0], epsilon = 1e-8);
        assert_relative_eq!(fit.beta[1], beta_true[1], epsilon = 1e-8);
    }

    #[test]
    fn over_parameterized_support_is_an_error() {
        let joint = simple_joint(2, 3, vec![1.0, 1.0], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        match fit_restricted(&joint, &SupportSet::full(3)) {
            Err(Error::OverParameterized { support_size, m }) => {
                assert_eq!((support_size, m), (3, 2));
            }
            other => panic!("expected over-parameterized error, got {other:?}"),
        }
    }

    #[test]
    fn level_test_accepts_zero_q() {
        let fit = FitResult {
            beta: vec![0.0],
            support: SupportSet::new(vec![0]).unwrap(),
            q_value: 0.0,
            p_value: 1.0,
            converged: true,
            iterations: 1,
            df: 3,
        };
        for alpha in [0.01, 0.05, 0.5, 0.99] {
            assert!(!level_test(&fit, alpha));
        }
    }

    #[test]
    fn level_test_rejects_just_above_quantile() {
        let threshold = chi2_quantile(0.95, 3);
        let fit = FitResult {
            beta: vec![0.0],
            support: SupportSet::new(vec![0]).unwrap(),
            q_value: threshold + 1e-6,
            p_value: 1.0 - chi2_cdf(threshold + 1e-6, 3),
            converged: true,
            iterations: 1,
            df: 3,
        };
        assert!(level_test(&fit, 0.05));
    }

    #[test]
    fn ar_statistic_errors_on_exact_fit() {
        let z = DMatrix::from_row_slice(4, 1, &[1.0, -1.0, 2.0, 0.5]);
        let x = DMatrix::from_fn(4, 1, |i, _| z[(i, 0)] * 1.5 + 0.1 * i as f64);
        let beta = DVector::from_vec(vec![2.0]);
        let y = &x * &beta;
        match ar_statistic(&y, &x, &z, &beta) {
            Err(Error::ZeroArDenominator) => {}
            other => panic!("expected zero denominator error, got {other:?}"),
        }
    }
}
