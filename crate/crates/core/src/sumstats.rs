//! Two-sample summary statistics: data model, marginal-to-joint
//! conversion, per-SNP OLS from individual-level data, and first-stage
//! instrument selection.
//!
//! All types are immutable after construction and all operations are pure
//! functions, so everything here is safe to evaluate concurrently.

use nalgebra::{DMatrix, DMatrixView, DVector};

use crate::error::{Error, Result};
use crate::linalg::{correlation_inverse, is_symmetric, kron, SymEig};

pub mod io;

/// Absolute tolerance for validating ingested correlation matrices
/// (symmetry, unit diagonal, entry range). File data is often rounded.
const CORRELATION_CHECK_TOL: f64 = 1e-6;

/// Marginal (per-SNP univariate OLS) summary statistics from two samples:
/// an outcome study of size `n_a` and a covariate study of size `n_b`.
#[derive(Debug, Clone)]
pub struct MarginalSummaryStats {
    eta: DVector<f64>,
    sigma_eta_sq: DVector<f64>,
    h: DMatrix<f64>,
    sigma_h_sq: DMatrix<f64>,
    m_za: DMatrix<f64>,
    m_zb: DMatrix<f64>,
    m_x: DMatrix<f64>,
    n_a: usize,
    n_b: usize,
    snp_ids: Vec<String>,
    covariate_ids: Vec<String>,
}

fn check_correlation(mat: &DMatrix<f64>, name: &str, dim: usize) -> Result<()> {
    if mat.nrows() != dim || mat.ncols() != dim {
        return Err(Error::dim(format!(
            "{name} must be {dim}x{dim}, got {}x{}",
            mat.nrows(),
            mat.ncols()
        )));
    }
    if !is_symmetric(mat, CORRELATION_CHECK_TOL) {
        return Err(Error::invalid(format!("{name} is not symmetric")));
    }
    for i in 0..dim {
        if (mat[(i, i)] - 1.0).abs() > CORRELATION_CHECK_TOL {
            return Err(Error::invalid(format!(
                "{name} diagonal entry {i} is {} (expected 1)",
                mat[(i, i)]
            )));
        }
        for j in 0..dim {
            if mat[(i, j)].abs() > 1.0 + CORRELATION_CHECK_TOL || !mat[(i, j)].is_finite() {
                return Err(Error::invalid(format!(
                    "{name} entry ({i},{j}) = {} outside [-1, 1]",
                    mat[(i, j)]
                )));
            }
        }
    }
    Ok(())
}

impl MarginalSummaryStats {
    /// Construct and validate; `m_za` and `m_zb` are the instrument
    /// correlation matrices of the outcome and covariate studies.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        eta: DVector<f64>,
        sigma_eta_sq: DVector<f64>,
        h: DMatrix<f64>,
        sigma_h_sq: DMatrix<f64>,
        m_za: DMatrix<f64>,
        m_zb: DMatrix<f64>,
        m_x: DMatrix<f64>,
        n_a: usize,
        n_b: usize,
        snp_ids: Vec<String>,
        covariate_ids: Vec<String>,
    ) -> Result<MarginalSummaryStats> {
        let m = eta.len();
        let d = h.ncols();
        if m == 0 || d == 0 {
            return Err(Error::invalid("need at least one SNP and one covariate"));
        }
        if sigma_eta_sq.len() != m {
            return Err(Error::dim("sigma_eta_sq length differs from eta"));
        }
        if h.nrows() != m || sigma_h_sq.nrows() != m || sigma_h_sq.ncols() != d {
            return Err(Error::dim(format!(
                "h is {}x{}, sigma_h_sq is {}x{}, expected {m}x{d}",
                h.nrows(),
                h.ncols(),
                sigma_h_sq.nrows(),
                sigma_h_sq.ncols()
            )));
        }
        if snp_ids.len() != m {
            return Err(Error::dim("snp_ids length differs from eta"));
        }
        if covariate_ids.len() != d {
            return Err(Error::dim("covariate_ids length differs from h columns"));
        }
        if n_a == 0 || n_b == 0 {
            return Err(Error::invalid("sample sizes must be positive"));
        }
        // Variances may legitimately be zero on noiseless data, but never
        // negative or non-finite.
        for (i, v) in sigma_eta_sq.iter().enumerate() {
            if !(*v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("sigma_eta_sq[{i}] = {v} is invalid")));
            }
        }
        for v in sigma_h_sq.iter() {
            if !(*v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("sigma_h_sq entry {v} is invalid")));
            }
        }
        check_correlation(&m_za, "M_Za", m)?;
        check_correlation(&m_zb, "M_Zb", m)?;
        check_correlation(&m_x, "M_X", d)?;
        Ok(MarginalSummaryStats {
            eta,
            sigma_eta_sq,
            h,
            sigma_h_sq,
            m_za,
            m_zb,
            m_x,
            n_a,
            n_b,
            snp_ids,
            covariate_ids,
        })
    }

    /// Construct with a single instrument correlation matrix shared by both
    /// studies, the common situation with one external LD estimate.
    #[allow(clippy::too_many_arguments)]
    pub fn with_shared_instrument_correlation(
        eta: DVector<f64>,
        sigma_eta_sq: DVector<f64>,
        h: DMatrix<f64>,
        sigma_h_sq: DMatrix<f64>,
        m_z: DMatrix<f64>,
        m_x: DMatrix<f64>,
        n_a: usize,
        n_b: usize,
        snp_ids: Vec<String>,
        covariate_ids: Vec<String>,
    ) -> Result<MarginalSummaryStats> {
        MarginalSummaryStats::new(
            eta,
            sigma_eta_sq,
            h,
            sigma_h_sq,
            m_z.clone(),
            m_z,
            m_x,
            n_a,
            n_b,
            snp_ids,
            covariate_ids,
        )
    }

    pub fn m(&self) -> usize {
        self.eta.len()
    }

    pub fn d(&self) -> usize {
        self.h.ncols()
    }

    pub fn eta(&self) -> &DVector<f64> {
        &self.eta
    }

    pub fn sigma_eta_sq(&self) -> &DVector<f64> {
        &self.sigma_eta_sq
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn sigma_h_sq(&self) -> &DMatrix<f64> {
        &self.sigma_h_sq
    }

    pub fn m_za(&self) -> &DMatrix<f64> {
        &self.m_za
    }

    pub fn m_zb(&self) -> &DMatrix<f64> {
        &self.m_zb
    }

    pub fn m_x(&self) -> &DMatrix<f64> {
        &self.m_x
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn snp_ids(&self) -> &[String] {
        &self.snp_ids
    }

    pub fn covariate_ids(&self) -> &[String] {
        &self.covariate_ids
    }
}

/// Joint (multivariate reduced-form OLS) summary statistics.
///
/// `sigma_big_pi` is the md×md covariance of the column-stacked `big_pi`:
/// block (k, l) is the m×m covariance between columns k and l, so that
/// ξ(β) Σ_Π ξ(β)ᵀ = Σ_{k,l} β_k β_l Σ_Π^[kl] holds with no permutation.
#[derive(Debug, Clone)]
pub struct JointSummaryStats {
    pi: DVector<f64>,
    sigma_pi: DMatrix<f64>,
    big_pi: DMatrix<f64>,
    sigma_big_pi: DMatrix<f64>,
    n_a: usize,
    n_b: usize,
    snp_ids: Vec<String>,
    covariate_ids: Vec<String>,
}

impl JointSummaryStats {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        pi: DVector<f64>,
        sigma_pi: DMatrix<f64>,
        big_pi: DMatrix<f64>,
        sigma_big_pi: DMatrix<f64>,
        n_a: usize,
        n_b: usize,
        snp_ids: Vec<String>,
        covariate_ids: Vec<String>,
    ) -> Result<JointSummaryStats> {
        let m = pi.len();
        let d = big_pi.ncols();
        if m == 0 || d == 0 {
            return Err(Error::invalid("need at least one SNP and one covariate"));
        }
        if big_pi.nrows() != m {
            return Err(Error::dim(format!(
                "big_pi is {}x{}, expected {m} rows",
                big_pi.nrows(),
                big_pi.ncols()
            )));
        }
        if sigma_pi.shape() != (m, m) {
            return Err(Error::dim("sigma_pi must be m x m"));
        }
        if sigma_big_pi.shape() != (m * d, m * d) {
            return Err(Error::dim(format!(
                "sigma_big_pi is {}x{}, expected {}x{}",
                sigma_big_pi.nrows(),
                sigma_big_pi.ncols(),
                m * d,
                m * d
            )));
        }
        if snp_ids.len() != m || covariate_ids.len() != d {
            return Err(Error::dim("identifier lists do not match dimensions"));
        }
        if n_a == 0 || n_b == 0 {
            return Err(Error::invalid("sample sizes must be positive"));
        }
        if !is_symmetric(&sigma_pi, 1e-10 * (1.0 + sigma_pi.amax())) {
            return Err(Error::invalid("sigma_pi is not symmetric"));
        }
        let eig = SymEig::new(&sigma_pi);
        let min_eig = eig.min_eigenvalue();
        if min_eig < -1e-8 * eig.max_eigenvalue().abs().max(1.0) {
            return Err(Error::invalid(format!(
                "sigma_pi is not positive semidefinite (eigenvalue {min_eig:.3e})"
            )));
        }
        if !is_symmetric(&sigma_big_pi, 1e-10 * (1.0 + sigma_big_pi.amax())) {
            return Err(Error::invalid(
                "sigma_big_pi is not symmetric as an md x md matrix",
            ));
        }
        Ok(JointSummaryStats {
            pi,
            sigma_pi,
            big_pi,
            sigma_big_pi,
            n_a,
            n_b,
            snp_ids,
            covariate_ids,
        })
    }

    pub fn m(&self) -> usize {
        self.pi.len()
    }

    pub fn d(&self) -> usize {
        self.big_pi.ncols()
    }

    pub fn pi(&self) -> &DVector<f64> {
        &self.pi
    }

    pub fn sigma_pi(&self) -> &DMatrix<f64> {
        &self.sigma_pi
    }

    pub fn big_pi(&self) -> &DMatrix<f64> {
        &self.big_pi
    }

    pub fn sigma_big_pi(&self) -> &DMatrix<f64> {
        &self.sigma_big_pi
    }

    /// The m×m covariance block between columns `k` and `l` of `big_pi`.
    pub fn sigma_big_pi_block(&self, k: usize, l: usize) -> DMatrixView<'_, f64> {
        let m = self.m();
        self.sigma_big_pi.view((k * m, l * m), (m, m))
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn snp_ids(&self) -> &[String] {
        &self.snp_ids
    }

    pub fn covariate_ids(&self) -> &[String] {
        &self.covariate_ids
    }
}

fn default_snp_ids(m: usize) -> Vec<String> {
    (1..=m).map(|i| format!("snp_{i}")).collect()
}

fn default_covariate_ids(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("x{i}")).collect()
}

/// Convert marginal to joint summary statistics.
///
/// With D_a = diag((σ²_η + η²)^½) and D_b^(k) = diag((σ²_{H,k} + (H^k)²)^½),
/// the joint estimates are recovered exactly as
///
/// - π = D_a M_Za⁻¹ D_a⁻¹ η,
/// - Σ_π = (1 − ηᵀ (D_a M_Za D_a)⁻¹ η) · D_a M_Za⁻¹ D_a,
/// - Π^k = D_b^(k) M_Zb⁻¹ (D_b^(k))⁻¹ H^k,
/// - Σ_Π^[kl] = (M_X[k,l] − H^kᵀ (D_b^(k))⁻¹ M_Zb⁻¹ (D_b^(l))⁻¹ H^l)
///   · D_b^(k) M_Zb⁻¹ D_b^(l),
///
/// an exact algebraic identity with the per-SNP OLS definitions used here.
pub fn marginal_to_joint(marg: &MarginalSummaryStats) -> Result<JointSummaryStats> {
    let m = marg.m();
    let d = marg.d();

    let d_a = DVector::from_fn(m, |i, _| (marg.sigma_eta_sq[i] + marg.eta[i].powi(2)).sqrt());
    for (i, v) in d_a.iter().enumerate() {
        if !(*v > 0.0) {
            return Err(Error::invalid(format!(
                "marginal outcome scale for SNP {i} is zero; effect and variance cannot both vanish"
            )));
        }
    }

    let minv_a = correlation_inverse(&marg.m_za, "M_Za")?;
    let eta_scaled = marg.eta.component_div(&d_a);
    let minv_eta = &minv_a * &eta_scaled;
    let pi = d_a.component_mul(&minv_eta);

    let residual_scale = 1.0 - eta_scaled.dot(&minv_eta);
    if residual_scale <= 0.0 {
        return Err(Error::InconsistentMarginals {
            value: residual_scale,
        });
    }
    let mut sigma_pi = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            sigma_pi[(i, j)] = residual_scale * d_a[i] * minv_a[(i, j)] * d_a[j];
        }
    }

    let minv_b = correlation_inverse(&marg.m_zb, "M_Zb")?;
    let mut d_b: Vec<DVector<f64>> = Vec::with_capacity(d);
    let mut h_scaled: Vec<DVector<f64>> = Vec::with_capacity(d);
    let mut minv_h: Vec<DVector<f64>> = Vec::with_capacity(d);
    for k in 0..d {
        let scale = DVector::from_fn(m, |i, _| {
            (marg.sigma_h_sq[(i, k)] + marg.h[(i, k)].powi(2)).sqrt()
        });
        for (i, v) in scale.iter().enumerate() {
            if !(*v > 0.0) {
                return Err(Error::invalid(format!(
                    "marginal covariate scale for SNP {i}, covariate {k} is zero"
                )));
            }
        }
        let hs = DVector::from_fn(m, |i, _| marg.h[(i, k)] / scale[i]);
        minv_h.push(&minv_b * &hs);
        h_scaled.push(hs);
        d_b.push(scale);
    }

    let mut big_pi = DMatrix::zeros(m, d);
    for k in 0..d {
        for i in 0..m {
            big_pi[(i, k)] = d_b[k][i] * minv_h[k][i];
        }
    }

    let mut sigma_big_pi = DMatrix::zeros(m * d, m * d);
    for k in 0..d {
        for l in k..d {
            let mid = marg.m_x[(k, l)] - h_scaled[k].dot(&minv_h[l]);
            let mut block = DMatrix::zeros(m, m);
            for i in 0..m {
                for j in 0..m {
                    block[(i, j)] = mid * d_b[k][i] * minv_b[(i, j)] * d_b[l][j];
                }
            }
            sigma_big_pi
                .view_mut((k * m, l * m), (m, m))
                .copy_from(&block);
            if l != k {
                sigma_big_pi
                    .view_mut((l * m, k * m), (m, m))
                    .copy_from(&block.transpose());
            }
        }
    }

    JointSummaryStats::new(
        pi,
        sigma_pi,
        big_pi,
        sigma_big_pi,
        marg.n_a,
        marg.n_b,
        marg.snp_ids.clone(),
        marg.covariate_ids.clone(),
    )
}

/// Joint reduced-form OLS summary statistics from individual-level data:
/// π = (ZₐᵀZₐ)⁻¹ZₐᵀYₐ with Σ_π = εₐᵀεₐ (ZₐᵀZₐ)⁻¹, and per covariate pair
/// Σ_Π^[kl] = (ε_b^k)ᵀε_b^l (Z_bᵀZ_b)⁻¹.
pub fn joint_from_individual(
    y_a: &DVector<f64>,
    z_a: &DMatrix<f64>,
    x_b: &DMatrix<f64>,
    z_b: &DMatrix<f64>,
) -> Result<JointSummaryStats> {
    let n_a = y_a.len();
    let n_b = x_b.nrows();
    let m = z_a.ncols();
    let d = x_b.ncols();
    if z_a.nrows() != n_a {
        return Err(Error::dim("z_a rows differ from y_a length"));
    }
    if z_b.nrows() != n_b {
        return Err(Error::dim("z_b rows differ from x_b rows"));
    }
    if z_b.ncols() != m {
        return Err(Error::dim("z_a and z_b disagree on instrument count"));
    }

    let gram_a = z_a.tr_mul(z_a);
    let chol_a = nalgebra::Cholesky::new(gram_a).ok_or(Error::RankDeficientDesign)?;
    let pi = chol_a.solve(&z_a.tr_mul(y_a));
    let resid_a = y_a - z_a * &pi;
    let sigma_pi = chol_a.inverse() * resid_a.norm_squared();

    let gram_b = z_b.tr_mul(z_b);
    let chol_b = nalgebra::Cholesky::new(gram_b).ok_or(Error::RankDeficientDesign)?;
    let big_pi = chol_b.solve(&z_b.tr_mul(x_b));
    let resid_b = x_b - z_b * &big_pi;
    // (ε_bᵀ ε_b)_{kl} scales a common (Z_bᵀZ_b)⁻¹ factor in every block
    let resid_gram = resid_b.tr_mul(&resid_b);
    let gram_b_inv = chol_b.inverse();
    let sigma_big_pi = kron(&resid_gram, &gram_b_inv);

    JointSummaryStats::new(
        pi,
        sigma_pi,
        big_pi,
        sigma_big_pi,
        n_a,
        n_b,
        default_snp_ids(m),
        default_covariate_ids(d),
    )
}

/// Marginal per-SNP OLS summary statistics from individual-level data,
/// with sample correlation matrices of the instruments and covariates.
pub fn marginal_from_individual(
    y_a: &DVector<f64>,
    z_a: &DMatrix<f64>,
    x_b: &DMatrix<f64>,
    z_b: &DMatrix<f64>,
) -> Result<MarginalSummaryStats> {
    let n_a = y_a.len();
    let n_b = x_b.nrows();
    let m = z_a.ncols();
    let d = x_b.ncols();
    if z_a.nrows() != n_a || z_b.nrows() != n_b || z_b.ncols() != m {
        return Err(Error::dim("design matrix shapes are inconsistent"));
    }

    let mut eta = DVector::zeros(m);
    let mut sigma_eta_sq = DVector::zeros(m);
    for j in 0..m {
        let col = z_a.column(j);
        let zz = col.norm_squared();
        if zz == 0.0 {
            return Err(Error::DegenerateColumn {
                matrix: "Z_a",
                index: j,
            });
        }
        let coef = col.dot(y_a) / zz;
        eta[j] = coef;
        sigma_eta_sq[j] = (y_a - col * coef).norm_squared() / zz;
    }

    let mut h = DMatrix::zeros(m, d);
    let mut sigma_h_sq = DMatrix::zeros(m, d);
    for j in 0..m {
        let col = z_b.column(j);
        let zz = col.norm_squared();
        if zz == 0.0 {
            return Err(Error::DegenerateColumn {
                matrix: "Z_b",
                index: j,
            });
        }
        for k in 0..d {
            let x_col = x_b.column(k);
            let coef = col.dot(&x_col) / zz;
            h[(j, k)] = coef;
            sigma_h_sq[(j, k)] = (x_col - col * coef).norm_squared() / zz;
        }
    }

    let m_za = sample_correlation(z_a, "Z_a")?;
    let m_zb = sample_correlation(z_b, "Z_b")?;
    let m_x = sample_correlation(x_b, "X_b")?;

    MarginalSummaryStats::new(
        eta,
        sigma_eta_sq,
        h,
        sigma_h_sq,
        m_za,
        m_zb,
        m_x,
        n_a,
        n_b,
        default_snp_ids(m),
        default_covariate_ids(d),
    )
}

/// D^{-1/2} (AᵀA) D^{-1/2} with D the diagonal of AᵀA.
fn sample_correlation(a: &DMatrix<f64>, name: &'static str) -> Result<DMatrix<f64>> {
    let gram = a.tr_mul(a);
    let k = gram.nrows();
    let mut scale = DVector::zeros(k);
    for j in 0..k {
        if gram[(j, j)] <= 0.0 {
            return Err(Error::DegenerateColumn {
                matrix: name,
                index: j,
            });
        }
        scale[j] = gram[(j, j)].sqrt();
    }
    let mut corr = gram;
    for i in 0..k {
        for j in 0..k {
            corr[(i, j)] /= scale[i] * scale[j];
        }
        corr[(i, i)] = 1.0;
    }
    // exact symmetry regardless of summation order
    for i in 0..k {
        for j in (i + 1)..k {
            let avg = 0.5 * (corr[(i, j)] + corr[(j, i)]);
            corr[(i, j)] = avg;
            corr[(j, i)] = avg;
        }
    }
    Ok(corr)
}

/// First-stage F statistics: entry (j, k) = H[j,k]² / σ²_H[j,k].
///
/// Requires strictly positive variance entries; a zero variance yields an
/// infinite F, which ranks the pair as maximally strong.
pub fn first_stage_f(marg: &MarginalSummaryStats) -> DMatrix<f64> {
    DMatrix::from_fn(marg.m(), marg.d(), |j, k| {
        marg.h[(j, k)].powi(2) / marg.sigma_h_sq[(j, k)]
    })
}

/// Keep, for each covariate, the `k_per_covariate` SNPs with the largest
/// first-stage F statistic; restrict all fields to the deduplicated union
/// in the original SNP order.
pub fn select_instruments(
    marg: &MarginalSummaryStats,
    k_per_covariate: usize,
) -> Result<MarginalSummaryStats> {
    let m = marg.m();
    let d = marg.d();
    if k_per_covariate == 0 || k_per_covariate > m {
        return Err(Error::invalid(format!(
            "k_per_covariate = {k_per_covariate} must be in 1..={m}"
        )));
    }
    let f = first_stage_f(marg);
    let mut keep = vec![false; m];
    for k in 0..d {
        let mut order: Vec<usize> = (0..m).collect();
        // descending F, index ascending on ties
        order.sort_by(|&a, &b| {
            f[(b, k)]
                .partial_cmp(&f[(a, k)])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        for &j in order.iter().take(k_per_covariate) {
            keep[j] = true;
        }
    }
    let selected: Vec<usize> = (0..m).filter(|&j| keep[j]).collect();

    let ms = selected.len();
    let eta = DVector::from_fn(ms, |i, _| marg.eta[selected[i]]);
    let sigma_eta_sq = DVector::from_fn(ms, |i, _| marg.sigma_eta_sq[selected[i]]);
    let h = DMatrix::from_fn(ms, d, |i, k| marg.h[(selected[i], k)]);
    let sigma_h_sq = DMatrix::from_fn(ms, d, |i, k| marg.sigma_h_sq[(selected[i], k)]);
    let m_za = DMatrix::from_fn(ms, ms, |i, j| marg.m_za[(selected[i], selected[j])]);
    let m_zb = DMatrix::from_fn(ms, ms, |i, j| marg.m_zb[(selected[i], selected[j])]);
    let snp_ids = selected.iter().map(|&j| marg.snp_ids[j].clone()).collect();

    MarginalSummaryStats::new(
        eta,
        sigma_eta_sq,
        h,
        sigma_h_sq,
        m_za,
        m_zb,
        marg.m_x.clone(),
        marg.n_a,
        marg.n_b,
        snp_ids,
        marg.covariate_ids.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_corr(k: usize) -> DMatrix<f64> {
        DMatrix::identity(k, k)
    }

    #[test]
    fn scalar_conversion_is_identity() {
        // m = d = 1 with unit correlations: all diagonal scalings cancel.
        let marg = MarginalSummaryStats::new(
            DVector::from_vec(vec![0.7]),
            DVector::from_vec(vec![0.3]),
            DMatrix::from_row_slice(1, 1, &[1.4]),
            DMatrix::from_row_slice(1, 1, &[0.5]),
            unit_corr(1),
            unit_corr(1),
            unit_corr(1),
            100,
            200,
            vec!["rs1".into()],
            vec!["x1".into()],
        )
        .unwrap();
        let joint = marginal_to_joint(&marg).unwrap();
        assert_relative_eq!(joint.pi()[0], 0.7, epsilon = 1e-14);
        assert_relative_eq!(joint.big_pi()[(0, 0)], 1.4, epsilon = 1e-14);
        assert_relative_eq!(joint.sigma_pi()[(0, 0)], 0.3, epsilon = 1e-14);
        assert_relative_eq!(joint.sigma_big_pi()[(0, 0)], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn exact_regression_has_zero_residual_variance() {
        // Y = Z π exactly: π recovered, Σ_π = 0.
        let z = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, -1.0]);
        let pi_true = DVector::from_vec(vec![2.0, -1.0]);
        let y = &z * &pi_true;
        let x = DMatrix::from_fn(4, 1, |i, _| z[(i, 0)] + 0.5 * z[(i, 1)] + (i as f64) * 0.1);
        let joint = joint_from_individual(&y, &z, &x, &z).unwrap();
        assert_relative_eq!(joint.pi(), &pi_true, epsilon = 1e-12);
        assert!(joint.sigma_pi().amax() < 1e-20);
    }

    #[test]
    fn joint_from_individual_matches_normal_equations_by_elimination() {
        // n_a = 6, m = 2, hand-solved 2x2 normal equations.
        let z = DMatrix::from_row_slice(
            6,
            2,
            &[1.0, 0.5, -1.0, 1.0, 2.0, -0.5, 0.0, 1.5, 1.0, 1.0, -2.0, 0.0],
        );
        let y = DVector::from_vec(vec![1.0, 0.0, 2.5, -1.0, 1.5, -2.0]);
        let x = DMatrix::from_fn(6, 1, |i, _| 0.3 * z[(i, 0)] - 0.7 * z[(i, 1)] + 0.01 * i as f64);
        let joint = joint_from_individual(&y, &z, &x, &z).unwrap();

        // brute-force Gaussian elimination on Zᵀ Z π = Zᵀ y
        let g = z.tr_mul(&z);
        let rhs = z.tr_mul(&y);
        let (a, b, c, dd) = (g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]);
        let det = a * dd - b * c;
        let pi0 = (rhs[0] * dd - b * rhs[1]) / det;
        let pi1 = (a * rhs[1] - c * rhs[0]) / det;
        assert_relative_eq!(joint.pi()[0], pi0, epsilon = 1e-12);
        assert_relative_eq!(joint.pi()[1], pi1, epsilon = 1e-12);
    }

    #[test]
    fn rank_deficient_design_is_rejected() {
        let z = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, -1.0, -2.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = DMatrix::from_element(3, 1, 1.0);
        match joint_from_individual(&y, &z, &x, &z) {
            Err(Error::RankDeficientDesign) => {}
            other => panic!("expected rank-deficient error, got {other:?}"),
        }
    }

    #[test]
    fn single_snp_exact_fit() {
        // Y = 2 Z exactly: η = 2 with zero variance.
        let z = DMatrix::from_row_slice(5, 1, &[1.0, -1.0, 2.0, 0.5, -0.5]);
        let y = DVector::from_fn(5, |i, _| 2.0 * z[(i, 0)]);
        let x = DMatrix::from_fn(5, 1, |i, _| z[(i, 0)] + 0.1 * (i as f64 - 2.0));
        let marg = marginal_from_individual(&y, &z, &x, &z).unwrap();
        assert_relative_eq!(marg.eta()[0], 2.0, epsilon = 1e-14);
        assert!(marg.sigma_eta_sq()[0] < 1e-25);
    }

    #[test]
    fn orthogonal_design_marginal_equals_joint() {
        // Orthogonal Z columns decouple the regressions.
        let z = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0]);
        let x = DMatrix::from_fn(4, 2, |i, k| {
            0.5 * z[(i, 0)] - 1.5 * z[(i, 1)] + ((i + k) as f64 % 2.0) * 0.3
        });
        let y = DVector::from_fn(4, |i, _| z[(i, 0)] - z[(i, 1)] + 0.05 * i as f64);
        let marg = marginal_from_individual(&y, &z, &x, &z).unwrap();
        let joint = joint_from_individual(&y, &z, &x, &z).unwrap();
        assert_relative_eq!(marg.h(), joint.big_pi(), epsilon = 1e-12);
        assert_relative_eq!(marg.eta(), joint.pi(), epsilon = 1e-12);
    }

    #[test]
    fn first_stage_f_from_definition() {
        let marg = MarginalSummaryStats::new(
            DVector::from_vec(vec![0.1, 0.2]),
            DVector::from_vec(vec![1.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 1.0, 2.0]),
            DMatrix::from_row_slice(2, 2, &[2.25, 1.0, 1.0, 4.0]),
            unit_corr(2),
            unit_corr(2),
            unit_corr(2),
            10,
            10,
            vec!["a".into(), "b".into()],
            vec!["x1".into(), "x2".into()],
        )
        .unwrap();
        let f = first_stage_f(&marg);
        assert_relative_eq!(f[(0, 0)], 4.0, epsilon = 1e-14); // 3² / 1.5²
        assert_relative_eq!(f[(0, 1)], 0.0, epsilon = 1e-14);
        assert_relative_eq!(f[(1, 1)], 1.0, epsilon = 1e-14);
    }

    fn three_snp_marginal(f_col1: [f64; 3], f_col2: [f64; 3]) -> MarginalSummaryStats {
        // unit variances so F = H².
        let h = DMatrix::from_fn(3, 2, |j, k| {
            if k == 0 {
                f_col1[j].sqrt()
            } else {
                f_col2[j].sqrt()
            }
        });
        MarginalSummaryStats::new(
            DVector::from_vec(vec![0.1, 0.2, 0.3]),
            DVector::from_vec(vec![1.0, 1.0, 1.0]),
            h,
            DMatrix::from_element(3, 2, 1.0),
            unit_corr(3),
            unit_corr(3),
            unit_corr(2),
            50,
            60,
            vec!["s1".into(), "s2".into(), "s3".into()],
            vec!["x1".into(), "x2".into()],
        )
        .unwrap()
    }

    #[test]
    fn select_all_is_identity_and_selection_dedups() {
        let marg = three_snp_marginal([9.0, 4.0, 1.0], [9.0, 1.0, 4.0]);
        let all = select_instruments(&marg, 3).unwrap();
        assert_eq!(all.snp_ids(), marg.snp_ids());

        // top-1 per covariate is SNP 0 in both columns: dedup to one SNP
        let one = select_instruments(&marg, 1).unwrap();
        assert_eq!(one.snp_ids(), &["s1".to_string()]);
        assert_eq!(one.m(), 1);
    }

    #[test]
    fn disjoint_top_sets_union_in_input_order() {
        // Brute-force check of the F ordering for top-2 per covariate.
        let marg = three_snp_marginal([9.0, 4.0, 1.0], [1.0, 4.0, 9.0]);
        let f = first_stage_f(&marg);
        let mut expect: Vec<usize> = Vec::new();
        for k in 0..2 {
            let mut idx: Vec<usize> = (0..3).collect();
            idx.sort_by(|&a, &b| f[(b, k)].partial_cmp(&f[(a, k)]).unwrap());
            for &j in idx.iter().take(2) {
                if !expect.contains(&j) {
                    expect.push(j);
                }
            }
        }
        expect.sort();
        let sel = select_instruments(&marg, 2).unwrap();
        let got: Vec<usize> = sel
            .snp_ids()
            .iter()
            .map(|id| marg.snp_ids().iter().position(|s| s == id).unwrap())
            .collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn select_instruments_is_idempotent() {
        let marg = three_snp_marginal([9.0, 4.0, 1.0], [1.0, 4.0, 9.0]);
        let once = select_instruments(&marg, 2).unwrap();
        let twice = select_instruments(&once, 2).unwrap();
        assert_eq!(once.snp_ids(), twice.snp_ids());
        assert_relative_eq!(once.eta(), twice.eta(), epsilon = 0.0);
        assert_relative_eq!(once.m_za(), twice.m_za(), epsilon = 0.0);
    }

    #[test]
    fn inconsistent_marginals_are_detected() {
        // An eta far larger than the implied total outcome scale forces the
        // residual factor negative.
        let marg = MarginalSummaryStats::new(
            DVector::from_vec(vec![1.0, 1.0]),
            DVector::from_vec(vec![0.01, 0.01]),
            DMatrix::from_element(2, 1, 0.5),
            DMatrix::from_element(2, 1, 1.0),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.9, 0.9, 1.0]),
            unit_corr(2),
            unit_corr(1),
            10,
            10,
            vec!["a".into(), "b".into()],
            vec!["x1".into()],
        )
        .unwrap();
        match marginal_to_joint(&marg) {
            Err(Error::InconsistentMarginals { value }) => assert!(value <= 0.0),
            other => panic!("expected inconsistent marginals, got {other:?}"),
        }
    }

    #[test]
    fn near_singular_correlation_is_rejected_by_name() {
        let mut m_za = DMatrix::from_element(2, 2, 1.0);
        m_za[(0, 1)] = 1.0 - 1e-13;
        m_za[(1, 0)] = 1.0 - 1e-13;
        let marg = MarginalSummaryStats::new(
            DVector::from_vec(vec![0.1, 0.1]),
            DVector::from_vec(vec![1.0, 1.0]),
            DMatrix::from_element(2, 1, 0.5),
            DMatrix::from_element(2, 1, 1.0),
            m_za,
            unit_corr(2),
            unit_corr(1),
            10,
            10,
            vec!["a".into(), "b".into()],
            vec!["x1".into()],
        )
        .unwrap();
        match marginal_to_joint(&marg) {
            Err(Error::NearSingularCorrelation { name, .. }) => assert_eq!(name, "M_Za"),
            other => panic!("expected near-singular error, got {other:?}"),
        }
    }
}
