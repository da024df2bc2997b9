//! Small symmetric-matrix solvers used throughout the crate.
//!
//! Correlation and weight matrices are inverted through their symmetric
//! eigendecomposition so that near-singularity is detected explicitly and
//! the offending eigenvalue can be reported, instead of silently falling
//! back to a pseudo-inverse.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative eigenvalue threshold below which a correlation matrix is
/// treated as singular.
pub(crate) const CORRELATION_SINGULAR_TOL: f64 = 1e-10;

/// Relative eigenvalue threshold for positive definiteness of Q-statistic
/// weight matrices.
pub(crate) const WEIGHT_PD_TOL: f64 = 1e-12;

/// Eigendecomposition of a symmetric matrix, kept around so that solves,
/// inverses and quadratic forms reuse one factorization.
#[derive(Debug)]
pub(crate) struct SymEig {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
}

impl SymEig {
    pub(crate) fn new(mat: &DMatrix<f64>) -> SymEig {
        let eig = mat.clone().symmetric_eigen();
        SymEig {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues,
        }
    }

    pub(crate) fn min_eigenvalue(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn max_eigenvalue(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `M^{-1} A` applied column by column.
    pub(crate) fn solve_mat(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let mut coeffs = self.vectors.tr_mul(a);
        for (mut row, lambda) in coeffs.row_iter_mut().zip(self.values.iter()) {
            row /= *lambda;
        }
        &self.vectors * coeffs
    }

    /// `r^T M^{-1} r`.
    pub(crate) fn quad_form(&self, r: &DVector<f64>) -> f64 {
        let coeffs = self.vectors.tr_mul(r);
        coeffs
            .iter()
            .zip(self.values.iter())
            .map(|(c, lambda)| c * c / lambda)
            .sum()
    }

    pub(crate) fn inverse(&self) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (mut col, lambda) in scaled.column_iter_mut().zip(self.values.iter()) {
            col /= *lambda;
        }
        &scaled * self.vectors.transpose()
    }

    /// Symmetric square root with negative eigenvalues clipped to zero.
    /// Used for drawing Gaussians with a PSD covariance.
    pub(crate) fn psd_sqrt(&self) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (mut col, lambda) in scaled.column_iter_mut().zip(self.values.iter()) {
            col *= lambda.max(0.0).sqrt();
        }
        scaled * self.vectors.transpose()
    }
}

/// Inverse of a correlation matrix, rejecting near-singular input.
pub(crate) fn correlation_inverse(mat: &DMatrix<f64>, name: &'static str) -> Result<DMatrix<f64>> {
    let eig = SymEig::new(mat);
    let (min_eig, max_eig) = (eig.min_eigenvalue(), eig.max_eigenvalue());
    if !(min_eig > CORRELATION_SINGULAR_TOL * max_eig) {
        return Err(Error::NearSingularCorrelation {
            name,
            min_eig,
            max_eig,
        });
    }
    Ok(eig.inverse())
}

/// Factorization of a weight matrix, rejecting indefinite or singular input
/// and reporting the offending eigenvalue.
pub(crate) fn weight_solver(w: &DMatrix<f64>) -> Result<SymEig> {
    let eig = SymEig::new(w);
    let (min_eig, max_eig) = (eig.min_eigenvalue(), eig.max_eigenvalue());
    if !(min_eig > WEIGHT_PD_TOL * max_eig) {
        return Err(Error::DegenerateWeight { eigenvalue: min_eig });
    }
    Ok(eig)
}

/// Numerical rank: count of singular values above `rel_tol * sigma_max`.
pub(crate) fn numerical_rank(mat: &DMatrix<f64>, rel_tol: f64) -> usize {
    let svals = mat.clone().singular_values();
    let smax = svals.iter().copied().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    svals.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Minimum-norm least-squares solution of `a x = b` via SVD, truncating
/// singular values below `rel_tol * sigma_max`.
pub(crate) fn min_norm_lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let smax = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
    let mut x = DVector::zeros(a.ncols());
    if smax == 0.0 {
        return x;
    }
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > rel_tol * smax {
            let coeff = u.column(i).dot(b) / s;
            x += vt.row(i).transpose() * coeff;
        }
    }
    x
}

/// Kronecker product `a ⊗ b`.
pub(crate) fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let scale = a[(i, j)];
            if scale != 0.0 {
                out.view_mut((i * br, j * bc), (br, bc))
                    .copy_from(&(b * scale));
            }
        }
    }
    out
}

pub(crate) fn is_symmetric(mat: &DMatrix<f64>, tol: f64) -> bool {
    if !mat.is_square() {
        return false;
    }
    let n = mat.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (mat[(i, j)] - mat[(j, i)]).abs() > tol {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sym_eig_solve_matches_direct_inverse() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let eig = SymEig::new(&m);
        let v = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let x: DVector<f64> = eig.solve_mat(&DMatrix::from_column_slice(3, 1, v.as_slice()))
            .column(0)
            .into_owned();
        assert_relative_eq!(&m * &x, v, epsilon = 1e-12);
        assert_relative_eq!(eig.quad_form(&v), v.dot(&x), epsilon = 1e-12);
        assert_relative_eq!(eig.inverse() * &m, DMatrix::identity(3, 3), epsilon = 1e-12);
    }

    #[test]
    fn weight_solver_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        match weight_solver(&m) {
            Err(Error::DegenerateWeight { eigenvalue }) => assert!(eigenvalue < 0.0),
            other => panic!("expected degenerate weight, got {other:?}"),
        }
    }

    #[test]
    fn min_norm_solution_on_rank_deficient_system() {
        // Two identical columns: the min-norm solution splits the weight.
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let b = DVector::from_vec(vec![2.0, 4.0]);
        let x = min_norm_lstsq(&a, &b, 1e-12);
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(x[1], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn kron_shapes_and_values() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (4, 4));
        assert_eq!(k[(0, 1)], 1.0);
        assert_eq!(k[(0, 3)], 2.0);
        assert_eq!(k[(3, 0)], 3.0);
    }
}
