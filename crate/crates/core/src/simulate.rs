//! Simulation harness: linear-SCM data generation, summary-statistic
//! sampling for the high-dimensional process, evaluation metrics, and
//! experiment sweeps over sample sizes.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combin::count_combinations;
use crate::error::{Error, Result};
use crate::estimators::{default_lambda_path, spacetsiv_l0, spacetsiv_l1, tsiv};
use crate::linalg::{correlation_inverse, is_symmetric, kron, SymEig};
use crate::qstat::SupportSet;
use crate::sumstats::{joint_from_individual, JointSummaryStats};

/// How unobserved confounding enters the structural model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Confounding {
    /// A shared latent vector H ~ N(0, I_d) is added to the covariate noise
    /// and enters the outcome as Hᵀ1 (plus independent ν terms).
    SharedLatent,
    /// Confounding only through the explicit covariance between ν^X and ν^Y.
    ExplicitCovariance,
}

/// Full parameterization of a linear structural causal model
///
/// ```text
/// X = a Z + b X + g(H, ν^X)
/// Y = Xᵀ β* + Zᵀ γ + h(H, ν^Y)
/// ```
///
/// with `b` strictly triangular (acyclic) and `I − b` invertible.
#[derive(Debug, Clone)]
pub struct DgpSpec {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    beta_star: DVector<f64>,
    gamma: Option<DVector<f64>>,
    var_z: DMatrix<f64>,
    var_nu_x: DMatrix<f64>,
    var_nu_y: f64,
    cov_nu_xy: DVector<f64>,
    confounding: Confounding,
    seed: u64,
}

fn is_strictly_triangular(b: &DMatrix<f64>) -> bool {
    let d = b.nrows();
    let mut lower_ok = true;
    let mut upper_ok = true;
    for i in 0..d {
        if b[(i, i)] != 0.0 {
            return false;
        }
        for j in 0..d {
            if b[(i, j)] != 0.0 {
                if j > i {
                    lower_ok = false;
                } else if j < i {
                    upper_ok = false;
                }
            }
        }
    }
    lower_ok || upper_ok
}

impl DgpSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        beta_star: DVector<f64>,
        gamma: Option<DVector<f64>>,
        var_z: DMatrix<f64>,
        var_nu_x: DMatrix<f64>,
        var_nu_y: f64,
        cov_nu_xy: DVector<f64>,
        confounding: Confounding,
        seed: u64,
    ) -> Result<DgpSpec> {
        let d = a.nrows();
        let m = a.ncols();
        if d == 0 || m == 0 {
            return Err(Error::invalid("a must be nonempty (d x m)"));
        }
        if b.shape() != (d, d) {
            return Err(Error::dim("b must be d x d"));
        }
        if beta_star.len() != d {
            return Err(Error::dim("beta_star must have length d"));
        }
        if let Some(g) = &gamma {
            if g.len() != m {
                return Err(Error::dim("gamma must have length m"));
            }
        }
        if var_z.shape() != (m, m) {
            return Err(Error::dim("var_z must be m x m"));
        }
        if var_nu_x.shape() != (d, d) {
            return Err(Error::dim("var_nu_x must be d x d"));
        }
        if cov_nu_xy.len() != d {
            return Err(Error::dim("cov_nu_xy must have length d"));
        }
        if !(var_nu_y > 0.0) {
            return Err(Error::invalid("var_nu_y must be positive"));
        }
        if !is_strictly_triangular(&b) {
            return Err(Error::invalid(
                "b must be strictly triangular (acyclic covariate effects)",
            ));
        }
        if !is_symmetric(&var_z, 1e-10) || nalgebra::Cholesky::new(var_z.clone()).is_none() {
            return Err(Error::invalid("var_z must be symmetric positive definite"));
        }
        if !is_symmetric(&var_nu_x, 1e-10)
            || nalgebra::Cholesky::new(var_nu_x.clone()).is_none()
        {
            return Err(Error::invalid("var_nu_x must be symmetric positive definite"));
        }
        // joint (ν^X, ν^Y) covariance must be PSD
        let mut joint_cov = DMatrix::zeros(d + 1, d + 1);
        joint_cov.view_mut((0, 0), (d, d)).copy_from(&var_nu_x);
        for j in 0..d {
            joint_cov[(j, d)] = cov_nu_xy[j];
            joint_cov[(d, j)] = cov_nu_xy[j];
        }
        joint_cov[(d, d)] = var_nu_y;
        let eig = SymEig::new(&joint_cov);
        if eig.min_eigenvalue() < -1e-8 * eig.max_eigenvalue().abs().max(1.0) {
            return Err(Error::invalid(
                "joint noise covariance of (nu_x, nu_y) is not positive semidefinite",
            ));
        }
        Ok(DgpSpec {
            a,
            b,
            beta_star,
            gamma,
            var_z,
            var_nu_x,
            var_nu_y,
            cov_nu_xy,
            confounding,
            seed,
        })
    }

    /// Low-dimensional benchmark process: m = 3 instruments feeding three of
    /// five covariates, two downstream causal covariates with β* = (1, 2,
    /// 0, 0, 0), shared-latent confounding, standard-normal noise.
    pub fn dgp1(seed: u64) -> DgpSpec {
        let mut a = DMatrix::zeros(5, 3);
        a[(2, 0)] = 1.0;
        a[(3, 1)] = 1.0;
        a[(4, 2)] = 1.0;
        let mut b = DMatrix::zeros(5, 5);
        b[(0, 2)] = 1.0;
        b[(0, 3)] = 1.0;
        b[(1, 3)] = 1.0;
        b[(1, 4)] = 1.0;
        let beta_star = DVector::from_vec(vec![1.0, 2.0, 0.0, 0.0, 0.0]);
        DgpSpec::new(
            a,
            b,
            beta_star,
            None,
            DMatrix::identity(3, 3),
            DMatrix::identity(5, 5),
            1.0,
            DVector::zeros(5),
            Confounding::SharedLatent,
            seed,
        )
        .expect("dgp1 parameters are valid")
    }

    /// Exclusion-restriction violation benchmark: every covariate has its
    /// own instrument (a = I₅), and the instruments of the two causal
    /// covariates leak directly into the outcome with γ = 0.1.
    pub fn dgp3(seed: u64) -> DgpSpec {
        let mut b = DMatrix::zeros(5, 5);
        b[(0, 2)] = 1.0;
        b[(0, 3)] = 1.0;
        b[(1, 3)] = 1.0;
        b[(1, 4)] = 1.0;
        let beta_star = DVector::from_vec(vec![1.0, 2.0, 0.0, 0.0, 0.0]);
        let gamma = DVector::from_vec(vec![0.1, 0.1, 0.0, 0.0, 0.0]);
        DgpSpec::new(
            DMatrix::identity(5, 5),
            b,
            beta_star,
            Some(gamma),
            DMatrix::identity(5, 5),
            DMatrix::identity(5, 5),
            1.0,
            DVector::zeros(5),
            Confounding::SharedLatent,
            seed,
        )
        .expect("dgp3 parameters are valid")
    }

    pub fn with_seed(mut self, seed: u64) -> DgpSpec {
        self.seed = seed;
        self
    }

    pub fn num_instruments(&self) -> usize {
        self.a.ncols()
    }

    pub fn num_covariates(&self) -> usize {
        self.a.nrows()
    }

    pub fn beta_star(&self) -> &DVector<f64> {
        &self.beta_star
    }

    pub fn gamma(&self) -> Option<&DVector<f64>> {
        self.gamma.as_ref()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn mixing(&self) -> DMatrix<f64> {
        let d = self.num_covariates();
        (DMatrix::identity(d, d) - &self.b)
            .try_inverse()
            .expect("I - b is invertible for strictly triangular b")
    }

    /// Reduced-form coefficient matrix Π = aᵀ (I − b)⁻ᵀ (m × d).
    pub fn population_big_pi(&self) -> DMatrix<f64> {
        self.a.tr_mul(&self.mixing().transpose())
    }

    /// Reduced-form outcome coefficients π = Π β* (+ γ).
    pub fn population_pi(&self) -> DVector<f64> {
        let mut pi = self.population_big_pi() * &self.beta_star;
        if let Some(g) = &self.gamma {
            pi += g;
        }
        pi
    }

    /// Covariance of the reduced-form covariate residual u^X.
    fn population_sigma_u(&self) -> DMatrix<f64> {
        let mixing = self.mixing();
        let d = self.num_covariates();
        let noise_var = match self.confounding {
            Confounding::SharedLatent => &self.var_nu_x + DMatrix::identity(d, d),
            Confounding::ExplicitCovariance => self.var_nu_x.clone(),
        };
        &mixing * noise_var * mixing.transpose()
    }

    /// Exact population counterparts of the joint summary statistics, with
    /// nominal sample sizes attached for the Q-statistic scaling.
    pub fn population_joint(&self, n_a: usize, n_b: usize) -> Result<JointSummaryStats> {
        let m = self.num_instruments();
        let d = self.num_covariates();
        let mixing = self.mixing();
        let big_pi = self.population_big_pi();
        let pi = self.population_pi();
        let sigma_u = self.population_sigma_u();

        let (cov_ux_conf, var_conf) = match self.confounding {
            Confounding::SharedLatent => (
                &mixing * (DVector::from_element(d, 1.0) + &self.cov_nu_xy),
                d as f64 + self.var_nu_y,
            ),
            Confounding::ExplicitCovariance => (&mixing * &self.cov_nu_xy, self.var_nu_y),
        };
        let var_uy = self.beta_star.dot(&(&sigma_u * &self.beta_star))
            + 2.0 * self.beta_star.dot(&cov_ux_conf)
            + var_conf;

        let var_z_inv = correlation_inverse(&self.var_z, "Var(Z)")?;
        let sigma_pi = &var_z_inv * var_uy;
        let sigma_big_pi = kron(&sigma_u, &var_z_inv);

        JointSummaryStats::new(
            pi,
            sigma_pi,
            big_pi,
            sigma_big_pi,
            n_a,
            n_b,
            (1..=m).map(|i| format!("snp_{i}")).collect(),
            (1..=d).map(|i| format!("x{i}")).collect(),
        )
    }
}

/// Two independent samples from a [`DgpSpec`]: the outcome study keeps
/// (Y, Z), the covariate study keeps (X, Z).
#[derive(Debug, Clone)]
pub struct TwoSampleData {
    pub y_a: DVector<f64>,
    pub z_a: DMatrix<f64>,
    pub x_b: DMatrix<f64>,
    pub z_b: DMatrix<f64>,
}

/// Draw two independent samples of sizes `n_a` and `n_b` from the SCM.
/// Deterministic given `spec.seed`.
pub fn simulate_individual(spec: &DgpSpec, n_a: usize, n_b: usize) -> Result<TwoSampleData> {
    if n_a == 0 || n_b == 0 {
        return Err(Error::invalid("sample sizes must be positive"));
    }
    let d = spec.num_covariates();
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);

    let z_factor = nalgebra::Cholesky::new(spec.var_z.clone())
        .ok_or_else(|| Error::invalid("var_z is not positive definite"))?
        .l();
    // joint (ν^X, ν^Y) square-root factor; eigendecomposition tolerates a
    // merely PSD boundary
    let mut joint_cov = DMatrix::zeros(d + 1, d + 1);
    joint_cov.view_mut((0, 0), (d, d)).copy_from(&spec.var_nu_x);
    for j in 0..d {
        joint_cov[(j, d)] = spec.cov_nu_xy[j];
        joint_cov[(d, j)] = spec.cov_nu_xy[j];
    }
    joint_cov[(d, d)] = spec.var_nu_y;
    let nu_factor = SymEig::new(&joint_cov).psd_sqrt();
    let mixing_t = spec.mixing().transpose();

    let mut draw = |n: usize| -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
        let z_raw: DMatrix<f64> =
            DMatrix::from_fn(n, spec.num_instruments(), |_, _| rng.sample(StandardNormal));
        let z = z_raw * z_factor.transpose();
        let nu_raw: DMatrix<f64> = DMatrix::from_fn(n, d + 1, |_, _| rng.sample(StandardNormal));
        let nu = nu_raw * nu_factor.transpose();
        let nu_x = nu.columns(0, d).into_owned();
        let nu_y = nu.column(d).into_owned();

        let (noise_x, conf_y) = match spec.confounding {
            Confounding::SharedLatent => {
                let h: DMatrix<f64> = DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal));
                let h_sum = &h * DVector::from_element(d, 1.0);
                (h + nu_x, h_sum + nu_y)
            }
            Confounding::ExplicitCovariance => (nu_x, nu_y),
        };
        let x = (&z * spec.a.transpose() + noise_x) * &mixing_t;
        let mut y = &x * &spec.beta_star + conf_y;
        if let Some(g) = &spec.gamma {
            y += &z * g;
        }
        (y, z, x)
    };

    let (y_a, z_a, _) = draw(n_a);
    let (_, z_b, x_b) = draw(n_b);
    Ok(TwoSampleData { y_a, z_a, x_b, z_b })
}

/// Fixed population of the high-dimensional summary-statistic process:
/// d = 100 covariates, m = 5 correlated instruments, β* = (1, 2, 0, …).
///
/// The random pieces (the factor loading matrix behind Var(ν^X) and the
/// ν^X–ν^Y covariances) are drawn once from the seed and then held fixed;
/// sampling draws π̂ ~ N(π, Σ_π/n) and Π̂ ~ N(Π, Σ_Π/n) with the population
/// covariances reported as the estimates.
pub struct Dgp2Population {
    pi: DVector<f64>,
    big_pi: DMatrix<f64>,
    sigma_pi: DMatrix<f64>,
    sigma_big_pi: DMatrix<f64>,
    sigma_pi_factor: DMatrix<f64>,
    var_z_inv_factor: DMatrix<f64>,
    sigma_u_factor: DMatrix<f64>,
    beta_star: DVector<f64>,
}

const DGP2_D: usize = 100;
const DGP2_M: usize = 5;

impl Dgp2Population {
    pub fn new(seed: u64) -> Result<Dgp2Population> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let d = DGP2_D;

        let unif = Uniform::new(-0.3, 0.5).expect("valid uniform range");
        let w = DMatrix::from_fn(d, d, |_, _| unif.sample(&mut rng));
        let var_nu_x = &w * w.transpose() + DMatrix::identity(d, d);
        let choices = [0.2, 0.4, 0.6, 0.8];
        let cov_nu_xy = DVector::from_fn(d, |_, _| choices[rng.random_range(0..4)]);

        let mut a = DMatrix::zeros(d, DGP2_M);
        a[(2, 0)] = 1.0;
        a[(3, 1)] = 1.0;
        a[(4, 2)] = 1.0;
        let mut b = DMatrix::zeros(d, d);
        b[(0, 2)] = 1.0;
        b[(0, 3)] = 1.0;
        b[(1, 3)] = 1.0;
        b[(1, 4)] = 2.0;
        let mut beta_star = DVector::zeros(d);
        beta_star[0] = 1.0;
        beta_star[1] = 2.0;
        let var_z = DMatrix::from_row_slice(
            DGP2_M,
            DGP2_M,
            &[
                1.0, 0.05, -0.1, 0.075, 0.025, //
                0.05, 1.0, 0.0, 0.0, 0.0, //
                -0.1, 0.0, 1.0, 0.0, 0.0, //
                0.075, 0.0, 0.0, 1.0, 0.0, //
                0.025, 0.0, 0.0, 0.0, 1.0,
            ],
        );

        // This process lives purely at the summary-statistic level: only the
        // moments below are needed, not a full joint (ν^X, ν^Y) law.
        let mixing = (DMatrix::identity(d, d) - &b)
            .try_inverse()
            .expect("I - b invertible");
        let big_pi = a.tr_mul(&mixing.transpose());
        let pi = &big_pi * &beta_star;
        let sigma_u = &mixing * &var_nu_x * mixing.transpose();
        let var_z_inv = correlation_inverse(&var_z, "Var(Z)")?;
        let cov_ux = &mixing * &cov_nu_xy;
        let var_nu_y = 1.0;
        let var_uy = beta_star.dot(&(&sigma_u * &beta_star))
            + 2.0 * beta_star.dot(&cov_ux)
            + var_nu_y;
        if !(var_uy > 0.0) {
            return Err(Error::invalid(
                "implied outcome residual variance is not positive",
            ));
        }
        let sigma_pi = &var_z_inv * var_uy;
        let sigma_big_pi = kron(&sigma_u, &var_z_inv);

        Ok(Dgp2Population {
            sigma_pi_factor: SymEig::new(&sigma_pi).psd_sqrt(),
            var_z_inv_factor: SymEig::new(&var_z_inv).psd_sqrt(),
            sigma_u_factor: SymEig::new(&sigma_u).psd_sqrt(),
            pi,
            big_pi,
            sigma_pi,
            sigma_big_pi,
            beta_star,
        })
    }

    pub fn beta_star(&self) -> &DVector<f64> {
        &self.beta_star
    }

    fn ids() -> (Vec<String>, Vec<String>) {
        (
            (1..=DGP2_M).map(|i| format!("snp_{i}")).collect(),
            (1..=DGP2_D).map(|i| format!("x{i}")).collect(),
        )
    }

    /// One draw of noisy summary statistics at sample size `n`.
    pub fn sample_sumstats(&self, n: usize, rng: &mut impl Rng) -> Result<JointSummaryStats> {
        if n == 0 {
            return Err(Error::invalid("sample size must be positive"));
        }
        let scale = 1.0 / (n as f64).sqrt();
        let g_pi: DVector<f64> = DVector::from_fn(DGP2_M, |_, _| rng.sample(StandardNormal));
        let pi_hat = &self.pi + &self.sigma_pi_factor * g_pi * scale;
        // vec-form sampling of Π̂: cov(vec E) = Σ_u ⊗ Var(Z)⁻¹
        let g: DMatrix<f64> = DMatrix::from_fn(DGP2_M, DGP2_D, |_, _| rng.sample(StandardNormal));
        let noise = &self.var_z_inv_factor * g * self.sigma_u_factor.transpose();
        let big_pi_hat = &self.big_pi + noise * scale;
        let (snp_ids, covariate_ids) = Dgp2Population::ids();
        JointSummaryStats::new(
            pi_hat,
            self.sigma_pi.clone(),
            big_pi_hat,
            self.sigma_big_pi.clone(),
            n,
            n,
            snp_ids,
            covariate_ids,
        )
    }

    /// Noise-free population statistics at nominal sample size `n`.
    pub fn population_joint(&self, n_a: usize, n_b: usize) -> Result<JointSummaryStats> {
        let (snp_ids, covariate_ids) = Dgp2Population::ids();
        JointSummaryStats::new(
            self.pi.clone(),
            self.sigma_pi.clone(),
            self.big_pi.clone(),
            self.sigma_big_pi.clone(),
            n_a,
            n_b,
            snp_ids,
            covariate_ids,
        )
    }
}

/// One draw of the high-dimensional process: population from `seed`, one
/// noisy summary-statistic sample at size `n`.
pub fn simulate_dgp2_sumstats(n: usize, seed: u64) -> Result<JointSummaryStats> {
    let population = Dgp2Population::new(seed)?;
    let mut rng = ChaCha12Rng::seed_from_u64(splitmix64(seed ^ 0x5eed_0001));
    population.sample_sumstats(n, &mut rng)
}

/// Aggregated evaluation of repeated estimates against the truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRow {
    pub n: usize,
    pub estimator: String,
    /// Coordinatewise mean(β̂) − β*.
    pub bias: Vec<f64>,
    /// Coordinatewise root-mean-square error.
    pub rmse: Vec<f64>,
    /// Mean Jaccard similarity |Ŝ∩S*| / |Ŝ∪S*|.
    pub jaccard_mean: f64,
    /// Percentage of repetitions with |Ŝ| = ‖β*‖₀.
    pub correct_size_pct: f64,
    /// Mean true positive rate |Ŝ∩S*| / |S*|.
    pub tpr_mean: f64,
    /// Number of repetitions included (failures are excluded).
    pub repetitions: usize,
}

/// Compute bias, rmse and the selection metrics over repetitions.
pub fn evaluate(
    estimates: &[DVector<f64>],
    selected: &[SupportSet],
    beta_star: &DVector<f64>,
    n: usize,
    estimator: &str,
) -> Result<MetricsRow> {
    if estimates.is_empty() || estimates.len() != selected.len() {
        return Err(Error::invalid(
            "evaluate needs nonempty estimate/selection lists of equal length",
        ));
    }
    let d = beta_star.len();
    let reps = estimates.len() as f64;
    let mut bias = vec![0.0; d];
    let mut rmse = vec![0.0; d];
    for est in estimates {
        if est.len() != d {
            return Err(Error::dim("estimate length differs from beta_star"));
        }
        for j in 0..d {
            let err = est[j] - beta_star[j];
            bias[j] += err;
            rmse[j] += err * err;
        }
    }
    for j in 0..d {
        bias[j] /= reps;
        rmse[j] = (rmse[j] / reps).sqrt();
    }

    let truth = SupportSet::from_nonzero(beta_star);
    let truth_size = truth.len();
    let mut jaccard_sum = 0.0;
    let mut tpr_sum = 0.0;
    let mut correct = 0usize;
    for sel in selected {
        let inter = sel.indices().iter().filter(|&&j| truth.contains(j)).count();
        let union = sel.len() + truth_size - inter;
        jaccard_sum += if union == 0 { 1.0 } else { inter as f64 / union as f64 };
        tpr_sum += if truth_size == 0 {
            1.0
        } else {
            inter as f64 / truth_size as f64
        };
        if sel.len() == truth_size {
            correct += 1;
        }
    }

    Ok(MetricsRow {
        n,
        estimator: estimator.to_string(),
        bias,
        rmse,
        jaccard_mean: jaccard_sum / reps,
        correct_size_pct: 100.0 * correct as f64 / reps,
        tpr_mean: tpr_sum / reps,
        repetitions: estimates.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DgpName {
    Dgp1,
    Dgp2,
    Dgp3,
}

impl std::str::FromStr for DgpName {
    type Err = Error;

    fn from_str(s: &str) -> Result<DgpName> {
        match s.to_ascii_lowercase().as_str() {
            "dgp1" => Ok(DgpName::Dgp1),
            "dgp2" => Ok(DgpName::Dgp2),
            "dgp3" => Ok(DgpName::Dgp3),
            other => Err(Error::invalid(format!(
                "unknown dgp `{other}` (expected dgp1, dgp2 or dgp3)"
            ))),
        }
    }
}

impl std::fmt::Display for DgpName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DgpName::Dgp1 => write!(f, "dgp1"),
            DgpName::Dgp2 => write!(f, "dgp2"),
            DgpName::Dgp3 => write!(f, "dgp3"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorName {
    L0,
    L1,
    Tsiv,
}

impl std::str::FromStr for EstimatorName {
    type Err = Error;

    fn from_str(s: &str) -> Result<EstimatorName> {
        match s.to_ascii_lowercase().as_str() {
            "l0" => Ok(EstimatorName::L0),
            "l1" => Ok(EstimatorName::L1),
            "tsiv" => Ok(EstimatorName::Tsiv),
            other => Err(Error::invalid(format!(
                "unknown estimator `{other}` (expected l0, l1 or tsiv)"
            ))),
        }
    }
}

impl std::fmt::Display for EstimatorName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EstimatorName::L0 => write!(f, "l0"),
            EstimatorName::L1 => write!(f, "l1"),
            EstimatorName::Tsiv => write!(f, "tsiv"),
        }
    }
}

/// Configuration of an experiment sweep.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dgp: DgpName,
    pub n_grid: Vec<usize>,
    pub repetitions: usize,
    pub estimators: Vec<EstimatorName>,
    pub alpha: f64,
    pub seed: u64,
    /// Use exact population statistics instead of sampled data.
    pub exact_population: bool,
    /// Points on the default L1 penalty path.
    pub n_lambdas: usize,
    /// Maximum L0 support size; defaults to min(d, m).
    pub s_max: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(dgp: DgpName) -> ExperimentConfig {
        ExperimentConfig {
            dgp,
            n_grid: vec![1_000, 10_000, 100_000],
            repetitions: 50,
            estimators: vec![EstimatorName::L0, EstimatorName::L1, EstimatorName::Tsiv],
            alpha: 0.05,
            seed: 1,
            exact_population: false,
            n_lambdas: 100,
            s_max: None,
        }
    }
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Per-repetition random stream, derived from the master seed by a fixed
/// splitting rule over (n, repetition).
fn rep_seed(master: u64, n: usize, rep: usize) -> u64 {
    splitmix64(master ^ splitmix64(n as u64).rotate_left(17) ^ splitmix64(rep as u64 ^ 0xA5A5))
}

struct RepOutcome {
    results: Vec<Option<(DVector<f64>, SupportSet)>>,
}

/// Run the full sweep: for every n and repetition, simulate (or shortcut to
/// the population), build joint summary statistics, run each estimator and
/// aggregate. Repetition failures are logged and excluded, never fatal.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    if config.repetitions == 0 {
        return Err(Error::invalid("repetitions must be >= 1"));
    }
    if config.n_grid.is_empty() {
        return Err(Error::invalid("n_grid must be nonempty"));
    }
    if config.alpha <= 0.0 || config.alpha >= 1.0 {
        return Err(Error::invalid("alpha must be in (0, 1)"));
    }

    let dgp2_population = match config.dgp {
        DgpName::Dgp2 => Some(Dgp2Population::new(config.seed)?),
        _ => None,
    };
    let beta_star = match config.dgp {
        DgpName::Dgp1 => DgpSpec::dgp1(0).beta_star().clone(),
        DgpName::Dgp3 => DgpSpec::dgp3(0).beta_star().clone(),
        DgpName::Dgp2 => dgp2_population.as_ref().unwrap().beta_star().clone(),
    };
    let d = beta_star.len();

    // L0 enumerates all subsets per size; refuse plainly infeasible sweeps.
    if config.estimators.contains(&EstimatorName::L0) {
        let m = match config.dgp {
            DgpName::Dgp1 => 3,
            DgpName::Dgp2 | DgpName::Dgp3 => 5,
        };
        let s_max = config.s_max.unwrap_or_else(|| d.min(m));
        if count_combinations(d, s_max) > 10_000_000 {
            return Err(Error::invalid(format!(
                "L0 subset enumeration over C({d}, {s_max}) subsets is infeasible; \
                 restrict s_max or use the l1/tsiv estimators"
            )));
        }
    }

    let mut rows = Vec::new();
    for &n in &config.n_grid {
        let outcomes: Vec<RepOutcome> = (0..config.repetitions)
            .into_par_iter()
            .map(|rep| run_repetition(config, dgp2_population.as_ref(), n, rep))
            .collect();

        for (e_idx, estimator) in config.estimators.iter().enumerate() {
            let mut estimates = Vec::new();
            let mut selected = Vec::new();
            let mut failures = 0usize;
            for outcome in &outcomes {
                match &outcome.results[e_idx] {
                    Some((est, sel)) => {
                        estimates.push(est.clone());
                        selected.push(sel.clone());
                    }
                    None => failures += 1,
                }
            }
            if failures > 0 {
                log::warn!(
                    "{estimator} failed on {failures}/{} repetitions at n = {n}",
                    config.repetitions
                );
            }
            if estimates.is_empty() {
                rows.push(MetricsRow {
                    n,
                    estimator: estimator.to_string(),
                    bias: vec![f64::NAN; d],
                    rmse: vec![f64::NAN; d],
                    jaccard_mean: f64::NAN,
                    correct_size_pct: f64::NAN,
                    tpr_mean: f64::NAN,
                    repetitions: 0,
                });
            } else {
                rows.push(evaluate(
                    &estimates,
                    &selected,
                    &beta_star,
                    n,
                    &estimator.to_string(),
                )?);
            }
        }
    }
    Ok(rows)
}

fn run_repetition(
    config: &ExperimentConfig,
    dgp2: Option<&Dgp2Population>,
    n: usize,
    rep: usize,
) -> RepOutcome {
    let seed = rep_seed(config.seed, n, rep);
    let joint = match config.dgp {
        DgpName::Dgp1 | DgpName::Dgp3 => {
            let spec = match config.dgp {
                DgpName::Dgp1 => DgpSpec::dgp1(seed),
                _ => DgpSpec::dgp3(seed),
            };
            if config.exact_population {
                spec.population_joint(n, n)
            } else {
                simulate_individual(&spec, n, n)
                    .and_then(|data| joint_from_individual(&data.y_a, &data.z_a, &data.x_b, &data.z_b))
            }
        }
        DgpName::Dgp2 => {
            let population = dgp2.expect("population built for dgp2");
            if config.exact_population {
                population.population_joint(n, n)
            } else {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                population.sample_sumstats(n, &mut rng)
            }
        }
    };
    let joint = match joint {
        Ok(joint) => joint,
        Err(err) => {
            log::warn!("simulation failed at n = {n}, rep = {rep}: {err}");
            return RepOutcome {
                results: vec![None; config.estimators.len()],
            };
        }
    };

    let results = config
        .estimators
        .iter()
        .map(|estimator| {
            let run = || -> Result<(DVector<f64>, SupportSet)> {
                match estimator {
                    EstimatorName::L0 => {
                        let s_max = config.s_max.unwrap_or_else(|| joint.d().min(joint.m()));
                        let res = spacetsiv_l0(&joint, s_max, config.alpha)?;
                        Ok((res.estimate.clone(), res.selected_support()))
                    }
                    EstimatorName::L1 => {
                        let path = default_lambda_path(&joint, config.n_lambdas)?;
                        let res = spacetsiv_l1(&joint, &path, config.alpha)?;
                        Ok((res.estimate.clone(), res.selected_support()))
                    }
                    EstimatorName::Tsiv => {
                        let est = tsiv(&joint);
                        let sel = SupportSet::from_nonzero(&est);
                        Ok((est, sel))
                    }
                }
            };
            match run() {
                Ok(pair) => Some(pair),
                Err(err) => {
                    log::warn!("{estimator} failed at n = {n}, rep = {rep}: {err}");
                    None
                }
            }
        })
        .collect();
    RepOutcome { results }
}
