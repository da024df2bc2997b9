//! Python bindings: the summary-statistics data model, the spaceTSIV
//! estimators, diagnostics, and the simulation harness. Matrices cross the
//! boundary as row-major nested lists.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use spacetsiv::simulate as sim;
use spacetsiv::sumstats::io as sumio;

fn to_py_err(err: spacetsiv::Error) -> PyErr {
    if err.is_numerical() {
        PyRuntimeError::new_err(err.to_string())
    } else {
        PyValueError::new_err(err.to_string())
    }
}

fn vector(data: Vec<f64>) -> DVector<f64> {
    DVector::from_vec(data)
}

fn matrix(rows: Vec<Vec<f64>>, what: &str) -> PyResult<DMatrix<f64>> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(PyValueError::new_err(format!("{what}: empty matrix")));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err(format!("{what}: ragged rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn matrix_rows(mat: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..mat.nrows())
        .map(|i| (0..mat.ncols()).map(|j| mat[(i, j)]).collect())
        .collect()
}

fn support(indices: Vec<usize>) -> PyResult<spacetsiv::SupportSet> {
    spacetsiv::SupportSet::new(indices).map_err(to_py_err)
}

/// Joint (multivariate reduced-form OLS) summary statistics.
#[pyclass(name = "JointSummaryStats", skip_from_py_object)]
#[derive(Clone)]
struct PyJointSummaryStats {
    inner: spacetsiv::JointSummaryStats,
}

#[pymethods]
impl PyJointSummaryStats {
    #[new]
    #[allow(clippy::too_many_arguments)]
    fn new(
        pi: Vec<f64>,
        sigma_pi: Vec<Vec<f64>>,
        big_pi: Vec<Vec<f64>>,
        sigma_big_pi: Vec<Vec<f64>>,
        n_a: usize,
        n_b: usize,
        snp_ids: Vec<String>,
        covariate_ids: Vec<String>,
    ) -> PyResult<Self> {
        let inner = spacetsiv::JointSummaryStats::new(
            vector(pi),
            matrix(sigma_pi, "sigma_pi")?,
            matrix(big_pi, "big_pi")?,
            matrix(sigma_big_pi, "sigma_big_pi")?,
            n_a,
            n_b,
            snp_ids,
            covariate_ids,
        )
        .map_err(to_py_err)?;
        Ok(PyJointSummaryStats { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = sumio::read_joint_json(text.as_bytes()).map_err(to_py_err)?;
        Ok(PyJointSummaryStats { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        sumio::write_joint_json(&self.inner, &mut buf).map_err(to_py_err)?;
        Ok(String::from_utf8(buf).expect("json is utf-8"))
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn pi(&self) -> Vec<f64> {
        self.inner.pi().iter().copied().collect()
    }

    #[getter]
    fn big_pi(&self) -> Vec<Vec<f64>> {
        matrix_rows(self.inner.big_pi())
    }

    #[getter]
    fn sigma_pi(&self) -> Vec<Vec<f64>> {
        matrix_rows(self.inner.sigma_pi())
    }

    #[getter]
    fn n_a(&self) -> usize {
        self.inner.n_a()
    }

    #[getter]
    fn n_b(&self) -> usize {
        self.inner.n_b()
    }

    #[getter]
    fn snp_ids(&self) -> Vec<String> {
        self.inner.snp_ids().to_vec()
    }

    #[getter]
    fn covariate_ids(&self) -> Vec<String> {
        self.inner.covariate_ids().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "JointSummaryStats(m={}, d={}, n_a={}, n_b={})",
            self.inner.m(),
            self.inner.d(),
            self.inner.n_a(),
            self.inner.n_b()
        )
    }
}

/// Marginal (per-SNP univariate OLS) summary statistics.
#[pyclass(name = "MarginalSummaryStats", skip_from_py_object)]
#[derive(Clone)]
struct PyMarginalSummaryStats {
    inner: spacetsiv::MarginalSummaryStats,
}

#[pymethods]
impl PyMarginalSummaryStats {
    #[new]
    #[pyo3(signature = (eta, sigma_eta_sq, h, sigma_h_sq, m_za, m_x, n_a, n_b, snp_ids, covariate_ids, m_zb=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        eta: Vec<f64>,
        sigma_eta_sq: Vec<f64>,
        h: Vec<Vec<f64>>,
        sigma_h_sq: Vec<Vec<f64>>,
        m_za: Vec<Vec<f64>>,
        m_x: Vec<Vec<f64>>,
        n_a: usize,
        n_b: usize,
        snp_ids: Vec<String>,
        covariate_ids: Vec<String>,
        m_zb: Option<Vec<Vec<f64>>>,
    ) -> PyResult<Self> {
        let m_za = matrix(m_za, "m_za")?;
        let m_zb = match m_zb {
            Some(rows) => matrix(rows, "m_zb")?,
            None => m_za.clone(),
        };
        let inner = spacetsiv::MarginalSummaryStats::new(
            vector(eta),
            vector(sigma_eta_sq),
            matrix(h, "h")?,
            matrix(sigma_h_sq, "sigma_h_sq")?,
            m_za,
            m_zb,
            matrix(m_x, "m_x")?,
            n_a,
            n_b,
            snp_ids,
            covariate_ids,
        )
        .map_err(to_py_err)?;
        Ok(PyMarginalSummaryStats { inner })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn eta(&self) -> Vec<f64> {
        self.inner.eta().iter().copied().collect()
    }

    #[getter]
    fn h(&self) -> Vec<Vec<f64>> {
        matrix_rows(self.inner.h())
    }

    #[getter]
    fn snp_ids(&self) -> Vec<String> {
        self.inner.snp_ids().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "MarginalSummaryStats(m={}, d={}, n_a={}, n_b={})",
            self.inner.m(),
            self.inner.d(),
            self.inner.n_a(),
            self.inner.n_b()
        )
    }
}

/// A restricted Q minimizer with its test quantities.
#[pyclass(name = "FitResult", skip_from_py_object)]
#[derive(Clone)]
struct PyFitResult {
    inner: spacetsiv::FitResult,
}

#[pymethods]
impl PyFitResult {
    #[getter]
    fn beta(&self) -> Vec<f64> {
        self.inner.beta.clone()
    }

    #[getter]
    fn support(&self) -> Vec<usize> {
        self.inner.support.indices().to_vec()
    }

    #[getter]
    fn q_value(&self) -> f64 {
        self.inner.q_value
    }

    #[getter]
    fn p_value(&self) -> f64 {
        self.inner.p_value
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn df(&self) -> usize {
        self.inner.df
    }

    fn __repr__(&self) -> String {
        format!(
            "FitResult(support={:?}, q_value={:.6}, p_value={:.6})",
            self.inner.support.indices(),
            self.inner.q_value,
            self.inner.p_value
        )
    }
}

/// Output of the spaceTSIV sweeps.
#[pyclass(name = "SpaceTsivResult", skip_from_py_object)]
#[derive(Clone)]
struct PySpaceTsivResult {
    inner: spacetsiv::SpaceTsivResult,
}

#[pymethods]
impl PySpaceTsivResult {
    #[getter]
    fn estimate(&self) -> Vec<f64> {
        self.inner.estimate.iter().copied().collect()
    }

    #[getter]
    fn phi(&self) -> bool {
        self.inner.phi
    }

    #[getter]
    fn q_value(&self) -> f64 {
        self.inner.q_value
    }

    #[getter]
    fn p_value(&self) -> f64 {
        self.inner.p_value
    }

    #[getter]
    fn accepted_supports(&self) -> Vec<PyFitResult> {
        self.inner
            .accepted_supports
            .iter()
            .map(|fit| PyFitResult { inner: fit.clone() })
            .collect()
    }

    fn selected_support(&self) -> Vec<usize> {
        self.inner.selected_support().indices().to_vec()
    }

    /// The full result document (estimate, trajectory, accepted supports)
    /// as a JSON string; intervals may be attached separately.
    fn to_json(&self) -> String {
        self.inner.to_json(&[]).to_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "SpaceTsivResult(phi={}, support={:?}, q_value={:.6})",
            self.inner.phi,
            self.inner.selected_support().indices(),
            self.inner.q_value
        )
    }
}

/// A per-coordinate test-inversion confidence interval; unbounded
/// endpoints are IEEE infinities.
#[pyclass(name = "ConfidenceInterval", skip_from_py_object)]
#[derive(Clone)]
struct PyConfidenceInterval {
    inner: spacetsiv::ConfidenceInterval,
}

#[pymethods]
impl PyConfidenceInterval {
    #[getter]
    fn coordinate(&self) -> usize {
        self.inner.coordinate
    }

    #[getter]
    fn lower(&self) -> f64 {
        self.inner.lower
    }

    #[getter]
    fn upper(&self) -> f64 {
        self.inner.upper
    }

    #[getter]
    fn level(&self) -> f64 {
        self.inner.level
    }

    #[getter]
    fn empty(&self) -> bool {
        self.inner.empty
    }

    #[getter]
    fn unbounded_lower(&self) -> bool {
        self.inner.unbounded_lower()
    }

    #[getter]
    fn unbounded_upper(&self) -> bool {
        self.inner.unbounded_upper()
    }

    fn __repr__(&self) -> String {
        format!(
            "ConfidenceInterval(coordinate={}, lower={}, upper={}, level={})",
            self.inner.coordinate, self.inner.lower, self.inner.upper, self.inner.level
        )
    }
}

/// Identifiability diagnostics for a candidate parent set.
#[pyclass(name = "IdentifiabilityReport", skip_from_py_object)]
#[derive(Clone)]
struct PyIdentifiabilityReport {
    inner: spacetsiv::identifiability::IdentifiabilityReport,
}

#[pymethods]
impl PyIdentifiabilityReport {
    #[getter]
    fn rank_ok(&self) -> bool {
        self.inner.rank_ok
    }

    /// None means the subset enumeration cap was exceeded (indeterminate).
    #[getter]
    fn uniqueness_ok(&self) -> Option<bool> {
        self.inner.uniqueness_ok
    }

    #[getter]
    fn checked_subsets(&self) -> usize {
        self.inner.checked_subsets
    }

    #[getter]
    fn tolerance(&self) -> f64 {
        self.inner.tolerance
    }

    fn __repr__(&self) -> String {
        format!(
            "IdentifiabilityReport(rank_ok={}, uniqueness_ok={:?}, checked_subsets={})",
            self.inner.rank_ok, self.inner.uniqueness_ok, self.inner.checked_subsets
        )
    }
}

/// Linear-SCM parameterization of the benchmark processes.
#[pyclass(name = "DgpSpec", skip_from_py_object)]
#[derive(Clone)]
struct PyDgpSpec {
    inner: sim::DgpSpec,
}

#[pymethods]
impl PyDgpSpec {
    /// Low-dimensional benchmark: 3 instruments, 5 covariates, β* = (1, 2, 0, 0, 0).
    #[staticmethod]
    fn dgp1(seed: u64) -> Self {
        PyDgpSpec {
            inner: sim::DgpSpec::dgp1(seed),
        }
    }

    /// Exclusion-restriction violation benchmark with γ = 0.1 leakage.
    #[staticmethod]
    fn dgp3(seed: u64) -> Self {
        PyDgpSpec {
            inner: sim::DgpSpec::dgp3(seed),
        }
    }

    #[getter]
    fn num_instruments(&self) -> usize {
        self.inner.num_instruments()
    }

    #[getter]
    fn num_covariates(&self) -> usize {
        self.inner.num_covariates()
    }

    #[getter]
    fn beta_star(&self) -> Vec<f64> {
        self.inner.beta_star().iter().copied().collect()
    }

    fn with_seed(&self, seed: u64) -> Self {
        PyDgpSpec {
            inner: self.inner.clone().with_seed(seed),
        }
    }

    /// Exact population summary statistics at nominal sample sizes.
    fn population_joint(&self, n_a: usize, n_b: usize) -> PyResult<PyJointSummaryStats> {
        Ok(PyJointSummaryStats {
            inner: self.inner.population_joint(n_a, n_b).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn population_big_pi(&self) -> Vec<Vec<f64>> {
        matrix_rows(&self.inner.population_big_pi())
    }

    fn __repr__(&self) -> String {
        format!(
            "DgpSpec(m={}, d={}, seed={})",
            self.inner.num_instruments(),
            self.inner.num_covariates(),
            self.inner.seed()
        )
    }
}

/// Aggregated evaluation metrics for one (n, estimator) cell.
#[pyclass(name = "MetricsRow", skip_from_py_object)]
#[derive(Clone)]
struct PyMetricsRow {
    inner: sim::MetricsRow,
}

#[pymethods]
impl PyMetricsRow {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn estimator(&self) -> String {
        self.inner.estimator.clone()
    }

    #[getter]
    fn bias(&self) -> Vec<f64> {
        self.inner.bias.clone()
    }

    #[getter]
    fn rmse(&self) -> Vec<f64> {
        self.inner.rmse.clone()
    }

    #[getter]
    fn jaccard_mean(&self) -> f64 {
        self.inner.jaccard_mean
    }

    #[getter]
    fn correct_size_pct(&self) -> f64 {
        self.inner.correct_size_pct
    }

    #[getter]
    fn tpr_mean(&self) -> f64 {
        self.inner.tpr_mean
    }

    #[getter]
    fn repetitions(&self) -> usize {
        self.inner.repetitions
    }

    fn __repr__(&self) -> String {
        format!(
            "MetricsRow(n={}, estimator={}, jaccard={:.3}, correct_size={:.1}%)",
            self.inner.n, self.inner.estimator, self.inner.jaccard_mean, self.inner.correct_size_pct
        )
    }
}

#[pyfunction]
fn chi2_cdf(t: f64, df: u32) -> f64 {
    spacetsiv::chi2::chi2_cdf(t, df)
}

#[pyfunction]
fn chi2_quantile(p: f64, df: u32) -> f64 {
    spacetsiv::chi2::chi2_quantile(p, df)
}

#[pyfunction]
fn marginal_to_joint(marg: &PyMarginalSummaryStats) -> PyResult<PyJointSummaryStats> {
    Ok(PyJointSummaryStats {
        inner: spacetsiv::marginal_to_joint(&marg.inner).map_err(to_py_err)?,
    })
}

#[pyfunction]
fn joint_from_individual(
    y_a: Vec<f64>,
    z_a: Vec<Vec<f64>>,
    x_b: Vec<Vec<f64>>,
    z_b: Vec<Vec<f64>>,
) -> PyResult<PyJointSummaryStats> {
    let inner = spacetsiv::joint_from_individual(
        &vector(y_a),
        &matrix(z_a, "z_a")?,
        &matrix(x_b, "x_b")?,
        &matrix(z_b, "z_b")?,
    )
    .map_err(to_py_err)?;
    Ok(PyJointSummaryStats { inner })
}

#[pyfunction]
fn marginal_from_individual(
    y_a: Vec<f64>,
    z_a: Vec<Vec<f64>>,
    x_b: Vec<Vec<f64>>,
    z_b: Vec<Vec<f64>>,
) -> PyResult<PyMarginalSummaryStats> {
    let inner = spacetsiv::marginal_from_individual(
        &vector(y_a),
        &matrix(z_a, "z_a")?,
        &matrix(x_b, "x_b")?,
        &matrix(z_b, "z_b")?,
    )
    .map_err(to_py_err)?;
    Ok(PyMarginalSummaryStats { inner })
}

#[pyfunction]
fn first_stage_f(marg: &PyMarginalSummaryStats) -> Vec<Vec<f64>> {
    matrix_rows(&spacetsiv::first_stage_f(&marg.inner))
}

#[pyfunction]
fn select_instruments(
    marg: &PyMarginalSummaryStats,
    k_per_covariate: usize,
) -> PyResult<PyMarginalSummaryStats> {
    Ok(PyMarginalSummaryStats {
        inner: spacetsiv::select_instruments(&marg.inner, k_per_covariate).map_err(to_py_err)?,
    })
}

#[pyfunction]
fn q_statistic(joint: &PyJointSummaryStats, beta: Vec<f64>) -> PyResult<f64> {
    spacetsiv::q_statistic(&joint.inner, &vector(beta)).map_err(to_py_err)
}

#[pyfunction]
fn sigma_pi_of_beta(joint: &PyJointSummaryStats, beta: Vec<f64>) -> Vec<Vec<f64>> {
    matrix_rows(&spacetsiv::sigma_pi_of_beta(&joint.inner, &vector(beta)))
}

#[pyfunction]
fn fit_restricted(joint: &PyJointSummaryStats, indices: Vec<usize>) -> PyResult<PyFitResult> {
    Ok(PyFitResult {
        inner: spacetsiv::fit_restricted(&joint.inner, &support(indices)?).map_err(to_py_err)?,
    })
}

#[pyfunction]
fn level_test(fit: &PyFitResult, alpha: f64) -> bool {
    spacetsiv::level_test(&fit.inner, alpha)
}

#[pyfunction]
fn ar_statistic(
    y: Vec<f64>,
    x: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    beta: Vec<f64>,
) -> PyResult<f64> {
    spacetsiv::ar_statistic(
        &vector(y),
        &matrix(x, "x")?,
        &matrix(z, "z")?,
        &vector(beta),
    )
    .map_err(to_py_err)
}

#[pyfunction]
fn spacetsiv_l0(
    joint: &PyJointSummaryStats,
    s_max: usize,
    alpha: f64,
) -> PyResult<PySpaceTsivResult> {
    Ok(PySpaceTsivResult {
        inner: spacetsiv::spacetsiv_l0(&joint.inner, s_max, alpha).map_err(to_py_err)?,
    })
}

#[pyfunction]
fn spacetsiv_l1(
    joint: &PyJointSummaryStats,
    lambdas: Vec<f64>,
    alpha: f64,
) -> PyResult<PySpaceTsivResult> {
    Ok(PySpaceTsivResult {
        inner: spacetsiv::spacetsiv_l1(&joint.inner, &lambdas, alpha).map_err(to_py_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (joint, lam, warm_start=None))]
fn tsiv_l1_solve(
    joint: &PyJointSummaryStats,
    lam: f64,
    warm_start: Option<Vec<f64>>,
) -> Vec<f64> {
    let warm = warm_start.map(vector);
    spacetsiv::tsiv_l1_solve(&joint.inner, lam, warm.as_ref())
        .iter()
        .copied()
        .collect()
}

#[pyfunction]
fn tsiv(joint: &PyJointSummaryStats) -> Vec<f64> {
    spacetsiv::tsiv(&joint.inner).iter().copied().collect()
}

#[pyfunction]
#[pyo3(signature = (joint, n_points=100))]
fn default_lambda_path(joint: &PyJointSummaryStats, n_points: usize) -> PyResult<Vec<f64>> {
    spacetsiv::default_lambda_path(&joint.inner, n_points).map_err(to_py_err)
}

#[pyfunction]
fn ci_by_inversion(
    joint: &PyJointSummaryStats,
    indices: Vec<usize>,
    alpha: f64,
) -> PyResult<Vec<PyConfidenceInterval>> {
    let intervals =
        spacetsiv::ci_by_inversion(&joint.inner, &support(indices)?, alpha).map_err(to_py_err)?;
    Ok(intervals
        .into_iter()
        .map(|inner| PyConfidenceInterval { inner })
        .collect())
}

#[pyfunction]
#[pyo3(signature = (big_pi, pa, tol=spacetsiv::identifiability::DEFAULT_TOLERANCE))]
fn check_assumption_a(big_pi: Vec<Vec<f64>>, pa: Vec<usize>, tol: f64) -> PyResult<bool> {
    spacetsiv::identifiability::check_assumption_a(&matrix(big_pi, "big_pi")?, &support(pa)?, tol)
        .map_err(to_py_err)
}

#[pyfunction]
#[pyo3(signature = (big_pi, pa, tol=spacetsiv::identifiability::DEFAULT_TOLERANCE))]
fn check_assumption_c(
    big_pi: Vec<Vec<f64>>,
    pa: Vec<usize>,
    tol: f64,
) -> PyResult<Option<bool>> {
    spacetsiv::identifiability::check_assumption_c(&matrix(big_pi, "big_pi")?, &support(pa)?, tol)
        .map_err(to_py_err)
}

#[pyfunction]
#[pyo3(signature = (big_pi, pa, tol=spacetsiv::identifiability::DEFAULT_TOLERANCE))]
fn diagnose(big_pi: Vec<Vec<f64>>, pa: Vec<usize>, tol: f64) -> PyResult<PyIdentifiabilityReport> {
    Ok(PyIdentifiabilityReport {
        inner: spacetsiv::identifiability::diagnose(
            &matrix(big_pi, "big_pi")?,
            &support(pa)?,
            tol,
        )
        .map_err(to_py_err)?,
    })
}

/// Draw two independent samples; returns (y_a, z_a, x_b, z_b).
#[pyfunction]
fn simulate_individual(
    spec: &PyDgpSpec,
    n_a: usize,
    n_b: usize,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let data = sim::simulate_individual(&spec.inner, n_a, n_b).map_err(to_py_err)?;
    Ok((
        data.y_a.iter().copied().collect(),
        matrix_rows(&data.z_a),
        matrix_rows(&data.x_b),
        matrix_rows(&data.z_b),
    ))
}

#[pyfunction]
fn simulate_dgp2_sumstats(n: usize, seed: u64) -> PyResult<PyJointSummaryStats> {
    Ok(PyJointSummaryStats {
        inner: sim::simulate_dgp2_sumstats(n, seed).map_err(to_py_err)?,
    })
}

/// One noisy draw plus the exact population statistics of the
/// high-dimensional process, sharing a single population seed.
#[pyfunction]
fn dgp2_population_joint(n_a: usize, n_b: usize, seed: u64) -> PyResult<PyJointSummaryStats> {
    let population = sim::Dgp2Population::new(seed).map_err(to_py_err)?;
    Ok(PyJointSummaryStats {
        inner: population.population_joint(n_a, n_b).map_err(to_py_err)?,
    })
}

#[pyfunction]
fn evaluate(
    estimates: Vec<Vec<f64>>,
    selected: Vec<Vec<usize>>,
    beta_star: Vec<f64>,
    n: usize,
    estimator: &str,
) -> PyResult<PyMetricsRow> {
    let estimate_vecs: Vec<DVector<f64>> = estimates.into_iter().map(vector).collect();
    let mut supports = Vec::with_capacity(selected.len());
    for idx in selected {
        supports.push(support(idx)?);
    }
    Ok(PyMetricsRow {
        inner: sim::evaluate(&estimate_vecs, &supports, &vector(beta_star), n, estimator)
            .map_err(to_py_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (dgp, n_grid, repetitions, estimators, alpha=0.05, seed=1, exact_population=false))]
fn run_experiment(
    dgp: &str,
    n_grid: Vec<usize>,
    repetitions: usize,
    estimators: Vec<String>,
    alpha: f64,
    seed: u64,
    exact_population: bool,
) -> PyResult<Vec<PyMetricsRow>> {
    let dgp: sim::DgpName = dgp.parse().map_err(to_py_err)?;
    let mut parsed = Vec::new();
    for name in estimators {
        parsed.push(name.parse::<sim::EstimatorName>().map_err(to_py_err)?);
    }
    let mut config = sim::ExperimentConfig::new(dgp);
    config.n_grid = n_grid;
    config.repetitions = repetitions;
    config.estimators = parsed;
    config.alpha = alpha;
    config.seed = seed;
    config.exact_population = exact_population;
    let rows = sim::run_experiment(&config).map_err(to_py_err)?;
    Ok(rows.into_iter().map(|inner| PyMetricsRow { inner }).collect())
}

/// Sample noisy summary statistics from a fixed high-dimensional
/// population, reusing one population across draws.
#[pyfunction]
fn dgp2_sample(n: usize, population_seed: u64, draw_seed: u64) -> PyResult<PyJointSummaryStats> {
    let population = sim::Dgp2Population::new(population_seed).map_err(to_py_err)?;
    let mut rng = ChaCha12Rng::seed_from_u64(draw_seed);
    Ok(PyJointSummaryStats {
        inner: population.sample_sumstats(n, &mut rng).map_err(to_py_err)?,
    })
}

#[pymodule]
#[pyo3(name = "spacetsiv")]
fn spacetsiv_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyJointSummaryStats>()?;
    m.add_class::<PyMarginalSummaryStats>()?;
    m.add_class::<PyFitResult>()?;
    m.add_class::<PySpaceTsivResult>()?;
    m.add_class::<PyConfidenceInterval>()?;
    m.add_class::<PyIdentifiabilityReport>()?;
    m.add_class::<PyDgpSpec>()?;
    m.add_class::<PyMetricsRow>()?;
    m.add_function(wrap_pyfunction!(chi2_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(chi2_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(marginal_to_joint, m)?)?;
    m.add_function(wrap_pyfunction!(joint_from_individual, m)?)?;
    m.add_function(wrap_pyfunction!(marginal_from_individual, m)?)?;
    m.add_function(wrap_pyfunction!(first_stage_f, m)?)?;
    m.add_function(wrap_pyfunction!(select_instruments, m)?)?;
    m.add_function(wrap_pyfunction!(q_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_pi_of_beta, m)?)?;
    m.add_function(wrap_pyfunction!(fit_restricted, m)?)?;
    m.add_function(wrap_pyfunction!(level_test, m)?)?;
    m.add_function(wrap_pyfunction!(ar_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(spacetsiv_l0, m)?)?;
    m.add_function(wrap_pyfunction!(spacetsiv_l1, m)?)?;
    m.add_function(wrap_pyfunction!(tsiv_l1_solve, m)?)?;
    m.add_function(wrap_pyfunction!(tsiv, m)?)?;
    m.add_function(wrap_pyfunction!(default_lambda_path, m)?)?;
    m.add_function(wrap_pyfunction!(ci_by_inversion, m)?)?;
    m.add_function(wrap_pyfunction!(check_assumption_a, m)?)?;
    m.add_function(wrap_pyfunction!(check_assumption_c, m)?)?;
    m.add_function(wrap_pyfunction!(diagnose, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_individual, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_dgp2_sumstats, m)?)?;
    m.add_function(wrap_pyfunction!(dgp2_population_joint, m)?)?;
    m.add_function(wrap_pyfunction!(dgp2_sample, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
