//! Shared helpers for the integration suites: random instances and
//! independent oracle constructions.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use spacetsiv::JointSummaryStats;

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

pub fn randn_vec(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn randn_mat(rng: &mut impl Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// Random symmetric positive definite matrix A Aᵀ + εI.
pub fn random_spd(rng: &mut impl Rng, k: usize, ridge: f64) -> DMatrix<f64> {
    let a = randn_mat(rng, k, k);
    &a * a.transpose() + DMatrix::identity(k, k) * ridge
}

/// Random well-posed joint summary statistics with unrelated pi/big_pi.
pub fn random_joint(rng: &mut impl Rng, m: usize, d: usize, n: usize) -> JointSummaryStats {
    let big_pi = randn_mat(rng, m, d);
    let pi = randn_vec(rng, m);
    let sigma_pi = random_spd(rng, m, 0.5);
    let sigma_big_pi = random_spd(rng, m * d, 0.5);
    JointSummaryStats::new(
        pi,
        sigma_pi,
        big_pi,
        sigma_big_pi,
        n,
        n,
        (0..m).map(|i| format!("s{i}")).collect(),
        (0..d).map(|i| format!("x{i}")).collect(),
    )
    .unwrap()
}

/// Joint statistics whose pi solves the moment condition exactly at `beta`.
pub fn exact_joint(
    rng: &mut impl Rng,
    m: usize,
    d: usize,
    beta: &DVector<f64>,
    n: usize,
) -> JointSummaryStats {
    let big_pi = randn_mat(rng, m, d);
    let pi = &big_pi * beta;
    let sigma_pi = random_spd(rng, m, 0.5);
    let sigma_big_pi = random_spd(rng, m * d, 0.5);
    JointSummaryStats::new(
        pi,
        sigma_pi,
        big_pi,
        sigma_big_pi,
        n,
        n,
        (0..m).map(|i| format!("s{i}")).collect(),
        (0..d).map(|i| format!("x{i}")).collect(),
    )
    .unwrap()
}

/// Independent oracle for the contracted covariance: build ξ(β) = βᵀ ⊗ I_m
/// densely and form the full triple product against the md×md matrix.
pub fn dense_sigma_of_beta(joint: &JointSummaryStats, beta: &DVector<f64>) -> DMatrix<f64> {
    let m = joint.m();
    let d = joint.d();
    let mut xi = DMatrix::zeros(m, m * d);
    for k in 0..d {
        for i in 0..m {
            xi[(i, k * m + i)] = beta[k];
        }
    }
    &xi * joint.sigma_big_pi() * xi.transpose()
}

/// Dense-inverse oracle for the Q statistic (explicit matrix inverse, no
/// shared code with the production solve path).
pub fn dense_q_oracle(joint: &JointSummaryStats, beta: &DVector<f64>) -> f64 {
    let r = joint.pi() - joint.big_pi() * beta;
    let w = joint.sigma_pi() / joint.n_a() as f64
        + dense_sigma_of_beta(joint, beta) / joint.n_b() as f64;
    let w_inv = w.try_inverse().expect("oracle weight invertible");
    (&w_inv * &r).dot(&r)
}

/// Kronecker-recurrence quasi-random sequence on the unit cube
/// (R_d sequence based on the generalized golden ratio).
pub struct QuasiRandom {
    alphas: Vec<f64>,
    state: Vec<f64>,
}

impl QuasiRandom {
    pub fn new(dim: usize) -> QuasiRandom {
        // phi_d solves x^{d+1} = x + 1
        let mut phi = 2.0_f64;
        for _ in 0..64 {
            phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
        }
        let alphas = (1..=dim).map(|k| (1.0 / phi.powi(k as i32)) % 1.0).collect();
        QuasiRandom {
            alphas,
            state: vec![0.5; dim],
        }
    }
}

impl Iterator for QuasiRandom {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        for (s, a) in self.state.iter_mut().zip(&self.alphas) {
            *s = (*s + a) % 1.0;
        }
        Some(self.state.clone())
    }
}
