#![allow(dead_code)]

use mflqr_core::disturbance::DiscreteDisturbance;
use mflqr_core::riccati::{SystemMatrices, SystemSpec};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SUBSYSTEM_COUNTS: [usize; 4] = [1, 2, 3, 5];
pub const LAMBDAS: [f64; 3] = [0.0, 0.01, 0.1];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn uniform_vector(rng: &mut impl Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.random_range(-1.0..1.0))
}

/// `GGᵀ/n + floor·I`.
pub fn random_spd(rng: &mut impl Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let g = uniform_matrix(rng, n, n);
    &g * g.transpose() / n as f64 + DMatrix::identity(n, n) * floor
}

/// `GGᵀ` with `G` of random rank `0..=n`.
pub fn random_psd(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let rank = rng.random_range(0..=n);
    let g = uniform_matrix(rng, n, rank);
    let m = &g * g.transpose();
    (&m + m.transpose()) / 2.0
}

/// Square matrix with `|eigenvalues|` bounded away from zero: `M + (‖M‖₁ + 1)·I`
/// with a random sign on the shift.
pub fn well_conditioned(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let m = uniform_matrix(rng, n, n);
    let shift = n as f64 + 1.0;
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    m + DMatrix::identity(n, n) * (sign * shift)
}

/// 2–4 atoms in `[-2, 2]^n` with random positive probabilities.
pub fn random_disturbance(rng: &mut impl Rng, n: usize) -> DiscreteDisturbance {
    let atoms = rng.random_range(2..=4);
    let support = (0..atoms)
        .map(|_| DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0)))
        .collect();
    let weights: Vec<f64> = (0..atoms).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    DiscreteDisturbance::new(support, weights.iter().map(|w| w / total).collect()).unwrap()
}

/// Time-varying spec with `n ≤ 3`, `m ≤ 2`, `k ∈ {1, 2, 3, 5}`, `T ≤ 10`, `λ ∈ {0, 0.01, 0.1}`.
pub fn random_spec(rng: &mut impl Rng) -> SystemSpec {
    let n = rng.random_range(1..=3);
    let m = rng.random_range(1..=2);
    let k = SUBSYSTEM_COUNTS[rng.random_range(0..SUBSYSTEM_COUNTS.len())];
    let horizon = rng.random_range(1..=10);
    let lambda = LAMBDAS[rng.random_range(0..LAMBDAS.len())];
    random_spec_with(rng, n, m, k, horizon, lambda)
}

pub fn random_spec_with(
    rng: &mut impl Rng,
    n: usize,
    m: usize,
    k: usize,
    horizon: usize,
    lambda: f64,
) -> SystemSpec {
    let matrices = SystemMatrices {
        a: (0..horizon).map(|_| uniform_matrix(rng, n, n)).collect(),
        b: (0..horizon).map(|_| uniform_matrix(rng, n, m)).collect(),
        c: (0..horizon)
            .map(|_| uniform_matrix(rng, n, n) * 0.5)
            .collect(),
        p: (0..=horizon).map(|_| random_psd(rng, n)).collect(),
        q: (0..=horizon).map(|_| random_psd(rng, n)).collect(),
        r: (0..horizon).map(|_| random_spd(rng, m, 0.1)).collect(),
    };
    let disturbance = random_disturbance(rng, n);
    SystemSpec::new(k, matrices, lambda, disturbance).unwrap()
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// `I_k ⊗ M + E_k ⊗ (M̄ − M)` built from Kronecker products.
pub fn dense_phi(k: usize, inner: &DMatrix<f64>, mean: &DMatrix<f64>) -> DMatrix<f64> {
    let e = DMatrix::from_element(k, k, 1.0 / k as f64);
    kron(&DMatrix::identity(k, k), inner) + kron(&e, &(mean - inner))
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// The shifted Bernoulli scalar instance: A=1.1, B=0.3, C=0.2, P=0.4, Q=0.8, R=1.2.
pub fn reference_spec(k: usize, horizon: usize, lambda: f64) -> SystemSpec {
    let noise = DiscreteDisturbance::scalar(&[(7.5, 0.25), (-2.5, 0.75)]).unwrap();
    SystemSpec::new(
        k,
        SystemMatrices::scalar(horizon, 1.1, 0.3, 0.2, 0.4, 0.8, 1.2),
        lambda,
        noise,
    )
    .unwrap()
}
