//! Shared oracles and random instance generators.
#![allow(dead_code)]

use h2pid::lincore::{expm, is_hurwitz, spectral_abscissa};
use h2pid::synthesis::{PerformanceSpec, WuMode};
use h2pid::{Matrix, StateSpaceModel};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha20Rng, rows: usize, cols: usize, bound: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..bound))
}

/// `−(GᵀG + αI) + (H − Hᵀ)`: the symmetric part is negative definite, so every
/// eigenvalue has real part at most `−α`.
pub fn stable_matrix(rng: &mut ChaCha20Rng, n: usize) -> Matrix {
    let g = uniform(rng, n, n, 1.0);
    let h = uniform(rng, n, n, 1.0);
    let alpha = rng.random_range(0.3..2.0);
    -(g.transpose() * &g + Matrix::identity(n, n) * alpha) + (&h - h.transpose())
}

pub fn random_stable_siso(rng: &mut ChaCha20Rng) -> StateSpaceModel {
    let n = rng.random_range(1..=5usize);
    let a = stable_matrix(rng, n);
    let b_w = uniform(rng, n, 1, 1.0);
    let c = uniform(rng, 1, n, 1.0);
    let labels = (0..n).map(|i| format!("x{i}")).collect();
    StateSpaceModel::new(a, Matrix::zeros(n, 1), b_w, c, labels).unwrap()
}

/// Random plant with a weighted performance channel; open loop may be unstable.
pub fn random_synthesis_instance(rng: &mut ChaCha20Rng) -> (StateSpaceModel, PerformanceSpec) {
    let n = rng.random_range(1..=5usize);
    let a = uniform(rng, n, n, 1.5);
    let b_u = uniform(rng, n, 1, 1.0);
    let b_w = uniform(rng, n, 1, 1.0);
    let c = uniform(rng, 1, n, 1.0);
    let rows = uniform(rng, 1, n, 2.0);
    let w_u = rng.random_range(0.1..2.0);
    let labels = (0..n).map(|i| format!("x{i}")).collect();
    let sys = StateSpaceModel::new(a, b_u, b_w, c, labels).unwrap();
    let perf = PerformanceSpec::new(rows, 1, w_u, WuMode::WeightedChannel).unwrap();
    (sys, perf)
}

/// Impulse-response energy `∫‖C e^{At} B‖² dt` by composite Simpson over
/// `[0, 40/|slowest real part|]`, propagating with the exact one-step map.
pub fn h2_norm_by_quadrature(a: &Matrix, b: &Matrix, c: &Matrix) -> f64 {
    assert!(is_hurwitz(a).unwrap());
    let slowest = -spectral_abscissa(a).unwrap();
    let radius = a.norm().max(slowest);
    let horizon = 40.0 / slowest;
    let mut steps = ((horizon * radius / 0.02).ceil() as usize).max(2000);
    steps += steps % 2;
    let h = horizon / steps as f64;
    let phi = expm(a, h).unwrap();
    let mut x = b.clone();
    let energy = |x: &Matrix| (c * x).norm_squared();
    let mut sum = energy(&x);
    for k in 1..=steps {
        x = &phi * &x;
        let weight = if k == steps {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += weight * energy(&x);
    }
    (sum * h / 3.0).sqrt()
}
