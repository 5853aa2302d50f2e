//! Shared helpers for unit and integration tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::tensor::{BlurKernel, GeneralizedKernel, ImageTensor};

pub fn seeded_rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Seeded tensor with entries uniform in [0, 1).
pub fn deterministic_tensor(channels: usize, height: usize, width: usize, seed: u64) -> ImageTensor {
    let mut rng = seeded_rng(seed);
    ImageTensor::from_fn(channels, height, width, |_, _, _| rng.gen::<f64>())
}

/// Seeded simplex kernel with strictly positive entries.
pub fn deterministic_kernel(size: usize, seed: u64) -> BlurKernel {
    let mut rng = seeded_rng(seed);
    let weights: Vec<f64> = (0..size * size).map(|_| rng.gen::<f64>() + 1e-3).collect();
    BlurKernel::from_weights(size, weights).unwrap()
}

/// Seeded unconstrained kernel with entries in [-1, 1).
pub fn deterministic_generalized(size: usize, seed: u64) -> GeneralizedKernel {
    let mut rng = seeded_rng(seed);
    let data: Vec<f64> = (0..size * size).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
    GeneralizedKernel::new(size, data).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn assert_close(actual: f64, expected: f64, tol: f64) {
    assert!(
        (actual - expected).abs() <= tol,
        "expected {expected} +/- {tol}, got {actual}"
    );
}

pub fn assert_rel_close(actual: f64, expected: f64, rel_tol: f64) {
    let scale = expected.abs().max(1.0);
    assert!(
        (actual - expected).abs() <= rel_tol * scale,
        "expected {expected} (rel {rel_tol}), got {actual}"
    );
}
