//! Shared helpers for the oracle test suites.

use certiscope_core::linalg::Mat;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    let columns: Vec<Vec<f64>> = (0..cols)
        .map(|_| (0..rows).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    Mat::from_columns(&columns)
}

/// s-sparse vector with ±1 entries on a random support.
pub fn sparse_signed(rng: &mut ChaCha8Rng, p: usize, s: usize) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..p).collect();
    for i in 0..s {
        let j = rng.gen_range(i..p);
        idx.swap(i, j);
    }
    let mut a = vec![0.0; p];
    for &i in &idx[..s] {
        a[i] = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    }
    a
}

/// k-th central finite difference of `f` at `t` with step `dt`.
pub fn central_diff(f: impl Fn(f64) -> f64, k: u32, t: f64, dt: f64) -> f64 {
    let mut acc = 0.0;
    let mut binom = 1.0f64;
    for i in 0..=k {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom * f(t + (k as f64 / 2.0 - i as f64) * dt);
        binom = binom * (k - i) as f64 / (i + 1) as f64;
    }
    acc / dt.powi(k as i32)
}

/// Richardson-extrapolated central difference: kills the O(dt²) truncation
/// term while keeping `dt` as the finest step.
pub fn central_diff_r4(f: impl Fn(f64) -> f64 + Copy, k: u32, t: f64, dt: f64) -> f64 {
    (4.0 * central_diff(f, k, t, dt) - central_diff(f, k, t, 2.0 * dt)) / 3.0
}

/// Trapezoid-rule inner product of two 1-periodic functions (midpoint-free,
/// uniform grid, exact for the band-limited integrands used in the tests).
pub fn quadrature_inner(f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64, samples: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..samples {
        let x = i as f64 / samples as f64;
        acc += f(x) * g(x);
    }
    acc / samples as f64
}
