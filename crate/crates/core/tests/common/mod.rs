//! Reference implementations shared by the integration tests. Everything
//! here is written from the model formulas directly and does not call into
//! the library's numerics.
#![allow(dead_code)]

use calib_opt::blocks::Block;
use calib_opt::irt::ItemParams;
use nalgebra::{Matrix3, Vector3};

/// The four-item example block, in difficulty order.
pub const EXAMPLE: [(f64, f64, f64); 4] =
    [(0.862, -1.063, 0.203), (1.320, -0.549, 0.195), (1.220, -0.067, 0.155), (2.173, 0.454, 0.107)];

pub fn example_params() -> Vec<ItemParams> {
    EXAMPLE.iter().map(|&(a, b, c)| ItemParams::new(a, b, c).unwrap()).collect()
}

pub fn example_block() -> Block {
    Block::from_params(&example_params()).unwrap()
}

/// Same discriminations and guessing, every difficulty set to -0.306.
pub fn flattened_block() -> Block {
    let params: Vec<ItemParams> =
        EXAMPLE.iter().map(|&(a, _, c)| ItemParams::new(a, -0.306, c).unwrap()).collect();
    Block::from_params(&params).unwrap()
}

pub fn p3(theta: f64, (a, b, c): (f64, f64, f64)) -> f64 {
    c + (1.0 - c) / (1.0 + (-a * (theta - b)).exp())
}

pub fn grad3(theta: f64, (a, b, c): (f64, f64, f64)) -> Vector3<f64> {
    let q = 1.0 / (1.0 + (-a * (theta - b)).exp());
    let s = (1.0 - c) * q * (1.0 - q);
    Vector3::new(s * (theta - b), -a * s, 1.0 - q)
}

pub fn info3(theta: f64, item: (f64, f64, f64)) -> Matrix3<f64> {
    let p = p3(theta, item);
    let g = grad3(theta, item);
    g * g.transpose() / (p * (1.0 - p))
}

pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Composite Simpson rule on `n` (odd) points over `[lo, hi]`.
pub fn simpson<T, F>(lo: f64, hi: f64, n: usize, zero: T, f: F) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    F: Fn(f64) -> T,
{
    assert!(n % 2 == 1 && n >= 3);
    let h = (hi - lo) / (n - 1) as f64;
    let mut acc = zero;
    for k in 0..n {
        let w = if k == 0 || k == n - 1 {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc = acc + f(lo + k as f64 * h) * (w * h / 3.0);
    }
    acc
}

pub const FINE: usize = 100_001;

/// Information of `item` under the standard normal truncated to [-4, 4],
/// scaled by the share `share` of the density routed to it.
pub fn fine_info(item: (f64, f64, f64), share: f64) -> Matrix3<f64> {
    let mass = simpson(-4.0, 4.0, FINE, 0.0, phi);
    simpson(-4.0, 4.0, FINE, Matrix3::zeros(), |t| info3(t, item) * phi(t)) * (share / mass)
}

pub fn relative(x: f64, reference: f64) -> f64 {
    (x - reference).abs() / reference.abs()
}

pub fn max_relative(x: &Matrix3<f64>, reference: &Matrix3<f64>) -> f64 {
    (x - reference).abs().max() / reference.abs().max()
}
