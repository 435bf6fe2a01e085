//! Three-parameter logistic item response model.
//!
//! Everything here is ordered `(a, b, c)`: discrimination, difficulty,
//! guessing. Vectors and matrices returned by this module follow that order.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Per-ability (or integrated) Fisher information for one item, ordered `(a, b, c)`.
pub type InfoMatrix = Matrix3<f64>;

/// Below this value of `p(1-p)` the item carries no usable information.
pub const INFO_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("discrimination must be positive and finite, got {0}")]
    Discrimination(f64),
    #[error("difficulty must be finite, got {0}")]
    Difficulty(f64),
    #[error("guessing must lie in [0, 1), got {0}")]
    Guessing(f64),
}

/// One item's 3PL parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItemParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ItemParams {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, ParamError> {
        let p = ItemParams { a, b, c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(ParamError::Discrimination(self.a));
        }
        if !self.b.is_finite() {
            return Err(ParamError::Difficulty(self.b));
        }
        if !(self.c.is_finite() && (0.0..1.0).contains(&self.c)) {
            return Err(ParamError::Guessing(self.c));
        }
        Ok(())
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.a, self.b, self.c)
    }

    /// Builds parameters from an `(a, b, c)` vector without validation.
    pub fn from_vector(v: &Vector3<f64>) -> Self {
        ItemParams { a: v[0], b: v[1], c: v[2] }
    }
}

/// Logistic sigmoid and its complement, each computed without cancellation.
#[inline]
pub(crate) fn sigmoid_pair(z: f64) -> (f64, f64) {
    if z >= 0.0 {
        let e = (-z).exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    } else {
        let e = z.exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    }
}

/// Probability of a correct response, `c + (1-c) / (1 + exp(-a(θ-b)))`.
#[inline]
pub fn prob_3pl(theta: f64, p: &ItemParams) -> f64 {
    let (q, _) = sigmoid_pair(p.a * (theta - p.b));
    p.c + (1.0 - p.c) * q
}

/// `(p, 1-p)` with the complement formed as `(1-c)(1-q)`.
#[inline]
pub(crate) fn prob_pair(theta: f64, p: &ItemParams) -> (f64, f64) {
    let (q, q_c) = sigmoid_pair(p.a * (theta - p.b));
    (p.c + (1.0 - p.c) * q, (1.0 - p.c) * q_c)
}

/// Log-odds of a correct response. Reduces to `a(θ-b)` exactly when `c = 0`.
pub fn logit_link(theta: f64, p: &ItemParams) -> f64 {
    if p.c == 0.0 {
        return p.a * (theta - p.b);
    }
    let (prob, comp) = prob_pair(theta, p);
    prob.ln() - comp.ln()
}

/// Gradient of [`prob_3pl`] with respect to `(a, b, c)`.
pub fn grad_prob(theta: f64, p: &ItemParams) -> Vector3<f64> {
    let (q, q_c) = sigmoid_pair(p.a * (theta - p.b));
    let slope = (1.0 - p.c) * q * q_c;
    Vector3::new(slope * (theta - p.b), -p.a * slope, q_c)
}

/// Square-root factor of the pointwise information: `∇p / sqrt(p(1-p))`,
/// so that `fisher_info = v vᵀ`. Zero where `p(1-p)` underflows.
#[inline]
pub fn info_vector(theta: f64, p: &ItemParams) -> Vector3<f64> {
    let (prob, comp) = prob_pair(theta, p);
    let var = prob * comp;
    if var < INFO_FLOOR {
        return Vector3::zeros();
    }
    grad_prob(theta, p) / var.sqrt()
}

/// Pointwise Fisher information `∇p ∇pᵀ / (p(1-p))` of one response.
pub fn fisher_info(theta: f64, p: &ItemParams) -> InfoMatrix {
    let v = info_vector(theta, p);
    v * v.transpose()
}
