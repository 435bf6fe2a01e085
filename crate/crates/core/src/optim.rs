//! Box-constrained quasi-Newton minimisation in three variables.
//!
//! Projected BFGS: variables pinned at a bound with the gradient pushing
//! outward are frozen for the step, the remaining ones follow the BFGS
//! direction, and the step is projected back onto the box with an Armijo
//! backtracking search along the projected path.

use nalgebra::{Matrix3, Vector3};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Minimum {
    pub x: Vector3<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn project(x: &Vector3<f64>, lo: &Vector3<f64>, hi: &Vector3<f64>) -> Vector3<f64> {
    Vector3::from_fn(|i, _| x[i].clamp(lo[i], hi[i]))
}

fn binding(x: &Vector3<f64>, g: &Vector3<f64>, lo: &Vector3<f64>, hi: &Vector3<f64>) -> [bool; 3] {
    [0, 1, 2].map(|i| (x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0))
}

/// Sup-norm of the gradient with outward components at active bounds removed.
pub(crate) fn projected_grad_norm(
    x: &Vector3<f64>,
    g: &Vector3<f64>,
    lo: &Vector3<f64>,
    hi: &Vector3<f64>,
) -> f64 {
    let b = binding(x, g, lo, hi);
    (0..3).filter(|&i| !b[i]).map(|i| g[i].abs()).fold(0.0, f64::max)
}

pub(crate) fn minimize_box<F>(
    mut f: F,
    x0: Vector3<f64>,
    lo: Vector3<f64>,
    hi: Vector3<f64>,
    grad_tol: f64,
    max_iters: usize,
) -> Minimum
where
    F: FnMut(&Vector3<f64>) -> (f64, Vector3<f64>),
{
    let mut x = project(&x0, &lo, &hi);
    let (mut fx, mut g) = f(&x);
    let mut h = Matrix3::identity();
    let mut fresh = true;
    let mut iterations = 0;

    while iterations < max_iters {
        if projected_grad_norm(&x, &g, &lo, &hi) <= grad_tol {
            return Minimum { x, f: fx, iterations, converged: true };
        }
        iterations += 1;
        let b = binding(&x, &g, &lo, &hi);
        let mut dir = Vector3::zeros();
        for i in 0..3 {
            if b[i] {
                continue;
            }
            for j in 0..3 {
                if !b[j] {
                    dir[i] -= h[(i, j)] * g[j];
                }
            }
        }
        if dir.dot(&g) >= 0.0 {
            h = Matrix3::identity();
            fresh = true;
            dir = Vector3::from_fn(|i, _| if b[i] { 0.0 } else { -g[i] });
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn = project(&(x + step * dir), &lo, &hi);
            let (fnew, gnew) = f(&xn);
            if fnew.is_finite() && fnew <= fx + 1e-4 * g.dot(&(xn - x)) {
                accepted = Some((xn, fnew, gnew));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            if fresh {
                // no descent even along the projected gradient
                break;
            }
            h = Matrix3::identity();
            fresh = true;
            continue;
        };

        let s = xn - x;
        let y = gnew - g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                h = Matrix3::identity() * (sy / y.dot(&y));
            }
            let rho = 1.0 / sy;
            let left = Matrix3::identity() - rho * s * y.transpose();
            h = left * h * left.transpose() + rho * s * s.transpose();
            fresh = false;
        }
        x = xn;
        fx = fnew;
        g = gnew;
    }
    let converged = projected_grad_norm(&x, &g, &lo, &hi) <= grad_tol;
    Minimum { x, f: fx, iterations, converged }
}
