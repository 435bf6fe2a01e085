//! Item parameter fitting with examinee abilities treated as known.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::EstimationError;
use crate::irt::{grad_prob, prob_pair, ItemParams};
use crate::optim::minimize_box;
use crate::responses::Response;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub lower: ItemParams,
    pub upper: ItemParams,
    pub start: ItemParams,
    /// Tolerance on the sup-norm of the projected gradient of the mean log-likelihood.
    pub grad_tol: f64,
    pub max_iters: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            lower: ItemParams { a: 0.2, b: -5.0, c: 0.0 },
            upper: ItemParams { a: 5.0, b: 5.0, c: 0.5 },
            start: ItemParams { a: 1.0, b: 0.0, c: 0.2 },
            grad_tol: 1e-6,
            max_iters: 500,
        }
    }
}

impl FitOptions {
    fn check(&self) -> Result<(), EstimationError> {
        let (lo, hi) = (self.lower.to_vector(), self.upper.to_vector());
        if (0..3).any(|i| !(lo[i] < hi[i])) || self.lower.a <= 0.0 || self.upper.c >= 1.0 || self.lower.c < 0.0 {
            return Err(EstimationError::InvalidOptions(format!(
                "box {:?}..{:?} is empty or leaves the parameter space",
                self.lower, self.upper
            )));
        }
        if !(self.grad_tol > 0.0) {
            return Err(EstimationError::InvalidOptions("grad_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Prior used for small-sample pre-estimation: `log a ~ N(μ, σ²)`,
/// `b ~ N(μ_b, σ_b²)`, `c ~ Beta(α, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Priors {
    pub log_a_mean: f64,
    pub log_a_sd: f64,
    pub b_mean: f64,
    pub b_sd: f64,
    pub c_alpha: f64,
    pub c_beta: f64,
}

impl Default for Priors {
    fn default() -> Self {
        Priors { log_a_mean: 0.0, log_a_sd: 0.5, b_mean: 0.0, b_sd: 2.0, c_alpha: 5.0, c_beta: 17.0 }
    }
}

impl Priors {
    fn log_density(&self, p: &Vector3<f64>) -> (f64, Vector3<f64>) {
        let (a, b, c) = (p[0], p[1], p[2]);
        let za = (a.ln() - self.log_a_mean) / self.log_a_sd;
        let zb = (b - self.b_mean) / self.b_sd;
        let (ka, kb) = (self.c_alpha - 1.0, self.c_beta - 1.0);
        let value = -0.5 * za * za - 0.5 * zb * zb + ka * c.ln() + kb * (1.0 - c).ln();
        let grad = Vector3::new(
            -za / (self.log_a_sd * a),
            -zb / self.b_sd,
            ka / c - kb / (1.0 - c),
        );
        (value, grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    NotConverged,
    /// Every observed response was identical; the estimate sits on the box.
    DegenerateData,
    /// Nobody answered the item.
    NoData,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItemFit {
    pub estimate: ItemParams,
    pub status: FitStatus,
    pub log_likelihood: f64,
    pub n_responses: usize,
    pub iterations: usize,
    /// Some component ended on the boundary of the box.
    pub at_bound: bool,
}

impl ItemFit {
    pub fn converged(&self) -> bool {
        self.status == FitStatus::Converged
    }
}

fn observations(thetas: &[f64], responses: &[Response]) -> Result<Vec<(f64, bool)>, EstimationError> {
    if thetas.len() != responses.len() {
        return Err(EstimationError::LengthMismatch { thetas: thetas.len(), responses: responses.len() });
    }
    Ok(thetas
        .iter()
        .zip(responses)
        .filter_map(|(&t, r)| r.observed().map(|y| (t, y)))
        .collect())
}

/// Log-likelihood and its gradient over `(θ, correct)` pairs.
fn loglik(p: &ItemParams, obs: &[(f64, bool)]) -> (f64, Vector3<f64>) {
    let mut ll = 0.0;
    let mut g = Vector3::zeros();
    for &(t, y) in obs {
        let (prob, comp) = prob_pair(t, p);
        let dp = grad_prob(t, p);
        if y {
            ll += prob.max(f64::MIN_POSITIVE).ln();
            g += dp / prob.max(f64::MIN_POSITIVE);
        } else {
            ll += comp.max(f64::MIN_POSITIVE).ln();
            g -= dp / comp.max(f64::MIN_POSITIVE);
        }
    }
    (ll, g)
}

/// Bernoulli log-likelihood of the observed responses at `params`.
pub fn item_log_likelihood(
    params: &ItemParams,
    thetas: &[f64],
    responses: &[Response],
) -> Result<f64, EstimationError> {
    Ok(loglik(params, &observations(thetas, responses)?).0)
}

fn touches_bound(x: &Vector3<f64>, lo: &Vector3<f64>, hi: &Vector3<f64>) -> bool {
    (0..3).any(|i| x[i] <= lo[i] || x[i] >= hi[i])
}

/// Maximum-likelihood fit of one item with abilities fixed at `thetas`.
///
/// Missing responses are skipped. Returns [`EstimationError::NoResponses`]
/// when nothing was observed.
pub fn fit_item_fixed_theta(
    thetas: &[f64],
    responses: &[Response],
    opts: &FitOptions,
) -> Result<ItemFit, EstimationError> {
    opts.check()?;
    let obs = observations(thetas, responses)?;
    if obs.is_empty() {
        return Err(EstimationError::NoResponses);
    }
    let n = obs.len() as f64;
    let (lo, hi) = (opts.lower.to_vector(), opts.upper.to_vector());
    let min = minimize_box(
        |x| {
            let (ll, g) = loglik(&ItemParams::from_vector(x), &obs);
            (-ll / n, -g / n)
        },
        opts.start.to_vector(),
        lo,
        hi,
        opts.grad_tol,
        opts.max_iters,
    );
    let degenerate = obs.iter().all(|o| o.1 == obs[0].1);
    let status = if degenerate {
        FitStatus::DegenerateData
    } else if min.converged {
        FitStatus::Converged
    } else {
        FitStatus::NotConverged
    };
    Ok(ItemFit {
        estimate: ItemParams::from_vector(&min.x),
        status,
        log_likelihood: -min.f * n,
        n_responses: obs.len(),
        iterations: min.iterations,
        at_bound: touches_bound(&min.x, &lo, &hi),
    })
}

/// Posterior mode under `priors` with abilities fixed at `thetas`.
///
/// Works with zero observed responses, in which case it returns the prior mode.
pub fn map_preestimate(
    thetas: &[f64],
    responses: &[Response],
    priors: &Priors,
    opts: &FitOptions,
) -> Result<ItemFit, EstimationError> {
    opts.check()?;
    let obs = observations(thetas, responses)?;
    let scale = obs.len().max(1) as f64;
    let mut lo = opts.lower.to_vector();
    let hi = opts.upper.to_vector();
    if priors.c_alpha > 1.0 {
        // the Beta log-density is -inf at c = 0
        lo[2] = lo[2].max(1e-6);
    }
    let min = minimize_box(
        |x| {
            let (ll, g) = loglik(&ItemParams::from_vector(x), &obs);
            let (lp, gp) = priors.log_density(x);
            (-(ll + lp) / scale, -(g + gp) / scale)
        },
        opts.start.to_vector(),
        lo,
        hi,
        opts.grad_tol,
        opts.max_iters,
    );
    let estimate = ItemParams::from_vector(&min.x);
    Ok(ItemFit {
        estimate,
        status: if min.converged { FitStatus::Converged } else { FitStatus::NotConverged },
        log_likelihood: loglik(&estimate, &obs).0,
        n_responses: obs.len(),
        iterations: min.iterations,
        at_bound: touches_bound(&min.x, &lo, &hi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn simulate(truth: &ItemParams, n: usize, seed: u64) -> (Vec<f64>, Vec<Response>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let thetas: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let resp = thetas
            .iter()
            .map(|&t| Response::from_outcome(rng.gen::<f64>() < crate::irt::prob_3pl(t, truth)))
            .collect();
        (thetas, resp)
    }

    #[test]
    fn all_correct_is_degenerate() {
        let thetas = [0.1, -0.3, 1.2, 0.4];
        let fit = fit_item_fixed_theta(&thetas, &[Response::Correct; 4], &FitOptions::default()).unwrap();
        assert_eq!(fit.status, FitStatus::DegenerateData);
        assert!(fit.at_bound);
    }

    #[test]
    fn no_responses_is_an_error() {
        let err = fit_item_fixed_theta(&[0.0], &[Response::NotAdministered], &FitOptions::default());
        assert_eq!(err, Err(EstimationError::NoResponses));
        let err = fit_item_fixed_theta(&[0.0, 1.0], &[Response::Correct], &FitOptions::default());
        assert!(matches!(err, Err(EstimationError::LengthMismatch { .. })));
    }

    #[test]
    fn fitted_likelihood_dominates_truth() {
        let truth = ItemParams::new(1.1, 0.2, 0.15).unwrap();
        let (thetas, resp) = simulate(&truth, 3000, 11);
        let fit = fit_item_fixed_theta(&thetas, &resp, &FitOptions::default()).unwrap();
        assert!(fit.converged());
        let at_truth = item_log_likelihood(&truth, &thetas, &resp).unwrap();
        assert!(fit.log_likelihood >= at_truth - 1e-9);
        assert_eq!(fit.n_responses, 3000);
    }

    #[test]
    fn prior_mode_without_data() {
        let fit = map_preestimate(&[], &[], &Priors::default(), &FitOptions::default()).unwrap();
        assert!(fit.converged());
        assert!((fit.estimate.a - 1.0).abs() < 1e-6);
        assert!(fit.estimate.b.abs() < 1e-6);
        assert!((fit.estimate.c - 0.2).abs() < 1e-6);
    }

    #[test]
    fn map_objective_improves_on_start() {
        let truth = ItemParams::new(0.862, -1.063, 0.203).unwrap();
        let (thetas, resp) = simulate(&truth, 200, 5);
        let priors = Priors::default();
        let fit = map_preestimate(&thetas, &resp, &priors, &FitOptions::default()).unwrap();
        let objective = |p: &ItemParams| {
            item_log_likelihood(p, &thetas, &resp).unwrap() + priors.log_density(&p.to_vector()).0
        };
        assert!(objective(&fit.estimate) >= objective(&FitOptions::default().start));
    }
}
