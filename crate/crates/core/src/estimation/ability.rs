use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::grid::AbilityGrid;
use crate::irt::{prob_pair, ItemParams};
use crate::responses::Response;

/// Raw EAP score and its normal-scores counterpart for one examinee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbilityEstimate {
    pub examinee: usize,
    pub raw: f64,
    pub normalized: f64,
}

/// Posterior-mean scorer under a standard-normal prior on a fixed grid.
///
/// Log response probabilities are tabulated once per item so scoring an
/// examinee costs one pass over the grid per answered item.
#[derive(Debug, Clone)]
pub struct EapScorer {
    points: Vec<f64>,
    log_prior: Vec<f64>,
    log_p: Vec<Vec<f64>>,
    log_q: Vec<Vec<f64>>,
}

impl EapScorer {
    pub fn new(items: &[ItemParams], grid: &AbilityGrid) -> Self {
        let tab = |f: &dyn Fn(f64, f64) -> f64, it: &ItemParams| -> Vec<f64> {
            grid.points()
                .iter()
                .map(|&t| {
                    let (p, q) = prob_pair(t, it);
                    f(p, q).max(f64::MIN_POSITIVE).ln()
                })
                .collect()
        };
        EapScorer {
            points: grid.points().to_vec(),
            log_prior: grid.weights().iter().map(|w| w.ln()).collect(),
            log_p: items.iter().map(|it| tab(&|p, _| p, it)).collect(),
            log_q: items.iter().map(|it| tab(&|_, q| q, it)).collect(),
        }
    }

    pub fn items(&self) -> usize {
        self.log_p.len()
    }

    /// Posterior mean given a response vector aligned with the scorer's items.
    pub fn score(&self, responses: &[Response]) -> f64 {
        assert_eq!(responses.len(), self.items(), "responses must align with items");
        let mut acc = self.log_prior.clone();
        for (k, r) in responses.iter().enumerate() {
            let table = match r.observed() {
                Some(true) => &self.log_p[k],
                Some(false) => &self.log_q[k],
                None => continue,
            };
            for (a, t) in acc.iter_mut().zip(table) {
                *a += t;
            }
        }
        let peak = acc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (mut num, mut den) = (0.0, 0.0);
        for (a, &t) in acc.iter().zip(&self.points) {
            let w = (a - peak).exp();
            num += w * t;
            den += w;
        }
        num / den
    }
}

/// Expected a posteriori ability from the observed responses.
pub fn eap_ability(responses: &[Response], items: &[ItemParams], grid: &AbilityGrid) -> f64 {
    EapScorer::new(items, grid).score(responses)
}

/// Maps scores to normal scores `Φ⁻¹((r - 0.5)/N)`, with average ranks for ties.
pub fn percentile_transform(raw: &[f64]) -> Vec<f64> {
    let n = raw.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| raw[i].total_cmp(&raw[j]));
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && raw[order[end]] == raw[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1..=end share their average
        let rank = (start + 1 + end) as f64 / 2.0;
        let z = std_normal.inverse_cdf((rank - 0.5) / n as f64);
        for &k in &order[start..end] {
            out[k] = z;
        }
        start = end;
    }
    out
}
