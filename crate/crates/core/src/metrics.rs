//! Empirical precision measures of item estimates and the relative
//! efficiencies of random versus optimal allocation.
//!
//! Each relative efficiency is `measure(random) / measure(optimal)` (the
//! determinant ratio under a cube root), so values above 1 favour the
//! optimal design. Study-level summaries use the geometric mean.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blocks::ItemId;
use crate::irt::{prob_3pl, ItemParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("optimal-design {measure} is {value}, cannot form a ratio")]
    DegenerateDenominator { measure: &'static str, value: f64 },
    #[error("efficiency {0} is not positive")]
    NonPositiveEfficiency(f64),
    #[error("no efficiencies to summarise")]
    Empty,
}

/// Mean outer product of estimation errors, ordered `(a, b, c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMatrix(pub Matrix3<f64>);

impl ErrorMatrix {
    pub fn mse(&self) -> Vector3<f64> {
        self.0.diagonal()
    }
}

/// `(1/S) Σ_s (β̂_s − β)(β̂_s − β)ᵀ`; zero for an empty series.
pub fn error_matrix(estimates: &[ItemParams], truth: &ItemParams) -> ErrorMatrix {
    if estimates.is_empty() {
        return ErrorMatrix(Matrix3::zeros());
    }
    let t = truth.to_vector();
    let sum = estimates.iter().fold(Matrix3::zeros(), |acc, e| {
        let d = e.to_vector() - t;
        acc + d * d.transpose()
    });
    ErrorMatrix(sum / estimates.len() as f64)
}

pub fn emp_d_criterion(q: &ErrorMatrix) -> f64 {
    q.0.determinant()
}

/// Per-parameter MSE (the error-matrix diagonal) and its average.
pub fn mse_amse(estimates: &[ItemParams], truth: &ItemParams) -> (Vector3<f64>, f64) {
    let mse = error_matrix(estimates, truth).mse();
    (mse, mse.sum() / 3.0)
}

/// `Σ_j (1/S) Σ_s (p(θ_j | β̂_s) − p(θ_j | β))²`.
pub fn cc_total(estimates: &[ItemParams], truth: &ItemParams, thetas: &[f64]) -> f64 {
    if estimates.is_empty() {
        return 0.0;
    }
    let base: Vec<f64> = thetas.iter().map(|&t| prob_3pl(t, truth)).collect();
    let total: f64 = estimates
        .iter()
        .map(|e| {
            thetas
                .iter()
                .zip(&base)
                .map(|(&t, p0)| {
                    let d = prob_3pl(t, e) - p0;
                    d * d
                })
                .sum::<f64>()
        })
        .sum();
    total / estimates.len() as f64
}

/// The three precision measures of one design arm for one item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmStats {
    pub d: f64,
    pub amse: f64,
    pub cc: f64,
}

impl ArmStats {
    pub fn compute(estimates: &[ItemParams], truth: &ItemParams, thetas: &[f64]) -> Self {
        ArmStats {
            d: emp_d_criterion(&error_matrix(estimates, truth)),
            amse: mse_amse(estimates, truth).1,
            cc: cc_total(estimates, truth, thetas),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Efficiencies {
    pub re_d: f64,
    pub re_cc: f64,
    pub re_a: f64,
}

pub fn relative_efficiencies(random: &ArmStats, optimal: &ArmStats) -> Result<Efficiencies, MetricsError> {
    let check = |measure, value: f64| {
        if value > 0.0 {
            Ok(())
        } else {
            Err(MetricsError::DegenerateDenominator { measure, value })
        }
    };
    check("D-criterion", optimal.d)?;
    check("AMSE", optimal.amse)?;
    check("CC total", optimal.cc)?;
    Ok(Efficiencies {
        re_d: (random.d / optimal.d).cbrt(),
        re_cc: random.cc / optimal.cc,
        re_a: random.amse / optimal.amse,
    })
}

/// One row of the per-item results table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItemEfficiency {
    pub item_id: ItemId,
    pub block: usize,
    pub position: usize,
    pub re_d: f64,
    pub re_cc: f64,
    pub re_a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverallSummary {
    pub re_d: f64,
    pub re_cc: f64,
    pub re_a: f64,
    pub items: usize,
}

pub fn geometric_mean(xs: &[f64]) -> Result<f64, MetricsError> {
    if xs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut log_sum = 0.0;
    for &x in xs {
        if !(x > 0.0) {
            return Err(MetricsError::NonPositiveEfficiency(x));
        }
        log_sum += x.ln();
    }
    Ok((log_sum / xs.len() as f64).exp())
}

pub fn overall_summary(items: &[ItemEfficiency]) -> Result<OverallSummary, MetricsError> {
    let pick = |f: fn(&ItemEfficiency) -> f64| items.iter().map(f).collect::<Vec<_>>();
    Ok(OverallSummary {
        re_d: geometric_mean(&pick(|e| e.re_d))?,
        re_cc: geometric_mean(&pick(|e| e.re_cc))?,
        re_a: geometric_mean(&pick(|e| e.re_a))?,
        items: items.len(),
    })
}

/// Replicate-indexed estimates of one item under both designs. `None` marks
/// a replicate whose fit was rejected; such replicates are dropped from both
/// arms so the comparison stays paired.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemSeries {
    pub item_id: ItemId,
    pub block: usize,
    pub position: usize,
    pub truth: ItemParams,
    pub optimal: Vec<Option<ItemParams>>,
    pub random: Vec<Option<ItemParams>>,
}

impl ItemSeries {
    fn paired_over(&self, reps: impl Iterator<Item = usize>) -> (Vec<ItemParams>, Vec<ItemParams>) {
        reps.filter_map(|s| match (self.optimal.get(s)?, self.random.get(s)?) {
            (Some(o), Some(r)) => Some((*o, *r)),
            _ => None,
        })
        .unzip()
    }

    /// Estimates of replicates where both arms are usable.
    pub fn paired(&self) -> (Vec<ItemParams>, Vec<ItemParams>) {
        self.paired_over(0..self.optimal.len().min(self.random.len()))
    }

    /// Number of replicates dropped from the pairing.
    pub fn excluded(&self) -> usize {
        self.optimal.len().max(self.random.len()) - self.paired().0.len()
    }

    pub fn efficiency(&self, thetas: &[f64]) -> Result<ItemEfficiency, MetricsError> {
        let (opt, rnd) = self.paired();
        let e = relative_efficiencies(
            &ArmStats::compute(&rnd, &self.truth, thetas),
            &ArmStats::compute(&opt, &self.truth, thetas),
        )?;
        Ok(ItemEfficiency {
            item_id: self.item_id,
            block: self.block,
            position: self.position,
            re_d: e.re_d,
            re_cc: e.re_cc,
            re_a: e.re_a,
        })
    }
}

/// Per-item efficiencies, with the characteristic-curve criterion summed over `thetas`.
pub fn item_efficiencies(series: &[ItemSeries], thetas: &[f64]) -> Result<Vec<ItemEfficiency>, MetricsError> {
    series.par_iter().map(|s| s.efficiency(thetas)).collect()
}

/// Percentile interval for the overall geometric-mean RE_D from a paired
/// bootstrap over replicates: each resample draws replicate indices with
/// replacement and reuses them for every item and both arms.
///
/// A resample that leaves some item with a singular optimal-arm error matrix
/// (too few distinct replicates) has no RE_D and is skipped; the percentiles
/// come from the remaining resamples.
pub fn bootstrap_overall_re_d(
    series: &[ItemSeries],
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64), MetricsError> {
    let reps = series.iter().map(|s| s.optimal.len()).max().ok_or(MetricsError::Empty)?;
    if reps == 0 || resamples == 0 {
        return Err(MetricsError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let draw: Vec<usize> = (0..reps).map(|_| rng.gen_range(0..reps)).collect();
        let re_d: Option<Vec<f64>> = series
            .iter()
            .map(|s| {
                let (opt, rnd) = s.paired_over(draw.iter().copied());
                let d_o = emp_d_criterion(&error_matrix(&opt, &s.truth));
                let d_r = emp_d_criterion(&error_matrix(&rnd, &s.truth));
                (d_o > 0.0 && d_r > 0.0).then(|| (d_r / d_o).cbrt())
            })
            .collect();
        if let Some(re_d) = re_d {
            stats.push(geometric_mean(&re_d)?);
        }
    }
    if stats.is_empty() {
        return Err(MetricsError::DegenerateDenominator { measure: "D-criterion", value: 0.0 });
    }
    stats.sort_by(f64::total_cmp);
    let n = stats.len();
    let tail = (1.0 - level) / 2.0;
    let at = |p: f64| stats[((p * n as f64).floor() as usize).min(n - 1)];
    Ok((at(tail), at(1.0 - tail)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(a: f64, b: f64, c: f64) -> ItemParams {
        ItemParams { a, b, c }
    }

    #[test]
    fn error_matrix_basics() {
        let truth = p(1.0, 0.0, 0.2);
        assert_eq!(error_matrix(&[truth; 4], &truth).0, Matrix3::zeros());
        let q = error_matrix(&[p(1.1, 0.0, 0.2)], &truth);
        assert_relative_eq!(q.0[(0, 0)], 0.01, epsilon = 1e-15);
        assert_eq!(q.0.iter().filter(|x| x.abs() > 1e-15).count(), 1);
        assert_eq!(emp_d_criterion(&q), 0.0);
    }

    #[test]
    fn d_criterion_of_diagonal() {
        let q = ErrorMatrix(Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0)));
        assert_relative_eq!(emp_d_criterion(&q), 6.0, epsilon = 1e-12);
        assert_eq!(emp_d_criterion(&ErrorMatrix(Matrix3::zeros())), 0.0);
    }

    #[test]
    fn two_estimates_are_rank_deficient() {
        let truth = p(1.0, 0.0, 0.2);
        let q = error_matrix(&[p(1.3, 0.2, 0.1), p(0.8, -0.4, 0.25)], &truth);
        assert!(emp_d_criterion(&q).abs() < 1e-15);
    }

    #[test]
    fn constant_bias_amse() {
        let truth = p(1.0, 0.0, 0.2);
        let (mse, amse) = mse_amse(&[p(1.1, 0.1, 0.3); 7], &truth);
        assert_relative_eq!(amse, 0.01, epsilon = 1e-12);
        assert_relative_eq!(mse, error_matrix(&[p(1.1, 0.1, 0.3); 7], &truth).0.diagonal());
    }

    #[test]
    fn cc_single_gap() {
        // 2PL at θ = b gives 0.5; shifting c to 0.2 gives 0.6
        let truth = p(1.0, 0.0, 0.0);
        assert_relative_eq!(cc_total(&[p(1.0, 0.0, 0.2)], &truth, &[0.0]), 0.01, epsilon = 1e-15);
        assert_eq!(cc_total(&[truth; 3], &truth, &[0.0, 1.0]), 0.0);
    }

    #[test]
    fn relative_efficiency_rules() {
        let arm = ArmStats { d: 8.0, amse: 0.3, cc: 2.0 };
        let same = relative_efficiencies(&arm, &arm).unwrap();
        assert_eq!((same.re_d, same.re_cc, same.re_a), (1.0, 1.0, 1.0));
        let opt = ArmStats { d: 1.0, amse: 0.3, cc: 2.0 };
        assert_relative_eq!(relative_efficiencies(&arm, &opt).unwrap().re_d, 2.0, epsilon = 1e-15);
        let bad = ArmStats { d: 0.0, amse: 0.3, cc: 2.0 };
        assert!(matches!(
            relative_efficiencies(&arm, &bad),
            Err(MetricsError::DegenerateDenominator { .. })
        ));
    }

    #[test]
    fn geometric_mean_rules() {
        assert_relative_eq!(geometric_mean(&[0.5, 2.0]).unwrap(), 1.0, epsilon = 1e-15);
        assert!(geometric_mean(&[0.5, 2.0]).unwrap() < 1.25);
        assert_relative_eq!(geometric_mean(&[1.3; 5]).unwrap(), 1.3, epsilon = 1e-14);
        assert_eq!(geometric_mean(&[1.0, 0.0]), Err(MetricsError::NonPositiveEfficiency(0.0)));
        assert_eq!(geometric_mean(&[]), Err(MetricsError::Empty));
    }

    #[test]
    fn exclusion_is_pairwise() {
        let s = ItemSeries {
            item_id: ItemId(1),
            block: 1,
            position: 1,
            truth: p(1.0, 0.0, 0.2),
            optimal: vec![Some(p(1.1, 0.0, 0.2)), None, Some(p(0.9, 0.1, 0.2))],
            random: vec![Some(p(1.2, 0.0, 0.2)), Some(p(1.0, 0.0, 0.2)), None],
        };
        let (o, r) = s.paired();
        assert_eq!(o.len(), 1);
        assert_eq!(r.len(), 1);
        assert_eq!(s.excluded(), 2);
    }
}
