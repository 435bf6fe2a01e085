use calib_opt::blocks::ItemId;
use calib_opt::irt::ItemParams;
use calib_opt::metrics::{
    bootstrap_overall_re_d, cc_total, emp_d_criterion, error_matrix, geometric_mean, mse_amse, overall_summary,
    relative_efficiencies, ArmStats, ErrorMatrix, ItemEfficiency, ItemSeries, MetricsError,
};
use nalgebra::Matrix3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TRUTH: ItemParams = ItemParams { a: 1.2, b: -0.3, c: 0.18 };

fn series(rng: &mut ChaCha8Rng, s: usize, spread: f64) -> Vec<ItemParams> {
    (0..s)
        .map(|_| ItemParams {
            a: TRUTH.a + spread * (rng.gen::<f64>() - 0.4),
            b: TRUTH.b + spread * (rng.gen::<f64>() - 0.5),
            c: (TRUTH.c + 0.2 * spread * (rng.gen::<f64>() - 0.5)).clamp(0.0, 0.9),
        })
        .collect()
}

/// Mean vector first, then centred and bias parts summed entry by entry.
fn two_pass_error_matrix(est: &[ItemParams], truth: &ItemParams) -> Matrix3<f64> {
    let rows: Vec<[f64; 3]> = est.iter().map(|e| [e.a - truth.a, e.b - truth.b, e.c - truth.c]).collect();
    let n = rows.len() as f64;
    let mut mean = [0.0; 3];
    for r in &rows {
        for k in 0..3 {
            mean[k] += r[k] / n;
        }
    }
    let mut out = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let cov: f64 = rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / n;
            out[(i, j)] = cov + mean[i] * mean[j];
        }
    }
    out
}

fn brute_cc(est: &[ItemParams], truth: &ItemParams, thetas: &[f64]) -> f64 {
    let p = |t: f64, q: &ItemParams| q.c + (1.0 - q.c) / (1.0 + (-q.a * (t - q.b)).exp());
    let mut total = 0.0;
    for &t in thetas {
        let mut inner = 0.0;
        for e in est {
            inner += (p(t, e) - p(t, truth)).powi(2);
        }
        total += inner / est.len() as f64;
    }
    total
}

#[test]
fn error_matrix_matches_two_pass_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for s in [1, 2, 5, 200] {
        let est = series(&mut rng, s, 0.3);
        let q = error_matrix(&est, &TRUTH).0;
        let oracle = two_pass_error_matrix(&est, &TRUTH);
        assert!((q - oracle).abs().max() <= 1e-12, "S = {s}");
        assert_eq!(mse_amse(&est, &TRUTH).0, q.diagonal());
    }
}

#[test]
fn error_matrix_spot_values() {
    assert_eq!(error_matrix(&[TRUTH; 4], &TRUTH).0, Matrix3::zeros());
    let one = ItemParams { a: TRUTH.a + 0.1, ..TRUTH };
    let q = error_matrix(&[one], &TRUTH).0;
    assert!((q[(0, 0)] - 0.01).abs() < 1e-15);
    assert_eq!(q.iter().filter(|x| x.abs() > 1e-18).count(), 1);
    let biased = ItemParams { a: TRUTH.a + 0.1, b: TRUTH.b + 0.1, c: TRUTH.c + 0.1 };
    assert!((mse_amse(&[biased; 7], &TRUTH).1 - 0.01).abs() < 1e-12);
}

#[test]
fn empirical_d_criterion_spot_values() {
    assert_eq!(emp_d_criterion(&ErrorMatrix(Matrix3::zeros())), 0.0);
    assert!((emp_d_criterion(&ErrorMatrix(Matrix3::from_diagonal(&[1.0, 2.0, 3.0].into()))) - 6.0).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let est = series(&mut rng, 2, 0.3);
    assert!(emp_d_criterion(&error_matrix(&est, &TRUTH)).abs() < 1e-15);
}

#[test]
fn cc_total_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let est = series(&mut rng, 50, 0.4);
    let thetas: Vec<f64> = (0..500).map(|_| rng.gen::<f64>() * 8.0 - 4.0).collect();
    let got = cc_total(&est, &TRUTH, &thetas);
    assert!((got - brute_cc(&est, &TRUTH, &thetas)).abs() <= 1e-10);
    assert_eq!(cc_total(&[TRUTH; 3], &TRUTH, &thetas), 0.0);
}

#[test]
fn cc_total_single_gap() {
    // c shifted by 0.1 at an ability far below b leaves a gap of nearly 0.1
    let truth = ItemParams { a: 1.0, b: 0.0, c: 0.0 };
    let est = ItemParams { a: 1.0, b: 0.0, c: 0.1 };
    let got = cc_total(&[est], &truth, &[-60.0]);
    assert!((got - 0.01).abs() < 1e-12);
}

#[test]
fn relative_efficiency_spot_values() {
    let arm = ArmStats { d: 2.0, amse: 0.3, cc: 4.0 };
    let e = relative_efficiencies(&arm, &arm).unwrap();
    assert_eq!((e.re_d, e.re_cc, e.re_a), (1.0, 1.0, 1.0));
    let e = relative_efficiencies(&ArmStats { d: 8.0, ..arm }, &ArmStats { d: 1.0, ..arm }).unwrap();
    assert!((e.re_d - 2.0).abs() < 1e-15);
    assert!(matches!(
        relative_efficiencies(&arm, &ArmStats { d: 0.0, ..arm }),
        Err(MetricsError::DegenerateDenominator { .. })
    ));
}

#[test]
fn geometric_mean_examples() {
    assert!((geometric_mean(&[0.5, 2.0]).unwrap() - 1.0).abs() < 1e-15);
    assert!(geometric_mean(&[0.5, 2.0]).unwrap() < 1.25);
    assert!((geometric_mean(&[1.7; 9]).unwrap() - 1.7).abs() < 1e-14);
    assert!(matches!(geometric_mean(&[1.0, 0.0]), Err(MetricsError::NonPositiveEfficiency(_))));
}

fn eff(x: f64) -> ItemEfficiency {
    ItemEfficiency { item_id: ItemId(1), block: 1, position: 1, re_d: x, re_cc: x * 1.1, re_a: x * 0.9 }
}

proptest! {
    #[test]
    fn error_matrix_is_psd(seed in any::<u64>(), s in 1usize..50, spread in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let est = series(&mut rng, s, spread);
        let q = error_matrix(&est, &TRUTH).0;
        prop_assert!(q.symmetric_eigen().eigenvalues.min() >= -1e-12);
    }

    #[test]
    fn re_d_ignores_a_common_scale(seed in any::<u64>(), k in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (opt, rnd) = (series(&mut rng, 30, 0.2), series(&mut rng, 30, 0.3));
        let scale = |xs: &[ItemParams]| -> Vec<ItemParams> {
            xs.iter().map(|e| ItemParams {
                a: TRUTH.a + k * (e.a - TRUTH.a),
                b: TRUTH.b + k * (e.b - TRUTH.b),
                c: TRUTH.c + k * (e.c - TRUTH.c),
            }).collect()
        };
        let d = |xs: &[ItemParams]| emp_d_criterion(&error_matrix(xs, &TRUTH));
        let base = (d(&rnd) / d(&opt)).cbrt();
        let scaled = (d(&scale(&rnd)) / d(&scale(&opt))).cbrt();
        prop_assert!((base - scaled).abs() <= 1e-9 * base);
    }

    #[test]
    fn overall_summary_splits_multiplicatively(xs in prop::collection::vec(0.2f64..5.0, 2..40), cut in 1usize..39) {
        let items: Vec<ItemEfficiency> = xs.iter().map(|&x| eff(x)).collect();
        let cut = cut.min(items.len() - 1);
        let total = overall_summary(&items).unwrap().re_d;
        let (g1, g2) = (overall_summary(&items[..cut]).unwrap().re_d, overall_summary(&items[cut..]).unwrap().re_d);
        let n = items.len() as f64;
        let combined = (cut as f64 / n * g1.ln() + (n - cut as f64) / n * g2.ln()).exp();
        prop_assert!((combined - total).abs() <= 1e-12 * total);
        let mut rev = items.clone();
        rev.reverse();
        prop_assert!((overall_summary(&rev).unwrap().re_d - total).abs() <= 1e-12 * total);
    }
}

fn item_series(rng: &mut ChaCha8Rng, s: usize, opt_spread: f64, rnd_spread: f64) -> ItemSeries {
    ItemSeries {
        item_id: ItemId(1),
        block: 1,
        position: 1,
        truth: TRUTH,
        optimal: series(rng, s, opt_spread).into_iter().map(Some).collect(),
        random: series(rng, s, rnd_spread).into_iter().map(Some).collect(),
    }
}

#[test]
fn pairwise_exclusion_drops_both_arms() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut s = item_series(&mut rng, 10, 0.2, 0.3);
    s.optimal[2] = None;
    s.random[5] = None;
    let (o, r) = s.paired();
    assert_eq!((o.len(), r.len(), s.excluded()), (8, 8, 2));
}

#[test]
fn identical_arms_give_unit_efficiencies() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut s = item_series(&mut rng, 20, 0.2, 0.3);
    s.random = s.optimal.clone();
    let e = s.efficiency(&[-1.0, 0.0, 1.0]).unwrap();
    assert_eq!((e.re_d, e.re_cc, e.re_a), (1.0, 1.0, 1.0));
}

#[test]
fn bootstrap_interval_brackets_a_clear_advantage() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let all: Vec<ItemSeries> = (0..10).map(|_| item_series(&mut rng, 200, 0.2, 0.3)).collect();
    let (lo, hi) = bootstrap_overall_re_d(&all, 500, 0.95, 1).unwrap();
    let thetas = [0.0];
    let effs: Vec<ItemEfficiency> = all.iter().map(|s| s.efficiency(&thetas).unwrap()).collect();
    let point = overall_summary(&effs).unwrap().re_d;
    assert!(lo < point && point < hi, "{lo} {point} {hi}");
    assert!(lo > 1.0);
    assert_eq!((lo, hi), bootstrap_overall_re_d(&all, 500, 0.95, 1).unwrap());
}
