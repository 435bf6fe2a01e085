mod common;

use calib_opt::estimation::{
    eap_ability, fit_item_fixed_theta, item_log_likelihood, map_preestimate, percentile_transform, EapScorer,
    FitOptions, FitStatus, Priors,
};
use calib_opt::grid::AbilityGrid;
use calib_opt::io::bundled_calibration_bank;
use calib_opt::irt::ItemParams;
use calib_opt::responses::Response;
use common::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

fn draw(rng: &mut ChaCha8Rng, theta: f64, item: (f64, f64, f64)) -> bool {
    rng.gen::<f64>() < p3(theta, item)
}

fn normal_thetas(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn responses_for(thetas: &[f64], item: (f64, f64, f64), rng: &mut ChaCha8Rng) -> Vec<Response> {
    thetas.iter().map(|&t| Response::from_outcome(draw(rng, t, item))).collect()
}

fn tuple(p: &ItemParams) -> (f64, f64, f64) {
    (p.a, p.b, p.c)
}

/// Posterior mean on a 10001-point grid over [-6, 6] with the exact normal prior.
fn oracle_eap(pattern: &[bool], items: &[(f64, f64, f64)]) -> f64 {
    let n = 10_001;
    let (mut num, mut den) = (0.0, 0.0);
    let logs: Vec<f64> = (0..n)
        .map(|k| {
            let t = -6.0 + 12.0 * k as f64 / (n - 1) as f64;
            let mut l = -0.5 * t * t;
            for (&y, &it) in pattern.iter().zip(items) {
                let p = p3(t, it);
                l += if y { p.ln() } else { (1.0 - p).ln() };
            }
            l
        })
        .collect();
    let peak = logs.iter().cloned().fold(f64::MIN, f64::max);
    for (k, l) in logs.iter().enumerate() {
        let t = -6.0 + 12.0 * k as f64 / (n - 1) as f64;
        let w = (l - peak).exp();
        num += w * t;
        den += w;
    }
    num / den
}

#[test]
fn all_missing_gives_the_prior_mean() {
    let items = example_params();
    let e = eap_ability(&[Response::NotAdministered; 4], &items, &AbilityGrid::default());
    assert!(e.abs() <= 1e-10, "{e}");
}

#[test]
fn single_item_correct_and_incorrect_mirror() {
    let items = [ItemParams::new(1.0, 0.0, 0.0).unwrap()];
    let grid = AbilityGrid::default();
    let up = eap_ability(&[Response::Correct], &items, &grid);
    let down = eap_ability(&[Response::Incorrect], &items, &grid);
    assert!(up > 0.0 && up < 1.0, "{up}");
    assert!((up + down).abs() < 1e-12);
}

#[test]
fn eap_tracks_the_fine_quadrature_posterior_mean() {
    let bank = bundled_calibration_bank();
    let items: Vec<ItemParams> = bank.params();
    let tuples: Vec<(f64, f64, f64)> = items.iter().map(tuple).collect();
    let scorer = EapScorer::new(&items, &AbilityGrid::default());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut lib, mut oracle) = (0.0, 0.0);
    let reps = 1000;
    for _ in 0..reps {
        let pattern: Vec<bool> = tuples.iter().map(|&it| draw(&mut rng, 1.0, it)).collect();
        let resp: Vec<Response> = pattern.iter().map(|&y| Response::from_outcome(y)).collect();
        let e = scorer.score(&resp);
        assert!(e.abs() <= 4.0);
        lib += e;
        oracle += oracle_eap(&pattern, &tuples);
    }
    let (lib, oracle) = (lib / reps as f64, oracle / reps as f64);
    assert!((lib - oracle).abs() <= 0.05, "{lib} vs {oracle}");
}

#[test]
fn percentile_three_points() {
    let z = percentile_transform(&[-5.0, 0.2, 7.0]);
    for (g, w) in z.iter().zip([-0.967, 0.0, 0.967]) {
        assert!((g - w).abs() <= 1e-3, "{z:?}");
    }
}

#[test]
fn percentile_of_a_constant_is_zero() {
    assert!(percentile_transform(&[3.3; 7]).iter().all(|&z| z.abs() < 1e-12));
}

#[test]
fn percentile_restores_normal_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let exp = Exp::new(1.0).unwrap();
    let raw: Vec<f64> = (0..10_000).map(|_| exp.sample(&mut rng)).collect();
    let z = percentile_transform(&raw);
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let var = z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() <= 0.03 && (var - 1.0).abs() <= 0.05, "mean {mean} var {var}");
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&i, &j| raw[i].total_cmp(&raw[j]));
    assert!(order.windows(2).all(|w| z[w[0]] <= z[w[1]]));
}

#[test]
fn percentile_is_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let raw: Vec<f64> = (0..2000).map(|_| (rng.gen::<f64>() * 20.0).round() / 4.0).collect();
    let once = percentile_transform(&raw);
    let twice = percentile_transform(&once);
    assert!(once.iter().zip(&twice).all(|(a, b)| (a - b).abs() <= 1e-9));
}

#[test]
fn method_a_is_consistent() {
    let truth = (1.320, -0.549, 0.195);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let thetas = normal_thetas(100_000, &mut rng);
    let resp = responses_for(&thetas, truth, &mut rng);
    let fit = fit_item_fixed_theta(&thetas, &resp, &FitOptions::default()).unwrap();
    assert_eq!(fit.status, FitStatus::Converged);
    let e = fit.estimate;
    assert!((e.a - truth.0).abs() <= 0.05 && (e.b - truth.1).abs() <= 0.05 && (e.c - truth.2).abs() <= 0.05, "{e:?}");
    let at_truth = item_log_likelihood(&ItemParams::new(truth.0, truth.1, truth.2).unwrap(), &thetas, &resp).unwrap();
    assert!(fit.log_likelihood >= at_truth);
}

#[test]
fn all_correct_is_degenerate() {
    let thetas = vec![0.0, 0.5, -1.0, 2.0];
    let fit = fit_item_fixed_theta(&thetas, &[Response::Correct; 4], &FitOptions::default()).unwrap();
    assert_eq!(fit.status, FitStatus::DegenerateData);
}

#[test]
fn method_a_ignores_examinee_order() {
    let truth = EXAMPLE[2];
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let thetas = normal_thetas(3000, &mut rng);
    let resp = responses_for(&thetas, truth, &mut rng);
    let mut idx: Vec<usize> = (0..thetas.len()).collect();
    idx.shuffle(&mut rng);
    let t2: Vec<f64> = idx.iter().map(|&i| thetas[i]).collect();
    let r2: Vec<Response> = idx.iter().map(|&i| resp[i]).collect();
    let opts = FitOptions::default();
    let (f1, f2) = (fit_item_fixed_theta(&thetas, &resp, &opts).unwrap(), fit_item_fixed_theta(&t2, &r2, &opts).unwrap());
    let (v1, v2) = (f1.estimate.to_vector(), f2.estimate.to_vector());
    assert!((v1 - v2).abs().max() <= 1e-6, "{v1} vs {v2}");
}

#[test]
fn map_without_data_is_the_prior_mode() {
    let fit = map_preestimate(&[], &[], &Priors::default(), &FitOptions::default()).unwrap();
    let e = fit.estimate;
    assert!((e.a - 1.0).abs() <= 1e-6 && e.b.abs() <= 1e-6 && (e.c - 0.2).abs() <= 1e-6, "{e:?}");
}

fn map_objective(p: &ItemParams, thetas: &[f64], resp: &[Response]) -> f64 {
    let mut v = 0.0;
    for (&t, r) in thetas.iter().zip(resp) {
        let prob = p3(t, tuple(p));
        match r {
            Response::Correct => v += prob.ln(),
            Response::Incorrect => v += (1.0 - prob).ln(),
            Response::NotAdministered => {}
        }
    }
    v - 0.5 * (p.a.ln() / 0.5).powi(2) - 0.5 * (p.b / 2.0).powi(2) + 4.0 * p.c.ln() + 16.0 * (1.0 - p.c).ln()
}

#[test]
fn map_is_stable_on_small_samples() {
    let truth = EXAMPLE[0];
    let opts = FitOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..20 {
        let thetas = normal_thetas(200, &mut rng);
        let resp = responses_for(&thetas, truth, &mut rng);
        let map = map_preestimate(&thetas, &resp, &Priors::default(), &opts).unwrap();
        let e = map.estimate;
        assert!(map.converged() && !map.at_bound, "{map:?}");
        assert!(e.a > opts.lower.a && e.a < opts.upper.a && e.b.abs() < 5.0 && e.c > 0.0 && e.c < 0.5);
        assert!(map_objective(&e, &thetas, &resp) >= map_objective(&opts.start, &thetas, &resp));
    }
}

#[test]
fn map_washes_out_to_ml() {
    let truth = EXAMPLE[0];
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let thetas = normal_thetas(100_000, &mut rng);
    let resp = responses_for(&thetas, truth, &mut rng);
    let opts = FitOptions::default();
    let ml = fit_item_fixed_theta(&thetas, &resp, &opts).unwrap().estimate.to_vector();
    let map = map_preestimate(&thetas, &resp, &Priors::default(), &opts).unwrap().estimate.to_vector();
    assert!((ml - map).abs().max() <= 0.05, "{ml} vs {map}");
}
