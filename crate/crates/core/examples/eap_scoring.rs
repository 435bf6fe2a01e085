//! Scores simulated examinees by EAP and maps the scores to normal scores.
//!
//! Usage: cargo run --release --example eap_scoring

use calib_opt::estimation::{percentile_transform, EapScorer};
use calib_opt::grid::AbilityGrid;
use calib_opt::io::bundled_operational_bank;
use calib_opt::sim::{generate_responses, simulate_abilities, stream_rng, Stream};

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (mean, xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n)
}

fn main() {
    let bank = bundled_operational_bank();
    let thetas = simulate_abilities(5000, &mut stream_rng(1, Stream::Cohort, 0));
    let responses = generate_responses(&thetas, &bank, &mut stream_rng(1, Stream::Responses, 0));
    let scorer = EapScorer::new(&bank.params(), &AbilityGrid::default());
    let raw: Vec<f64> = (0..thetas.len()).map(|j| scorer.score(responses.row(j))).collect();
    let normal = percentile_transform(&raw);

    let (m, v) = moments(&raw);
    println!("EAP scores:    mean {m:.3}  variance {v:.3}");
    let (m, v) = moments(&normal);
    println!("normal scores: mean {m:.3}  variance {v:.3}");
    for j in 0..5 {
        println!("theta {:6.3}  EAP {:6.3}  normal {:6.3}", thetas[j], raw[j], normal[j]);
    }
}
