//! Fits one item with abilities held fixed, by maximum likelihood and by
//! the small-sample posterior mode.
//!
//! Usage: cargo run --release --example fit_item [-- <examinees>]

use calib_opt::estimation::{fit_item_fixed_theta, map_preestimate, FitOptions, Priors};
use calib_opt::irt::{prob_3pl, ItemParams};
use calib_opt::responses::Response;
use calib_opt::sim::{simulate_abilities, stream_rng, Stream};
use rand::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(200);
    let truth = ItemParams::new(0.862, -1.063, 0.203)?;
    let thetas = simulate_abilities(n, &mut stream_rng(3, Stream::Cohort, 0));
    let mut rng = stream_rng(3, Stream::Responses, 0);
    let responses: Vec<Response> =
        thetas.iter().map(|&t| Response::from_outcome(rng.gen::<f64>() < prob_3pl(t, &truth))).collect();

    let opts = FitOptions::default();
    let ml = fit_item_fixed_theta(&thetas, &responses, &opts)?;
    let map = map_preestimate(&thetas, &responses, &Priors::default(), &opts)?;
    println!("truth {truth:?}");
    for (name, fit) in [("ML ", ml), ("MAP", map)] {
        let e = fit.estimate;
        println!(
            "{name} a {:.3} b {:.3} c {:.3}  {:?}  on bound: {}  iterations {}",
            e.a, e.b, e.c, fit.status, fit.at_bound, fit.iterations
        );
    }
    Ok(())
}
