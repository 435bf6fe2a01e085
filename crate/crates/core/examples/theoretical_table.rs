//! Design-based efficiencies of every item in the bundled calibration bank.
//!
//! Usage: cargo run --release --example theoretical_table [-- <blocks>]

use calib_opt::io::{bundled_calibration_bank, bundled_operational_bank};
use calib_opt::metrics::overall_summary;
use calib_opt::sim::{run_case, Case, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let blocks = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(10);
    let cfg = SimConfig { case: Case::I, blocks, ..SimConfig::default() };
    let run = run_case(&cfg, &bundled_operational_bank(), &bundled_calibration_bank())?;
    println!("block pos item   RE_D  RE_CC   RE_A");
    for e in run.theoretical() {
        println!("{:5} {:3} {:4} {:6.3} {:6.3} {:6.3}", e.block, e.position, e.item_id.0, e.re_d, e.re_cc, e.re_a);
    }
    let s = overall_summary(&run.theoretical())?;
    println!("geometric means: RE_D {:.3}  RE_CC {:.3}  RE_A {:.3}", s.re_d, s.re_cc, s.re_a);
    Ok(())
}
