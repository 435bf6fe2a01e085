//! Optimizes one four-item block and prints its routing intervals.
//!
//! Usage: cargo run --release --example design_block

use calib_opt::blocks::Block;
use calib_opt::design::{extract_intervals, optimize_block, random_design, theoretical_efficiency_per_block, ExchangeOptions};
use calib_opt::grid::AbilityGrid;
use calib_opt::irt::ItemParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = [
        ItemParams::new(0.862, -1.063, 0.203)?,
        ItemParams::new(1.320, -0.549, 0.195)?,
        ItemParams::new(1.220, -0.067, 0.155)?,
        ItemParams::new(2.173, 0.454, 0.107)?,
    ];
    let block = Block::from_params(&params)?;
    let grid = AbilityGrid::default();
    let opt = optimize_block(&block, &grid, &ExchangeOptions::default())?;
    let eff = theoretical_efficiency_per_block(&opt.design, &random_design(&block, &grid), &block)?;
    println!(
        "criterion {:.6}  gap {:.2e}  iterations {}  D-efficiency vs random {:.4}",
        opt.summary.criterion, opt.summary.equivalence_gap, opt.summary.iterations, eff
    );
    for item in extract_intervals(&opt.design, &block, 1).items {
        let ivs: Vec<String> = item.intervals.iter().map(|iv| format!("[{:.3}, {:.3}]", iv.lo, iv.hi)).collect();
        println!("item {}: {}", item.item_id.0, ivs.join(" "));
    }
    Ok(())
}
