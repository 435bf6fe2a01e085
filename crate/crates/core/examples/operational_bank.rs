//! Regenerates the bundled synthetic operational bank.
//!
//! Usage: cargo run --example operational_bank [-- <out.csv>]

use calib_opt::io::bank_csv;
use calib_opt::sim::{synthetic_operational_bank, OPERATIONAL_BANK_SEED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bank = synthetic_operational_bank(40, 41, OPERATIONAL_BANK_SEED);
    let bytes = bank_csv(&bank)?;
    match std::env::args().nth(1) {
        Some(path) => std::fs::write(path, bytes)?,
        None => print!("{}", String::from_utf8(bytes)?),
    }
    Ok(())
}
