//! Runs design, simulate and report in sequence, as the binary would.
//!
//! Usage: cargo run --release --example cli_pipeline [-- <out-dir>]

use std::path::PathBuf;

use calib_opt::commands::{cmd_design, cmd_report, cmd_simulate, exit_code, DesignArgs, ReportArgs, SimulateArgs};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "pipeline-out".into()));
    std::fs::create_dir_all(&root)?;
    let config = root.join("config.json");
    std::fs::write(&config, r#"{"case": "III", "N": 1000, "S": 20, "seed": 7}"#)?;

    let design = cmd_design(&DesignArgs { config: Some(config.clone()), out: root.join("design"), ..Default::default() });
    println!("design: exit {}", exit_code(&design));
    let sim = root.join("simulate");
    let simulate = cmd_simulate(&SimulateArgs { config: Some(config), out: sim.clone(), ..Default::default() });
    println!("simulate: exit {}", exit_code(&simulate));
    let report = cmd_report(&ReportArgs { results: sim.join("estimates.csv"), out: root.join("report"), ..Default::default() });
    println!("report: exit {}", exit_code(&report));
    for path in report?.written {
        println!("  {}", path.display());
    }
    print!("{}", std::fs::read_to_string(root.join("report").join("overall.csv"))?);
    Ok(())
}
