use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use calib_opt::commands::{cmd_design, cmd_report, cmd_simulate, exit_code, DesignArgs, ReportArgs, SimulateArgs};

#[derive(Parser)]
#[command(name = "calib-opt", version, about = "Optimal allocation of calibration items to examinees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Calibration item bank (item_id,a,b,c); the bundled bank when omitted
    #[arg(long)]
    bank: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Master seed, overriding the config
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize every block and write allocation rules
    Design {
        #[command(flatten)]
        common: Common,
        /// Number of blocks, overriding the config
        #[arg(long)]
        blocks: Option<usize>,
    },
    /// Run one simulation case
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Efficiency tables and figures from a simulate output directory
    Report {
        #[command(flatten)]
        common: Common,
        /// estimates.csv written by simulate
        #[arg(long)]
        results: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Design { common, .. } | Command::Simulate { common } | Command::Report { common, .. } => common,
    };
    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Design { common, blocks } => cmd_design(&DesignArgs {
            config: common.config.clone(),
            bank: common.bank.clone(),
            blocks: *blocks,
            out: common.out.clone(),
        }),
        Command::Simulate { common } => cmd_simulate(&SimulateArgs {
            config: common.config.clone(),
            bank: common.bank.clone(),
            seed: common.seed,
            out: common.out.clone(),
        }),
        Command::Report { common, results } => cmd_report(&ReportArgs {
            results: results.clone(),
            bank: common.bank.clone(),
            seed: common.seed,
            out: common.out.clone(),
        }),
    };
    match &result {
        Ok(o) => o.warnings.iter().for_each(|w| eprintln!("warning: {w}")),
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
