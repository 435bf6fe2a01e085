//! The `design`, `simulate` and `report` commands behind the binary.
//!
//! Each command returns an [`Outcome`] or a [`CommandError`]; [`exit_code`]
//! maps them to 0 (success), 2 (input error) or 3 (finished with warnings).
//! All outputs except `timings.json` are deterministic functions of the
//! inputs and the seed.

use std::path::{Path, PathBuf};
use std::time::Instant;

use statrs::distribution::{Continuous, Normal};
use thiserror::Error;

use crate::blocks::{build_blocks, BankRole, BlockLayout, BlockSet, ItemBank};
use crate::design::{plan_blocks, AllocationRules, BlockPlan};
use crate::io::{self, FileDigest, IoError, ItemTableRow, OutputSet, OverallRow, RunManifest, StageTiming};
use crate::irt::prob_3pl;
use crate::metrics::{bootstrap_overall_re_d, item_efficiencies, overall_summary};
use crate::plot::{Chart, PALETTE};
use crate::sim::{estimate_series, run_case, theoretical_table, CaseRun, SimConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_WARNINGS: i32 = 3;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

fn input<E: std::fmt::Display>(e: E) -> CommandError {
    CommandError::Input(e.to_string())
}

/// Successful completion, possibly with warnings worth a nonzero exit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

pub fn exit_code(result: &Result<Outcome, CommandError>) -> i32 {
    match result {
        Ok(o) if o.warnings.is_empty() => EXIT_OK,
        Ok(_) => EXIT_WARNINGS,
        Err(_) => EXIT_INPUT,
    }
}

struct Stopwatch {
    start: Instant,
    stages: Vec<StageTiming>,
}

impl Stopwatch {
    fn new() -> Self {
        Stopwatch { start: Instant::now(), stages: Vec::new() }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.stages.push(StageTiming { stage: stage.into(), seconds: (now - self.start).as_secs_f64() });
        self.start = now;
    }
}

/// A bank file given on the command line or in the config, or a bundled one.
struct BankSource {
    bank: ItemBank,
    digest: FileDigest,
}

fn load_bank(path: Option<&Path>, role: BankRole) -> Result<BankSource, CommandError> {
    match path {
        Some(p) => {
            let text = io::read_text(p).map_err(input)?;
            let bank = io::parse_bank(text.as_bytes(), role).map_err(|e| input(format!("{}: {e}", p.display())))?;
            Ok(BankSource { bank, digest: FileDigest::of(p.display().to_string(), text.as_bytes()) })
        }
        None => {
            let (name, text) = match role {
                BankRole::Calibration => ("bundled:calibration_true.csv", io::BUNDLED_CALIBRATION),
                BankRole::Operational => ("bundled:operational_synthetic.csv", io::BUNDLED_OPERATIONAL),
            };
            let bank = io::parse_bank(text.as_bytes(), role).map_err(input)?;
            Ok(BankSource { bank, digest: FileDigest::of(name, text.as_bytes()) })
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<(SimConfig, Option<FileDigest>), CommandError> {
    match path {
        Some(p) => {
            let text = io::read_text(p).map_err(input)?;
            let cfg = SimConfig::from_json(&text).map_err(|e| input(format!("{}: {e}", p.display())))?;
            Ok((cfg, Some(FileDigest::of(p.display().to_string(), text.as_bytes()))))
        }
        None => Ok((SimConfig::default(), None)),
    }
}

/// Relative bank paths in a config file are taken from the file's directory.
fn resolve(config_path: Option<&Path>, p: &Option<PathBuf>) -> Option<PathBuf> {
    let p = p.as_ref()?;
    match config_path.and_then(Path::parent) {
        Some(dir) if p.is_relative() => Some(dir.join(p)),
        _ => Some(p.clone()),
    }
}

#[derive(serde::Serialize)]
struct DesignSummaryRow {
    block_id: usize,
    items: usize,
    criterion: f64,
    equivalence_gap: f64,
    iterations: usize,
    converged: bool,
    block_efficiency: f64,
}

fn design_summary_csv(plans: &[BlockPlan]) -> Result<Vec<u8>, CommandError> {
    let rows: Vec<DesignSummaryRow> = plans
        .iter()
        .map(|p| DesignSummaryRow {
            block_id: p.block_id,
            items: p.rules.items.len(),
            criterion: p.optimum.summary.criterion,
            equivalence_gap: p.optimum.summary.equivalence_gap,
            iterations: p.optimum.summary.iterations,
            converged: p.optimum.summary.converged,
            block_efficiency: p.block_efficiency,
        })
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(IoError::from)?;
    }
    w.into_inner().map_err(|e| input(e.to_string()))
}

fn design_warnings(plans: &[BlockPlan]) -> Vec<String> {
    plans
        .iter()
        .filter(|p| !p.optimum.summary.converged)
        .map(|p| {
            format!(
                "block {} stopped after {} iterations with equivalence gap {:e}",
                p.block_id, p.optimum.summary.iterations, p.optimum.summary.equivalence_gap
            )
        })
        .collect()
}

fn finish(
    mut out: OutputSet,
    command: &str,
    seed: Option<u64>,
    config: serde_json::Value,
    inputs: Vec<FileDigest>,
    mut watch: Stopwatch,
    warnings: Vec<String>,
) -> Result<Outcome, CommandError> {
    watch.lap("write");
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        master_seed: seed,
        config,
        inputs,
        outputs: out.digests().to_vec(),
    };
    out.write("manifest.json", &io::json_bytes(&manifest)?)?;
    // kept out of the manifest so reruns stay byte-identical
    io::write_bytes(&out.dir().join("timings.json"), &io::json_bytes(&watch.stages)?)?;
    let written = out.digests().iter().map(|d| out.dir().join(&d.name)).collect();
    Ok(Outcome { written, warnings })
}

#[derive(Debug, Clone, Default)]
pub struct DesignArgs {
    pub config: Option<PathBuf>,
    pub bank: Option<PathBuf>,
    /// Overrides the config's block count.
    pub blocks: Option<usize>,
    pub out: PathBuf,
}

/// Builds blocks, optimizes every block and writes the rules with their
/// diagnostics. Non-converged blocks still get rules but end with exit 3.
pub fn cmd_design(args: &DesignArgs) -> Result<Outcome, CommandError> {
    let mut watch = Stopwatch::new();
    let (mut cfg, cfg_digest) = load_config(args.config.as_deref())?;
    if let Some(l) = args.blocks {
        cfg.blocks = l;
    }
    let bank_path = args.bank.clone().or_else(|| resolve(args.config.as_deref(), &cfg.calibration_bank));
    let bank = load_bank(bank_path.as_deref(), BankRole::Calibration)?;
    cfg.validate(bank.bank.len()).map_err(input)?;
    let grid = crate::grid::AbilityGrid::new(cfg.grid).map_err(input)?;
    let blocks = build_blocks(&bank.bank, cfg.blocks).map_err(input)?;
    watch.lap("load");
    let plans = plan_blocks(&blocks, &grid, &cfg.exchange).map_err(input)?;
    watch.lap("optimize");

    let mut out = OutputSet::create(&args.out)?;
    let rules: Vec<AllocationRules> = plans.iter().map(|p| p.rules.clone()).collect();
    out.write("rules.json", &io::json_bytes(&rules)?)?;
    out.write("blocks.json", &io::json_bytes(&blocks.layout())?)?;
    out.write("design_summary.csv", &design_summary_csv(&plans)?)?;
    out.write("theoretical.csv", &io::efficiencies_csv(&theoretical_table(&blocks, &plans))?)?;
    let echo = serde_json::json!({
        "blocks": cfg.blocks,
        "grid": cfg.grid,
        "exchange": cfg.exchange,
    });
    let inputs = cfg_digest.into_iter().chain([bank.digest]).collect();
    finish(out, "design", None, echo, inputs, watch, design_warnings(&plans))
}

#[derive(Debug, Clone, Default)]
pub struct SimulateArgs {
    pub config: Option<PathBuf>,
    /// Overrides the config's calibration bank.
    pub bank: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

/// Runs one case and writes its estimates, cohort, rules and manifest.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<Outcome, CommandError> {
    let mut watch = Stopwatch::new();
    let (mut cfg, cfg_digest) = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let cal_path = args.bank.clone().or_else(|| resolve(args.config.as_deref(), &cfg.calibration_bank));
    let op_path = resolve(args.config.as_deref(), &cfg.operational_bank);
    let cal = load_bank(cal_path.as_deref(), BankRole::Calibration)?;
    let op = load_bank(op_path.as_deref(), BankRole::Operational)?;
    watch.lap("load");
    let run = run_case(&cfg, &op.bank, &cal.bank).map_err(input)?;
    watch.lap("simulate");

    let mut out = OutputSet::create(&args.out)?;
    write_run(&mut out, &run)?;
    let inputs = cfg_digest.into_iter().chain([cal.digest, op.digest]).collect();
    let echo = serde_json::to_value(&cfg).map_err(IoError::from)?;
    finish(out, "simulate", Some(cfg.seed), echo, inputs, watch, design_warnings(&run.plans))
}

fn write_run(out: &mut OutputSet, run: &CaseRun) -> Result<(), CommandError> {
    out.write("estimates.csv", &io::estimates_csv(&io::estimate_rows(&run.replicates))?)?;
    out.write("abilities.csv", &io::abilities_csv(&run.cohort)?)?;
    out.write("rules.json", &io::json_bytes(&run.rules())?)?;
    out.write("blocks.json", &io::json_bytes(&run.blocks.layout())?)?;
    out.write("design_summary.csv", &design_summary_csv(&run.plans)?)?;
    out.write("theoretical.csv", &io::efficiencies_csv(&run.theoretical())?)?;
    if let Some(est) = &run.first_abilities {
        out.write("ability_estimates.csv", &io::ability_estimates_csv(est)?)?;
    }
    if let Some(pre) = &run.pre_estimation {
        out.write("pre_estimates.csv", &io::bank_csv(&pre.bank)?)?;
        out.write("block_changes.json", &io::json_bytes(&pre.block_changes)?)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct ReportArgs {
    /// `estimates.csv` written by `simulate`; its sibling files are read too.
    pub results: PathBuf,
    /// True calibration bank; the bundled one when absent.
    pub bank: Option<PathBuf>,
    /// Seed of the bootstrap interval.
    pub seed: Option<u64>,
    pub out: PathBuf,
}

const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Computes the efficiency tables and draws the figures.
pub fn cmd_report(args: &ReportArgs) -> Result<Outcome, CommandError> {
    let mut watch = Stopwatch::new();
    let dir = args.results.parent().unwrap_or(Path::new(".")).to_path_buf();
    let sibling = |name: &str| dir.join(name);
    let truth = load_bank(args.bank.as_deref(), BankRole::Calibration)?;
    let rows = io::read_estimates(&args.results).map_err(input)?;
    let layout: BlockLayout = io::read_json(&sibling("blocks.json")).map_err(input)?;
    let blocks = BlockSet::from_layout(&layout, &truth.bank).map_err(input)?;
    let rules: Vec<AllocationRules> = io::read_json(&sibling("rules.json")).map_err(input)?;
    for r in &rows {
        if truth.bank.get(r.item_id).is_none() {
            return Err(input(format!("estimate for item {} not in the truth bank", r.item_id)));
        }
    }
    let seed = args.seed.unwrap_or(0);
    let mut inputs = vec![truth.digest.clone()];
    inputs.push(FileDigest::of(args.results.display().to_string(), &std::fs::read(&args.results).map_err(input)?));
    watch.lap("load");

    let (efficiencies, excluded, label, interval) = if rows.is_empty() {
        let eff = io::read_efficiencies(&sibling("theoretical.csv")).map_err(input)?;
        let n = eff.len();
        (eff, vec![0; n], "theoretical", None)
    } else {
        let cohort = io::read_abilities(&sibling("abilities.csv")).map_err(input)?;
        let replicates = io::replicates_from_rows(&rows);
        let series = estimate_series(&truth.bank, &blocks, &replicates);
        let eff = item_efficiencies(&series, &cohort).map_err(input)?;
        let ci = bootstrap_overall_re_d(&series, BOOTSTRAP_RESAMPLES, 0.95, seed).map_err(input)?;
        (eff, series.iter().map(|s| s.excluded()).collect(), "simulated", Some(ci))
    };
    let overall = overall_summary(&efficiencies).map_err(input)?;
    watch.lap("metrics");

    let mut out = OutputSet::create(&args.out)?;
    let table: Vec<ItemTableRow> = efficiencies
        .iter()
        .zip(&excluded)
        .map(|(e, &x)| {
            let p = truth.bank.get(e.item_id).expect("checked above").params;
            ItemTableRow {
                block: e.block,
                position: e.position,
                re_d: e.re_d,
                re_cc: e.re_cc,
                re_a: e.re_a,
                a: p.a,
                b: p.b,
                c: p.c,
                item: e.item_id,
                excluded: x,
            }
        })
        .collect();
    out.write("item_table.csv", &io::item_table_csv(&table)?)?;
    let mut row = OverallRow::new(label, &overall);
    if let Some((lo, hi)) = interval {
        row.re_d_lo = Some(lo);
        row.re_d_hi = Some(hi);
    }
    out.write("overall.csv", &io::overall_csv(&[row])?)?;

    let (icc_svg, icc_csv) = icc_figure(&blocks, 0);
    out.write("icc.svg", icc_svg.as_bytes())?;
    out.write("icc.csv", icc_csv.as_bytes())?;
    let (iv_svg, iv_csv) = interval_figure(&rules, 0);
    out.write("intervals.svg", iv_svg.as_bytes())?;
    out.write("intervals.csv", iv_csv.as_bytes())?;
    let est_path = sibling("ability_estimates.csv");
    let (abilities, what) = if est_path.exists() {
        let rows: Vec<crate::estimation::AbilityEstimate> = csv::Reader::from_path(&est_path)
            .map_err(IoError::from)?
            .deserialize()
            .collect::<Result<_, _>>()
            .map_err(IoError::from)?;
        (rows.iter().map(|r| r.raw).collect(), "EAP ability estimate")
    } else {
        (io::read_abilities(&sibling("abilities.csv")).unwrap_or_default(), "true ability")
    };
    if !abilities.is_empty() {
        let (h_svg, h_csv) = ability_figure(&abilities, what);
        out.write("abilities.svg", h_svg.as_bytes())?;
        out.write("abilities_hist.csv", h_csv.as_bytes())?;
    }
    let (s_svg, s_csv) = scatter_figure(&table);
    out.write("re_d_scatter.svg", s_svg.as_bytes())?;
    out.write("re_d_scatter.csv", s_csv.as_bytes())?;
    let echo = serde_json::json!({ "results": args.results, "bootstrap_resamples": BOOTSTRAP_RESAMPLES });
    finish(out, "report", Some(seed), echo, inputs, watch, Vec::new())
}

/// Item characteristic curves of one block.
pub fn icc_figure(blocks: &BlockSet, block: usize) -> (String, String) {
    let mut chart = Chart::new(
        &format!("Item characteristic curves, block {}", block + 1),
        "ability",
        "probability of a correct response",
        (-4.0, 4.0),
        (0.0, 1.0),
    );
    let mut csv = String::from("item_id,theta,p\n");
    for (k, item) in blocks.blocks()[block].items().iter().enumerate() {
        let pts: Vec<(f64, f64)> = (0..=160)
            .map(|i| {
                let t = -4.0 + 0.05 * i as f64;
                (t, prob_3pl(t, &item.params))
            })
            .collect();
        for (t, p) in &pts {
            csv.push_str(&format!("{},{t},{p}\n", item.id));
        }
        let color = PALETTE[k % PALETTE.len()];
        chart.polyline(&pts, color, false);
        chart.legend(&format!("item {}", item.id), color);
    }
    (chart.render(), csv)
}

/// Allocation intervals of one block drawn under the standard normal density.
/// The sidecar lists the intervals of every block.
pub fn interval_figure(rules: &[AllocationRules], block: usize) -> (String, String) {
    let phi = Normal::new(0.0, 1.0).expect("unit normal");
    let mut chart = Chart::new(
        &format!("Ability intervals, block {}", block + 1),
        "ability",
        "density",
        (-4.0, 4.0),
        (0.0, 0.42),
    );
    let mut csv = String::from("block_id,item_id,lo,hi\n");
    for r in rules {
        for it in &r.items {
            for iv in &it.intervals {
                csv.push_str(&format!("{},{},{},{}\n", r.block_id, it.item_id, iv.lo, iv.hi));
            }
        }
    }
    if let Some(r) = rules.get(block) {
        for (k, it) in r.items.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            for iv in &it.intervals {
                let (lo, hi) = (iv.lo.max(-4.0), iv.hi.min(4.0));
                let steps = 40;
                let mut band = vec![(lo, 0.0)];
                band.extend((0..=steps).map(|i| {
                    let t = lo + (hi - lo) * i as f64 / steps as f64;
                    (t, phi.pdf(t))
                }));
                band.push((hi, 0.0));
                for w in band.windows(2) {
                    chart.rect(w[0].0, w[1].0, 0.0, w[0].1.max(w[1].1), color, 0.55);
                }
            }
            chart.legend(&format!("item {}", it.item_id), color);
        }
    }
    let curve: Vec<(f64, f64)> = (0..=160).map(|i| -4.0 + 0.05 * i as f64).map(|t| (t, phi.pdf(t))).collect();
    chart.polyline(&curve, "#222", false);
    (chart.render(), csv)
}

/// Histogram of abilities on the density scale with the standard normal overlaid.
pub fn ability_figure(abilities: &[f64], what: &str) -> (String, String) {
    let phi = Normal::new(0.0, 1.0).expect("unit normal");
    let (lo, hi, bins) = (-4.0, 4.0, 40);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &t in abilities {
        let k = ((t - lo) / width).floor();
        if k >= 0.0 && (k as usize) < bins {
            counts[k as usize] += 1;
        }
    }
    let dens: Vec<f64> = counts.iter().map(|&c| c as f64 / (abilities.len() as f64 * width)).collect();
    let top = dens.iter().copied().fold(0.42, f64::max) * 1.05;
    let mut chart = Chart::new(&format!("Distribution of {what}s"), what, "density", (lo, hi), (0.0, top));
    let mut csv = String::from("bin_lo,bin_hi,density\n");
    for (k, d) in dens.iter().enumerate() {
        let a = lo + width * k as f64;
        chart.rect(a, a + width, 0.0, *d, PALETTE[0], 0.6);
        csv.push_str(&format!("{a},{},{d}\n", a + width));
    }
    let curve: Vec<(f64, f64)> = (0..=160).map(|i| lo + 0.05 * i as f64).map(|t| (t, phi.pdf(t))).collect();
    chart.polyline(&curve, PALETTE[1], false);
    chart.legend(what, PALETTE[0]);
    chart.legend("N(0,1) density", PALETTE[1]);
    (chart.render(), csv)
}

/// RE_D against difficulty, one colour per block position.
pub fn scatter_figure(table: &[ItemTableRow]) -> (String, String) {
    let (bmin, bmax) = table.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), r| (l.min(r.b), h.max(r.b)));
    let (rmin, rmax) =
        table.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), r| (l.min(r.re_d), h.max(r.re_d)));
    let pad = |l: f64, h: f64| {
        let p = 0.05 * (h - l).max(0.1);
        (l - p, h + p)
    };
    let (rl, rh) = pad(rmin.min(1.0), rmax.max(1.0));
    let mut chart = Chart::new("Relative D-efficiency by block position", "difficulty b", "RE_D", pad(bmin, bmax), (rl, rh));
    chart.hline(1.0, "#888");
    let mut csv = String::from("item_id,position,a,b,c,re_d\n");
    let positions = table.iter().map(|r| r.position).max().unwrap_or(0);
    for pos in 1..=positions {
        let color = PALETTE[(pos - 1) % PALETTE.len()];
        let pts: Vec<(f64, f64)> = table.iter().filter(|r| r.position == pos).map(|r| (r.b, r.re_d)).collect();
        chart.markers(&pts, color);
        chart.legend(&format!("position {pos}"), color);
    }
    for r in table {
        csv.push_str(&format!("{},{},{},{},{},{}\n", r.item, r.position, r.a, r.b, r.c, r.re_d));
    }
    (chart.render(), csv)
}
