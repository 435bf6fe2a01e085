use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    allocate_optimal, allocate_random, generate_responses, simulate_abilities, stream_rng, Allocation, Case,
    AbilityScale, SimConfig, SimError, Stream,
};
use crate::blocks::{build_blocks, BlockSet, ItemBank, ItemId, Placement};
use crate::design::{plan_blocks, AllocationRules, BlockPlan};
use crate::estimation::{
    fit_item_fixed_theta, map_preestimate, percentile_transform, AbilityEstimate, EapScorer, EstimationError,
    FitStatus, ItemFit,
};
use crate::grid::AbilityGrid;
use crate::irt::ItemParams;
use crate::metrics::{ItemEfficiency, ItemSeries};
use crate::responses::{Response, ResponseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignArm {
    Optimal,
    Random,
}

/// Fit of one calibration item under one design in one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmFit {
    pub item_id: ItemId,
    pub arm: DesignArm,
    pub estimate: ItemParams,
    pub status: FitStatus,
    pub n_responses: usize,
    pub iterations: usize,
}

impl ArmFit {
    fn from_fit(item_id: ItemId, arm: DesignArm, fit: ItemFit) -> Self {
        ArmFit {
            item_id,
            arm,
            estimate: fit.estimate,
            status: fit.status,
            n_responses: fit.n_responses,
            iterations: fit.iterations,
        }
    }

    pub fn usable(&self) -> bool {
        self.status == FitStatus::Converged
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    /// Calibration bank order, optimal arm before random.
    pub fits: Vec<ArmFit>,
}

/// An item whose block or position differs between the truth-based and the
/// pre-estimate-based block sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockChange {
    pub item_id: ItemId,
    pub truth: Placement,
    pub estimated: Placement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreEstimation {
    pub fits: Vec<(ItemId, ItemFit)>,
    /// Calibration bank carrying the pre-estimates.
    pub bank: ItemBank,
    pub block_changes: Vec<BlockChange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub master_seed: u64,
    pub seed_scheme: String,
    pub case: Case,
    pub replicates: usize,
    pub examinees: usize,
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseRun {
    pub config: SimConfig,
    /// True calibration parameters.
    pub truth: ItemBank,
    /// Blocks with true parameters, in the composition the designs used.
    pub blocks: BlockSet,
    /// One plan per block, built from the parameters the case assumes.
    pub plans: Vec<BlockPlan>,
    pub pre_estimation: Option<PreEstimation>,
    /// True abilities of the examinee cohort; empty for case I.
    pub cohort: Vec<f64>,
    /// Ability estimates of replicate 0 in cases III and IV.
    pub first_abilities: Option<Vec<AbilityEstimate>>,
    pub replicates: Vec<ReplicateResult>,
    pub provenance: Provenance,
}

impl CaseRun {
    pub fn rules(&self) -> Vec<AllocationRules> {
        self.plans.iter().map(|p| p.rules.clone()).collect()
    }

    /// Design-based efficiencies of the optimal over the random design.
    pub fn theoretical(&self) -> Vec<ItemEfficiency> {
        theoretical_table(&self.blocks, &self.plans)
    }

    /// Per-item estimate series over replicates. Unusable fits become `None`.
    pub fn series(&self) -> Vec<ItemSeries> {
        estimate_series(&self.truth, &self.blocks, &self.replicates)
    }
}

/// Per-item theoretical efficiencies, in block then position order.
pub fn theoretical_table(blocks: &BlockSet, plans: &[BlockPlan]) -> Vec<ItemEfficiency> {
    let mut out = Vec::new();
    for (plan, block) in plans.iter().zip(blocks.blocks()) {
        for (k, (item, e)) in block.items().iter().zip(&plan.theoretical).enumerate() {
            out.push(ItemEfficiency {
                item_id: item.id,
                block: plan.block_id,
                position: k + 1,
                re_d: e.re_d,
                re_cc: e.re_cc,
                re_a: e.re_a,
            });
        }
    }
    out
}

/// Groups replicate fits into one series per item of `truth`, in bank order.
/// Fits that did not converge become `None`.
pub fn estimate_series(truth: &ItemBank, blocks: &BlockSet, replicates: &[ReplicateResult]) -> Vec<ItemSeries> {
    truth
        .items()
        .iter()
        .map(|item| {
            let place = blocks.placement(item.id).expect("every bank item is placed");
            let pick = |arm| {
                replicates
                    .iter()
                    .filter_map(|r| {
                        r.fits
                            .iter()
                            .find(|f| f.item_id == item.id && f.arm == arm)
                            .map(|f| f.usable().then_some(f.estimate))
                    })
                    .collect()
            };
            ItemSeries {
                item_id: item.id,
                block: place.block,
                position: place.position,
                truth: item.params,
                optimal: pick(DesignArm::Optimal),
                random: pick(DesignArm::Random),
            }
        })
        .collect()
}

const SEED_SCHEME: &str = "ChaCha8 keyed by splitmix64(master seed, stream tag), stream id = replicate index";

/// EAP scores on the operational items, then their normal scores.
fn estimate_abilities(scorer: &EapScorer, operational: &ResponseMatrix) -> Vec<AbilityEstimate> {
    let raw: Vec<f64> = (0..operational.examinees()).map(|j| scorer.score(operational.row(j))).collect();
    let normalized = percentile_transform(&raw);
    raw.iter()
        .zip(normalized)
        .enumerate()
        .map(|(examinee, (&raw, normalized))| AbilityEstimate { examinee, raw, normalized })
        .collect()
}

fn column_under(responses: &ResponseMatrix, col: usize, block: usize, alloc: &Allocation) -> Vec<Response> {
    let id = responses.item_ids()[col];
    responses
        .column(col)
        .enumerate()
        .map(|(j, r)| if alloc.item(j, block) == id { r } else { Response::NotAdministered })
        .collect()
}

struct Plan<'a> {
    config: &'a SimConfig,
    operational: &'a ItemBank,
    calibration: &'a ItemBank,
    blocks: &'a BlockSet,
    /// Random allocation ignores item parameters, so it always uses the
    /// truth-based blocks; every case then shares one random arm per seed.
    random_blocks: &'a BlockSet,
    rules: Vec<AllocationRules>,
    scorer: Option<EapScorer>,
    cohort: &'a [f64],
}

impl Plan<'_> {
    fn replicate(&self, s: usize) -> Result<(ReplicateResult, Option<Vec<AbilityEstimate>>), SimError> {
        let cfg = self.config;
        let mut rng = stream_rng(cfg.seed, Stream::Responses, s as u64);
        // operational responses are always drawn so the calibration
        // responses of a replicate are the same in every case
        let op = generate_responses(self.cohort, self.operational, &mut rng);
        let cal = generate_responses(self.cohort, self.calibration, &mut rng);
        let estimates = self.scorer.as_ref().map(|sc| estimate_abilities(sc, &op));
        let abilities: Vec<f64> = match &estimates {
            Some(e) => e.iter().map(|a| a.normalized).collect(),
            None => self.cohort.to_vec(),
        };
        let fit_abilities: Vec<f64> = match (&estimates, cfg.fit_scale) {
            (Some(e), AbilityScale::Raw) => e.iter().map(|a| a.raw).collect(),
            _ => abilities.clone(),
        };
        let mut arms = Vec::new();
        if cfg.design.optimal() {
            arms.push((DesignArm::Optimal, allocate_optimal(&abilities, &self.rules), self.blocks));
        }
        if cfg.design.random() {
            let mut r = stream_rng(cfg.seed, Stream::RandomAllocation, s as u64);
            let alloc = allocate_random(self.cohort.len(), self.random_blocks, &mut r);
            arms.push((DesignArm::Random, alloc, self.random_blocks));
        }
        let mut fits = Vec::with_capacity(cal.items() * arms.len());
        for (col, &id) in cal.item_ids().iter().enumerate() {
            for (arm, alloc, blocks) in &arms {
                let block = blocks.placement(id).expect("calibration item is placed").block - 1;
                let column = column_under(&cal, col, block, alloc);
                let fit = match fit_item_fixed_theta(&fit_abilities, &column, &cfg.fit) {
                    Ok(f) => ArmFit::from_fit(id, *arm, f),
                    Err(EstimationError::NoResponses) => ArmFit {
                        item_id: id,
                        arm: *arm,
                        estimate: cfg.fit.start,
                        status: FitStatus::NoData,
                        n_responses: 0,
                        iterations: 0,
                    },
                    Err(e) => return Err(e.into()),
                };
                fits.push(fit);
            }
        }
        Ok((ReplicateResult { replicate: s, fits }, estimates.filter(|_| s == 0)))
    }
}

fn pre_estimate(
    cfg: &SimConfig,
    operational: &ItemBank,
    calibration: &ItemBank,
    grid: &AbilityGrid,
    truth_blocks: &BlockSet,
) -> Result<(PreEstimation, BlockSet), SimError> {
    let thetas = simulate_abilities(cfg.n_pre, &mut stream_rng(cfg.seed, Stream::PreAbilities, 0));
    let mut rng = stream_rng(cfg.seed, Stream::PreResponses, 0);
    let op = generate_responses(&thetas, operational, &mut rng);
    let cal = generate_responses(&thetas, calibration, &mut rng);
    let scorer = EapScorer::new(&operational.params(), grid);
    let abilities: Vec<f64> = estimate_abilities(&scorer, &op)
        .iter()
        .map(|a| match cfg.fit_scale {
            AbilityScale::Normalized => a.normalized,
            AbilityScale::Raw => a.raw,
        })
        .collect();
    let fits = (0..cal.items())
        .map(|col| {
            let column: Vec<Response> = cal.column(col).collect();
            Ok((cal.item_ids()[col], map_preestimate(&abilities, &column, &cfg.priors, &cfg.fit)?))
        })
        .collect::<Result<Vec<_>, EstimationError>>()?;
    let params: Vec<ItemParams> = fits.iter().map(|(_, f)| f.estimate).collect();
    let bank = calibration.with_params(&params)?;
    let estimated_blocks = build_blocks(&bank, cfg.blocks)?;
    let block_changes = calibration
        .items()
        .iter()
        .filter_map(|it| {
            let truth = truth_blocks.placement(it.id)?;
            let estimated = estimated_blocks.placement(it.id)?;
            (truth != estimated).then_some(BlockChange { item_id: it.id, truth, estimated })
        })
        .collect();
    Ok((PreEstimation { fits, bank, block_changes }, estimated_blocks))
}

/// Runs one case of the study.
///
/// Replicates run in parallel and are collected in index order, so the
/// result does not depend on the thread count. Failed item fits are recorded
/// in their status; only configuration or data errors abort the run.
pub fn run_case(config: &SimConfig, operational: &ItemBank, calibration: &ItemBank) -> Result<CaseRun, SimError> {
    config.validate(calibration.len())?;
    let grid = AbilityGrid::new(config.grid).map_err(|e| SimError::Config(e.to_string()))?;
    let truth_blocks = build_blocks(calibration, config.blocks)?;

    let (design_blocks, pre_estimation) = if config.case == Case::IV {
        let (pre, est_blocks) = pre_estimate(config, operational, calibration, &grid, &truth_blocks)?;
        (est_blocks, Some(pre))
    } else {
        (truth_blocks.clone(), None)
    };
    let plans = plan_blocks(&design_blocks, &grid, &config.exchange)?;
    // fitting and metrics use the true parameters of the same composition
    let blocks = BlockSet::from_layout(&design_blocks.layout(), calibration)?;

    let provenance = Provenance {
        version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: config.seed,
        seed_scheme: SEED_SCHEME.to_string(),
        case: config.case,
        replicates: if config.case == Case::I { 0 } else { config.replicates },
        examinees: if config.case == Case::I { 0 } else { config.examinees },
    };
    let mut run = CaseRun {
        config: config.clone(),
        truth: calibration.clone(),
        blocks,
        plans,
        pre_estimation,
        cohort: Vec::new(),
        first_abilities: None,
        replicates: Vec::new(),
        provenance,
    };
    if config.case == Case::I {
        return Ok(run);
    }

    run.cohort = simulate_abilities(config.examinees, &mut stream_rng(config.seed, Stream::Cohort, 0));
    let plan = Plan {
        config,
        operational,
        calibration,
        blocks: &run.blocks,
        random_blocks: &truth_blocks,
        rules: run.rules(),
        scorer: matches!(config.case, Case::III | Case::IV).then(|| EapScorer::new(&operational.params(), &grid)),
        cohort: &run.cohort,
    };
    let results = (0..config.replicates)
        .into_par_iter()
        .map(|s| plan.replicate(s))
        .collect::<Result<Vec<_>, _>>()?;
    let mut replicates = Vec::with_capacity(results.len());
    let mut first = None;
    for (r, est) in results {
        if r.replicate == 0 {
            first = est;
        }
        replicates.push(r);
    }
    run.replicates = replicates;
    run.first_abilities = first;
    Ok(run)
}
