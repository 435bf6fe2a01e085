//! Monte Carlo comparison of optimal and random calibration designs.
//!
//! A run draws one examinee cohort, then for every replicate generates fresh
//! responses to the operational and calibration items, routes each examinee
//! to one calibration item per block under both designs, and fits every
//! calibration item on the responses that design would have collected.
//! Both designs read the same simulated responses; only the missingness
//! pattern differs.

mod case;
mod config;

pub use case::{
    estimate_series, run_case, theoretical_table, ArmFit, BlockChange, CaseRun, DesignArm, PreEstimation, Provenance, ReplicateResult,
};
pub use config::{AbilityScale, Case, DesignChoice, SimConfig};

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, LogNormal, Normal, StandardNormal};
use thiserror::Error;

use crate::blocks::{BankError, BankItem, BankRole, BlockError, BlockSet, ItemBank, ItemId};
use crate::design::{AllocationRules, DesignError};
use crate::estimation::EstimationError;
use crate::irt::{prob_3pl, ItemParams};
use crate::responses::{Response, ResponseMatrix};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Bank(#[from] BankError),
    #[error(transparent)]
    Blocks(#[from] BlockError),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

/// Independent random streams of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Cohort = 1,
    PreAbilities = 2,
    PreResponses = 3,
    Responses = 4,
    RandomAllocation = 5,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based generator for `(master, stream, replicate)`.
///
/// The key is expanded from the master seed and the stream tag by
/// splitmix64; the replicate index selects the ChaCha stream. Draws for one
/// replicate therefore never depend on which other replicates ran or in
/// what order.
pub fn stream_rng(master: u64, stream: Stream, replicate: u64) -> ChaCha8Rng {
    let mut state = master ^ (stream as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replicate);
    rng
}

/// `n` independent standard-normal abilities.
pub fn simulate_abilities<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Dense responses of every examinee to every bank item, drawn examinee by
/// examinee in bank order.
pub fn generate_responses<R: Rng>(thetas: &[f64], bank: &ItemBank, rng: &mut R) -> ResponseMatrix {
    let params = bank.params();
    let mut cells = Vec::with_capacity(thetas.len() * params.len());
    for &t in thetas {
        for p in &params {
            cells.push(Response::from_outcome(rng.gen::<f64>() < prob_3pl(t, p)));
        }
    }
    ResponseMatrix::new(bank.items().iter().map(|it| it.id).collect(), thetas.len(), cells)
}

/// Seed of the bundled synthetic operational bank.
pub const OPERATIONAL_BANK_SEED: u64 = 20_180_402;

/// Draws an operational bank with `a ~ LogNormal(0, 0.3)`, `b ~ N(0, 1)`
/// and `c ~ Beta(5, 17)`, rounded to three decimals, ids from `first_id`.
pub fn synthetic_operational_bank(items: usize, first_id: u32, seed: u64) -> ItemBank {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log_a = LogNormal::new(0.0, 0.3).expect("valid lognormal");
    let diff = Normal::new(0.0, 1.0).expect("valid normal");
    let guess = Beta::new(5.0, 17.0).expect("valid beta");
    let round = |x: f64| (x * 1000.0).round() / 1000.0;
    let bank = (0..items)
        .map(|k| {
            let a = round(rng.sample(log_a)).max(0.001);
            let b = round(rng.sample(diff));
            let c = round(rng.sample(guess));
            BankItem { id: ItemId(first_id + k as u32), params: ItemParams { a, b, c } }
        })
        .collect();
    ItemBank::new(bank, BankRole::Operational).expect("synthetic parameters are valid")
}

/// Item given to each examinee in each block, examinee-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    blocks: usize,
    items: Vec<ItemId>,
}

impl Allocation {
    pub fn examinees(&self) -> usize {
        if self.blocks == 0 {
            0
        } else {
            self.items.len() / self.blocks
        }
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    /// Item of 0-based `block` for `examinee`.
    pub fn item(&self, examinee: usize, block: usize) -> ItemId {
        self.items[examinee * self.blocks + block]
    }

    pub fn row(&self, examinee: usize) -> &[ItemId] {
        &self.items[examinee * self.blocks..(examinee + 1) * self.blocks]
    }

    /// Number of examinees sent to each item.
    pub fn counts(&self) -> HashMap<ItemId, usize> {
        let mut out = HashMap::new();
        for id in &self.items {
            *out.entry(*id).or_insert(0) += 1;
        }
        out
    }

    /// Keeps only the allocated cells of `responses`; every other cell
    /// becomes not administered.
    pub fn mask(&self, responses: &ResponseMatrix, blocks: &BlockSet) -> ResponseMatrix {
        let col_block: Vec<Option<usize>> = responses
            .item_ids()
            .iter()
            .map(|id| blocks.placement(*id).map(|p| p.block - 1))
            .collect();
        let ids = responses.item_ids().to_vec();
        responses.masked(|j, c| col_block[c].is_some_and(|b| self.item(j, b) == ids[c]))
    }
}

/// Routes each ability through the rules of every block.
pub fn allocate_optimal(abilities: &[f64], rules: &[AllocationRules]) -> Allocation {
    let lookups: Vec<_> = rules.iter().map(|r| r.lookup()).collect();
    let mut items = Vec::with_capacity(abilities.len() * rules.len());
    for &t in abilities {
        items.extend(lookups.iter().map(|lk| lk.item_for(t)));
    }
    Allocation { blocks: rules.len(), items }
}

/// Uniform independent choice of one item per block for each examinee.
pub fn allocate_random<R: Rng>(examinees: usize, blocks: &BlockSet, rng: &mut R) -> Allocation {
    let ids: Vec<Vec<ItemId>> = blocks.blocks().iter().map(|b| b.ids()).collect();
    let mut items = Vec::with_capacity(examinees * ids.len());
    for _ in 0..examinees {
        for block in &ids {
            items.push(block[rng.gen_range(0..block.len())]);
        }
    }
    Allocation { blocks: ids.len(), items }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{build_blocks, BankItem, BankRole};
    use crate::design::{Interval, ItemIntervals};
    use crate::irt::ItemParams;

    fn bank(params: &[(f64, f64, f64)]) -> ItemBank {
        let items = params
            .iter()
            .enumerate()
            .map(|(i, &(a, b, c))| BankItem { id: ItemId(i as u32 + 1), params: ItemParams::new(a, b, c).unwrap() })
            .collect();
        ItemBank::new(items, BankRole::Calibration).unwrap()
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let draw = |s, r| simulate_abilities(5, &mut stream_rng(7, s, r));
        assert_eq!(draw(Stream::Cohort, 0), draw(Stream::Cohort, 0));
        assert_ne!(draw(Stream::Cohort, 0), draw(Stream::Cohort, 1));
        assert_ne!(draw(Stream::Cohort, 0), draw(Stream::Responses, 0));
        assert_ne!(
            simulate_abilities(5, &mut stream_rng(7, Stream::Cohort, 0)),
            simulate_abilities(5, &mut stream_rng(8, Stream::Cohort, 0))
        );
    }

    #[test]
    fn single_ability_is_finite() {
        let t = simulate_abilities(1, &mut stream_rng(1, Stream::Cohort, 0));
        assert_eq!(t.len(), 1);
        assert!(t[0].is_finite());
    }

    #[test]
    fn forced_success_column() {
        let b = bank(&[(5.0, -30.0, 0.0), (1.0, 0.0, 0.2)]);
        let thetas = simulate_abilities(500, &mut stream_rng(3, Stream::Cohort, 0));
        let r = generate_responses(&thetas, &b, &mut stream_rng(3, Stream::Responses, 0));
        assert!(r.column(0).all(|x| x == Response::Correct));
        let again = generate_responses(&thetas, &b, &mut stream_rng(3, Stream::Responses, 0));
        assert_eq!(r, again);
    }

    #[test]
    fn one_item_per_block() {
        let b = bank(&[(1.0, -1.0, 0.2), (1.0, 0.0, 0.2), (1.0, 1.0, 0.2), (1.0, 2.0, 0.2)]);
        let blocks = build_blocks(&b, 2).unwrap();
        let thetas = simulate_abilities(200, &mut stream_rng(4, Stream::Cohort, 0));
        let resp = generate_responses(&thetas, &b, &mut stream_rng(4, Stream::Responses, 0));
        let alloc = allocate_random(200, &blocks, &mut stream_rng(4, Stream::RandomAllocation, 0));
        let masked = alloc.mask(&resp, &blocks);
        for j in 0..200 {
            let seen = masked.row(j).iter().filter(|r| r.observed().is_some()).count();
            assert_eq!(seen, 2);
        }
    }

    #[test]
    fn rules_route_by_interval() {
        let rules = AllocationRules {
            block_id: 1,
            items: vec![
                ItemIntervals {
                    item_id: ItemId(1),
                    intervals: vec![Interval { lo: f64::NEG_INFINITY, hi: 0.0 }],
                },
                ItemIntervals { item_id: ItemId(2), intervals: vec![Interval { lo: 0.0, hi: f64::INFINITY }] },
            ],
        };
        let alloc = allocate_optimal(&[-1.0, 0.0, 0.5], &[rules]);
        assert_eq!(alloc.row(0), &[ItemId(1)]);
        assert_eq!(alloc.row(1), &[ItemId(1)]);
        assert_eq!(alloc.row(2), &[ItemId(2)]);
    }

    #[test]
    fn single_item_block_is_deterministic() {
        let b = bank(&[(1.0, 0.0, 0.2), (1.2, 1.0, 0.1)]);
        let blocks = build_blocks(&b, 2).unwrap();
        let alloc = allocate_random(50, &blocks, &mut stream_rng(9, Stream::RandomAllocation, 0));
        let first = alloc.row(0).to_vec();
        assert!((0..50).all(|j| alloc.row(j) == first.as_slice()));
    }
}
