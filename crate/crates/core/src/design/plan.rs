//! Optimal designs and routing rules for a whole block set.

use rayon::prelude::*;

use super::{
    extract_intervals, optimize_block, random_design, theoretical_efficiency_per_block,
    theoretical_efficiency_per_item, AllocationRules, BlockOptimum, DesignError, ExchangeOptions,
    TheoreticalEfficiency,
};
use crate::blocks::BlockSet;
use crate::grid::AbilityGrid;

/// The optimized design of one block with its rules and its efficiency
/// against the uniform random allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPlan {
    /// 1-based.
    pub block_id: usize,
    pub optimum: BlockOptimum,
    pub rules: AllocationRules,
    /// Per item, in block position order.
    pub theoretical: Vec<TheoreticalEfficiency>,
    pub block_efficiency: f64,
}

/// Optimizes every block independently. Blocks that hit the iteration cap
/// are still returned; check `optimum.summary.converged`.
pub fn plan_blocks(
    blocks: &BlockSet,
    grid: &AbilityGrid,
    opts: &ExchangeOptions,
) -> Result<Vec<BlockPlan>, DesignError> {
    blocks
        .blocks()
        .par_iter()
        .enumerate()
        .map(|(k, block)| {
            let optimum = optimize_block(block, grid, opts)?;
            let random = random_design(block, grid);
            let theoretical = theoretical_efficiency_per_item(&optimum.design, &random, block)?;
            let block_efficiency = theoretical_efficiency_per_block(&optimum.design, &random, block)?;
            let rules = extract_intervals(&optimum.design, block, k + 1);
            Ok(BlockPlan { block_id: k + 1, optimum, rules, theoretical, block_efficiency })
        })
        .collect()
}
