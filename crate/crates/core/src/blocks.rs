//! Item banks and the difficulty-interleaved block formation rule.
//!
//! Calibration items are ranked from easiest to hardest and dealt round-robin
//! into `l` blocks, so every block spans the difficulty range. Within a block
//! items are numbered by ascending difficulty; that number is the item's
//! position. Difficulty ties keep the order in which items appear in the bank.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::irt::{ItemParams, ParamError};

/// Stable identifier of an item within a bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub u32);

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BankRole {
    Operational,
    Calibration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BankItem {
    pub id: ItemId,
    pub params: ItemParams,
}

#[derive(Debug, Error, PartialEq)]
pub enum BankError {
    #[error("the bank has no items")]
    Empty,
    #[error("duplicate item id {0}")]
    DuplicateId(ItemId),
    #[error("item {id}: {source}")]
    InvalidParams { id: ItemId, source: ParamError },
}

#[derive(Debug, Error, PartialEq)]
pub enum BlockError {
    #[error("{items} calibration items cannot be split into {blocks} equal blocks")]
    IndivisibleBank { items: usize, blocks: usize },
    #[error("a block needs at least one item")]
    EmptyBlock,
    #[error("block layout refers to unknown item {0}")]
    UnknownItem(ItemId),
    #[error("block layout does not partition the bank: {0}")]
    NotAPartition(String),
}

/// Items with unique ids and valid parameters, tagged by their role in the test.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemBank {
    items: Vec<BankItem>,
    role: BankRole,
}

impl ItemBank {
    pub fn new(items: Vec<BankItem>, role: BankRole) -> Result<Self, BankError> {
        if items.is_empty() {
            return Err(BankError::Empty);
        }
        let mut seen = HashSet::new();
        for it in &items {
            if !seen.insert(it.id) {
                return Err(BankError::DuplicateId(it.id));
            }
            it.params
                .validate()
                .map_err(|source| BankError::InvalidParams { id: it.id, source })?;
        }
        Ok(ItemBank { items, role })
    }

    pub fn items(&self) -> &[BankItem] {
        &self.items
    }

    pub fn role(&self) -> BankRole {
        self.role
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, id: ItemId) -> Option<&BankItem> {
        self.items.iter().find(|it| it.id == id)
    }

    pub fn params(&self) -> Vec<ItemParams> {
        self.items.iter().map(|it| it.params).collect()
    }

    /// Same ids and order, new parameters.
    pub fn with_params(&self, params: &[ItemParams]) -> Result<Self, BankError> {
        let items = self
            .items
            .iter()
            .zip(params)
            .map(|(it, p)| BankItem { id: it.id, params: *p })
            .collect();
        ItemBank::new(items, self.role)
    }
}

/// Items of one block ordered by ascending difficulty (position 1 first).
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    items: Vec<BankItem>,
}

impl Block {
    /// Sorts by difficulty; ties keep the given order.
    pub fn new(mut items: Vec<BankItem>) -> Result<Self, BlockError> {
        if items.is_empty() {
            return Err(BlockError::EmptyBlock);
        }
        items.sort_by(|x, y| x.params.b.total_cmp(&y.params.b));
        Ok(Block { items })
    }

    pub fn from_params(params: &[ItemParams]) -> Result<Self, BlockError> {
        let items = params
            .iter()
            .enumerate()
            .map(|(i, p)| BankItem { id: ItemId(i as u32 + 1), params: *p })
            .collect();
        Block::new(items)
    }

    pub fn items(&self) -> &[BankItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn params(&self) -> Vec<ItemParams> {
        self.items.iter().map(|it| it.params).collect()
    }

    pub fn ids(&self) -> Vec<ItemId> {
        self.items.iter().map(|it| it.id).collect()
    }

    /// 1-based position of `id` within the block.
    pub fn position(&self, id: ItemId) -> Option<usize> {
        self.items.iter().position(|it| it.id == id).map(|p| p + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSet {
    blocks: Vec<Block>,
}

/// Serialised form of a [`BlockSet`]: ids only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockLayout {
    pub blocks: Vec<BlockEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockEntry {
    pub block_id: usize,
    pub item_ids: Vec<ItemId>,
}

/// Where an item sits in a block set: 1-based block id and position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub block: usize,
    pub position: usize,
}

impl BlockSet {
    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn placement(&self, id: ItemId) -> Option<Placement> {
        self.blocks.iter().enumerate().find_map(|(bi, blk)| {
            blk.position(id).map(|position| Placement { block: bi + 1, position })
        })
    }

    pub fn layout(&self) -> BlockLayout {
        BlockLayout {
            blocks: self
                .blocks
                .iter()
                .enumerate()
                .map(|(i, b)| BlockEntry { block_id: i + 1, item_ids: b.ids() })
                .collect(),
        }
    }

    /// Rebuilds blocks from a layout, taking parameters from `bank`.
    pub fn from_layout(layout: &BlockLayout, bank: &ItemBank) -> Result<Self, BlockError> {
        let mut seen = HashSet::new();
        let mut blocks = Vec::with_capacity(layout.blocks.len());
        for (i, entry) in layout.blocks.iter().enumerate() {
            if entry.block_id != i + 1 {
                return Err(BlockError::NotAPartition(format!(
                    "block ids must run 1..l in order, found {} at index {i}",
                    entry.block_id
                )));
            }
            let mut items = Vec::with_capacity(entry.item_ids.len());
            for id in &entry.item_ids {
                let it = bank.get(*id).ok_or(BlockError::UnknownItem(*id))?;
                if !seen.insert(*id) {
                    return Err(BlockError::NotAPartition(format!("item {id} repeated")));
                }
                items.push(*it);
            }
            // keep the stored order: it already encodes positions
            if items.is_empty() {
                return Err(BlockError::EmptyBlock);
            }
            blocks.push(Block { items });
        }
        if seen.len() != bank.len() {
            return Err(BlockError::NotAPartition(format!(
                "{} of {} bank items placed",
                seen.len(),
                bank.len()
            )));
        }
        Ok(BlockSet { blocks })
    }
}

/// Deals the bank's items, sorted by difficulty, round-robin into `l` blocks.
pub fn build_blocks(bank: &ItemBank, l: usize) -> Result<BlockSet, BlockError> {
    let n = bank.len();
    if l == 0 || n == 0 || n % l != 0 {
        return Err(BlockError::IndivisibleBank { items: n, blocks: l });
    }
    let mut ranked: Vec<BankItem> = bank.items().to_vec();
    ranked.sort_by(|x, y| x.params.b.total_cmp(&y.params.b));
    let mut dealt: Vec<Vec<BankItem>> = vec![Vec::with_capacity(n / l); l];
    for (rank, item) in ranked.into_iter().enumerate() {
        dealt[rank % l].push(item);
    }
    let blocks = dealt.into_iter().map(Block::new).collect::<Result<_, _>>()?;
    Ok(BlockSet { blocks })
}
