//! Restricted designs on a discretised ability axis.
//!
//! A restricted design splits the examinee density `g` into one sub-density
//! per item of a block. On the grid this is a `Q × m` matrix of fractions whose
//! rows sum to one: row `q` says how the examinees with ability `θ_q` are
//! shared among the block's items. The design's information for item `i` is
//! the quadrature `Σ_q A[q][i] w_q I_i(θ_q)`, and the D-criterion is
//! `-Σ_i log det M_i`.

mod efficiency;
mod exchange;
mod intervals;
mod plan;

pub use efficiency::{
    theoretical_efficiency_per_block, theoretical_efficiency_per_item, TheoreticalEfficiency,
};
pub use exchange::{optimize_block, BlockOptimum, DesignSummary, ExchangeOptions};
pub use intervals::{extract_intervals, AllocationRules, Interval, ItemIntervals, RuleLookup};
pub use plan::{plan_blocks, BlockPlan};

use nalgebra::Vector3;
use thiserror::Error;

use crate::blocks::Block;
use crate::grid::AbilityGrid;
use crate::irt::{info_vector, InfoMatrix, ItemParams};

/// Determinants at or below this are treated as singular.
pub const SINGULAR_DET: f64 = 1e-300;

const PARTITION_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("information matrix of block item {item} is singular (det = {det:e})")]
    SingularInformation { item: usize, det: f64 },
    #[error("design has {design} items but the block has {block}")]
    ShapeMismatch { design: usize, block: usize },
    #[error("assignment row {row} sums to {sum}, not 1")]
    NotAPartition { row: usize, sum: f64 },
    #[error("exchange stopped after {iterations} iterations with equivalence gap {gap:e}")]
    NoConvergence { iterations: usize, gap: f64 },
}

/// Per-grid-point split of examinee mass among the items of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedDesign {
    grid: AbilityGrid,
    items: usize,
    assign: Vec<f64>,
}

impl RestrictedDesign {
    /// Validates that `assign` (row-major, `Q × m`) partitions every grid point.
    pub fn from_assignment(
        grid: AbilityGrid,
        items: usize,
        assign: Vec<f64>,
    ) -> Result<Self, DesignError> {
        if items == 0 || assign.len() != grid.len() * items {
            return Err(DesignError::ShapeMismatch { design: items, block: assign.len() / grid.len().max(1) });
        }
        for (row, chunk) in assign.chunks_exact(items).enumerate() {
            let sum: f64 = chunk.iter().sum();
            if (sum - 1.0).abs() > PARTITION_TOL || chunk.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(DesignError::NotAPartition { row, sum });
            }
        }
        Ok(RestrictedDesign { grid, items, assign })
    }

    /// Builds a 0/1 design from one item index per grid point.
    pub fn from_labels(grid: AbilityGrid, items: usize, labels: &[usize]) -> Result<Self, DesignError> {
        let mut assign = vec![0.0; grid.len() * items];
        for (q, &i) in labels.iter().enumerate() {
            if i >= items {
                return Err(DesignError::ShapeMismatch { design: items, block: i + 1 });
            }
            assign[q * items + i] = 1.0;
        }
        RestrictedDesign::from_assignment(grid, items, assign)
    }

    pub(crate) fn from_parts_unchecked(grid: AbilityGrid, items: usize, assign: Vec<f64>) -> Self {
        RestrictedDesign { grid, items, assign }
    }

    pub fn grid(&self) -> &AbilityGrid {
        &self.grid
    }

    pub fn items(&self) -> usize {
        self.items
    }

    pub fn fraction(&self, q: usize, i: usize) -> f64 {
        self.assign[q * self.items + i]
    }

    pub fn row(&self, q: usize) -> &[f64] {
        &self.assign[q * self.items..(q + 1) * self.items]
    }

    pub fn assignment(&self) -> &[f64] {
        &self.assign
    }

    /// Total population mass routed to item `i`.
    pub fn mass(&self, i: usize) -> f64 {
        let w = self.grid.weights();
        (0..self.grid.len()).map(|q| w[q] * self.fraction(q, i)).sum()
    }

    /// Index of the item holding the most mass at each grid point, lower index on ties.
    pub fn labels(&self) -> Vec<usize> {
        self.assign
            .chunks_exact(self.items)
            .map(|row| {
                let mut best = 0;
                for (i, &x) in row.iter().enumerate().skip(1) {
                    if x > row[best] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }

    fn check_block(&self, block: &Block) -> Result<(), DesignError> {
        if block.len() != self.items {
            return Err(DesignError::ShapeMismatch { design: self.items, block: block.len() });
        }
        Ok(())
    }
}

/// The design that ignores ability: every item gets `1/m` of every grid point.
pub fn random_design(block: &Block, grid: &AbilityGrid) -> RestrictedDesign {
    let m = block.len();
    RestrictedDesign::from_parts_unchecked(grid.clone(), m, vec![1.0 / m as f64; grid.len() * m])
}

/// Square-root information factors `v_i(θ_q)` for every item and grid point.
#[derive(Debug, Clone)]
pub(crate) struct InfoTable {
    q: usize,
    vecs: Vec<Vector3<f64>>,
}

impl InfoTable {
    pub(crate) fn new(params: &[ItemParams], grid: &AbilityGrid) -> Self {
        let mut vecs = Vec::with_capacity(params.len() * grid.len());
        for p in params {
            vecs.extend(grid.points().iter().map(|&t| info_vector(t, p)));
        }
        InfoTable { q: grid.len(), vecs }
    }

    #[inline]
    pub(crate) fn v(&self, i: usize, q: usize) -> &Vector3<f64> {
        &self.vecs[i * self.q + q]
    }

    pub(crate) fn information(&self, design: &RestrictedDesign, i: usize) -> InfoMatrix {
        let w = design.grid.weights();
        let mut m = InfoMatrix::zeros();
        for q in 0..self.q {
            let mass = design.fraction(q, i) * w[q];
            if mass > 0.0 {
                let v = self.v(i, q);
                m += mass * v * v.transpose();
            }
        }
        m
    }

    pub(crate) fn all_information(&self, design: &RestrictedDesign) -> Vec<InfoMatrix> {
        (0..design.items).map(|i| self.information(design, i)).collect()
    }
}

pub(crate) fn log_det_checked(m: &InfoMatrix, item: usize) -> Result<f64, DesignError> {
    let det = m.determinant();
    if !(det > SINGULAR_DET) {
        return Err(DesignError::SingularInformation { item, det });
    }
    Ok(det.ln())
}

pub(crate) fn inverse_checked(m: &InfoMatrix, item: usize) -> Result<InfoMatrix, DesignError> {
    let det = m.determinant();
    if !(det > SINGULAR_DET) {
        return Err(DesignError::SingularInformation { item, det });
    }
    m.try_inverse()
        .ok_or(DesignError::SingularInformation { item, det })
}

pub(crate) fn criterion_of(infos: &[InfoMatrix]) -> Result<f64, DesignError> {
    let mut total = 0.0;
    for (i, m) in infos.iter().enumerate() {
        total -= log_det_checked(m, i)?;
    }
    Ok(total)
}

/// Information matrix of `item` under the sub-density `design` gives item `item_index`.
pub fn elemental_info(item: &ItemParams, design: &RestrictedDesign, item_index: usize) -> InfoMatrix {
    let grid = design.grid();
    let mut m = InfoMatrix::zeros();
    for (q, (&t, &w)) in grid.points().iter().zip(grid.weights()).enumerate() {
        let mass = design.fraction(q, item_index) * w;
        if mass > 0.0 {
            let v = info_vector(t, item);
            m += mass * v * v.transpose();
        }
    }
    m
}

/// D-criterion `-Σ_i log det M_i`; lower is better.
pub fn d_criterion(design: &RestrictedDesign, block: &Block) -> Result<f64, DesignError> {
    design.check_block(block)?;
    let table = InfoTable::new(&block.params(), design.grid());
    criterion_of(&table.all_information(design))
}

/// `tr(M_i⁻¹ I_i(θ_q))`: the rate at which routing mass at `θ_q` to item `i`
/// lowers the criterion.
pub fn sensitivity(
    theta_index: usize,
    item_index: usize,
    design: &RestrictedDesign,
    block: &Block,
) -> Result<f64, DesignError> {
    design.check_block(block)?;
    let item = block.items()[item_index].params;
    let m = elemental_info(&item, design, item_index);
    let inv = inverse_checked(&m, item_index)?;
    let v = info_vector(design.grid().points()[theta_index], &item);
    Ok((v.transpose() * inv * v)[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridOptions;
    use approx::assert_relative_eq;

    pub(crate) fn example_block() -> Block {
        Block::from_params(&[
            ItemParams::new(0.862, -1.063, 0.203).unwrap(),
            ItemParams::new(1.320, -0.549, 0.195).unwrap(),
            ItemParams::new(1.220, -0.067, 0.155).unwrap(),
            ItemParams::new(2.173, 0.454, 0.107).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn random_design_is_uniform() {
        let block = example_block();
        let grid = AbilityGrid::default();
        let d = random_design(&block, &grid);
        assert!(d.assignment().iter().all(|&x| x == 0.25));
        for i in 0..4 {
            assert_relative_eq!(d.mass(i), 0.25, epsilon = 1e-12);
        }
        assert!(d_criterion(&d, &block).unwrap().is_finite());
    }

    #[test]
    fn empty_sub_density_has_no_information() {
        let grid = AbilityGrid::new(GridOptions { lo: -2.0, hi: 2.0, points: 41 }).unwrap();
        let d = RestrictedDesign::from_labels(grid, 2, &vec![0; 41]).unwrap();
        let item = ItemParams::new(1.0, 0.0, 0.2).unwrap();
        assert_eq!(elemental_info(&item, &d, 1), InfoMatrix::zeros());
    }

    #[test]
    fn single_support_point_is_singular() {
        let grid = AbilityGrid::new(GridOptions { lo: -2.0, hi: 2.0, points: 5 }).unwrap();
        let block = Block::from_params(&[
            ItemParams::new(1.0, -0.5, 0.2).unwrap(),
            ItemParams::new(1.0, 0.5, 0.2).unwrap(),
        ])
        .unwrap();
        let mut labels = vec![0; 5];
        labels[2] = 1;
        let d = RestrictedDesign::from_labels(grid, 2, &labels).unwrap();
        let m = elemental_info(&block.items()[1].params, &d, 1);
        assert!(m.determinant().abs() < 1e-18);
        assert!(matches!(
            d_criterion(&d, &block),
            Err(DesignError::SingularInformation { item: 1, .. })
        ));
    }

    #[test]
    fn halving_mass_shifts_criterion() {
        let block = example_block();
        let grid = AbilityGrid::default();
        let d = random_design(&block, &grid);
        let half = RestrictedDesign::from_parts_unchecked(
            grid.clone(),
            4,
            d.assignment().iter().map(|x| x * 0.5).collect(),
        );
        let gap = d_criterion(&half, &block).unwrap() - d_criterion(&d, &block).unwrap();
        assert_relative_eq!(gap, 12.0 * 2f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn trace_identity() {
        let block = example_block();
        let grid = AbilityGrid::new(GridOptions { lo: -4.0, hi: 4.0, points: 201 }).unwrap();
        let labels: Vec<usize> = (0..201).map(|q| q % 4).collect();
        let d = RestrictedDesign::from_labels(grid.clone(), 4, &labels).unwrap();
        for i in 0..4 {
            let avg: f64 = (0..201)
                .map(|q| grid.weights()[q] * d.fraction(q, i) * sensitivity(q, i, &d, &block).unwrap())
                .sum();
            assert_relative_eq!(avg, 3.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_information_point() {
        let grid = AbilityGrid::default();
        let block = Block::from_params(&[
            ItemParams::new(5.0, 3.9, 0.0).unwrap(),
            ItemParams::new(1.0, 0.0, 0.2).unwrap(),
        ])
        .unwrap();
        let d = random_design(&block, &grid);
        // far below b with c = 0, p(1-p) underflows the information floor
        let tiny = ItemParams::new(5.0, 3.9, 0.0).unwrap();
        assert_eq!(crate::irt::fisher_info(-4.0, &tiny), InfoMatrix::zeros());
        assert_eq!(sensitivity(0, 1, &d, &block).unwrap(), 0.0);
    }

    #[test]
    fn rejects_non_partition() {
        let grid = AbilityGrid::new(GridOptions { lo: -1.0, hi: 1.0, points: 3 }).unwrap();
        let err = RestrictedDesign::from_assignment(grid, 2, vec![0.5, 0.5, 1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(err, Err(DesignError::NotAPartition { row: 1, .. })));
    }
}
