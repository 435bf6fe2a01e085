//! Discretised ability axis carrying standard-normal population mass.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("grid bounds must be finite with lo < hi, got [{lo}, {hi}]")]
    Bounds { lo: f64, hi: f64 },
}

/// Bounds and resolution of an equally spaced grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridOptions {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions { lo: -4.0, hi: 4.0, points: 1601 }
    }
}

/// Ascending grid abilities, each weighted by the N(0,1) mass of its cell.
///
/// Interior points own a cell of one grid step and the two end points half a
/// step, so the weights are the trapezoid rule for the normal density
/// truncated to the grid range, renormalised to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct AbilityGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl AbilityGrid {
    pub fn new(opts: GridOptions) -> Result<Self, GridError> {
        let GridOptions { lo, hi, points } = opts;
        if points < 2 {
            return Err(GridError::TooFewPoints(points));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(GridError::Bounds { lo, hi });
        }
        let step = (hi - lo) / (points - 1) as f64;
        let xs: Vec<f64> = (0..points).map(|q| lo + step * q as f64).collect();
        Ok(Self::with_normal_weights(xs))
    }

    fn with_normal_weights(points: Vec<f64>) -> Self {
        let last = points.len() - 1;
        let dens: Vec<f64> = points
            .iter()
            .enumerate()
            .map(|(q, x)| {
                let cell = if q == 0 || q == last { 0.5 } else { 1.0 };
                cell * (-0.5 * x * x).exp()
            })
            .collect();
        let total: f64 = dens.iter().sum();
        let weights = dens.into_iter().map(|d| d / total).collect();
        AbilityGrid { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn spacing(&self) -> f64 {
        self.points[1] - self.points[0]
    }
}

impl Default for AbilityGrid {
    fn default() -> Self {
        AbilityGrid::new(GridOptions::default()).expect("default grid is valid")
    }
}
