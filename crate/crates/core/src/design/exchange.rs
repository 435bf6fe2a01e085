//! Exchange algorithm for the locally D-optimal restricted design of one block.
//!
//! Each iteration first proposes a batch exchange: every grid point moves a
//! fraction `ρ` of its mass to the item with the largest sensitivity. The
//! proposal is kept only if the criterion drops; otherwise `ρ` falls back to
//! 0.5 and keeps halving. A sequential sweep follows, visiting grid points in
//! order and shifting mass between the best and the worst loaded item by the
//! exact minimiser of the criterion along that two-item exchange. Every move
//! of the sweep lowers the criterion, and at a fixed point every loaded item
//! at every grid point has maximal sensitivity, which is the equivalence
//! theorem's optimality condition.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{criterion_of, inverse_checked, DesignError, InfoTable, RestrictedDesign};
use crate::blocks::Block;
use crate::grid::AbilityGrid;
use crate::irt::InfoMatrix;

const MIN_DAMPING: f64 = 1.0 / 64.0;
const LOCAL_SWEEPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExchangeOptions {
    /// Stop once the equivalence gap is at most this.
    pub tol: f64,
    pub max_iters: usize,
    /// Fraction of each grid point's mass moved by a batch exchange.
    pub damping: f64,
}

impl Default for ExchangeOptions {
    fn default() -> Self {
        ExchangeOptions { tol: 1e-4, max_iters: 500, damping: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSummary {
    /// `-Σ log det M_i` of the returned design.
    pub criterion: f64,
    pub per_item_info: Vec<InfoMatrix>,
    pub equivalence_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Criterion after initialisation and after every iteration.
    pub criterion_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockOptimum {
    pub design: RestrictedDesign,
    pub summary: DesignSummary,
}

impl BlockOptimum {
    pub fn require_converged(&self) -> Result<(), DesignError> {
        if self.summary.converged {
            Ok(())
        } else {
            Err(DesignError::NoConvergence {
                iterations: self.summary.iterations,
                gap: self.summary.equivalence_gap,
            })
        }
    }
}

struct State {
    m: usize,
    assign: Vec<f64>,
    infos: Vec<InfoMatrix>,
    invs: Vec<InfoMatrix>,
    criterion: f64,
}

impl State {
    fn evaluate(table: &InfoTable, design: &RestrictedDesign) -> Result<State, DesignError> {
        let infos = table.all_information(design);
        let criterion = criterion_of(&infos)?;
        let invs = infos
            .iter()
            .enumerate()
            .map(|(i, m)| inverse_checked(m, i))
            .collect::<Result<_, _>>()?;
        Ok(State { m: design.items(), assign: design.assignment().to_vec(), infos, invs, criterion })
    }
}

#[inline]
fn quad(v: &Vector3<f64>, inv: &InfoMatrix) -> f64 {
    (v.transpose() * inv * v)[0]
}

/// Equivalence gap and the argmax item at every grid point.
fn gap_and_targets(table: &InfoTable, st: &State, q_len: usize) -> (f64, Vec<usize>) {
    let mut gap: f64 = 0.0;
    let mut targets = Vec::with_capacity(q_len);
    let mut d = vec![0.0; st.m];
    for q in 0..q_len {
        let mut best = 0;
        for i in 0..st.m {
            d[i] = quad(table.v(i, q), &st.invs[i]);
            if d[i] > d[best] {
                best = i;
            }
        }
        let row = &st.assign[q * st.m..(q + 1) * st.m];
        let avg: f64 = row.iter().zip(&d).map(|(a, s)| a * s).sum();
        gap = gap.max(d[best] - avg);
        targets.push(best);
    }
    (gap, targets)
}

/// Grid points whose mass is not entirely on a best-sensitivity item.
fn active_points(table: &InfoTable, st: &State, q_len: usize) -> Vec<usize> {
    let m = st.m;
    let mut d = vec![0.0; m];
    (0..q_len)
        .filter(|&q| {
            for i in 0..m {
                d[i] = quad(table.v(i, q), &st.invs[i]);
            }
            let best = d.iter().cloned().fold(f64::MIN, f64::max);
            let row = &st.assign[q * m..(q + 1) * m];
            row.iter().zip(&d).any(|(&a, &s)| a > 0.0 && s < best)
        })
        .collect()
}

/// Moves mass at each listed grid point to its best item until no exchange helps.
fn sequential_sweep(table: &InfoTable, st: &mut State, weights: &[f64], points: impl Iterator<Item = usize>) {
    let m = st.m;
    let mut d = vec![0.0; m];
    for q in points {
        let w = weights[q];
        if w <= 0.0 {
            continue;
        }
        for _ in 0..2 * m {
            let mut best = 0;
            for i in 0..m {
                d[i] = quad(table.v(i, q), &st.invs[i]);
                if d[i] > d[best] {
                    best = i;
                }
            }
            let mut worst: Option<usize> = None;
            for j in 0..m {
                if j != best && st.assign[q * m + j] > 0.0 && worst.map_or(true, |k| d[j] < d[k]) {
                    worst = Some(j);
                }
            }
            let Some(j) = worst else { break };
            if d[j] >= d[best] * (1.0 - 1e-13) {
                break;
            }
            let held = st.assign[q * m + j];
            let alpha = w * d[best];
            let beta = w * d[j];
            // minimiser of -ln(1 + αt) - ln(1 - βt)
            let mut t = if beta > 0.0 { ((alpha - beta) / (2.0 * alpha * beta)).min(held) } else { held };
            if beta > 0.0 && t * beta > 1.0 - 1e-9 {
                t = (1.0 - 1e-9) / beta;
            }
            if t <= 1e-15 {
                break;
            }
            let (vb, vj) = (*table.v(best, q), *table.v(j, q));
            let mut new_j = st.infos[j] - (t * w) * vj * vj.transpose();
            new_j = 0.5 * (new_j + new_j.transpose());
            let Ok(inv_j) = inverse_checked(&new_j, j) else { break };
            let new_b = st.infos[best] + (t * w) * vb * vb.transpose();
            let Ok(inv_b) = inverse_checked(&new_b, best) else { break };
            st.criterion += -(1.0 + alpha * t).ln() - (1.0 - beta * t).ln();
            st.infos[j] = new_j;
            st.infos[best] = new_b;
            st.invs[j] = inv_j;
            st.invs[best] = inv_b;
            if t >= held {
                st.assign[q * m + j] = 0.0;
            } else {
                st.assign[q * m + j] = held - t;
            }
            st.assign[q * m + best] = (st.assign[q * m + best] + t).min(1.0);
        }
    }
}

/// Gives item `i` an equal share of every grid point, rescaling the others.
fn reseed_item(assign: &mut [f64], m: usize, i: usize) {
    let share = 1.0 / m as f64;
    for row in assign.chunks_exact_mut(m) {
        let others: f64 = row.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, x)| x).sum();
        for (k, x) in row.iter_mut().enumerate() {
            if k == i {
                *x = share;
            } else if others > 0.0 {
                *x *= (1.0 - share) / others;
            } else {
                *x = share;
            }
        }
    }
}

fn initial_state(
    table: &InfoTable,
    grid: &AbilityGrid,
    m: usize,
) -> Result<State, DesignError> {
    let labels: Vec<usize> = (0..grid.len()).map(|q| q % m).collect();
    let mut design = RestrictedDesign::from_labels(grid.clone(), m, &labels)?;
    for _ in 0..=m {
        match State::evaluate(table, &design) {
            Ok(st) => return Ok(st),
            Err(DesignError::SingularInformation { item, .. }) => {
                let mut assign = design.assignment().to_vec();
                reseed_item(&mut assign, m, item);
                design = RestrictedDesign::from_parts_unchecked(grid.clone(), m, assign);
            }
            Err(e) => return Err(e),
        }
    }
    State::evaluate(table, &design)
}

/// Runs the exchange algorithm from a round-robin striped start.
///
/// A run that exhausts `max_iters` still returns its last design with
/// `converged = false`; see [`BlockOptimum::require_converged`].
pub fn optimize_block(
    block: &Block,
    grid: &AbilityGrid,
    opts: &ExchangeOptions,
) -> Result<BlockOptimum, DesignError> {
    let m = block.len();
    let table = InfoTable::new(&block.params(), grid);
    let q_len = grid.len();
    let weights = grid.weights();
    let mut st = initial_state(&table, grid, m)?;
    let mut trace = vec![st.criterion];
    let mut rho = opts.damping.clamp(MIN_DAMPING, 1.0);
    let mut batch = m > 1;
    let mut iterations = 0;
    let (mut gap, mut targets) = gap_and_targets(&table, &st, q_len);

    while gap > opts.tol && iterations < opts.max_iters {
        iterations += 1;
        if batch {
            let mut proposal = st.assign.clone();
            for (q, &t) in targets.iter().enumerate() {
                let row = &mut proposal[q * m..(q + 1) * m];
                for (i, x) in row.iter_mut().enumerate() {
                    *x = (1.0 - rho) * *x + if i == t { rho } else { 0.0 };
                }
            }
            let candidate = RestrictedDesign::from_parts_unchecked(grid.clone(), m, proposal);
            match State::evaluate(&table, &candidate) {
                Ok(next) if next.criterion < st.criterion => st = next,
                _ => {
                    rho = if rho > 0.5 { 0.5 } else { rho * 0.5 };
                    if rho < MIN_DAMPING {
                        batch = false;
                    }
                }
            }
        }
        sequential_sweep(&table, &mut st, weights, 0..q_len);
        // Near the optimum the remaining gap lives on a few grid points where
        // two items are almost tied. Neighbouring points there carry nearly
        // collinear information, so single sweeps crawl; revisiting only
        // those points is cheap and removes most of the crawl.
        let active = active_points(&table, &st, q_len);
        for _ in 0..LOCAL_SWEEPS {
            if active.is_empty() {
                break;
            }
            let before = st.criterion;
            sequential_sweep(&table, &mut st, weights, active.iter().copied());
            if !(st.criterion < before) {
                break;
            }
        }
        // refresh from scratch so rounding in the running updates cannot accumulate
        let design = RestrictedDesign::from_parts_unchecked(grid.clone(), m, st.assign.clone());
        st = State::evaluate(&table, &design)?;
        trace.push(st.criterion);
        (gap, targets) = gap_and_targets(&table, &st, q_len);
    }

    let summary = DesignSummary {
        criterion: st.criterion,
        per_item_info: st.infos.clone(),
        equivalence_gap: gap,
        iterations,
        converged: gap <= opts.tol,
        criterion_trace: trace,
    };
    let design = RestrictedDesign::from_parts_unchecked(grid.clone(), m, st.assign);
    Ok(BlockOptimum { design, summary })
}
