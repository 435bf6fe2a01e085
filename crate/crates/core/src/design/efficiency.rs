//! Theoretical efficiency of one design relative to another, using the
//! inverse information as the asymptotic covariance of the item estimates.

use super::{inverse_checked, log_det_checked, DesignError, InfoTable, RestrictedDesign};
use crate::blocks::Block;
use crate::irt::{grad_prob, InfoMatrix};

/// Per-item efficiencies of design A over design B; values above 1 favour A.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoreticalEfficiency {
    /// `(det M_A / det M_B)^(1/3)`.
    pub re_d: f64,
    /// `tr(M_B⁻¹) / tr(M_A⁻¹)`.
    pub re_a: f64,
    /// Ratio of population-averaged ICC variances, `E_g[∇pᵀ M_B⁻¹ ∇p] / E_g[∇pᵀ M_A⁻¹ ∇p]`.
    pub re_cc: f64,
}

fn infos(design: &RestrictedDesign, block: &Block) -> Result<Vec<InfoMatrix>, DesignError> {
    design.check_block(block)?;
    Ok(InfoTable::new(&block.params(), design.grid()).all_information(design))
}

pub fn theoretical_efficiency_per_item(
    design_a: &RestrictedDesign,
    design_b: &RestrictedDesign,
    block: &Block,
) -> Result<Vec<TheoreticalEfficiency>, DesignError> {
    let ma = infos(design_a, block)?;
    let mb = infos(design_b, block)?;
    let grid = design_a.grid();
    let mut out = Vec::with_capacity(block.len());
    for (i, item) in block.items().iter().enumerate() {
        let ld = log_det_checked(&ma[i], i)? - log_det_checked(&mb[i], i)?;
        let ia = inverse_checked(&ma[i], i)?;
        let ib = inverse_checked(&mb[i], i)?;
        let (mut cc_a, mut cc_b) = (0.0, 0.0);
        for (&t, &w) in grid.points().iter().zip(grid.weights()) {
            let g = grad_prob(t, &item.params);
            cc_a += w * (g.transpose() * ia * g)[0];
            cc_b += w * (g.transpose() * ib * g)[0];
        }
        out.push(TheoreticalEfficiency {
            re_d: (ld / 3.0).exp(),
            re_a: ib.trace() / ia.trace(),
            re_cc: cc_b / cc_a,
        });
    }
    Ok(out)
}

/// `(Π_i det M_i(A) / det M_i(B))^(1/(3m))`.
pub fn theoretical_efficiency_per_block(
    design_a: &RestrictedDesign,
    design_b: &RestrictedDesign,
    block: &Block,
) -> Result<f64, DesignError> {
    let ma = infos(design_a, block)?;
    let mb = infos(design_b, block)?;
    let mut total = 0.0;
    for i in 0..block.len() {
        total += log_det_checked(&ma[i], i)? - log_det_checked(&mb[i], i)?;
    }
    Ok((total / (3.0 * block.len() as f64)).exp())
}
