use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::design::ExchangeOptions;
use crate::estimation::{FitOptions, Priors};
use crate::grid::GridOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    /// Theoretical efficiencies only; nothing is simulated.
    I,
    /// Allocation and fitting by true abilities.
    II,
    /// Allocation and fitting by normalized EAP estimates.
    III,
    /// As III, with blocks and rules built from small-sample pre-estimates.
    IV,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignChoice {
    Optimal,
    Random,
    Both,
}

impl DesignChoice {
    pub fn optimal(self) -> bool {
        matches!(self, DesignChoice::Optimal | DesignChoice::Both)
    }

    pub fn random(self) -> bool {
        matches!(self, DesignChoice::Random | DesignChoice::Both)
    }
}

/// Which ability estimates item fits treat as known in cases III and IV.
/// Allocation always uses the normalized scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AbilityScale {
    /// Normal scores of the EAP estimates.
    Normalized,
    /// The EAP estimates themselves.
    Raw,
}

/// Simulation settings, read from JSON. The short names `N`, `S`, `l` and
/// `m` are accepted as aliases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Examinees per replicate.
    #[serde(alias = "N")]
    pub examinees: usize,
    #[serde(alias = "S")]
    pub replicates: usize,
    /// Number of blocks.
    #[serde(alias = "l")]
    pub blocks: usize,
    /// Items per block; derived from the bank when absent.
    #[serde(alias = "m", skip_serializing_if = "Option::is_none")]
    pub block_size: Option<usize>,
    pub case: Case,
    pub design: DesignChoice,
    pub seed: u64,
    /// Examinees in the pre-estimation sample of case IV.
    pub n_pre: usize,
    pub grid: GridOptions,
    pub exchange: ExchangeOptions,
    pub fit: FitOptions,
    pub fit_scale: AbilityScale,
    pub priors: Priors,
    /// Calibration bank with true parameters; the bundled one when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration_bank: Option<PathBuf>,
    /// Operational bank; the bundled synthetic one when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operational_bank: Option<PathBuf>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            examinees: 39321,
            replicates: 2000,
            blocks: 10,
            block_size: None,
            case: Case::II,
            design: DesignChoice::Both,
            seed: 2018,
            n_pre: 200,
            grid: GridOptions::default(),
            exchange: ExchangeOptions::default(),
            fit: FitOptions::default(),
            fit_scale: AbilityScale::Raw,
            priors: Priors::default(),
            calibration_bank: None,
            operational_bank: None,
        }
    }
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))
    }

    /// Checks the settings against a calibration bank of `items` items.
    pub fn validate(&self, items: usize) -> Result<(), SimError> {
        let fail = |msg: String| Err(SimError::Config(msg));
        if self.case != Case::I && (self.examinees == 0 || self.replicates == 0) {
            return fail("N and S must be at least 1".into());
        }
        if self.blocks == 0 || items % self.blocks != 0 {
            return fail(format!("{items} calibration items cannot form {} equal blocks", self.blocks));
        }
        if let Some(m) = self.block_size {
            if m * self.blocks != items {
                return fail(format!("l·m = {}·{m} does not equal {items} calibration items", self.blocks));
            }
        }
        if self.case == Case::IV && self.n_pre == 0 {
            return fail("case IV needs n_pre >= 1".into());
        }
        Ok(())
    }
}
