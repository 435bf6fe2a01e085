//! Ability scoring and item fitting with abilities held fixed.

mod ability;
mod fit;

pub use ability::{eap_ability, percentile_transform, AbilityEstimate, EapScorer};
pub use fit::{
    fit_item_fixed_theta, item_log_likelihood, map_preestimate, FitOptions, FitStatus, ItemFit,
    Priors,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("{thetas} abilities but {responses} responses")]
    LengthMismatch { thetas: usize, responses: usize },
    #[error("no observed responses to fit")]
    NoResponses,
    #[error("invalid fit options: {0}")]
    InvalidOptions(String),
}
