//! Optimal allocation of calibration items to examinees under the
//! three-parameter logistic model.
//!
//! The crate computes locally D-optimal restricted designs for blocks of
//! calibration items, turns them into ability-interval routing rules, and
//! runs seeded simulations that compare the resulting item estimates with
//! those of random allocation.

pub mod blocks;
pub mod commands;
pub mod design;
pub mod estimation;
pub mod grid;
pub mod io;
pub mod irt;
pub mod metrics;
mod optim;
pub mod plot;
pub mod responses;
pub mod sim;
