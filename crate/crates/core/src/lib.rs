//! Multi-channel diversity MAC (MCD-MAC) for power-constrained cognitive ad
//! hoc networks.
//!
//! A single-radio secondary node may aggregate several opportunistic data
//! channels at once, provided the sum of its per-channel transmit powers stays
//! under one budget. The crate is organised bottom-up:
//!
//! - [`propagation`]: two-ray path loss, SINR and rate-table calibration.
//! - [`channel_model`]: ON/OFF primary-user occupancy and perfect sensing.
//! - [`allocator`]: the joint power/channel allocation as a multiple-choice
//!   knapsack, solved by staged dynamic programming with dominance pruning,
//!   plus an exhaustive oracle.
//! - [`protocol`]: data channel usage lists, the RTS/CTS/RES handshake,
//!   overhearing, NAV and fairness-bounded grants.
//! - [`analysis`]: closed-form rate probabilities and expected throughput.
//! - [`simulator`]: a deterministic discrete-event engine and baselines.
//! - [`config`]: the TOML scenario file.
//!
//! Data-parallel loops (sweeps, Monte Carlo, instance batches) go through
//! [`exec`], which uses rayon when the `parallel` feature is on and a plain
//! iterator otherwise. Results never depend on which path ran.

pub mod allocator;
pub mod analysis;
pub mod channel_model;
pub mod config;
pub mod error;
pub mod exec;
pub mod propagation;
pub mod protocol;
pub mod simulator;

pub use error::{Error, Result};
