//! Deterministic discrete-event simulation of MCD-MAC and two baselines.
//!
//! Nodes share one control channel and `M` data channels whose primary-user
//! occupancy is redrawn every slot. Sources are saturated. A run is a pure
//! function of its [`ScenarioConfig`], seed included.

mod baselines;
mod engine;
mod metrics;
mod placement;
pub mod sweep;

use serde::{Deserialize, Serialize};

use crate::allocator::{solve_dp, Allocation, AllocationProblem};
use crate::error::{Error, Result};
use crate::protocol::LinkContext;

pub use baselines::{baseline_multi_radio_split, baseline_single_channel};
pub use engine::{run, run_traced, write_trace, TraceKind, TraceRecord};
pub use metrics::{Invariants, Metrics};
pub use placement::{place_nodes, Placement};

/// How a destination turns a channel/power problem into a grant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Joint multi-channel allocation by dynamic programming.
    #[default]
    McdMac,
    /// The best single (channel, rate) pair.
    SingleChannelBest,
    /// `radios` best channels, each with an equal share of the budget.
    MultiRadioSplit,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [
        Strategy::McdMac,
        Strategy::SingleChannelBest,
        Strategy::MultiRadioSplit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::McdMac => "mcd_mac",
            Strategy::SingleChannelBest => "single_channel_best",
            Strategy::MultiRadioSplit => "multi_radio_split",
        }
    }

    pub fn allocate(self, problem: &AllocationProblem, radios: usize) -> Allocation {
        match self {
            Strategy::McdMac => solve_dp(problem),
            Strategy::SingleChannelBest => baseline_single_channel(problem),
            Strategy::MultiRadioSplit => baseline_multi_radio_split(problem, radios),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown strategy {s:?}")))
    }
}

/// Everything one simulation run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub flows: usize,
    pub nodes: usize,
    /// Nodes are dropped uniformly in a disk of this diameter, metres.
    pub area_diameter: f64,
    pub ctx: LinkContext,
    pub p_occupy: f64,
    /// Seconds per primary-user slot.
    pub slot_duration: f64,
    /// Sensing period at the start of each slot, seconds.
    pub sensing_duration: f64,
    pub strategy: Strategy,
    pub radios: usize,
    pub slots: u64,
    /// Background interference on every data channel, watts.
    pub interference_w: f64,
}

impl ScenarioConfig {
    pub fn n_channels(&self) -> usize {
        self.ctx.plan.n_channels()
    }

    /// Simulated seconds.
    pub fn duration(&self) -> f64 {
        self.slots as f64 * self.slot_duration
    }

    /// Quiet time kept at the end of every slot so that any handshake
    /// started in the data period finishes before the occupancy changes.
    pub fn slot_guard(&self) -> f64 {
        let t = &self.ctx.timings;
        t.rts_time()
            + t.cts_time()
            + t.res_time()
            + 4.0 * t.t_sifs
            + t.burst_window()
            + 3.0 * t.slot_time
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.flows == 0 {
            bad.push("network.flows must be at least 1".to_string());
        }
        if self.nodes < 2 || self.nodes < self.flows {
            bad.push(format!(
                "network.nodes must be at least 2 and at least flows (got {})",
                self.nodes
            ));
        }
        if !(self.area_diameter.is_finite() && self.area_diameter > 0.0) {
            bad.push(format!(
                "network.area_diameter_m must be positive (got {})",
                self.area_diameter
            ));
        }
        if !(0.0..=1.0).contains(&self.p_occupy) {
            bad.push(format!(
                "channels.p_occupy must lie in [0, 1] (got {})",
                self.p_occupy
            ));
        }
        if !(self.sensing_duration >= 0.0 && self.sensing_duration.is_finite()) {
            bad.push(format!(
                "channels.sensing_s must be non-negative (got {})",
                self.sensing_duration
            ));
        }
        if !(self.slot_duration.is_finite()
            && self.slot_duration > self.sensing_duration + self.slot_guard())
        {
            bad.push(format!(
                "channels.slot_s must exceed sensing_s plus {:.6} s of handshake guard (got {})",
                self.slot_guard(),
                self.slot_duration
            ));
        }
        if self.radios == 0 {
            bad.push("simulation.radios must be at least 1".to_string());
        }
        if self.slots == 0 {
            bad.push("simulation.slots must be at least 1".to_string());
        }
        if !(self.interference_w.is_finite() && self.interference_w >= 0.0) {
            bad.push(format!(
                "simulation.interference_w must be non-negative (got {})",
                self.interference_w
            ));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }
}
