/// Counters of protocol invariants that must stay at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Invariants {
    /// A grant transmitting on a channel a primary user holds.
    pub pu_violations: u64,
    /// A grant whose power exceeds the budget.
    pub power_violations: u64,
    /// An RTS sent under NAV, or two grants sharing a channel within
    /// interference range.
    pub nav_violations: u64,
    /// A DCUL whose interference differs from the overheard contributions.
    pub ledger_mismatches: u64,
}

impl Invariants {
    pub fn total(&self) -> u64 {
        self.pu_violations + self.power_violations + self.nav_violations + self.ledger_mismatches
    }
}

/// Result of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metrics {
    /// Simulated seconds.
    pub duration: f64,
    /// Delivered payload bits per flow.
    pub flow_bits: Vec<f64>,
    /// Burst airtime per flow, seconds.
    pub flow_busy: Vec<f64>,
    pub handshake_attempts: u64,
    /// Handshakes that reached a burst.
    pub handshake_success: u64,
    /// RTS lost to a collision at its destination.
    pub handshake_collisions: u64,
    /// RTS answered with silence because no channel or rate was available.
    pub handshake_refused: u64,
    pub completed_grants: u64,
    pub failed_grants: u64,
    /// Payload bits promised by every started grant.
    pub granted_bits: f64,
    /// Fraction of the run each data channel carried a burst.
    pub channel_utilization: Vec<f64>,
    pub invariants: Invariants,
}

impl Metrics {
    pub fn delivered_bits(&self) -> f64 {
        self.flow_bits.iter().sum()
    }

    /// Delivered bits per second over the whole network.
    pub fn network_throughput(&self) -> f64 {
        if self.duration > 0.0 {
            self.delivered_bits() / self.duration
        } else {
            0.0
        }
    }

    /// Delivered bits per second of burst airtime for one flow.
    pub fn flow_burst_throughput(&self, flow: usize) -> f64 {
        if self.flow_busy[flow] > 0.0 {
            self.flow_bits[flow] / self.flow_busy[flow]
        } else {
            0.0
        }
    }

    /// Mean over flows of [`Metrics::flow_burst_throughput`]: what a node
    /// achieves while it holds the data channels. A flow that never
    /// transmitted counts as zero.
    pub fn avg_node_throughput(&self) -> f64 {
        if self.flow_bits.is_empty() {
            return 0.0;
        }
        let sum: f64 = (0..self.flow_bits.len())
            .map(|f| self.flow_burst_throughput(f))
            .sum();
        sum / self.flow_bits.len() as f64
    }
}
