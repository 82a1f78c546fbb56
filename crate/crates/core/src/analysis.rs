//! Closed-form performance model for one source/destination pair with a
//! fixed per-channel power allocation and a destination placed uniformly in
//! a disk around the source (distance pdf `2d` on the unit disk).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::propagation::{
    radius_on_channel, sinr_at, ChannelPlan, PropagationParams, RadiusScaling, RateTable,
};
use crate::protocol::{max_packets, MacTimings};

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisScenario {
    /// Allocated power per channel, watts; one entry per channel in use.
    pub powers: Vec<f64>,
    /// Interference measured at the destination per channel, watts.
    pub interference: Vec<f64>,
    pub table: RateTable,
    /// Channel `m` of the scenario uses `plan.data_freqs[m]`.
    pub plan: ChannelPlan,
    pub params: PropagationParams,
    pub p_max: f64,
    /// Largest source/destination distance; radii are normalised by it.
    pub area_radius: f64,
    pub timings: MacTimings,
    pub radius_scaling: RadiusScaling,
}

impl AnalysisScenario {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let m = self.powers.len();
        if m == 0 {
            bad.push("analysis needs at least one channel".to_string());
        }
        if self.interference.len() != m {
            bad.push(format!(
                "{} powers but {} interference values",
                m,
                self.interference.len()
            ));
        }
        if self.plan.n_channels() < m {
            bad.push(format!(
                "{} channels analysed but the plan has {}",
                m,
                self.plan.n_channels()
            ));
        }
        if self.powers.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            bad.push("channel powers must be non-negative".to_string());
        }
        if self
            .interference
            .iter()
            .any(|p| !(p.is_finite() && *p >= 0.0))
        {
            bad.push("interference must be non-negative".to_string());
        }
        let total: f64 = self.powers.iter().sum();
        if total > self.p_max {
            bad.push(format!(
                "allocated power {total} exceeds p_max {}",
                self.p_max
            ));
        }
        if !(self.area_radius.is_finite() && self.area_radius > 0.0) {
            bad.push(format!(
                "area_radius must be positive (got {})",
                self.area_radius
            ));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }

    pub fn n_channels(&self) -> usize {
        self.powers.len()
    }

    /// Transmission radius of rate index `q` on channel `m`, metres.
    pub fn channel_radius(&self, m: usize, q: usize) -> f64 {
        radius_on_channel(
            self.table.ccc_radii()[q],
            self.plan.ccc_freq,
            self.plan.data_freqs[m],
            self.radius_scaling,
        )
    }

    fn interference_factor(&self, m: usize) -> f64 {
        (self.params.noise_power + self.interference[m]) / self.params.noise_power
    }
}

/// Longest distance at which the rate choice `choices[m]` (rate index, or
/// `None` for an unused channel) is reachable with the whole budget.
pub fn max_distance(choices: &[Option<usize>], scenario: &AnalysisScenario) -> Result<f64> {
    if choices.len() > scenario.plan.n_channels() || choices.len() > scenario.interference.len() {
        return Err(Error::invalid("more choices than channels"));
    }
    let mut sum = 0.0;
    let mut any = false;
    for (m, c) in choices.iter().enumerate() {
        if let Some(q) = c {
            if *q >= scenario.table.len() {
                return Err(Error::invalid(format!("rate index {q} out of range")));
            }
            sum += scenario.channel_radius(m, *q).powi(-4) * scenario.interference_factor(m);
            any = true;
        }
    }
    if !any {
        return Err(Error::invalid("no channel carries a rate"));
    }
    Ok(sum.powf(-0.25))
}

/// Fourth root of the channel's power share, discounted by its interference.
pub fn gamma(m: usize, scenario: &AnalysisScenario) -> f64 {
    let pn = scenario.params.noise_power;
    (scenario.powers[m] * pn / (scenario.p_max * (pn + scenario.interference[m]))).powf(0.25)
}

/// Probability of each outcome on channel `m`: index 0 is "no rate", index
/// `q + 1` is rate `q` of the table. Sums to one.
pub fn rate_probabilities(m: usize, scenario: &AnalysisScenario) -> Vec<f64> {
    let g = gamma(m, scenario);
    let q_count = scenario.table.len();
    // reach[q]: normalised distance below which rate q is met, capped at 1
    let reach: Vec<f64> = (0..q_count)
        .map(|q| (g * scenario.channel_radius(m, q) / scenario.area_radius).min(1.0))
        .collect();
    let mut probs = vec![0.0; q_count + 1];
    probs[0] = 1.0 - reach[0].powi(2);
    for q in 0..q_count {
        let outer = reach[q].powi(2);
        let inner = if q + 1 < q_count {
            reach[q + 1].powi(2)
        } else {
            0.0
        };
        probs[q + 1] = outer - inner;
    }
    probs
}

/// Expected aggregate rate, bit/s.
pub fn expected_rate(scenario: &AnalysisScenario) -> f64 {
    (0..scenario.n_channels())
        .map(|m| {
            rate_probabilities(m, scenario)
                .iter()
                .skip(1)
                .zip(scenario.table.rates())
                .map(|(p, r)| p * r)
                .sum::<f64>()
        })
        .sum()
}

/// Expected-value chain from the mean rate to the mean throughput.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputEstimate {
    pub expected_rate: f64,
    pub expected_packets: u32,
    pub expected_burst_time: f64,
    pub expected_throughput: f64,
}

/// Packet count and burst time evaluated at the expected rate, then
/// delivered bits over burst time. Zero when not one packet fits.
pub fn expected_throughput(scenario: &AnalysisScenario) -> ThroughputEstimate {
    throughput_at_rate(expected_rate(scenario), &scenario.timings)
}

/// Burst throughput for a pair running at `rate`.
pub fn throughput_at_rate(rate: f64, timings: &MacTimings) -> ThroughputEstimate {
    let n = if rate > 0.0 {
        max_packets(rate, timings)
    } else {
        0
    };
    if n == 0 {
        return ThroughputEstimate {
            expected_rate: rate,
            expected_packets: 0,
            expected_burst_time: 0.0,
            expected_throughput: 0.0,
        };
    }
    let t = timings.burst_time(n, rate);
    ThroughputEstimate {
        expected_rate: rate,
        expected_packets: n,
        expected_burst_time: t,
        expected_throughput: n as f64 * timings.l_data / t,
    }
}

/// Per-channel table plus a `total` row: Γ, outcome probabilities
/// (`pr_0` is no rate), expected rate, packets, burst time and throughput.
pub fn write_analysis_csv<W: std::io::Write>(scenario: &AnalysisScenario, out: W) -> Result<()> {
    let q_count = scenario.table.len();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["channel".to_string(), "gamma".to_string()];
    header.extend((0..=q_count).map(|q| format!("pr_{q}")));
    header.extend(
        [
            "expected_rate_bps",
            "expected_packets",
            "expected_burst_s",
            "expected_throughput_bps",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    let tail = |t: ThroughputEstimate| {
        [
            t.expected_rate.to_string(),
            t.expected_packets.to_string(),
            t.expected_burst_time.to_string(),
            t.expected_throughput.to_string(),
        ]
    };
    for m in 0..scenario.n_channels() {
        let probs = rate_probabilities(m, scenario);
        let rate: f64 = probs
            .iter()
            .skip(1)
            .zip(scenario.table.rates())
            .map(|(p, r)| p * r)
            .sum();
        let mut row = vec![(m + 1).to_string(), gamma(m, scenario).to_string()];
        row.extend(probs.iter().map(|p| p.to_string()));
        row.extend(tail(throughput_at_rate(rate, &scenario.timings)));
        w.write_record(&row)?;
    }
    let mut row = vec!["total".to_string(), String::new()];
    row.extend((0..=q_count).map(|_| String::new()));
    row.extend(tail(expected_throughput(scenario)));
    w.write_record(&row)?;
    w.flush()?;
    Ok(())
}

/// Monte Carlo estimate of [`rate_probabilities`]: distances drawn with pdf
/// `2d` over `[0, area_radius]`, each classified by computing the SINR
/// directly and comparing it with the thresholds.
pub fn monte_carlo_probabilities(
    m: usize,
    scenario: &AnalysisScenario,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<f64>> {
    const CHUNK: usize = 65_536;
    let q_count = scenario.table.len();
    let chunks = samples.div_ceil(CHUNK);
    let counts = exec::map_range(exec, chunks, |c| -> Result<Vec<u64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let n = CHUNK.min(samples - c * CHUNK);
        let mut counts = vec![0u64; q_count + 1];
        for _ in 0..n {
            // inverse CDF of pdf 2d on the unit interval; keep d away from 0
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            let d = u.sqrt() * scenario.area_radius;
            let outcome = if scenario.powers[m] > 0.0 {
                let s = sinr_at(
                    scenario.powers[m],
                    d,
                    scenario.interference[m],
                    scenario.plan.ccc_freq,
                    scenario.plan.data_freqs[m],
                    &scenario.params,
                )?;
                scenario.table.best_rate_index(s).map_or(0, |q| q + 1)
            } else {
                0
            };
            counts[outcome] += 1;
        }
        Ok(counts)
    });
    let mut total = vec![0u64; q_count + 1];
    for c in counts {
        for (t, v) in total.iter_mut().zip(c?) {
            *t += v;
        }
    }
    Ok(total
        .into_iter()
        .map(|c| c as f64 / samples.max(1) as f64)
        .collect())
}
