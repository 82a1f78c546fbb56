//! The MCD-MAC node side: data channel usage lists (DCUL), the RTS/CTS/RES
//! handshake, overhearing updates, fairness-bounded grants and CCC backoff.

use rand::Rng;

use crate::allocator::{build_problem, solve_dp, Allocation, AllocationProblem};
use crate::error::{Error, Result};
use crate::propagation::{gain_from_rts, scale_gain, ChannelPlan, PropagationParams, RateTable};

/// MAC timing and framing constants.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacTimings {
    /// Seconds.
    pub t_sifs: f64,
    pub t_difs: f64,
    /// Backoff slot.
    pub slot_time: f64,
    /// Frame lengths in bits.
    pub l_data: f64,
    pub l_ack: f64,
    pub l_rts: f64,
    pub l_cts: f64,
    pub l_res: f64,
    /// Control-channel rate, bit/s.
    pub r_basic: f64,
    /// Smallest coherence time over the data channels, seconds.
    pub ct_min: f64,
    /// Interference a neighbour tolerates, watts.
    pub p_min_inf: f64,
    /// Fixed contention window in slots.
    pub contention_window: u32,
}

impl Default for MacTimings {
    fn default() -> Self {
        MacTimings {
            t_sifs: 10e-6,
            t_difs: 50e-6,
            slot_time: 20e-6,
            l_data: 8000.0,
            l_ack: 112.0,
            l_rts: 160.0,
            l_cts: 112.0,
            l_res: 112.0,
            r_basic: 2e6,
            ct_min: 10e-3,
            p_min_inf: 1e-9,
            contention_window: 32,
        }
    }
}

impl MacTimings {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        for (name, v) in [
            ("t_sifs", self.t_sifs),
            ("t_difs", self.t_difs),
            ("slot_time", self.slot_time),
            ("l_data", self.l_data),
            ("l_ack", self.l_ack),
            ("l_rts", self.l_rts),
            ("l_cts", self.l_cts),
            ("l_res", self.l_res),
            ("r_basic", self.r_basic),
            ("ct_min", self.ct_min),
            ("p_min_inf", self.p_min_inf),
        ] {
            if !(v.is_finite() && v > 0.0) {
                bad.push(format!("mac.{name} must be positive and finite (got {v})"));
            }
        }
        if self.contention_window == 0 {
            bad.push("mac.contention_window must be at least 1".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }

    /// Fairness bound: airtime of one data packet at the basic rate.
    pub fn t_max(&self) -> f64 {
        self.l_data / self.r_basic
    }

    /// Longest admissible burst, `min(CT_min, T_max)`.
    pub fn burst_window(&self) -> f64 {
        self.ct_min.min(self.t_max())
    }

    pub fn rts_time(&self) -> f64 {
        self.l_rts / self.r_basic
    }

    pub fn cts_time(&self) -> f64 {
        self.l_cts / self.r_basic
    }

    pub fn res_time(&self) -> f64 {
        self.l_res / self.r_basic
    }

    /// Burst duration for `n` packets at aggregate rate `rate`: data and ACK
    /// frames alternate with a SIFS between every pair.
    pub fn burst_time(&self, n: u32, rate: f64) -> f64 {
        let n = n as f64;
        (2.0 * n - 1.0) * self.t_sifs + n * (self.l_data + self.l_ack) / rate
    }
}

/// One DCUL row.
#[derive(Debug, Clone, PartialEq)]
pub struct DculEntry {
    pub channel: usize,
    /// A primary user holds the channel this slot.
    pub pu_status: bool,
    /// A neighbour's grant holds the channel.
    pub neighbor_status: bool,
    /// Watts; background plus every active overheard contribution.
    pub suffered_interference: f64,
    /// Watts; the most this node may transmit on the channel.
    pub max_allowed_power: f64,
}

/// Interference and power cap recorded from one overheard control packet.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Contribution {
    grant: u64,
    interference: f64,
    cap: f64,
}

/// Data channel usage list of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct Dcul {
    entries: Vec<DculEntry>,
    background: Vec<f64>,
    contributions: Vec<Vec<Contribution>>,
    p_max: f64,
}

impl Dcul {
    /// All channels free, no interference beyond `background` watts.
    pub fn new(n_channels: usize, p_max: f64, background: f64) -> Self {
        let entries = (0..n_channels)
            .map(|k| DculEntry {
                channel: k,
                pu_status: false,
                neighbor_status: false,
                suffered_interference: background,
                max_allowed_power: p_max,
            })
            .collect();
        Dcul {
            entries,
            background: vec![background; n_channels],
            contributions: vec![Vec::new(); n_channels],
            p_max,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[DculEntry] {
        &self.entries
    }

    pub fn entry(&self, k: usize) -> &DculEntry {
        &self.entries[k]
    }

    /// Load the sensing result of a new slot.
    pub fn set_pu_status(&mut self, occupied: &[bool]) {
        for (e, &o) in self.entries.iter_mut().zip(occupied) {
            e.pu_status = o;
        }
    }

    /// Record an overheard grant on channel `k`.
    pub fn add_contribution(&mut self, k: usize, grant: u64, interference: f64, cap: f64) {
        self.contributions[k].push(Contribution {
            grant,
            interference,
            cap,
        });
        self.refresh(k);
    }

    /// Drop everything recorded for `grant`. Releasing twice does nothing.
    pub fn release_grant(&mut self, grant: u64) {
        for k in 0..self.entries.len() {
            let before = self.contributions[k].len();
            self.contributions[k].retain(|c| c.grant != grant);
            if self.contributions[k].len() != before {
                self.refresh(k);
            }
        }
    }

    /// Number of grants currently recorded on channel `k`.
    pub fn active_on(&self, k: usize) -> usize {
        self.contributions[k].len()
    }

    fn refresh(&mut self, k: usize) {
        let list = &self.contributions[k];
        let e = &mut self.entries[k];
        e.suffered_interference = list
            .iter()
            .fold(self.background[k], |acc, c| acc + c.interference);
        e.max_allowed_power = list.iter().fold(self.p_max, |acc, c| acc.min(c.cap));
        e.neighbor_status = !list.is_empty();
    }
}

/// Channels free of primary users and of neighbour grants on both sides.
pub fn common_channels(mine: &Dcul, peer: &Dcul) -> Vec<usize> {
    mine.entries
        .iter()
        .zip(&peer.entries)
        .filter(|(a, b)| !a.pu_status && !b.pu_status && !a.neighbor_status && !b.neighbor_status)
        .map(|(a, _)| a.channel)
        .collect()
}

/// Burst admitted for one node pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurstTiming {
    pub n_packets: u32,
    /// Aggregate rate over all granted channels, bit/s.
    pub rate: f64,
    /// Seconds from the first data frame to the last ACK.
    pub burst_time: f64,
}

/// Largest packet count whose burst fits within `min(CT_min, T_max)`.
/// Fails when not even one packet fits.
pub fn compute_grant(rate: f64, timings: &MacTimings) -> Result<BurstTiming> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::domain(format!("rate must be positive (got {rate})")));
    }
    let n = max_packets(rate, timings);
    if n < 1 {
        return Err(Error::domain(format!(
            "grant refused: one packet at {rate} bit/s needs {:.6} s, window is {:.6} s",
            timings.burst_time(1, rate),
            timings.burst_window()
        )));
    }
    Ok(BurstTiming {
        n_packets: n,
        rate,
        burst_time: timings.burst_time(n, rate),
    })
}

/// `N_SD`, possibly zero.
pub fn max_packets(rate: f64, timings: &MacTimings) -> u32 {
    let window = timings.burst_window();
    // closed form of burst_time(n) <= window, then settle rounding exactly
    let estimate = (rate * (window + timings.t_sifs))
        / (timings.l_data + timings.l_ack + 2.0 * timings.t_sifs * rate);
    let mut n = estimate.floor().clamp(0.0, u32::MAX as f64 - 1.0) as u32;
    while n > 0 && timings.burst_time(n, rate) > window {
        n -= 1;
    }
    while timings.burst_time(n + 1, rate) <= window {
        n += 1;
    }
    n
}

/// NAV set by an overheard CTS: the RES, the burst and the SIFS gaps.
pub fn nav_after_cts(n_packets: u32, rate: f64, timings: &MacTimings) -> f64 {
    let n = n_packets as f64;
    timings.l_res / timings.r_basic
        + n * (timings.l_data + timings.l_ack) / rate
        + (2.0 * n + 1.0) * timings.t_sifs
}

/// NAV set by an overheard RES: one SIFS plus the burst.
pub fn nav_after_res(n_packets: u32, rate: f64, timings: &MacTimings) -> f64 {
    timings.t_sifs + timings.burst_time(n_packets, rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketKind {
    Rts,
    Cts,
    Res,
}

/// A data channel in a grant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrantedChannel {
    pub channel: usize,
    pub power: f64,
    pub rate_index: usize,
    pub rate: f64,
}

/// Allocation carried by CTS and RES.
#[derive(Debug, Clone, PartialEq)]
pub struct GrantInfo {
    pub grant_id: u64,
    pub channels: Vec<GrantedChannel>,
    pub timing: BurstTiming,
}

impl GrantInfo {
    pub fn total_power(&self) -> f64 {
        self.channels.iter().map(|c| c.power).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Rts(Dcul),
    Grant(GrantInfo),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlPacket {
    pub kind: PacketKind,
    pub source: usize,
    pub destination: usize,
    pub payload: Payload,
}

impl ControlPacket {
    pub fn grant(&self) -> Option<&GrantInfo> {
        match &self.payload {
            Payload::Grant(g) => Some(g),
            Payload::Rts(_) => None,
        }
    }

    /// The RES answering this CTS, with identical allocation content.
    pub fn res_from_cts(cts: &ControlPacket) -> Option<ControlPacket> {
        if cts.kind != PacketKind::Cts {
            return None;
        }
        Some(ControlPacket {
            kind: PacketKind::Res,
            source: cts.destination,
            destination: cts.source,
            payload: cts.payload.clone(),
        })
    }
}

/// Radio and MAC context shared by every node of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkContext {
    pub params: PropagationParams,
    pub plan: ChannelPlan,
    pub table: RateTable,
    pub timings: MacTimings,
    pub p_max: f64,
}

/// Destination side of the handshake: answer `rts` (received at `p_rx`
/// watts) with a CTS, or stay silent.
pub fn on_rts_received(
    rts: &ControlPacket,
    p_rx: f64,
    my_dcul: &Dcul,
    ctx: &LinkContext,
    grant_id: u64,
) -> Option<ControlPacket> {
    on_rts_received_with(rts, p_rx, my_dcul, ctx, grant_id, solve_dp)
}

/// As [`on_rts_received`] with a different allocation strategy.
pub fn on_rts_received_with<F>(
    rts: &ControlPacket,
    p_rx: f64,
    my_dcul: &Dcul,
    ctx: &LinkContext,
    grant_id: u64,
    allocate: F,
) -> Option<ControlPacket>
where
    F: Fn(&AllocationProblem) -> Allocation,
{
    let Payload::Rts(peer) = &rts.payload else {
        return None;
    };
    if rts.kind != PacketKind::Rts {
        return None;
    }
    let common = common_channels(my_dcul, peer);
    if common.is_empty() {
        return None;
    }
    let h0 = gain_from_rts(p_rx, ctx.p_max).ok()?;
    let gains: Vec<f64> = common
        .iter()
        .map(|&k| scale_gain(h0, ctx.plan.ccc_freq, ctx.plan.data_freqs[k]))
        .collect();
    let interference: Vec<f64> = common
        .iter()
        .map(|&k| my_dcul.entry(k).suffered_interference)
        .collect();
    let caps: Vec<f64> = common
        .iter()
        .map(|&k| {
            my_dcul
                .entry(k)
                .max_allowed_power
                .min(peer.entry(k).max_allowed_power)
        })
        .collect();
    let problem = build_problem(
        &gains,
        &interference,
        &caps,
        &ctx.table,
        ctx.params.noise_power,
        ctx.p_max,
    )
    .ok()?;
    let allocation = allocate(&problem);
    if allocation.total_rate <= 0.0 {
        return None;
    }
    let timing = compute_grant(allocation.total_rate, &ctx.timings).ok()?;
    let channels = allocation
        .choices
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            c.map(|q| GrantedChannel {
                channel: common[i],
                power: allocation.powers[i],
                rate_index: q,
                rate: problem.rate(i, q),
            })
        })
        .collect();
    Some(ControlPacket {
        kind: PacketKind::Cts,
        source: rts.destination,
        destination: rts.source,
        payload: Payload::Grant(GrantInfo {
            grant_id,
            channels,
            timing,
        }),
    })
}

/// Effect of an overheard CTS or RES on the listener.
#[derive(Debug, Clone, PartialEq)]
pub struct OverheardUpdate {
    /// NAV duration from the end of the overheard packet, seconds.
    pub nav: f64,
    /// `(channel, interference increment)` added to the DCUL.
    pub increments: Vec<(usize, f64)>,
}

/// Update `my_dcul` from a CTS/RES received at `p_rx` watts. The sender is
/// assumed to transmit control packets at full power.
pub fn overhear(
    pkt: &ControlPacket,
    p_rx: f64,
    my_dcul: &mut Dcul,
    ctx: &LinkContext,
) -> Option<OverheardUpdate> {
    let grant = pkt.grant()?;
    let h0 = gain_from_rts(p_rx, ctx.p_max).ok()?;
    let mut increments = Vec::with_capacity(grant.channels.len());
    for gc in &grant.channels {
        let h = scale_gain(h0, ctx.plan.ccc_freq, ctx.plan.data_freqs[gc.channel]);
        let added = gc.power * h;
        let cap = if h > 0.0 {
            (ctx.timings.p_min_inf / h).min(ctx.p_max)
        } else {
            ctx.p_max
        };
        my_dcul.add_contribution(gc.channel, grant.grant_id, added, cap);
        increments.push((gc.channel, added));
    }
    let t = &grant.timing;
    let nav = match pkt.kind {
        PacketKind::Cts => nav_after_cts(t.n_packets, t.rate, &ctx.timings),
        PacketKind::Res => nav_after_res(t.n_packets, t.rate, &ctx.timings),
        PacketKind::Rts => return None,
    };
    Some(OverheardUpdate { nav, increments })
}

/// Backoff state of one contender on the control channel.
///
/// The counter runs only while the medium has been idle for a DIFS; it is
/// frozen, keeping the slots already elapsed, as soon as the medium turns
/// busy.
#[derive(Debug, Clone, PartialEq)]
pub struct Backoff {
    remaining: u32,
    /// Start of the current idle period, if counting.
    idle_since: Option<f64>,
}

impl Backoff {
    /// Draw a fresh counter uniformly from `0..window`.
    pub fn draw<R: Rng + ?Sized>(window: u32, rng: &mut R) -> Self {
        Backoff {
            remaining: rng.random_range(0..window.max(1)),
            idle_since: None,
        }
    }

    pub fn with_slots(slots: u32) -> Self {
        Backoff {
            remaining: slots,
            idle_since: None,
        }
    }

    pub fn remaining(&self) -> u32 {
        self.remaining
    }

    pub fn is_counting(&self) -> bool {
        self.idle_since.is_some()
    }

    /// The medium became idle at `now`; returns when the RTS goes out if
    /// nothing interrupts.
    pub fn resume(&mut self, now: f64, timings: &MacTimings) -> f64 {
        self.idle_since = Some(now);
        self.expiry(timings).expect("just resumed")
    }

    /// Scheduled transmit time while counting.
    pub fn expiry(&self, timings: &MacTimings) -> Option<f64> {
        self.idle_since
            .map(|t| t + timings.t_difs + self.remaining as f64 * timings.slot_time)
    }

    /// The medium became busy at `now`: keep only the slots not yet elapsed.
    pub fn freeze(&mut self, now: f64, timings: &MacTimings) {
        if let Some(start) = self.idle_since.take() {
            let counted = now - start - timings.t_difs;
            if counted > 0.0 {
                let slots = (counted / timings.slot_time + 1e-9).floor() as u32;
                self.remaining = self.remaining.saturating_sub(slots);
            }
        }
    }
}

/// Outcome of a saturated contention run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContentionStats {
    pub transmissions: u64,
    pub collided: u64,
    pub successes: u64,
}

impl ContentionStats {
    /// Fraction of RTS transmissions that overlapped another.
    pub fn collision_rate(&self) -> f64 {
        if self.transmissions == 0 {
            0.0
        } else {
            self.collided as f64 / self.transmissions as f64
        }
    }
}

/// `n` always-backlogged contenders in one collision domain, driven by
/// [`Backoff`] in continuous time until `rounds` medium accesses happened.
/// Every access occupies the medium for one RTS time.
pub fn simulate_contention<R: Rng + ?Sized>(
    n: usize,
    rounds: usize,
    timings: &MacTimings,
    rng: &mut R,
) -> ContentionStats {
    let cw = timings.contention_window;
    let mut nodes: Vec<Backoff> = (0..n).map(|_| Backoff::draw(cw, rng)).collect();
    let mut stats = ContentionStats {
        transmissions: 0,
        collided: 0,
        successes: 0,
    };
    let mut now = 0.0;
    for _ in 0..rounds {
        let expiries: Vec<f64> = nodes.iter_mut().map(|b| b.resume(now, timings)).collect();
        let first = expiries.iter().copied().fold(f64::INFINITY, f64::min);
        let winners: Vec<usize> = expiries
            .iter()
            .enumerate()
            .filter(|(_, &t)| (t - first).abs() < timings.slot_time * 1e-6)
            .map(|(i, _)| i)
            .collect();
        for (i, b) in nodes.iter_mut().enumerate() {
            if !winners.contains(&i) {
                b.freeze(first, timings);
            }
        }
        stats.transmissions += winners.len() as u64;
        if winners.len() > 1 {
            stats.collided += winners.len() as u64;
        } else {
            stats.successes += 1;
        }
        for &w in &winners {
            nodes[w] = Backoff::draw(cw, rng);
        }
        now = first + timings.rts_time();
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx() -> LinkContext {
        let params = PropagationParams::default();
        LinkContext {
            params,
            plan: ChannelPlan::default_six(),
            table: RateTable::default_for(0.1, &params).unwrap(),
            timings: MacTimings::default(),
            p_max: 0.1,
        }
    }

    fn with_free(n: usize, free: &[usize]) -> Dcul {
        let mut d = Dcul::new(n, 0.1, 0.0);
        let occ: Vec<bool> = (0..n).map(|k| !free.contains(&k)).collect();
        d.set_pu_status(&occ);
        d
    }

    fn rts_from(src: usize, dst: usize, dcul: Dcul) -> ControlPacket {
        ControlPacket {
            kind: PacketKind::Rts,
            source: src,
            destination: dst,
            payload: Payload::Rts(dcul),
        }
    }

    #[test]
    fn common_channel_cases() {
        assert_eq!(
            common_channels(&with_free(4, &[0, 1, 2, 3]), &with_free(4, &[0, 1, 2, 3])),
            vec![0, 1, 2, 3]
        );
        assert!(common_channels(&with_free(4, &[0, 1]), &with_free(4, &[2, 3])).is_empty());
        assert_eq!(
            common_channels(&with_free(6, &[1, 3, 5]), &with_free(6, &[3, 4, 5])),
            vec![3, 5]
        );
    }

    #[test]
    fn neighbour_grants_gate_channels() {
        let mut a = with_free(3, &[0, 1, 2]);
        a.add_contribution(1, 9, 1e-12, 0.05);
        assert_eq!(common_channels(&a, &with_free(3, &[0, 1, 2])), vec![0, 2]);
    }

    #[test]
    fn grant_worked_example() {
        let t = MacTimings::default();
        assert!((t.t_max() - 4e-3).abs() < 1e-15);
        let g = compute_grant(11e6, &t).unwrap();
        assert_eq!(g.n_packets, 5);
        assert!((g.burst_time - 3.7773e-3).abs() < 1e-6);
        assert!(t.burst_time(6, 11e6) > 4e-3);
    }

    #[test]
    fn basic_rate_cannot_fit_a_packet_with_ack() {
        let t = MacTimings::default();
        assert!(compute_grant(2e6, &t).is_err());
        assert_eq!(compute_grant(4e6, &t).unwrap().n_packets, 1);
    }

    #[test]
    fn vanishing_window_refuses() {
        let t = MacTimings {
            ct_min: 1e-9,
            ..MacTimings::default()
        };
        assert!(compute_grant(11e6, &t).is_err());
        assert!(compute_grant(0.0, &t).is_err());
    }

    #[test]
    fn grant_is_maximal() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..2000 {
            let t = MacTimings {
                ct_min: rng.random_range(1e-4..2e-2),
                t_sifs: rng.random_range(1e-6..5e-5),
                l_data: rng.random_range(800.0..12000.0),
                ..MacTimings::default()
            };
            let rate = rng.random_range(1e6..60e6);
            let n = max_packets(rate, &t);
            let w = t.burst_window();
            if n >= 1 {
                assert!(t.burst_time(n, rate) <= w);
            }
            assert!(t.burst_time(n + 1, rate) > w);
        }
    }

    #[test]
    fn nav_worked_example() {
        let t = MacTimings::default();
        let nav = nav_after_cts(5, 11e6, &t);
        let expected = 112.0 / 2e6 + 5.0 * 8112.0 / 11e6 + 11.0 * 1e-5;
        assert!((nav - expected).abs() < 1e-15);
        assert!((nav - 3.8533e-3).abs() < 1e-6);
        // both NAVs end when the burst ends
        let via_res = t.res_time() + t.t_sifs + nav_after_res(5, 11e6, &t);
        assert!((via_res - nav).abs() < 1e-15);
    }

    #[test]
    fn single_common_channel_grant_matches_allocator() {
        let c = ctx();
        let mine = with_free(6, &[2]);
        let rts = rts_from(7, 3, with_free(6, &[2, 4]));
        let p_rx = crate::propagation::received_power(0.1, 60.0, &c.params).unwrap();
        let cts = on_rts_received(&rts, p_rx, &mine, &c, 1).unwrap();
        let g = cts.grant().unwrap();
        assert_eq!((cts.source, cts.destination), (3, 7));

        let h = scale_gain(p_rx / 0.1, c.plan.ccc_freq, c.plan.data_freqs[2]);
        let problem =
            build_problem(&[h], &[0.0], &[0.1], &c.table, c.params.noise_power, 0.1).unwrap();
        let expected = solve_dp(&problem);
        assert_eq!(g.channels.len(), 1);
        assert_eq!(g.channels[0].channel, 2);
        assert_eq!(g.channels[0].power, expected.powers[0]);
        assert_eq!(g.timing.rate, expected.total_rate);
        assert_eq!(
            g.timing,
            compute_grant(expected.total_rate, &c.timings).unwrap()
        );

        let res = ControlPacket::res_from_cts(&cts).unwrap();
        assert_eq!(res.payload, cts.payload);
        assert_eq!((res.source, res.destination), (7, 3));
    }

    #[test]
    fn no_common_channel_means_no_cts() {
        let c = ctx();
        let rts = rts_from(0, 1, with_free(6, &[0]));
        assert!(on_rts_received(&rts, 1e-9, &with_free(6, &[1]), &c, 1).is_none());
    }

    #[test]
    fn cts_allocation_always_feasible() {
        let c = ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let model = crate::channel_model::PuActivityModel::new(0.5).unwrap();
        for i in 0..500 {
            let s = crate::channel_model::advance_slot(&model, 6, i, &mut rng);
            let mut mine = Dcul::new(6, 0.1, rng.random_range(0.0..3e-10));
            let mut peer = Dcul::new(6, 0.1, 0.0);
            mine.set_pu_status(s.occupancy());
            peer.set_pu_status(s.occupancy());
            if rng.random_bool(0.3) {
                peer.add_contribution(rng.random_range(0..6), 99, 0.0, rng.random_range(0.0..0.1));
            }
            let d = rng.random_range(1.0..250.0);
            let p_rx = crate::propagation::received_power(0.1, d, &c.params).unwrap();
            if let Some(cts) = on_rts_received(&rts_from(0, 1, peer.clone()), p_rx, &mine, &c, i) {
                let g = cts.grant().unwrap();
                assert!(g.total_power() <= 0.1);
                for gc in &g.channels {
                    assert!(!s.occupancy()[gc.channel]);
                    assert!(gc.power <= mine.entry(gc.channel).max_allowed_power);
                    assert!(gc.power <= peer.entry(gc.channel).max_allowed_power);
                }
                assert!(g.timing.burst_time <= c.timings.t_max());
            }
        }
    }

    fn cts_packet(channels: Vec<GrantedChannel>, id: u64) -> ControlPacket {
        ControlPacket {
            kind: PacketKind::Cts,
            source: 1,
            destination: 0,
            payload: Payload::Grant(GrantInfo {
                grant_id: id,
                channels,
                timing: BurstTiming {
                    n_packets: 5,
                    rate: 11e6,
                    burst_time: MacTimings::default().burst_time(5, 11e6),
                },
            }),
        }
    }

    fn gc(channel: usize, power: f64) -> GrantedChannel {
        GrantedChannel {
            channel,
            power,
            rate_index: 2,
            rate: 11e6,
        }
    }

    #[test]
    fn overhearing_updates_interference_cap_and_nav() {
        let c = ctx();
        let mut d = Dcul::new(6, 0.1, 1e-11);
        let p_rx = 2e-9;
        let up = overhear(&cts_packet(vec![gc(1, 0.03)], 4), p_rx, &mut d, &c).unwrap();
        let h = scale_gain(p_rx / 0.1, c.plan.ccc_freq, c.plan.data_freqs[1]);
        assert_eq!(up.increments, vec![(1, 0.03 * h)]);
        assert_eq!(d.entry(1).suffered_interference, 1e-11 + 0.03 * h);
        assert_eq!(d.entry(1).max_allowed_power, (1e-9 / h).min(0.1));
        assert!(d.entry(1).neighbor_status);
        assert!(!d.entry(0).neighbor_status);
        assert!((up.nav - nav_after_cts(5, 11e6, &c.timings)).abs() < 1e-18);
    }

    #[test]
    fn far_overhearer_sees_nothing() {
        let c = ctx();
        let mut d = Dcul::new(6, 0.1, 0.0);
        overhear(&cts_packet(vec![gc(0, 0.05)], 1), 1e-300, &mut d, &c).unwrap();
        assert!(d.entry(0).suffered_interference < 1e-290);
        assert_eq!(d.entry(0).max_allowed_power, 0.1);
    }

    #[test]
    fn contributions_add_and_release_independently() {
        let c = ctx();
        let mut d = Dcul::new(6, 0.1, 0.0);
        let a = overhear(&cts_packet(vec![gc(2, 0.02)], 1), 1e-9, &mut d, &c).unwrap();
        let b = overhear(&cts_packet(vec![gc(2, 0.05)], 2), 3e-9, &mut d, &c).unwrap();
        let sum = a.increments[0].1 + b.increments[0].1;
        assert_eq!(d.entry(2).suffered_interference, sum);
        d.release_grant(1);
        assert_eq!(d.entry(2).suffered_interference, b.increments[0].1);
        assert!(d.entry(2).neighbor_status);
        d.release_grant(2);
        d.release_grant(2);
        assert_eq!(d.entry(2).suffered_interference, 0.0);
        assert_eq!(d.entry(2).max_allowed_power, 0.1);
        assert!(!d.entry(2).neighbor_status);
    }

    #[test]
    fn random_grant_release_sequences_stay_non_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut d = Dcul::new(4, 0.1, 2e-11);
        let mut live: Vec<u64> = Vec::new();
        for id in 0..5000u64 {
            if live.is_empty() || rng.random_bool(0.55) {
                let k = rng.random_range(0..4);
                d.add_contribution(
                    k,
                    id,
                    rng.random_range(0.0..1e-9),
                    rng.random_range(0.0..0.1),
                );
                live.push(id);
            } else {
                let i = rng.random_range(0..live.len());
                d.release_grant(live.swap_remove(i));
            }
            assert!(d.entries().iter().all(|e| e.suffered_interference >= 0.0));
        }
        for id in live {
            d.release_grant(id);
        }
        assert!(d.entries().iter().all(|e| e.suffered_interference == 2e-11));
    }

    #[test]
    fn sole_contender_waits_difs_plus_backoff() {
        let t = MacTimings::default();
        let mut b = Backoff::with_slots(7);
        let at = b.resume(1.0, &t);
        assert!((at - (1.0 + t.t_difs + 7.0 * t.slot_time)).abs() < 1e-12);
    }

    #[test]
    fn earlier_backoff_wins_and_later_keeps_remaining_slots() {
        let t = MacTimings::default();
        let mut a = Backoff::with_slots(3);
        let mut b = Backoff::with_slots(10);
        let ta = a.resume(0.0, &t);
        let tb = b.resume(0.0, &t);
        assert!(ta < tb);
        b.freeze(ta, &t);
        assert_eq!(b.remaining(), 7);
        // busy during DIFS consumes nothing
        let mut c = Backoff::with_slots(4);
        c.resume(0.0, &t);
        c.freeze(t.t_difs * 0.5, &t);
        assert_eq!(c.remaining(), 4);
    }
}
