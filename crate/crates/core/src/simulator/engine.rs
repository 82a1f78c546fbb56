use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::metrics::Metrics;
use super::placement::{place_nodes, Placement};
use super::ScenarioConfig;
use crate::channel_model::{advance_slot, sense, PuActivityModel, SlotSchedule};
use crate::error::Result;
use crate::protocol::{
    on_rts_received_with, overhear, Backoff, ControlPacket, Dcul, GrantInfo, PacketKind, Payload,
};

const PLACEMENT_STREAM: u64 = 1;
const PU_STREAM: u64 = 2;
const BACKOFF_STREAM: u64 = 3;

/// What a trace line records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Rts,
    Cts,
    Res,
    /// A data burst starts.
    Data,
    /// A burst ended and was delivered.
    Delivered,
    /// A burst ended and was lost.
    Lost,
}

impl TraceKind {
    pub fn name(self) -> &'static str {
        match self {
            TraceKind::Rts => "RTS",
            TraceKind::Cts => "CTS",
            TraceKind::Res => "RES",
            TraceKind::Data => "DATA",
            TraceKind::Delivered => "DELIVERED",
            TraceKind::Lost => "LOST",
        }
    }
}

/// One packet-level event of a traced run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time: f64,
    pub kind: TraceKind,
    pub source: usize,
    pub destination: usize,
    pub grant: Option<u64>,
    pub channels: Vec<usize>,
    pub powers: Vec<f64>,
    /// Airtime of a control packet or length of a burst, seconds.
    pub duration: f64,
    /// Payload bits a burst carries; zero for control packets.
    pub bits: f64,
}

/// Write a trace as CSV; channel and power lists are `;`-separated.
pub fn write_trace<W: std::io::Write>(trace: &[TraceRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "time_s",
        "kind",
        "source",
        "destination",
        "grant",
        "channels",
        "powers_w",
        "duration_s",
        "bits",
    ])?;
    for r in trace {
        let join = |v: Vec<String>| v.join(";");
        w.write_record([
            r.time.to_string(),
            r.kind.name().to_string(),
            r.source.to_string(),
            r.destination.to_string(),
            r.grant.map_or_else(String::new, |g| g.to_string()),
            join(r.channels.iter().map(|c| c.to_string()).collect()),
            join(r.powers.iter().map(|p| p.to_string()).collect()),
            r.duration.to_string(),
            r.bits.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Run one scenario.
pub fn run(cfg: &ScenarioConfig) -> Result<Metrics> {
    Ok(Engine::new(cfg, false)?.run())
}

/// Run one scenario and keep a packet trace.
pub fn run_traced(cfg: &ScenarioConfig) -> Result<(Metrics, Vec<TraceRecord>)> {
    let mut engine = Engine::new(cfg, true)?;
    let metrics = engine.run_inner();
    Ok((metrics, engine.trace.unwrap_or_default()))
}

#[derive(Debug, Clone)]
enum Event {
    SlotStart(u64),
    SensingDone,
    DataPeriodEnd,
    BackoffDone { node: usize, gen: u64 },
    TxEnd { tx: usize },
    Send { node: usize, pkt: ControlPacket },
    Timeout { node: usize, gen: u64 },
    NavEnd { node: usize },
    Release { node: usize, grant: u64 },
    GrantEnd { grant: u64 },
}

struct Scheduled {
    time: f64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.seq.cmp(&other.seq))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Role {
    Idle,
    AwaitCts { peer: usize },
    Responding { peer: usize },
    AwaitRes { peer: usize, grant: u64 },
    SendingRes { peer: usize },
    Burst { grant: u64 },
}

struct Node {
    dcul: Dcul,
    nav_until: f64,
    role: Role,
    backoff: Backoff,
    backoff_gen: u64,
    timer_gen: u64,
    flow: Option<usize>,
    /// Control-channel carriers currently heard.
    carriers: u32,
    transmitting: bool,
    /// Overheard contributions still active: (grant, channel, watts).
    overheard: Vec<(u64, usize, f64)>,
}

struct CccTx {
    sender: usize,
    pkt: ControlPacket,
    /// Receivers whose copy was destroyed.
    corrupted: Vec<usize>,
}

struct ActiveGrant {
    id: u64,
    flow: usize,
    source: usize,
    destination: usize,
    info: GrantInfo,
}

struct Engine<'a> {
    cfg: &'a ScenarioConfig,
    now: f64,
    seq: u64,
    queue: BinaryHeap<Reverse<Scheduled>>,
    placement: Placement,
    neighbors: Vec<Vec<usize>>,
    nodes: Vec<Node>,
    txs: Vec<Option<CccTx>>,
    /// Transmissions each node is currently receiving.
    receiving: Vec<Vec<usize>>,
    grants: Vec<ActiveGrant>,
    next_grant: u64,
    in_data_period: bool,
    schedule: SlotSchedule,
    pu_model: PuActivityModel,
    pu_rng: ChaCha8Rng,
    backoff_rng: ChaCha8Rng,
    metrics: Metrics,
    trace: Option<Vec<TraceRecord>>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a ScenarioConfig, traced: bool) -> Result<Self> {
        cfg.validate()?;
        let pu_model = PuActivityModel::new(cfg.p_occupy)?;
        let placement = place_nodes(cfg, &mut stream(cfg.seed, PLACEMENT_STREAM))?;
        let range = cfg.ctx.table.ccc_radii()[0];
        let n = cfg.nodes;
        let neighbors = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i && placement.distance(i, j) <= range)
                    .collect()
            })
            .collect();
        let m = cfg.n_channels();
        let mut backoff_rng = stream(cfg.seed, BACKOFF_STREAM);
        let window = cfg.ctx.timings.contention_window;
        let nodes = (0..n)
            .map(|i| Node {
                dcul: Dcul::new(m, cfg.ctx.p_max, cfg.interference_w),
                nav_until: 0.0,
                role: Role::Idle,
                backoff: Backoff::draw(window, &mut backoff_rng),
                backoff_gen: 0,
                timer_gen: 0,
                flow: (i < cfg.flows).then_some(i),
                carriers: 0,
                transmitting: false,
                overheard: Vec::new(),
            })
            .collect();
        let metrics = Metrics {
            duration: cfg.duration(),
            flow_bits: vec![0.0; cfg.flows],
            flow_busy: vec![0.0; cfg.flows],
            channel_utilization: vec![0.0; m],
            ..Metrics::default()
        };
        Ok(Engine {
            cfg,
            now: 0.0,
            seq: 0,
            queue: BinaryHeap::new(),
            placement,
            neighbors,
            nodes,
            txs: Vec::new(),
            receiving: vec![Vec::new(); n],
            grants: Vec::new(),
            next_grant: 1,
            in_data_period: false,
            schedule: SlotSchedule::new(0, vec![true; m]),
            pu_model,
            pu_rng: stream(cfg.seed, PU_STREAM),
            backoff_rng,
            metrics,
            trace: traced.then(Vec::new),
        })
    }

    fn run(mut self) -> Metrics {
        self.run_inner()
    }

    fn run_inner(&mut self) -> Metrics {
        self.at(0.0, Event::SlotStart(0));
        let end = self.cfg.duration();
        while let Some(Reverse(s)) = self.queue.pop() {
            if s.time >= end {
                break;
            }
            self.now = s.time;
            self.handle(s.event);
        }
        let mut metrics = std::mem::take(&mut self.metrics);
        for u in &mut metrics.channel_utilization {
            *u /= end;
        }
        metrics
    }

    fn at(&mut self, time: f64, event: Event) {
        self.seq += 1;
        self.queue.push(Reverse(Scheduled {
            time,
            seq: self.seq,
            event,
        }));
    }

    fn record(
        &mut self,
        kind: TraceKind,
        src: usize,
        dst: usize,
        info: Option<&GrantInfo>,
        duration: f64,
    ) {
        let bits = match (kind, info) {
            (TraceKind::Data | TraceKind::Delivered | TraceKind::Lost, Some(g)) => {
                g.timing.n_packets as f64 * self.cfg.ctx.timings.l_data
            }
            _ => 0.0,
        };
        if let Some(trace) = &mut self.trace {
            trace.push(TraceRecord {
                time: self.now,
                kind,
                source: src,
                destination: dst,
                grant: info.map(|g| g.grant_id),
                channels: info
                    .map_or_else(Vec::new, |g| g.channels.iter().map(|c| c.channel).collect()),
                powers: info
                    .map_or_else(Vec::new, |g| g.channels.iter().map(|c| c.power).collect()),
                duration,
                bits,
            });
        }
    }

    fn handle(&mut self, event: Event) {
        match event {
            Event::SlotStart(k) => self.slot_start(k),
            Event::SensingDone => {
                let occupied = sense(&self.schedule);
                for node in &mut self.nodes {
                    node.dcul.set_pu_status(&occupied);
                }
                self.in_data_period = true;
                self.update_all();
            }
            Event::DataPeriodEnd => {
                self.in_data_period = false;
                self.update_all();
            }
            Event::BackoffDone { node, gen } => self.backoff_done(node, gen),
            Event::TxEnd { tx } => self.tx_end(tx),
            Event::Send { node, pkt } => self.send(node, pkt),
            Event::Timeout { node, gen } => {
                if self.nodes[node].timer_gen == gen {
                    self.nodes[node].role = Role::Idle;
                    self.update(node);
                }
            }
            Event::NavEnd { node } => self.update(node),
            Event::Release { node, grant } => self.release(node, grant),
            Event::GrantEnd { grant } => self.grant_end(grant),
        }
    }

    fn slot_start(&mut self, k: u64) {
        let cfg = self.cfg;
        self.schedule = advance_slot(&self.pu_model, cfg.n_channels(), k, &mut self.pu_rng);
        let occupied = self.schedule.occupancy().to_vec();
        for g in &self.grants {
            if g.info.channels.iter().any(|c| occupied[c.channel]) {
                self.metrics.invariants.pu_violations += 1;
            }
        }
        self.in_data_period = false;
        self.update_all();
        let start = k as f64 * cfg.slot_duration;
        self.at(start + cfg.sensing_duration, Event::SensingDone);
        self.at(
            start + cfg.slot_duration - cfg.slot_guard(),
            Event::DataPeriodEnd,
        );
        if k + 1 < cfg.slots {
            self.at((k + 1) as f64 * cfg.slot_duration, Event::SlotStart(k + 1));
        }
    }

    fn update_all(&mut self) {
        for i in 0..self.nodes.len() {
            self.update(i);
        }
    }

    /// Start or freeze the backoff of `i` according to its medium view.
    fn update(&mut self, i: usize) {
        let timings = self.cfg.ctx.timings;
        let now = self.now;
        let node = &mut self.nodes[i];
        let may_count = node.flow.is_some()
            && node.role == Role::Idle
            && self.in_data_period
            && !node.transmitting
            && node.carriers == 0
            && now >= node.nav_until;
        if may_count && !node.backoff.is_counting() {
            node.backoff_gen += 1;
            let gen = node.backoff_gen;
            let at = node.backoff.resume(now, &timings);
            self.at(at, Event::BackoffDone { node: i, gen });
            return;
        }
        if !may_count && node.backoff.is_counting() {
            // A counter reaching zero in this very instant cannot hear the
            // other transmitter in time: both go out and collide.
            let due = node.backoff.expiry(&timings).expect("counting");
            if due - now <= timings.slot_time * 1e-6 {
                return;
            }
            node.backoff.freeze(now, &timings);
            node.backoff_gen += 1;
        }
    }

    fn backoff_done(&mut self, i: usize, gen: u64) {
        let window = self.cfg.ctx.timings.contention_window;
        let node = &mut self.nodes[i];
        if node.backoff_gen != gen || !node.backoff.is_counting() {
            return;
        }
        if self.now < node.nav_until {
            self.metrics.invariants.nav_violations += 1;
        }
        node.backoff = Backoff::draw(window, &mut self.backoff_rng);
        node.backoff_gen += 1;
        let flow = node.flow.expect("only sources count down");
        let dst = self.placement.flows[flow].1;
        node.role = Role::AwaitCts { peer: dst };
        let pkt = ControlPacket {
            kind: PacketKind::Rts,
            source: i,
            destination: dst,
            payload: Payload::Rts(node.dcul.clone()),
        };
        self.metrics.handshake_attempts += 1;
        self.start_tx(i, pkt);
    }

    fn airtime(&self, kind: PacketKind) -> f64 {
        let t = &self.cfg.ctx.timings;
        match kind {
            PacketKind::Rts => t.rts_time(),
            PacketKind::Cts => t.cts_time(),
            PacketKind::Res => t.res_time(),
        }
    }

    fn start_tx(&mut self, sender: usize, pkt: ControlPacket) {
        let duration = self.airtime(pkt.kind);
        let kind = match pkt.kind {
            PacketKind::Rts => TraceKind::Rts,
            PacketKind::Cts => TraceKind::Cts,
            PacketKind::Res => TraceKind::Res,
        };
        self.record(kind, pkt.source, pkt.destination, pkt.grant(), duration);
        let id = self.txs.len();
        let mut corrupted = Vec::new();
        // A half-duplex sender loses whatever it was receiving.
        for &other in &self.receiving[sender] {
            if let Some(tx) = self.txs[other].as_mut() {
                tx.corrupted.push(sender);
            }
        }
        self.nodes[sender].transmitting = true;
        for &j in &self.neighbors[sender] {
            let node = &mut self.nodes[j];
            node.carriers += 1;
            if node.transmitting || node.carriers > 1 {
                corrupted.push(j);
                for &other in &self.receiving[j] {
                    if let Some(tx) = self.txs[other].as_mut() {
                        if !tx.corrupted.contains(&j) {
                            tx.corrupted.push(j);
                        }
                    }
                }
            }
            self.receiving[j].push(id);
        }
        self.txs.push(Some(CccTx {
            sender,
            pkt,
            corrupted,
        }));
        self.update(sender);
        for j in self.neighbors[sender].clone() {
            self.update(j);
        }
        self.at(self.now + duration, Event::TxEnd { tx: id });
    }

    fn tx_end(&mut self, id: usize) {
        let tx = self.txs[id].take().expect("each transmission ends once");
        let sender = tx.sender;
        self.nodes[sender].transmitting = false;
        let receivers = self.neighbors[sender].clone();
        for &j in &receivers {
            self.nodes[j].carriers -= 1;
            self.receiving[j].retain(|&x| x != id);
        }
        if tx.pkt.kind == PacketKind::Rts && tx.corrupted.contains(&tx.pkt.destination) {
            self.metrics.handshake_collisions += 1;
        }
        for &j in &receivers {
            if !tx.corrupted.contains(&j) {
                self.deliver(j, &tx.pkt);
            }
        }
        self.sent(sender, &tx.pkt);
        self.update(sender);
        for j in receivers {
            self.update(j);
        }
    }

    fn timeout(&mut self, i: usize, after: f64) {
        let node = &mut self.nodes[i];
        node.timer_gen += 1;
        let gen = node.timer_gen;
        let t = &self.cfg.ctx.timings;
        let at = self.now + t.t_sifs + after + t.slot_time;
        self.at(at, Event::Timeout { node: i, gen });
    }

    fn cancel_timeout(&mut self, i: usize) {
        self.nodes[i].timer_gen += 1;
    }

    /// Sender-side follow-up once its packet is on the air in full.
    fn sent(&mut self, i: usize, pkt: &ControlPacket) {
        match pkt.kind {
            PacketKind::Rts => self.timeout(i, self.cfg.ctx.timings.cts_time()),
            PacketKind::Cts => self.timeout(i, self.cfg.ctx.timings.res_time()),
            PacketKind::Res => {
                let info = pkt.grant().expect("RES carries a grant").clone();
                self.start_grant(i, pkt.destination, info);
            }
        }
    }

    fn deliver(&mut self, j: usize, pkt: &ControlPacket) {
        let addressed = pkt.destination == j;
        match (pkt.kind, addressed) {
            (PacketKind::Rts, true) => self.answer_rts(j, pkt),
            (PacketKind::Rts, false) => {}
            (PacketKind::Cts, true) => {
                if self.nodes[j].role == (Role::AwaitCts { peer: pkt.source }) {
                    self.cancel_timeout(j);
                    self.nodes[j].role = Role::SendingRes { peer: pkt.source };
                    let res = ControlPacket::res_from_cts(pkt).expect("is a CTS");
                    let at = self.now + self.cfg.ctx.timings.t_sifs;
                    self.at(at, Event::Send { node: j, pkt: res });
                }
            }
            (PacketKind::Res, true) => {
                let grant = pkt.grant().map(|g| g.grant_id);
                if let (
                    Role::AwaitRes {
                        peer,
                        grant: expected,
                    },
                    Some(g),
                ) = (self.nodes[j].role, grant)
                {
                    if peer == pkt.source && expected == g {
                        self.cancel_timeout(j);
                        self.nodes[j].role = Role::Burst { grant: g };
                    }
                }
            }
            (PacketKind::Cts | PacketKind::Res, false) => self.overhear(j, pkt),
        }
    }

    fn answer_rts(&mut self, j: usize, rts: &ControlPacket) {
        let cfg = self.cfg;
        let node = &self.nodes[j];
        if node.role != Role::Idle || node.transmitting || self.now < node.nav_until {
            return;
        }
        let d = self.placement.distance(rts.source, j);
        let Ok(p_rx) = crate::propagation::received_power(cfg.ctx.p_max, d, &cfg.ctx.params) else {
            return;
        };
        let grant_id = self.next_grant;
        let strategy = cfg.strategy;
        let radios = cfg.radios;
        let cts = on_rts_received_with(rts, p_rx, &node.dcul, &cfg.ctx, grant_id, |p| {
            strategy.allocate(p, radios)
        });
        match cts {
            Some(cts) => {
                self.next_grant += 1;
                self.nodes[j].role = Role::Responding { peer: rts.source };
                self.update(j);
                let at = self.now + cfg.ctx.timings.t_sifs;
                self.at(at, Event::Send { node: j, pkt: cts });
            }
            None => self.metrics.handshake_refused += 1,
        }
    }

    fn send(&mut self, i: usize, pkt: ControlPacket) {
        let expected = match pkt.kind {
            PacketKind::Cts => Role::Responding {
                peer: pkt.destination,
            },
            PacketKind::Res => Role::SendingRes {
                peer: pkt.destination,
            },
            PacketKind::Rts => return,
        };
        if self.nodes[i].role != expected || self.nodes[i].transmitting {
            self.nodes[i].role = Role::Idle;
            self.update(i);
            return;
        }
        if pkt.kind == PacketKind::Cts {
            let grant = pkt.grant().expect("CTS carries a grant").grant_id;
            self.nodes[i].role = Role::AwaitRes {
                peer: pkt.destination,
                grant,
            };
        }
        self.start_tx(i, pkt);
    }

    fn overhear(&mut self, j: usize, pkt: &ControlPacket) {
        let cfg = self.cfg;
        let d = self.placement.distance(pkt.source, j);
        let Ok(p_rx) = crate::propagation::received_power(cfg.ctx.p_max, d, &cfg.ctx.params) else {
            return;
        };
        let node = &mut self.nodes[j];
        let Some(update) = overhear(pkt, p_rx, &mut node.dcul, &cfg.ctx) else {
            return;
        };
        let grant = pkt
            .grant()
            .expect("overheard packets carry grants")
            .grant_id;
        for &(k, added) in &update.increments {
            node.overheard.push((grant, k, added));
        }
        let end = self.now + update.nav;
        let extends = end > node.nav_until;
        if extends {
            node.nav_until = end;
            self.at(end, Event::NavEnd { node: j });
        }
        self.at(end, Event::Release { node: j, grant });
    }

    fn release(&mut self, j: usize, grant: u64) {
        let node = &mut self.nodes[j];
        node.dcul.release_grant(grant);
        node.overheard.retain(|&(g, _, _)| g != grant);
        for k in 0..node.dcul.len() {
            let expected = node
                .overheard
                .iter()
                .filter(|&&(_, c, _)| c == k)
                .fold(self.cfg.interference_w, |acc, &(_, _, w)| acc + w);
            let got = node.dcul.entry(k).suffered_interference;
            if (got - expected).abs() > 1e-12 * expected.abs().max(1e-30) {
                self.metrics.invariants.ledger_mismatches += 1;
            }
        }
    }

    fn start_grant(&mut self, src: usize, dst: usize, info: GrantInfo) {
        let cfg = self.cfg;
        let t = &cfg.ctx.timings;
        self.nodes[src].role = Role::Burst {
            grant: info.grant_id,
        };
        self.metrics.handshake_success += 1;
        if info.total_power() > cfg.ctx.p_max
            || info.channels.iter().any(|c| c.power > cfg.ctx.p_max)
        {
            self.metrics.invariants.power_violations += 1;
        }
        let occupied = self.schedule.occupancy();
        if !self.in_data_period_or_guard() || info.channels.iter().any(|c| occupied[c.channel]) {
            self.metrics.invariants.pu_violations += 1;
        }
        let range = cfg.ctx.table.ccc_radii()[0];
        for g in &self.grants {
            let shares = g
                .info
                .channels
                .iter()
                .any(|a| info.channels.iter().any(|b| a.channel == b.channel));
            let close = [g.source, g.destination].iter().any(|&a| {
                [src, dst]
                    .iter()
                    .any(|&b| self.placement.distance(a, b) <= range)
            });
            if shares && close {
                self.metrics.invariants.nav_violations += 1;
            }
        }
        let flow = self.nodes[src].flow.expect("grants start at sources");
        self.metrics.granted_bits += info.timing.n_packets as f64 * t.l_data;
        let duration = t.t_sifs + info.timing.burst_time;
        self.record(
            TraceKind::Data,
            src,
            dst,
            Some(&info),
            info.timing.burst_time,
        );
        let id = info.grant_id;
        self.grants.push(ActiveGrant {
            id,
            flow,
            source: src,
            destination: dst,
            info,
        });
        self.at(self.now + duration, Event::GrantEnd { grant: id });
    }

    /// Grants may only start between sensing and the end of the slot.
    fn in_data_period_or_guard(&self) -> bool {
        let slot = self.cfg.slot_duration;
        let into = self.now - self.schedule.slot_index as f64 * slot;
        into >= self.cfg.sensing_duration && into < slot
    }

    fn grant_end(&mut self, id: u64) {
        let pos = self
            .grants
            .iter()
            .position(|g| g.id == id)
            .expect("grant ends once");
        let g = self.grants.remove(pos);
        let cfg = self.cfg;
        let ctx = &cfg.ctx;
        let ok = self.nodes[g.destination].role == (Role::Burst { grant: id })
            && g.info.channels.iter().all(|c| {
                let d = self.placement.distance(g.source, g.destination);
                let signal = c.power
                    * ctx.params.path_gain(d).unwrap_or(0.0)
                    * ctx.plan.gain_scale(c.channel);
                let interference = self
                    .grants
                    .iter()
                    .flat_map(|o| {
                        o.info
                            .channels
                            .iter()
                            .filter(|oc| oc.channel == c.channel)
                            .map(move |oc| (o.source, oc.power))
                    })
                    .fold(cfg.interference_w, |acc, (s, p)| {
                        let d = self.placement.distance(s, g.destination);
                        acc + p
                            * ctx.params.path_gain(d).unwrap_or(0.0)
                            * ctx.plan.gain_scale(c.channel)
                    });
                let sinr = signal / (ctx.params.noise_power + interference);
                sinr >= ctx.table.snr_thresholds()[c.rate_index] * (1.0 - 1e-9)
            });
        let burst = g.info.timing.burst_time;
        self.metrics.flow_busy[g.flow] += burst;
        for c in &g.info.channels {
            self.metrics.channel_utilization[c.channel] += burst;
        }
        if ok {
            self.metrics.completed_grants += 1;
            self.metrics.flow_bits[g.flow] += g.info.timing.n_packets as f64 * ctx.timings.l_data;
        } else {
            self.metrics.failed_grants += 1;
        }
        let kind = if ok {
            TraceKind::Delivered
        } else {
            TraceKind::Lost
        };
        self.record(kind, g.source, g.destination, Some(&g.info), burst);
        for n in [g.source, g.destination] {
            if matches!(self.nodes[n].role, Role::Burst { grant } if grant == id) {
                self.nodes[n].role = Role::Idle;
            }
            self.update(n);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioFile;
    use crate::simulator::Strategy;

    fn scenario(flows: usize, slots: u64, strategy: Strategy) -> ScenarioConfig {
        let mut f = ScenarioFile::default();
        f.network.flows = flows;
        f.simulation.slots = slots;
        f.simulation.strategy = strategy;
        f.scenario().unwrap()
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = scenario(5, 20, Strategy::McdMac);
        assert_eq!(run(&cfg).unwrap(), run(&cfg).unwrap());
    }

    #[test]
    fn invariants_hold_and_bits_are_conserved() {
        for strategy in Strategy::ALL {
            let m = run(&scenario(8, 30, strategy)).unwrap();
            assert_eq!(m.invariants.total(), 0, "{strategy}: {:?}", m.invariants);
            assert!(m.delivered_bits() <= m.granted_bits);
            assert!(m.delivered_bits() > 0.0, "{strategy}");
            assert!(m.handshake_success <= m.handshake_attempts);
            assert!(m
                .channel_utilization
                .iter()
                .all(|u| (0.0..=1.0).contains(u)));
        }
    }

    #[test]
    fn all_channels_busy_means_silence() {
        let mut cfg = scenario(4, 10, Strategy::McdMac);
        cfg.p_occupy = 1.0;
        let m = run(&cfg).unwrap();
        assert_eq!(m.delivered_bits(), 0.0);
        assert_eq!(m.handshake_success, 0);
        assert!(m.handshake_refused > 0);
    }

    #[test]
    fn trace_lists_the_handshake_in_order() {
        let cfg = scenario(1, 2, Strategy::McdMac);
        let (m, trace) = run_traced(&cfg).unwrap();
        assert!(m.completed_grants > 0);
        let kinds: Vec<TraceKind> = trace.iter().take(5).map(|r| r.kind).collect();
        assert_eq!(
            kinds,
            vec![
                TraceKind::Rts,
                TraceKind::Cts,
                TraceKind::Res,
                TraceKind::Data,
                TraceKind::Delivered
            ]
        );
        assert!(trace.windows(2).all(|w| w[0].time <= w[1].time));
    }
}
