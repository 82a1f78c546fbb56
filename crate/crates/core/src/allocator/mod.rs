//! Joint power/channel allocation as a multiple-choice knapsack.
//!
//! Each channel contributes a class of items (one per rate), each item
//! costing the transmit power needed to reach that rate's SINR threshold.
//! At most one item per class may be picked; the sum of picked powers may
//! not exceed the node's budget and every picked power must respect the
//! channel's own cap. [`solve_dp`] maximises the total rate by staged dynamic
//! programming over channels, discarding infeasible and dominated partial
//! solutions after each stage. [`solve_bruteforce`] enumerates everything
//! and serves as the reference.
//!
//! Ties on total rate are broken by smaller total power, then by the
//! lexicographically smallest choice vector, where "skip this channel" sorts
//! before every rate index.

use std::cmp::Ordering;

use rand::Rng;

use crate::error::{Error, Result};
use crate::propagation::RateTable;

mod instance;

pub use instance::{parse_problem, write_problem};

/// One MCKP instance: `rates[m][q]` and `powers[m][q]` for every channel `m`
/// and rate index `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationProblem {
    rates: Vec<Vec<f64>>,
    powers: Vec<Vec<f64>>,
    p_max: f64,
    caps: Vec<f64>,
}

impl AllocationProblem {
    /// `caps` may contain `f64::INFINITY` for unconstrained channels, and a
    /// power entry may be infinite when the channel is unusable.
    pub fn new(
        rates: Vec<Vec<f64>>,
        powers: Vec<Vec<f64>>,
        p_max: f64,
        caps: Vec<f64>,
    ) -> Result<Self> {
        let mut bad = Vec::new();
        let m = powers.len();
        if m == 0 {
            bad.push("problem has no channels".to_string());
        }
        if rates.len() != m || caps.len() != m {
            bad.push(format!(
                "dimension mismatch: {} power rows, {} rate rows, {} caps",
                m,
                rates.len(),
                caps.len()
            ));
        }
        for (i, (r, p)) in rates.iter().zip(&powers).enumerate() {
            if r.is_empty() || r.len() != p.len() {
                bad.push(format!(
                    "channel {i}: {} rates vs {} powers",
                    r.len(),
                    p.len()
                ));
            }
            if r.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                bad.push(format!("channel {i}: rates must be positive and finite"));
            }
            if p.iter().any(|x| x.is_nan() || *x <= 0.0) {
                bad.push(format!("channel {i}: powers must be positive"));
            }
        }
        if !(p_max.is_finite() && p_max > 0.0) {
            bad.push(format!("p_max must be positive and finite (got {p_max})"));
        }
        if caps.iter().any(|c| c.is_nan() || *c < 0.0) {
            bad.push("per-channel caps must be non-negative".to_string());
        }
        if bad.is_empty() {
            Ok(AllocationProblem {
                rates,
                powers,
                p_max,
                caps,
            })
        } else {
            Err(Error::Validation(bad))
        }
    }

    /// Every channel offers the rates of `table`.
    pub fn with_table(
        table: &RateTable,
        powers: Vec<Vec<f64>>,
        p_max: f64,
        caps: Vec<f64>,
    ) -> Result<Self> {
        let rates = vec![table.rates().to_vec(); powers.len()];
        AllocationProblem::new(rates, powers, p_max, caps)
    }

    pub fn n_channels(&self) -> usize {
        self.powers.len()
    }

    pub fn n_rates(&self, m: usize) -> usize {
        self.powers[m].len()
    }

    pub fn rate(&self, m: usize, q: usize) -> f64 {
        self.rates[m][q]
    }

    pub fn power(&self, m: usize, q: usize) -> f64 {
        self.powers[m][q]
    }

    pub fn rate_matrix(&self) -> &[Vec<f64>] {
        &self.rates
    }

    pub fn power_matrix(&self) -> &[Vec<f64>] {
        &self.powers
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn caps(&self) -> &[f64] {
        &self.caps
    }

    /// Copy with a different total budget.
    pub fn with_budget(&self, p_max: f64) -> Result<Self> {
        AllocationProblem::new(
            self.rates.clone(),
            self.powers.clone(),
            p_max,
            self.caps.clone(),
        )
    }

    /// Whether item `(m, q)` respects both the budget and the channel cap.
    pub fn item_feasible(&self, m: usize, q: usize) -> bool {
        let p = self.powers[m][q];
        p <= self.p_max && p <= self.caps[m]
    }

    /// Product of `Q_m + 1` over all channels: the exhaustive search space.
    pub fn combinations(&self) -> u128 {
        self.powers
            .iter()
            .map(|row| row.len() as u128 + 1)
            .fold(1u128, |acc, k| acc.saturating_mul(k))
    }
}

/// Per-channel power matrix for the rates of `table`: the power needed on
/// channel `m` to reach `SNR_q` over noise plus that channel's interference.
/// A zero gain yields infinite powers, i.e. an unusable channel.
pub fn build_problem(
    gains: &[f64],
    interference: &[f64],
    caps: &[f64],
    table: &RateTable,
    noise_power: f64,
    p_max: f64,
) -> Result<AllocationProblem> {
    if gains.len() != interference.len() || gains.len() != caps.len() {
        return Err(Error::invalid(format!(
            "gains, interference and caps differ in length ({}, {}, {})",
            gains.len(),
            interference.len(),
            caps.len()
        )));
    }
    if gains.iter().any(|g| g.is_nan() || *g < 0.0) {
        return Err(Error::domain("channel gains must be non-negative"));
    }
    if interference.iter().any(|i| i.is_nan() || *i < 0.0) {
        return Err(Error::domain("interference must be non-negative"));
    }
    let powers = gains
        .iter()
        .zip(interference)
        .map(|(&h, &p_inf)| {
            table
                .snr_thresholds()
                .iter()
                .map(|snr| {
                    if h > 0.0 {
                        snr * (noise_power + p_inf) / h
                    } else {
                        f64::INFINITY
                    }
                })
                .collect()
        })
        .collect();
    AllocationProblem::with_table(table, powers, p_max, caps.to_vec())
}

/// Surviving rate indices of each channel after item-level pruning, ordered
/// by increasing power.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EfficientSet {
    pub per_channel: Vec<Vec<usize>>,
}

impl EfficientSet {
    pub fn is_empty(&self) -> bool {
        self.per_channel.iter().all(Vec::is_empty)
    }
}

/// Drop infeasible items, then drop every item dominated by another item of
/// the same channel (no more power, no less rate). Of two identical items
/// the lower index survives.
pub fn prune_ip(problem: &AllocationProblem) -> EfficientSet {
    prune_items(problem, true)
}

fn prune_items(problem: &AllocationProblem, dominance: bool) -> EfficientSet {
    let per_channel = (0..problem.n_channels())
        .map(|m| {
            let feasible: Vec<usize> = (0..problem.n_rates(m))
                .filter(|&q| problem.item_feasible(m, q))
                .collect();
            let mut kept: Vec<usize> = if dominance {
                feasible
                    .iter()
                    .copied()
                    .filter(|&j| {
                        !feasible
                            .iter()
                            .any(|&i| i != j && ip_dominates(problem, m, i, j))
                    })
                    .collect()
            } else {
                feasible
            };
            kept.sort_by(|&a, &b| {
                problem.powers[m][a]
                    .total_cmp(&problem.powers[m][b])
                    .then(a.cmp(&b))
            });
            kept
        })
        .collect();
    EfficientSet { per_channel }
}

/// Item `i` removes item `j` of channel `m`.
fn ip_dominates(problem: &AllocationProblem, m: usize, i: usize, j: usize) -> bool {
    let (pi, pj) = (problem.powers[m][i], problem.powers[m][j]);
    let (ri, rj) = (problem.rates[m][i], problem.rates[m][j]);
    if !(pi <= pj && ri >= rj) {
        return false;
    }
    // Mutual dominance means identical items; keep exactly one of them.
    pi < pj || ri > rj || i < j
}

/// A partial solution over the first `choices.len()` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct DpState {
    pub total_rate: f64,
    pub total_power: f64,
    /// `None` skips the channel, `Some(q)` transmits at rate index `q`.
    pub choices: Vec<Option<usize>>,
}

impl DpState {
    fn empty() -> Self {
        DpState {
            total_rate: 0.0,
            total_power: 0.0,
            choices: Vec::new(),
        }
    }

    fn extend(&self, problem: &AllocationProblem, m: usize, choice: Option<usize>) -> DpState {
        let mut choices = Vec::with_capacity(self.choices.len() + 1);
        choices.extend_from_slice(&self.choices);
        choices.push(choice);
        match choice {
            None => DpState {
                total_rate: self.total_rate,
                total_power: self.total_power,
                choices,
            },
            Some(q) => DpState {
                total_rate: self.total_rate + problem.rate(m, q),
                total_power: self.total_power + problem.power(m, q),
                choices,
            },
        }
    }
}

/// Preference order of complete solutions: more rate, then less power, then
/// the smaller choice vector. `Less` means `a` is preferred.
fn preference(a: &DpState, b: &DpState) -> Ordering {
    b.total_rate
        .total_cmp(&a.total_rate)
        .then(a.total_power.total_cmp(&b.total_power))
        .then_with(|| a.choices.cmp(&b.choices))
}

/// Remove every state dominated by another (no more power, no less rate).
/// Among identical (rate, power) pairs the smallest choice vector stays.
fn remove_dominated(states: &mut Vec<DpState>) {
    states.sort_by(|a, b| {
        a.total_power
            .total_cmp(&b.total_power)
            .then(b.total_rate.total_cmp(&a.total_rate))
            .then_with(|| a.choices.cmp(&b.choices))
    });
    let mut best_rate = f64::NEG_INFINITY;
    states.retain(|s| {
        if s.total_rate > best_rate {
            best_rate = s.total_rate;
            true
        } else {
            false
        }
    });
}

/// A solved allocation: per-channel power (zero when unused) and rate index.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub powers: Vec<f64>,
    pub choices: Vec<Option<usize>>,
    pub total_rate: f64,
    pub total_power: f64,
}

impl Allocation {
    /// Transmit nothing on any of `m` channels.
    pub fn none(m: usize) -> Self {
        Allocation {
            powers: vec![0.0; m],
            choices: vec![None; m],
            total_rate: 0.0,
            total_power: 0.0,
        }
    }

    fn from_state(problem: &AllocationProblem, state: &DpState) -> Self {
        let powers = state
            .choices
            .iter()
            .enumerate()
            .map(|(m, c)| c.map_or(0.0, |q| problem.power(m, q)))
            .collect();
        Allocation {
            powers,
            choices: state.choices.clone(),
            total_rate: state.total_rate,
            total_power: state.total_power,
        }
    }

    /// Build from explicit choices, summing in channel order.
    pub fn from_choices(problem: &AllocationProblem, choices: &[Option<usize>]) -> Self {
        let mut state = DpState::empty();
        for (m, c) in choices.iter().enumerate() {
            state = state.extend(problem, m, *c);
        }
        Allocation::from_state(problem, &state)
    }

    pub fn is_empty(&self) -> bool {
        self.choices.iter().all(Option::is_none)
    }

    pub fn used_channels(&self) -> impl Iterator<Item = usize> + '_ {
        self.choices
            .iter()
            .enumerate()
            .filter_map(|(m, c)| c.map(|_| m))
    }

    /// Check every knapsack constraint against `problem`, exactly.
    pub fn satisfies(&self, problem: &AllocationProblem) -> bool {
        if self.choices.len() != problem.n_channels() || self.powers.len() != problem.n_channels() {
            return false;
        }
        let mut sum = 0.0;
        for (m, c) in self.choices.iter().enumerate() {
            match c {
                None => {
                    if self.powers[m] != 0.0 {
                        return false;
                    }
                }
                Some(q) => {
                    if *q >= problem.n_rates(m) || !problem.item_feasible(m, *q) {
                        return false;
                    }
                    sum += problem.power(m, *q);
                }
            }
        }
        sum <= problem.p_max
    }
}

/// Which pruning passes [`solve_dp_with`] applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DpOptions {
    /// Remove dominated items of each channel before the stages run.
    /// Infeasible items are always removed.
    pub ip_dominance: bool,
    /// Remove dominated partial solutions after each stage.
    pub dp_dominance: bool,
    /// Keep a copy of every stage's state set.
    pub record_stages: bool,
}

impl Default for DpOptions {
    fn default() -> Self {
        DpOptions {
            ip_dominance: true,
            dp_dominance: true,
            record_stages: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DpOutcome {
    pub allocation: Allocation,
    /// State set surviving each stage, when recorded.
    pub stages: Vec<Vec<DpState>>,
    /// Largest state set seen across stages.
    pub peak_states: usize,
}

/// Optimal allocation by staged dynamic programming.
pub fn solve_dp(problem: &AllocationProblem) -> Allocation {
    solve_dp_with(problem, DpOptions::default()).allocation
}

pub fn solve_dp_with(problem: &AllocationProblem, opts: DpOptions) -> DpOutcome {
    let items = prune_items(problem, opts.ip_dominance);
    let mut states = vec![DpState::empty()];
    let mut stages = Vec::new();
    let mut peak_states = 1;

    for (m, efficient) in items.per_channel.iter().enumerate() {
        let mut next = Vec::with_capacity(states.len() * (efficient.len() + 1));
        for s in &states {
            next.push(s.extend(problem, m, None));
            for &q in efficient {
                let candidate = s.extend(problem, m, Some(q));
                if candidate.total_power <= problem.p_max {
                    next.push(candidate);
                }
            }
        }
        if opts.dp_dominance {
            remove_dominated(&mut next);
        }
        peak_states = peak_states.max(next.len());
        if opts.record_stages {
            stages.push(next.clone());
        }
        states = next;
    }

    let best = states
        .iter()
        .min_by(|a, b| preference(a, b))
        .expect("the all-skip state is always feasible");
    DpOutcome {
        allocation: Allocation::from_state(problem, best),
        stages,
        peak_states,
    }
}

/// Enumeration limit for [`solve_bruteforce`].
pub const BRUTEFORCE_LIMIT: u128 = 10_000_000;

/// Exhaustive search over every combination of per-channel choices.
pub fn solve_bruteforce(problem: &AllocationProblem) -> Result<Allocation> {
    let combinations = problem.combinations();
    if combinations > BRUTEFORCE_LIMIT {
        return Err(Error::TooLarge {
            combinations,
            limit: BRUTEFORCE_LIMIT,
        });
    }
    let m = problem.n_channels();
    // digit 0 = skip, digit k = rate index k - 1
    let mut digits = vec![0usize; m];
    let mut best: Option<DpState> = None;
    loop {
        let choices: Vec<Option<usize>> = digits.iter().map(|&d| d.checked_sub(1)).collect();
        let feasible_items = choices
            .iter()
            .enumerate()
            .all(|(ch, c)| c.is_none_or(|q| problem.item_feasible(ch, q)));
        if feasible_items {
            let mut state = DpState::empty();
            for (ch, c) in choices.iter().enumerate() {
                state = state.extend(problem, ch, *c);
            }
            if state.total_power <= problem.p_max
                && best
                    .as_ref()
                    .is_none_or(|b| preference(&state, b) == Ordering::Less)
            {
                best = Some(state);
            }
        }
        // odometer increment, last channel fastest
        let mut pos = m;
        loop {
            if pos == 0 {
                let best = best.expect("the all-skip combination is always feasible");
                return Ok(Allocation::from_state(problem, &best));
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] <= problem.n_rates(pos) {
                break;
            }
            digits[pos] = 0;
        }
    }
}

/// Random instance shaped like the protocol builds them: shared rate table,
/// power rows from random gains, interference and thresholds, random budget
/// and optional per-channel caps. Rates are whole multiples of 0.5 Mb/s.
pub fn random_problem<R: Rng + ?Sized>(
    rng: &mut R,
    max_channels: usize,
    max_rates: usize,
) -> AllocationProblem {
    let m = rng.random_range(1..=max_channels.max(1));
    let q = rng.random_range(1..=max_rates.max(1));
    let mut rate = 0.0;
    let mut snr = 0.0;
    let mut rates = Vec::with_capacity(q);
    let mut thresholds = Vec::with_capacity(q);
    for _ in 0..q {
        rate += 0.5e6 * rng.random_range(1..=12) as f64;
        snr += rng.random_range(0.5..20.0);
        rates.push(rate);
        thresholds.push(snr);
    }
    let noise = 1e-10;
    let powers: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let gain = 10f64.powf(rng.random_range(-10.0..-7.0));
            let p_inf = if rng.random_bool(0.5) {
                noise * rng.random_range(0.0..5.0)
            } else {
                0.0
            };
            thresholds
                .iter()
                .map(|s| s * (noise + p_inf) / gain)
                .collect()
        })
        .collect();
    let p_max = 10f64.powf(rng.random_range(-3.0..0.5));
    let caps = (0..m)
        .map(|_| {
            if rng.random_bool(0.3) {
                p_max * rng.random_range(0.05..1.0)
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let rate_rows = vec![rates; m];
    AllocationProblem::new(rate_rows, powers, p_max, caps)
        .expect("generator produces valid instances")
}

/// Random general MCKP instance: each channel has its own unsorted rates and
/// powers, so item-level dominance actually occurs.
pub fn random_general_problem<R: Rng + ?Sized>(
    rng: &mut R,
    max_channels: usize,
    max_rates: usize,
) -> AllocationProblem {
    let m = rng.random_range(1..=max_channels.max(1));
    let q = rng.random_range(1..=max_rates.max(1));
    let rates = (0..m)
        .map(|_| {
            (0..q)
                .map(|_| 0.5e6 * rng.random_range(1..=8) as f64)
                .collect()
        })
        .collect();
    let powers = (0..m)
        .map(|_| {
            (0..q)
                .map(|_| rng.random_range(1..=20) as f64 * 0.05)
                .collect()
        })
        .collect();
    let p_max = rng.random_range(1..=30) as f64 * 0.05;
    let caps = (0..m)
        .map(|_| {
            if rng.random_bool(0.25) {
                rng.random_range(1..=20) as f64 * 0.05
            } else {
                f64::INFINITY
            }
        })
        .collect();
    AllocationProblem::new(rates, powers, p_max, caps).expect("generator produces valid instances")
}

#[cfg(test)]
mod tests;
