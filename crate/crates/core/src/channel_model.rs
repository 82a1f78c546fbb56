//! ON/OFF primary-user activity over synchronised channel slots.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Each data channel is independently occupied in each slot with probability
/// `p_occupy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PuActivityModel {
    p_occupy: f64,
}

impl PuActivityModel {
    pub fn new(p_occupy: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_occupy) {
            return Err(Error::invalid(format!(
                "p_occupy must lie in [0, 1] (got {p_occupy})"
            )));
        }
        Ok(PuActivityModel { p_occupy })
    }

    pub fn p_occupy(&self) -> f64 {
        self.p_occupy
    }
}

/// Primary-user occupancy of every data channel during one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotSchedule {
    pub slot_index: u64,
    /// `true` means a primary user holds the channel for the whole slot.
    occupancy: Vec<bool>,
}

impl SlotSchedule {
    pub fn new(slot_index: u64, occupancy: Vec<bool>) -> Self {
        SlotSchedule {
            slot_index,
            occupancy,
        }
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    pub fn n_channels(&self) -> usize {
        self.occupancy.len()
    }

    pub fn free_count(&self) -> usize {
        self.occupancy.iter().filter(|o| !**o).count()
    }
}

/// Draw the occupancy for slot `slot_index`.
pub fn advance_slot<R: Rng + ?Sized>(
    model: &PuActivityModel,
    n: usize,
    slot_index: u64,
    rng: &mut R,
) -> SlotSchedule {
    let occupancy = (0..n)
        .map(|_| rng.random::<f64>() < model.p_occupy)
        .collect();
    SlotSchedule::new(slot_index, occupancy)
}

/// Perfect sensing: the primary-user status of each channel as it truly is.
pub fn sense(schedule: &SlotSchedule) -> Vec<bool> {
    schedule.occupancy.clone()
}

/// Owns the random stream behind a sequence of slot schedules.
#[derive(Debug, Clone)]
pub struct PuProcess {
    model: PuActivityModel,
    n_channels: usize,
    next_slot: u64,
    rng: ChaCha8Rng,
}

impl PuProcess {
    pub fn new(model: PuActivityModel, n_channels: usize, seed: u64) -> Result<Self> {
        if n_channels == 0 {
            return Err(Error::invalid("channel count must be at least 1"));
        }
        Ok(PuProcess {
            model,
            n_channels,
            next_slot: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }
}

impl Iterator for PuProcess {
    type Item = SlotSchedule;

    fn next(&mut self) -> Option<SlotSchedule> {
        let s = advance_slot(&self.model, self.n_channels, self.next_slot, &mut self.rng);
        self.next_slot += 1;
        Some(s)
    }
}
