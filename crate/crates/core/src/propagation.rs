//! Deterministic radio model: two-ray received power, channel-gain
//! estimation from an overheard control packet, frequency scaling of gains
//! and radii, SINR, and rate-table calibration.
//!
//! Units throughout: watts, metres, hertz, bit/s and linear (not dB) ratios.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Antenna and link constants of the two-ray model, plus the noise floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationParams {
    pub tx_gain: f64,
    pub rx_gain: f64,
    /// Antenna heights in metres.
    pub tx_height: f64,
    pub rx_height: f64,
    /// System loss factor, at least 1.
    pub system_loss: f64,
    /// Noise power in watts.
    pub noise_power: f64,
}

impl Default for PropagationParams {
    fn default() -> Self {
        PropagationParams {
            tx_gain: 1.0,
            rx_gain: 1.0,
            tx_height: 1.5,
            rx_height: 1.5,
            system_loss: 1.0,
            noise_power: 1e-10,
        }
    }
}

impl PropagationParams {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        for (name, v) in [
            ("tx_gain", self.tx_gain),
            ("rx_gain", self.rx_gain),
            ("tx_height", self.tx_height),
            ("rx_height", self.rx_height),
            ("noise_power", self.noise_power),
        ] {
            if !(v.is_finite() && v > 0.0) {
                bad.push(format!("{name} must be positive and finite (got {v})"));
            }
        }
        if !(self.system_loss.is_finite() && self.system_loss >= 1.0) {
            bad.push(format!(
                "system_loss must be >= 1 (got {})",
                self.system_loss
            ));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }

    /// `G_t G_r h_t² h_r² / L`, the distance-free part of the path gain.
    fn antenna_factor(&self) -> f64 {
        self.tx_gain * self.rx_gain * self.tx_height.powi(2) * self.rx_height.powi(2)
            / self.system_loss
    }

    /// Power gain of the control channel at distance `d` (no frequency scaling).
    pub fn path_gain(&self, d: f64) -> Result<f64> {
        if d.is_nan() || d <= 0.0 {
            return Err(Error::domain(format!(
                "distance must be positive (got {d})"
            )));
        }
        Ok(self.antenna_factor() / d.powi(4))
    }
}

/// Which way per-channel transmission radii scale with carrier frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusScaling {
    /// `r_q^m = (f0/fm) r_q`: consistent with the fourth-power gain scaling,
    /// so a radius shrinks as the carrier frequency rises.
    #[default]
    Inverse,
    /// `r_q^m = (fm/f0) r_q`: the reciprocal reading, kept for comparison.
    Direct,
}

/// Control-channel frequency and the data-channel frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPlan {
    pub ccc_freq: f64,
    pub data_freqs: Vec<f64>,
}

impl ChannelPlan {
    pub fn new(ccc_freq: f64, data_freqs: Vec<f64>) -> Result<Self> {
        let plan = ChannelPlan {
            ccc_freq,
            data_freqs,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// CCC on 2.472 GHz, six data channels spaced 10 MHz from 2.412 GHz.
    pub fn default_six() -> Self {
        ChannelPlan {
            ccc_freq: 2.472e9,
            data_freqs: (0..6).map(|k| 2.412e9 + 10e6 * k as f64).collect(),
        }
    }

    pub fn n_channels(&self) -> usize {
        self.data_freqs.len()
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.ccc_freq.is_finite() && self.ccc_freq > 0.0) {
            bad.push(format!(
                "ccc frequency must be positive (got {})",
                self.ccc_freq
            ));
        }
        if self.data_freqs.is_empty() {
            bad.push("at least one data channel is required".to_string());
        }
        for (i, f) in self.data_freqs.iter().enumerate() {
            if !(f.is_finite() && *f > 0.0) {
                bad.push(format!("data_freqs[{i}] must be positive (got {f})"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }

    /// Gain scaling factor `(f0/fm)^4` of data channel `m`.
    pub fn gain_scale(&self, m: usize) -> f64 {
        (self.ccc_freq / self.data_freqs[m]).powi(4)
    }
}

/// Discrete rate set with SNR thresholds and control-channel radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    rates: Vec<f64>,
    snr_thresholds: Vec<f64>,
    ccc_radii: Vec<f64>,
}

/// The half of a rate table supplied by the user; the other half is derived.
#[derive(Debug, Clone, PartialEq)]
pub enum Calibration {
    Radii(Vec<f64>),
    Thresholds(Vec<f64>),
}

impl RateTable {
    /// Build a table whose three lists are already mutually consistent.
    pub fn new(rates: Vec<f64>, snr_thresholds: Vec<f64>, ccc_radii: Vec<f64>) -> Result<Self> {
        let table = RateTable {
            rates,
            snr_thresholds,
            ccc_radii,
        };
        table.validate()?;
        Ok(table)
    }

    /// Fill in thresholds from radii (or radii from thresholds) so that a
    /// receiver at `r_q` on the control channel, sent `p_max`, sees exactly
    /// `SNR_q`.
    pub fn calibrate(
        rates: Vec<f64>,
        given: Calibration,
        p_max: f64,
        params: &PropagationParams,
    ) -> Result<Self> {
        params.validate()?;
        if !(p_max > 0.0 && p_max.is_finite()) {
            return Err(Error::invalid(format!(
                "p_max must be positive (got {p_max})"
            )));
        }
        let k = link_constant(p_max, params);
        let (snr_thresholds, ccc_radii) = match given {
            Calibration::Radii(radii) => {
                check_positive("ccc_radii", &radii)?;
                let snr = radii.iter().map(|r| k / r.powi(4)).collect();
                (snr, radii)
            }
            Calibration::Thresholds(snr) => {
                check_positive("snr_thresholds", &snr)?;
                let radii = snr.iter().map(|s| (k / s).powf(0.25)).collect();
                (snr, radii)
            }
        };
        RateTable::new(rates, snr_thresholds, ccc_radii)
    }

    /// The 2 / 5.5 / 11 Mb/s set with 250 / 200 / 100 m control radii.
    pub fn default_for(p_max: f64, params: &PropagationParams) -> Result<Self> {
        RateTable::calibrate(
            vec![2e6, 5.5e6, 11e6],
            Calibration::Radii(vec![250.0, 200.0, 100.0]),
            p_max,
            params,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.rates.len();
        let mut bad = Vec::new();
        if q == 0 {
            bad.push("rate table is empty".to_string());
        }
        if self.snr_thresholds.len() != q || self.ccc_radii.len() != q {
            bad.push(format!(
                "rate table lists differ in length: {} rates, {} thresholds, {} radii",
                q,
                self.snr_thresholds.len(),
                self.ccc_radii.len()
            ));
        }
        for (name, list) in [
            ("rates", &self.rates),
            ("snr_thresholds", &self.snr_thresholds),
            ("ccc_radii", &self.ccc_radii),
        ] {
            if list.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                bad.push(format!("{name} must be positive and finite"));
            }
        }
        if !strictly_increasing(&self.rates) {
            bad.push("rates must be strictly increasing".to_string());
        }
        if !strictly_increasing(&self.snr_thresholds) {
            bad.push("snr_thresholds must be strictly increasing".to_string());
        }
        if !self.ccc_radii.windows(2).all(|w| w[0] > w[1]) {
            bad.push("ccc_radii must be strictly decreasing".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn snr_thresholds(&self) -> &[f64] {
        &self.snr_thresholds
    }

    pub fn ccc_radii(&self) -> &[f64] {
        &self.ccc_radii
    }

    /// Index of the highest rate whose threshold `sinr` meets, if any.
    /// A SINR exactly on a threshold qualifies for that rate.
    pub fn best_rate_index(&self, sinr: f64) -> Option<usize> {
        self.snr_thresholds.iter().rposition(|&t| sinr >= t)
    }
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

fn check_positive(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite() && *x > 0.0) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} must be positive and finite"
        )))
    }
}

/// `K = G_t G_r h_t² h_r² P_max / (L P_n)`, so that `SNR(d) = K / d⁴`.
pub fn link_constant(p_max: f64, params: &PropagationParams) -> f64 {
    params.antenna_factor() * p_max / params.noise_power
}

/// Two-ray received power of a `p_t`-watt transmission at distance `d`.
pub fn received_power(p_t: f64, d: f64, params: &PropagationParams) -> Result<f64> {
    if p_t.is_nan() || p_t <= 0.0 {
        return Err(Error::domain(format!(
            "transmit power must be positive (got {p_t})"
        )));
    }
    Ok(p_t * params.path_gain(d)?)
}

/// Control-channel gain estimated from an RTS sent at full power.
pub fn gain_from_rts(p_rx: f64, p_max: f64) -> Result<f64> {
    if p_max.is_nan() || p_max <= 0.0 {
        return Err(Error::domain(format!(
            "p_max must be positive (got {p_max})"
        )));
    }
    if p_rx.is_nan() || p_rx <= 0.0 {
        return Err(Error::domain(format!(
            "received power must be positive (got {p_rx})"
        )));
    }
    Ok(p_rx / p_max)
}

/// Translate a control-channel gain measured at `f0` to carrier `fm`.
pub fn scale_gain(h0: f64, f0: f64, fm: f64) -> f64 {
    h0 * (f0 / fm).powi(4)
}

/// SINR on data channel `m` of `plan` at distance `d` under interference
/// `p_inf`.
pub fn sinr(
    p_t: f64,
    d: f64,
    p_inf: f64,
    m: usize,
    params: &PropagationParams,
    plan: &ChannelPlan,
) -> Result<f64> {
    sinr_at(p_t, d, p_inf, plan.ccc_freq, plan.data_freqs[m], params)
}

/// SINR at carrier `fm` relative to the control carrier `f0`.
pub fn sinr_at(
    p_t: f64,
    d: f64,
    p_inf: f64,
    f0: f64,
    fm: f64,
    params: &PropagationParams,
) -> Result<f64> {
    if p_inf.is_nan() || p_inf < 0.0 {
        return Err(Error::domain(format!(
            "interference must be non-negative (got {p_inf})"
        )));
    }
    let gain = scale_gain(params.path_gain(d)?, f0, fm);
    Ok(p_t * gain / (params.noise_power + p_inf))
}

/// Transmission radius of rate index `q` on a carrier `fm`.
pub fn radius_on_channel(r_q: f64, f0: f64, fm: f64, scaling: RadiusScaling) -> f64 {
    match scaling {
        RadiusScaling::Inverse => r_q * f0 / fm,
        RadiusScaling::Direct => r_q * fm / f0,
    }
}
