//! Scenario files.
//!
//! One TOML document with a section per subsystem; unknown keys are
//! rejected everywhere. Every field has a default, so an empty file is a
//! valid scenario (six channels, 250 m arena, 2/5.5/11 Mb/s).
//!
//! ```toml
//! seed = 7
//!
//! [network]
//! flows = 10
//! area_diameter_m = 250.0
//!
//! [rates]
//! rates_bps = [2e6, 5.5e6, 11e6]
//! ccc_radii_m = [250.0, 200.0, 100.0]
//!
//! [channels]
//! data_freqs_hz = [2.412e9, 2.422e9, 2.432e9]
//! p_occupy = 0.5
//!
//! [simulation]
//! strategy = "mcd_mac"
//! slots = 100
//!
//! [[sweep.axis]]
//! name = "flows"
//! values = [2, 4, 8]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisScenario;
use crate::error::{Error, Result};
use crate::propagation::{Calibration, ChannelPlan, PropagationParams, RadiusScaling, RateTable};
use crate::protocol::{LinkContext, MacTimings};
use crate::simulator::{ScenarioConfig, Strategy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioFile {
    pub seed: u64,
    pub network: NetworkSection,
    pub radio: RadioSection,
    pub rates: RatesSection,
    pub channels: ChannelsSection,
    pub mac: MacTimings,
    pub simulation: SimulationSection,
    pub analysis: AnalysisSection,
    pub sweep: Option<SweepSection>,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        ScenarioFile {
            seed: 1,
            network: NetworkSection::default(),
            radio: RadioSection::default(),
            rates: RatesSection::default(),
            channels: ChannelsSection::default(),
            mac: MacTimings::default(),
            simulation: SimulationSection::default(),
            analysis: AnalysisSection::default(),
            sweep: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    pub flows: usize,
    /// Total node count; defaults to two per flow.
    pub nodes: Option<usize>,
    pub area_diameter_m: f64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            flows: 10,
            nodes: None,
            area_diameter_m: 250.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioSection {
    pub p_max_w: f64,
    pub noise_power_w: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
    pub tx_height_m: f64,
    pub rx_height_m: f64,
    pub system_loss: f64,
    pub radius_scaling: RadiusScaling,
}

impl Default for RadioSection {
    fn default() -> Self {
        let p = PropagationParams::default();
        RadioSection {
            p_max_w: 0.1,
            noise_power_w: p.noise_power,
            tx_gain: p.tx_gain,
            rx_gain: p.rx_gain,
            tx_height_m: p.tx_height,
            rx_height_m: p.rx_height,
            system_loss: p.system_loss,
            radius_scaling: RadiusScaling::Inverse,
        }
    }
}

/// Rates plus either control-channel radii or SNR thresholds. Once the
/// section appears, exactly one of the two must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    #[serde(default = "default_rates")]
    pub rates_bps: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ccc_radii_m: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_thresholds: Option<Vec<f64>>,
}

fn default_rates() -> Vec<f64> {
    vec![2e6, 5.5e6, 11e6]
}

impl Default for RatesSection {
    fn default() -> Self {
        RatesSection {
            rates_bps: default_rates(),
            ccc_radii_m: Some(vec![250.0, 200.0, 100.0]),
            snr_thresholds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelsSection {
    pub ccc_freq_hz: f64,
    pub data_freqs_hz: Vec<f64>,
    pub p_occupy: f64,
    pub slot_s: f64,
    pub sensing_s: f64,
}

impl Default for ChannelsSection {
    fn default() -> Self {
        let plan = ChannelPlan::default_six();
        ChannelsSection {
            ccc_freq_hz: plan.ccc_freq,
            data_freqs_hz: plan.data_freqs,
            p_occupy: 0.5,
            slot_s: 0.1,
            sensing_s: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub strategy: Strategy,
    /// Radios of the power-split baseline.
    pub radios: usize,
    pub slots: u64,
    /// Background interference on every channel at every node, watts.
    pub interference_w: f64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            strategy: Strategy::McdMac,
            radios: 2,
            slots: 100,
            interference_w: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    /// Power per analysed channel; defaults to the whole budget on one channel.
    pub channel_powers_w: Option<Vec<f64>>,
    /// Interference per analysed channel; defaults to the simulation's
    /// background level.
    pub channel_interference_w: Option<Vec<f64>>,
    /// Distance normalisation; defaults to the arena diameter.
    pub area_radius_m: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxisName {
    Flows,
    Channels,
    InterferenceW,
    POccupy,
    DistanceM,
}

impl SweepAxisName {
    /// The key as written in scenario files.
    pub fn key(self) -> &'static str {
        match self {
            SweepAxisName::Flows => "flows",
            SweepAxisName::Channels => "channels",
            SweepAxisName::InterferenceW => "interference_w",
            SweepAxisName::POccupy => "p_occupy",
            SweepAxisName::DistanceM => "distance_m",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub name: SweepAxisName,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Run the simulator at every grid point.
    #[default]
    Simulate,
    /// Allocator-only rate gain versus distance, no contention.
    RateGain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub mode: SweepMode,
    /// Grid axes; the first varies slowest.
    pub axis: Vec<SweepAxis>,
    /// Strategies per grid point; defaults to the simulation strategy.
    pub strategies: Vec<Strategy>,
    /// Seeds per grid point; defaults to the top-level seed.
    pub seeds: Vec<u64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            mode: SweepMode::Simulate,
            axis: Vec::new(),
            strategies: Vec::new(),
            seeds: Vec::new(),
        }
    }
}

impl ScenarioFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map(|s| line_col(text, s.start)).unwrap_or((1, 1));
            Error::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
        ScenarioFile::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario files always serialise")
    }

    pub fn propagation(&self) -> PropagationParams {
        PropagationParams {
            tx_gain: self.radio.tx_gain,
            rx_gain: self.radio.rx_gain,
            tx_height: self.radio.tx_height_m,
            rx_height: self.radio.rx_height_m,
            system_loss: self.radio.system_loss,
            noise_power: self.radio.noise_power_w,
        }
    }

    fn rate_table(&self, params: &PropagationParams) -> Result<RateTable> {
        let given = match (&self.rates.ccc_radii_m, &self.rates.snr_thresholds) {
            (Some(r), None) => Calibration::Radii(r.clone()),
            (None, Some(s)) => Calibration::Thresholds(s.clone()),
            _ => {
                return Err(Error::invalid(
                    "rates: give exactly one of ccc_radii_m or snr_thresholds",
                ))
            }
        };
        RateTable::calibrate(
            self.rates.rates_bps.clone(),
            given,
            self.radio.p_max_w,
            params,
        )
        .map_err(|e| prefix("rates", e))
    }

    /// Shared radio/MAC context, with every invalid field reported at once.
    pub fn link_context(&self) -> Result<LinkContext> {
        let mut bad = Vec::new();
        let params = self.propagation();
        collect(&mut bad, params.validate().map_err(|e| prefix("radio", e)));
        if !(self.radio.p_max_w.is_finite() && self.radio.p_max_w > 0.0) {
            bad.push(format!(
                "radio.p_max_w must be positive (got {})",
                self.radio.p_max_w
            ));
        }
        let plan = ChannelPlan::new(
            self.channels.ccc_freq_hz,
            self.channels.data_freqs_hz.clone(),
        )
        .map_err(|e| prefix("channels", e));
        let plan = collect(&mut bad, plan);
        collect(&mut bad, self.mac.validate());
        let table = if bad.is_empty() {
            collect(&mut bad, self.rate_table(&params))
        } else {
            None
        };
        if !bad.is_empty() {
            return Err(Error::Validation(bad));
        }
        Ok(LinkContext {
            params,
            plan: plan.expect("validated"),
            table: table.expect("validated"),
            timings: self.mac,
            p_max: self.radio.p_max_w,
        })
    }

    /// Simulator configuration.
    pub fn scenario(&self) -> Result<ScenarioConfig> {
        let ctx = self.link_context()?;
        let cfg = ScenarioConfig {
            seed: self.seed,
            flows: self.network.flows,
            nodes: self.network.nodes.unwrap_or(2 * self.network.flows),
            area_diameter: self.network.area_diameter_m,
            ctx,
            p_occupy: self.channels.p_occupy,
            slot_duration: self.channels.slot_s,
            sensing_duration: self.channels.sensing_s,
            strategy: self.simulation.strategy,
            radios: self.simulation.radios,
            slots: self.simulation.slots,
            interference_w: self.simulation.interference_w,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Closed-form analysis scenario.
    pub fn analysis(&self) -> Result<AnalysisScenario> {
        let ctx = self.link_context()?;
        let powers = self
            .analysis
            .channel_powers_w
            .clone()
            .unwrap_or_else(|| vec![ctx.p_max]);
        let interference = self
            .analysis
            .channel_interference_w
            .clone()
            .unwrap_or_else(|| vec![self.simulation.interference_w; powers.len()]);
        let scenario = AnalysisScenario {
            powers,
            interference,
            table: ctx.table,
            plan: ctx.plan,
            params: ctx.params,
            p_max: ctx.p_max,
            area_radius: self
                .analysis
                .area_radius_m
                .unwrap_or(self.network.area_diameter_m),
            timings: ctx.timings,
            radius_scaling: self.radio.radius_scaling,
        };
        scenario.validate().map_err(|e| prefix("analysis", e))?;
        Ok(scenario)
    }
}

fn collect<T>(bad: &mut Vec<String>, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(Error::Validation(msgs)) => {
            bad.extend(msgs);
            None
        }
        Err(other) => {
            bad.push(other.to_string());
            None
        }
    }
}

fn prefix(section: &str, e: Error) -> Error {
    match e {
        Error::Validation(msgs) => Error::Validation(
            msgs.into_iter()
                .map(|m| {
                    if m.starts_with(section) {
                        m
                    } else {
                        format!("{section}.{m}")
                    }
                })
                .collect(),
        ),
        other => other,
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before
        .rfind('\n')
        .map_or(before.len(), |i| before.len() - i - 1)
        + 1;
    (line, column)
}
