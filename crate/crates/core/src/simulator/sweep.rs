//! Parameter grids over scenario files, run in parallel.

use std::io::Write;

use serde::Serialize;

use super::{run, Metrics, ScenarioConfig, Strategy};
use crate::allocator::{build_problem, solve_dp, Allocation};
use crate::config::{ScenarioFile, SweepAxisName, SweepMode, SweepSection};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::propagation::received_power;
use crate::protocol::LinkContext;

/// One simulation of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    /// Grid point label, e.g. `flows=4;interference_w=1e-10`.
    pub scenario_id: String,
    pub cfg: ScenarioConfig,
}

/// One line of the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub scenario_id: String,
    pub seed: u64,
    pub strategy: Strategy,
    pub flows: usize,
    pub channels: usize,
    pub p_occupy: f64,
    pub interference_w: f64,
    pub network_throughput_bps: f64,
    pub avg_node_throughput_bps: f64,
    pub handshake_success: u64,
    pub handshake_collisions: u64,
}

impl MetricsRow {
    pub fn new(scenario_id: &str, cfg: &ScenarioConfig, m: &Metrics) -> Self {
        MetricsRow {
            scenario_id: scenario_id.to_string(),
            seed: cfg.seed,
            strategy: cfg.strategy,
            flows: cfg.flows,
            channels: cfg.n_channels(),
            p_occupy: cfg.p_occupy,
            interference_w: cfg.interference_w,
            network_throughput_bps: m.network_throughput(),
            avg_node_throughput_bps: m.avg_node_throughput(),
            handshake_success: m.handshake_success,
            handshake_collisions: m.handshake_collisions,
        }
    }
}

/// One line of the rate-gain CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateGainRow {
    pub distance_m: f64,
    pub channels: usize,
    pub interference_w: f64,
    pub rate_bps: f64,
    pub single_channel_rate_bps: f64,
    /// `rate_bps / single_channel_rate_bps`; NaN when the single channel
    /// carries nothing.
    pub gain: f64,
}

fn as_count(name: &str, v: f64, max: usize) -> Result<usize> {
    if v.fract() != 0.0 || v < 1.0 || v > max as f64 {
        return Err(Error::invalid(format!(
            "sweep axis {name}: {v} is not an integer in 1..={max}"
        )));
    }
    Ok(v as usize)
}

fn label(point: &[(SweepAxisName, f64)]) -> String {
    point
        .iter()
        .map(|(name, v)| format!("{}={v}", name.key()))
        .collect::<Vec<_>>()
        .join(";")
}

fn sweep_section(file: &ScenarioFile) -> Result<SweepSection> {
    let section = file
        .sweep
        .clone()
        .ok_or_else(|| Error::invalid("the file has no [sweep] section"))?;
    if section.axis.is_empty() {
        return Err(Error::invalid("sweep.axis is empty"));
    }
    Ok(section)
}

/// Cartesian product of the axes, first axis slowest.
fn grid(section: &SweepSection) -> Result<Vec<Vec<(SweepAxisName, f64)>>> {
    let mut bad = Vec::new();
    for (i, a) in section.axis.iter().enumerate() {
        if a.values.is_empty() {
            bad.push(format!("sweep.axis[{i}] has no values"));
        }
        if section.axis[..i].iter().any(|b| b.name == a.name) {
            bad.push(format!("sweep.axis[{i}] repeats {}", a.name.key()));
        }
    }
    if !bad.is_empty() {
        return Err(Error::Validation(bad));
    }
    let mut points = vec![Vec::new()];
    for a in &section.axis {
        points = points
            .into_iter()
            .flat_map(|p| {
                a.values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push((a.name, v));
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

fn apply(file: &ScenarioFile, point: &[(SweepAxisName, f64)]) -> Result<ScenarioFile> {
    let mut f = file.clone();
    for &(name, v) in point {
        match name {
            SweepAxisName::Flows => {
                f.network.flows = as_count("flows", v, usize::MAX)?;
                f.network.nodes = None;
            }
            SweepAxisName::Channels => {
                let k = as_count("channels", v, file.channels.data_freqs_hz.len())?;
                f.channels.data_freqs_hz.truncate(k);
            }
            SweepAxisName::InterferenceW => f.simulation.interference_w = v,
            SweepAxisName::POccupy => f.channels.p_occupy = v,
            SweepAxisName::DistanceM => {
                return Err(Error::invalid(
                    "sweep axis distance_m only applies to mode = \"rate_gain\"",
                ))
            }
        }
    }
    Ok(f)
}

/// Expand the file's sweep section into individual runs, ordered by grid
/// point, then strategy, then seed.
pub fn expand(file: &ScenarioFile) -> Result<Vec<SweepRun>> {
    let section = sweep_section(file)?;
    let strategies = if section.strategies.is_empty() {
        vec![file.simulation.strategy]
    } else {
        section.strategies.clone()
    };
    let seeds = if section.seeds.is_empty() {
        vec![file.seed]
    } else {
        section.seeds.clone()
    };
    let mut runs = Vec::new();
    for point in grid(&section)? {
        let base = apply(file, &point)?;
        let id = label(&point);
        for &strategy in &strategies {
            for &seed in &seeds {
                let mut f = base.clone();
                f.seed = seed;
                f.simulation.strategy = strategy;
                runs.push(SweepRun {
                    scenario_id: id.clone(),
                    cfg: f.scenario()?,
                });
            }
        }
    }
    Ok(runs)
}

/// Run every configuration; results keep input order.
pub fn run_batch(configs: &[ScenarioConfig], exec: Execution) -> Result<Vec<Metrics>> {
    exec::map_range(exec, configs.len(), |i| run(&configs[i]))
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| Error::Run {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Expand and run a simulate-mode sweep.
pub fn run_sweep(file: &ScenarioFile, exec: Execution) -> Result<Vec<MetricsRow>> {
    let runs = expand(file)?;
    let configs: Vec<ScenarioConfig> = runs.iter().map(|r| r.cfg.clone()).collect();
    let metrics = run_batch(&configs, exec)?;
    Ok(runs
        .iter()
        .zip(&metrics)
        .map(|(r, m)| MetricsRow::new(&r.scenario_id, &r.cfg, m))
        .collect())
}

/// Allocation for a pair `d` metres apart using the first `channels` data
/// channels, all free, each with `interference` watts at the destination.
pub fn rate_at_distance(
    ctx: &LinkContext,
    d: f64,
    channels: usize,
    interference: f64,
) -> Result<Allocation> {
    if channels == 0 || channels > ctx.plan.n_channels() {
        return Err(Error::invalid(format!(
            "channel count {channels} outside 1..={}",
            ctx.plan.n_channels()
        )));
    }
    let h0 = received_power(ctx.p_max, d, &ctx.params)? / ctx.p_max;
    let gains: Vec<f64> = (0..channels).map(|m| h0 * ctx.plan.gain_scale(m)).collect();
    let problem = build_problem(
        &gains,
        &vec![interference; channels],
        &vec![f64::INFINITY; channels],
        &ctx.table,
        ctx.params.noise_power,
        ctx.p_max,
    )?;
    Ok(solve_dp(&problem))
}

/// Rate-gain sweep: requires a `distance_m` axis; `channels` defaults to
/// every count from one to the plan size.
pub fn run_rate_gain(file: &ScenarioFile, exec: Execution) -> Result<Vec<RateGainRow>> {
    let mut section = sweep_section(file)?;
    if !section
        .axis
        .iter()
        .any(|a| a.name == SweepAxisName::DistanceM)
    {
        return Err(Error::invalid("rate_gain sweeps need a distance_m axis"));
    }
    if let Some(a) = section
        .axis
        .iter()
        .find(|a| matches!(a.name, SweepAxisName::Flows | SweepAxisName::POccupy))
    {
        return Err(Error::invalid(format!(
            "sweep axis {} does not apply to rate_gain",
            a.name.key()
        )));
    }
    let ctx = file.link_context()?;
    let m_all = ctx.plan.n_channels();
    if !section
        .axis
        .iter()
        .any(|a| a.name == SweepAxisName::Channels)
    {
        section.axis.push(crate::config::SweepAxis {
            name: SweepAxisName::Channels,
            values: (1..=m_all).map(|m| m as f64).collect(),
        });
    }
    let points = grid(&section)?;
    let mut jobs = Vec::with_capacity(points.len());
    for p in &points {
        let mut d = 0.0;
        let mut m = m_all;
        let mut inf = file.simulation.interference_w;
        for &(name, v) in p {
            match name {
                SweepAxisName::DistanceM => d = v,
                SweepAxisName::Channels => m = as_count("channels", v, m_all)?,
                SweepAxisName::InterferenceW => inf = v,
                _ => unreachable!("rejected above"),
            }
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::invalid(format!(
                "sweep axis distance_m: {d} is not positive"
            )));
        }
        if !(inf >= 0.0 && inf.is_finite()) {
            return Err(Error::invalid(format!(
                "sweep axis interference_w: {inf} is negative"
            )));
        }
        jobs.push((d, m, inf));
    }
    exec::map(exec, jobs, |(d, m, inf)| {
        let rate = rate_at_distance(&ctx, d, m, inf)?.total_rate;
        let single = rate_at_distance(&ctx, d, 1, inf)?.total_rate;
        Ok(RateGainRow {
            distance_m: d,
            channels: m,
            interference_w: inf,
            rate_bps: rate,
            single_channel_rate_bps: single,
            gain: if single > 0.0 {
                rate / single
            } else {
                f64::NAN
            },
        })
    })
    .into_iter()
    .collect()
}

/// Write rows with a header line.
pub fn write_csv<W: Write, T: Serialize>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Header of the metrics CSV, in column order.
pub const METRICS_COLUMNS: [&str; 11] = [
    "scenario_id",
    "seed",
    "strategy",
    "flows",
    "channels",
    "p_occupy",
    "interference_w",
    "network_throughput_bps",
    "avg_node_throughput_bps",
    "handshake_success",
    "handshake_collisions",
];

/// A matplotlib script that plots `csv_path` as written for `mode`.
pub fn plot_script(csv_path: &str, mode: SweepMode, x_axis: &str) -> String {
    let body = match mode {
        SweepMode::Simulate => format!(
            r#"rows = list(csv.DictReader(open({csv_path:?})))
x_key = {x_axis:?}

def x_of(r):
    for part in r["scenario_id"].split(";"):
        k, _, v = part.partition("=")
        if k == x_key:
            return float(v)
    return float(r.get(x_key, 0))

series = defaultdict(lambda: defaultdict(list))
for r in rows:
    series[r["strategy"]][x_of(r)].append(float(r["network_throughput_bps"]) / 1e6)
for name, pts in sorted(series.items()):
    xs = sorted(pts)
    plt.plot(xs, [sum(pts[x]) / len(pts[x]) for x in xs], marker="o", label=name)
plt.xlabel(x_key)
plt.ylabel("network throughput (Mb/s)")
"#
        ),
        SweepMode::RateGain => format!(
            r#"rows = list(csv.DictReader(open({csv_path:?})))
series = defaultdict(list)
for r in rows:
    series[int(r["channels"])].append((float(r["distance_m"]), float(r["gain"])))
for m, pts in sorted(series.items()):
    pts.sort()
    plt.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"M={{m}}")
plt.xlabel("distance (m)")
plt.ylabel("rate gain over one channel")
"#
        ),
    };
    format!(
        "import csv\nfrom collections import defaultdict\n\nimport matplotlib.pyplot as plt\n\n{body}plt.legend()\nplt.grid(True)\nplt.savefig({:?})\n",
        format!("{}.png", csv_path.trim_end_matches(".csv"))
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SweepAxis;

    fn file_with(axis: Vec<SweepAxis>, mode: SweepMode) -> ScenarioFile {
        let mut f = ScenarioFile::default();
        f.simulation.slots = 5;
        f.network.flows = 3;
        f.sweep = Some(SweepSection {
            mode,
            axis,
            strategies: vec![Strategy::McdMac, Strategy::SingleChannelBest],
            seeds: vec![1, 2],
        });
        f
    }

    #[test]
    fn grid_order_and_labels() {
        let f = file_with(
            vec![
                SweepAxis {
                    name: SweepAxisName::Flows,
                    values: vec![2.0, 4.0],
                },
                SweepAxis {
                    name: SweepAxisName::Channels,
                    values: vec![1.0, 3.0],
                },
            ],
            SweepMode::Simulate,
        );
        let runs = expand(&f).unwrap();
        assert_eq!(runs.len(), 2 * 2 * 2 * 2);
        assert_eq!(runs[0].scenario_id, "flows=2;channels=1");
        assert_eq!(runs[0].cfg.seed, 1);
        assert_eq!(runs[1].cfg.seed, 2);
        assert_eq!(runs[2].cfg.strategy, Strategy::SingleChannelBest);
        assert_eq!(runs[4].cfg.n_channels(), 3);
        assert_eq!(runs[15].cfg.flows, 4);
        assert_eq!(runs[15].cfg.nodes, 8);
    }

    #[test]
    fn empty_axis_list_is_invalid() {
        let f = file_with(vec![], SweepMode::Simulate);
        assert!(expand(&f).unwrap_err().is_validation());
        assert!(expand(&ScenarioFile::default())
            .unwrap_err()
            .is_validation());
    }

    #[test]
    fn bad_axis_values_are_rejected() {
        let f = file_with(
            vec![SweepAxis {
                name: SweepAxisName::Channels,
                values: vec![7.0],
            }],
            SweepMode::Simulate,
        );
        assert!(expand(&f).unwrap_err().is_validation());
        let f = file_with(
            vec![SweepAxis {
                name: SweepAxisName::DistanceM,
                values: vec![50.0],
            }],
            SweepMode::Simulate,
        );
        assert!(expand(&f).is_err());
    }

    #[test]
    fn parallel_and_sequential_sweeps_agree() {
        let f = file_with(
            vec![SweepAxis {
                name: SweepAxisName::InterferenceW,
                values: vec![0.0, 1e-10],
            }],
            SweepMode::Simulate,
        );
        let a = run_sweep(&f, Execution::Sequential).unwrap();
        let b = run_sweep(&f, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        write_csv(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), METRICS_COLUMNS.join(","));
        assert_eq!(text.lines().count(), a.len() + 1);
    }

    #[test]
    fn rate_gain_rows() {
        let f = file_with(
            vec![SweepAxis {
                name: SweepAxisName::DistanceM,
                values: vec![10.0, 250.0],
            }],
            SweepMode::RateGain,
        );
        let rows = run_rate_gain(&f, Execution::Parallel).unwrap();
        assert_eq!(rows.len(), 2 * 6);
        // every channel carries 11 Mb/s at 10 m
        let near = rows
            .iter()
            .find(|r| r.distance_m == 10.0 && r.channels == 6)
            .unwrap();
        assert_eq!(near.gain, 6.0);
        let far = rows
            .iter()
            .find(|r| r.distance_m == 250.0 && r.channels == 6)
            .unwrap();
        assert_eq!(far.gain, 1.0);
    }
}
