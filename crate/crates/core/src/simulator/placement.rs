use rand::Rng;

use super::ScenarioConfig;
use crate::error::{Error, Result};

const MAX_REDRAWS: usize = 1000;

/// Node coordinates and the (source, destination) pair of every flow.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub positions: Vec<(f64, f64)>,
    /// Flow `i` is sent by node `i` to `flows[i].1`.
    pub flows: Vec<(usize, usize)>,
}

impl Placement {
    /// Euclidean distance, floored at one metre.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (xa, ya) = self.positions[a];
        let (xb, yb) = self.positions[b];
        (xa - xb).hypot(ya - yb).max(1.0)
    }
}

fn uniform_in_disk<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> (f64, f64) {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = std::f64::consts::TAU * rng.random::<f64>();
    (r * theta.cos(), r * theta.sin())
}

/// Drop `cfg.nodes` nodes uniformly in the arena. Nodes `0..flows` are
/// sources; each picks a destination within control range, preferring
/// nodes that are neither sources nor already someone's destination. A
/// source with nobody in range is moved, up to a bounded number of times.
pub fn place_nodes<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Placement> {
    let radius = cfg.area_diameter / 2.0;
    let range = cfg.ctx.table.ccc_radii()[0];
    let mut positions: Vec<(f64, f64)> = (0..cfg.nodes)
        .map(|_| uniform_in_disk(radius, rng))
        .collect();
    let mut taken = vec![false; cfg.nodes];
    let mut flows = Vec::with_capacity(cfg.flows);
    for s in 0..cfg.flows {
        let mut redraws = 0;
        let dst = loop {
            let p = Placement {
                positions: positions.clone(),
                flows: Vec::new(),
            };
            let in_range: Vec<usize> = (0..cfg.nodes)
                .filter(|&j| j != s && p.distance(s, j) <= range)
                .collect();
            let preferred: Vec<usize> = in_range
                .iter()
                .copied()
                .filter(|&j| j >= cfg.flows && !taken[j])
                .collect();
            let pool = if preferred.is_empty() {
                &in_range
            } else {
                &preferred
            };
            if !pool.is_empty() {
                break pool[rng.random_range(0..pool.len())];
            }
            redraws += 1;
            if redraws > MAX_REDRAWS {
                return Err(Error::Placement(format!(
                    "source {s} has no node within {range} m after {MAX_REDRAWS} redraws"
                )));
            }
            positions[s] = uniform_in_disk(radius, rng);
        };
        taken[dst] = true;
        flows.push((s, dst));
    }
    Ok(Placement { positions, flows })
}
