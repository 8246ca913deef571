use serde::{Deserialize, Serialize};

use crate::container;
use crate::corpus::TickCorpus;
use crate::error::Result;
use crate::ingest::VehicleId;
use crate::plg::{NodeId, Plg};
use crate::risk::{course_relation, mttc, RiskParams};

pub const SEED_FORMAT_VERSION: u32 = 1;
const SEED_KIND: &[u8; 4] = b"SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedVehicle {
    pub vehicle_id: VehicleId,
    pub node: NodeId,
    pub arc: f64,
    pub speed: f64,
    pub accel: f64,
    pub target_cluster: usize,
}

/// A high-risk snapshot from the data used to start simulations. The two vehicles
/// with the smallest MTTC come first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedState {
    pub id: usize,
    /// Dataset tick (multiple of the stride) and time it was taken from.
    pub tick: i64,
    pub time: f64,
    pub min_mttc: f64,
    pub vehicles: Vec<SeedVehicle>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeedConfig {
    /// MTTC threshold, seconds.
    pub tau: f64,
    /// Vehicles within this distance of either of the riskiest pair join the scene.
    pub scene_radius: f64,
    pub risk: RiskParams,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self {
            tau: 5.0,
            scene_radius: 0.0,
            risk: RiskParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSet {
    pub trajectories: usize,
    pub states: usize,
    pub config: SeedConfig,
    pub seeds: Vec<SeedState>,
}

/// Scans every dataset tick for the vehicle pair with the smallest MTTC along a
/// shared course and keeps the tick when that MTTC is at most `tau`.
/// Ticks where two scene vehicles already share a node are skipped.
pub fn extract_seed_states(corpus: &TickCorpus, plg: &Plg, config: &SeedConfig) -> SeedSet {
    let mut seeds = Vec::new();
    for (&tick, states) in &corpus.ticks {
        let eligible: Vec<_> = states.iter().filter(|s| s.target_cluster.is_some()).collect();
        let owned: Vec<_> = eligible.iter().map(|s| (*s).clone()).collect();
        let views = corpus.views(&owned);
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..views.len() {
            for j in i + 1..views.len() {
                let Some((gap, i_follows)) = course_relation(&views[i], &views[j], plg, config.risk.lookahead)
                else {
                    continue;
                };
                let (f, l) = if i_follows { (i, j) } else { (j, i) };
                let Ok(t) = mttc(gap, views[f].speed, views[l].speed, views[f].accel, views[l].accel) else {
                    continue;
                };
                if t <= config.tau && best.map_or(true, |(b, _, _)| t < b) {
                    best = Some((t, i, j));
                }
            }
        }
        let Some((min_mttc, i, j)) = best else { continue };
        let pi = plg.position(owned[i].node);
        let pj = plg.position(owned[j].node);
        let mut scene = vec![i, j];
        for k in 0..owned.len() {
            if k == i || k == j {
                continue;
            }
            let p = plg.position(owned[k].node);
            if p.distance(pi).min(p.distance(pj)) <= config.scene_radius {
                scene.push(k);
            }
        }
        let mut nodes: Vec<NodeId> = scene.iter().map(|&k| owned[k].node).collect();
        nodes.sort_unstable();
        if nodes.windows(2).any(|w| w[0] == w[1]) {
            continue;
        }
        let vehicles = scene
            .iter()
            .map(|&k| {
                let s = &owned[k];
                SeedVehicle {
                    vehicle_id: s.vehicle_id,
                    node: s.node,
                    arc: s.arc,
                    speed: s.speed,
                    accel: s.accel,
                    target_cluster: s.target_cluster.expect("filtered above"),
                }
            })
            .collect();
        seeds.push(SeedState {
            id: seeds.len(),
            tick,
            time: owned[i].time,
            min_mttc,
            vehicles,
        });
    }
    SeedSet {
        trajectories: corpus.trajectory_count(),
        states: corpus.state_count(),
        config: *config,
        seeds,
    }
}

pub fn serialise_seeds(set: &SeedSet) -> Result<Vec<u8>> {
    container::encode(SEED_KIND, SEED_FORMAT_VERSION, set)
}

pub fn deserialise_seeds(bytes: &[u8]) -> Result<SeedSet> {
    container::decode(SEED_KIND, SEED_FORMAT_VERSION, bytes)
}
