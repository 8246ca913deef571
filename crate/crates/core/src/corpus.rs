//! The discretised dataset viewed tick by tick: per-vehicle node states, observed
//! actions and the risk each driver faced, on a grid matching the simulation step.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Dataset, VehicleId};
use crate::plg::{NodalPath, NodeId, Plg};
use crate::policy::{ActionGrid, ActionSample, LaneChange, PolicyObservation};
use crate::risk::{risk_vector, AgentView, RiskParams};

/// One vehicle at one dataset tick, located on the graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickState {
    pub vehicle_id: VehicleId,
    pub time: f64,
    pub node: NodeId,
    /// Index of `node` in the vehicle's nodal path.
    pub path_index: usize,
    /// Progress from `node` toward the next path node, metres.
    pub arc: f64,
    pub speed: f64,
    pub accel: f64,
    pub target_cluster: Option<usize>,
}

/// Dataset states grouped by tick, plus each vehicle's nodal path.
#[derive(Debug, Clone)]
pub struct TickCorpus {
    pub stride: f64,
    pub ticks: BTreeMap<i64, Vec<TickState>>,
    pub paths: BTreeMap<VehicleId, NodalPath>,
}

/// Signed side of `to` relative to the travel direction `heading` at `from`:
/// positive to the left.
pub fn side_of(plg: &Plg, heading: (NodeId, NodeId), to: NodeId) -> f64 {
    let (a, b) = heading;
    let dir = plg.position(b).sub(plg.position(a));
    dir.cross(plg.position(to).sub(plg.position(a)))
}

fn lane_change_between(plg: &Plg, path: &NodalPath, i: usize, j: usize) -> LaneChange {
    if j <= i {
        return LaneChange::None;
    }
    let (from, to) = (path.nodes[i], path.nodes[j]);
    match (plg.lane(from), plg.lane(to)) {
        (Some(a), Some(b)) if a != b => {}
        _ => return LaneChange::None,
    }
    // heading taken from the path step that arrived at `from`, or the one leaving it
    let heading = if i > 0 {
        (path.nodes[i - 1], from)
    } else {
        (from, path.nodes[i + 1])
    };
    if side_of(plg, heading, to) >= 0.0 {
        LaneChange::Left
    } else {
        LaneChange::Right
    }
}

impl TickCorpus {
    /// Keeps the samples whose time lies on the `stride` grid (within 1% of a stride)
    /// and locates each on its vehicle's nodal path.
    pub fn build(data: &Dataset, plg: &Plg, paths: &[NodalPath], stride: f64) -> Result<Self> {
        if !(stride > 0.0) {
            return Err(Error::InvalidConfig(format!("tick stride must be > 0, got {stride}")));
        }
        let paths: BTreeMap<VehicleId, NodalPath> =
            paths.iter().map(|p| (p.vehicle_id, p.clone())).collect();
        let mut ticks: BTreeMap<i64, Vec<TickState>> = BTreeMap::new();
        for (id, samples) in data.vehicles() {
            let Some(path) = paths.get(&id) else { continue };
            let mut idx = 0;
            for s in samples {
                while idx + 1 < path.nodes.len() && path.entry_times[idx + 1] <= s.time {
                    idx += 1;
                }
                let k = (s.time / stride).round();
                if (s.time - k * stride).abs() > 0.01 * stride {
                    continue;
                }
                let node = path.nodes[idx];
                let arc = match path.nodes.get(idx + 1) {
                    Some(&next) => {
                        let a = plg.position(node);
                        let dir = plg.position(next).sub(a);
                        let len = dir.norm();
                        if len > 0.0 {
                            (s.position().sub(a).dot(dir) / len).clamp(0.0, len * (1.0 - 1e-9))
                        } else {
                            0.0
                        }
                    }
                    None => 0.0,
                };
                ticks.entry(k as i64).or_default().push(TickState {
                    vehicle_id: id,
                    time: s.time,
                    node,
                    path_index: idx,
                    arc,
                    speed: s.speed,
                    accel: s.accel,
                    target_cluster: path.target_cluster,
                });
            }
        }
        Ok(Self {
            stride,
            ticks,
            paths,
        })
    }

    pub fn trajectory_count(&self) -> usize {
        self.paths.len()
    }

    pub fn state_count(&self) -> usize {
        self.ticks.values().map(Vec::len).sum()
    }

    /// Remaining observed route of a vehicle from its state.
    pub fn route(&self, s: &TickState) -> &[NodeId] {
        &self.paths[&s.vehicle_id].nodes[s.path_index..]
    }

    pub fn views<'a>(&'a self, states: &'a [TickState]) -> Vec<AgentView<'a>> {
        states
            .iter()
            .map(|s| AgentView {
                id: s.vehicle_id,
                node: s.node,
                arc: s.arc,
                speed: s.speed,
                accel: s.accel,
                route: self.route(s),
            })
            .collect()
    }

    /// Observed `(risk, action)` pairs: the accel bin nearest the recorded
    /// acceleration and the lane transition, if any, to the next tick's node.
    pub fn observations(
        &self,
        plg: &Plg,
        grid: &ActionGrid,
        params: &RiskParams,
    ) -> Vec<PolicyObservation> {
        let mut next_index: BTreeMap<(i64, VehicleId), usize> = BTreeMap::new();
        for (&k, states) in &self.ticks {
            for s in states {
                next_index.insert((k, s.vehicle_id), s.path_index);
            }
        }
        let mut out = Vec::new();
        for (&k, states) in &self.ticks {
            let views = self.views(states);
            for (s, ego) in states.iter().zip(&views) {
                let Some(&j) = next_index.get(&(k + 1, s.vehicle_id)) else {
                    continue;
                };
                let risk = risk_vector(ego, &views, plg, params);
                let path = &self.paths[&s.vehicle_id];
                let lane_change = lane_change_between(plg, path, s.path_index, j);
                out.push(PolicyObservation {
                    risk,
                    action: ActionSample {
                        accel_bin: grid.nearest_accel_bin(s.accel),
                        lane_change,
                    },
                });
            }
        }
        out
    }
}
