//! Tick-based multi-agent episodes on a lane graph: vehicles follow sampled nodal
//! paths, react to risk through their action policy, and an episode ends when two
//! vehicles occupy the same node at the same time.

mod log;
mod seeds;

pub use log::{read_episode_csv, write_episode_csv, EpisodeMeta, EpisodeSidecar, EPISODE_CSV_HEADER};
pub use seeds::{
    deserialise_seeds, extract_seed_states, serialise_seeds, SeedConfig, SeedSet, SeedState,
    SeedVehicle, SEED_FORMAT_VERSION,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::side_of;
use crate::error::{Error, Result};
use crate::ingest::VehicleId;
use crate::planner::{default_max_len, plan_path, ConditionalTable, PlanEnd};
use crate::plg::{NodeId, Plg};
use crate::policy::{ActionPolicy, LaneChange};
use crate::ppo::reward;
use crate::risk::{risk_vector, AgentView, RiskParams, RiskVector};
use crate::Point;

/// Which vehicles act under the primary policy; the rest use the background policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyAssignment {
    #[default]
    All,
    /// Only the first vehicle of each seed (one of its riskiest pair).
    EgoOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Tick period, seconds.
    pub dt: f64,
    pub v_max: f64,
    pub max_ticks: usize,
    pub risk: RiskParams,
    /// Planner step limit; `4 sqrt(|N|)` when unset.
    pub max_len: Option<usize>,
    pub assignment: PolicyAssignment,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.5,
            v_max: 25.0,
            max_ticks: 20,
            risk: RiskParams::default(),
            max_len: None,
            assignment: PolicyAssignment::All,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.v_max > 0.0) || self.max_ticks == 0 {
            return Err(Error::InvalidConfig(
                "simulation needs dt > 0, v_max > 0 and max_ticks >= 1".into(),
            ));
        }
        if self.risk.k_bv == 0 || self.risk.lookahead == 0 {
            return Err(Error::InvalidConfig("k_bv and lookahead must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
pub struct Policies<'a> {
    pub primary: &'a dyn ActionPolicy,
    pub background: &'a dyn ActionPolicy,
}

impl<'a> Policies<'a> {
    pub fn uniform(policy: &'a dyn ActionPolicy) -> Self {
        Self {
            primary: policy,
            background: policy,
        }
    }

    fn uses_primary(assignment: PolicyAssignment, index: usize) -> bool {
        match assignment {
            PolicyAssignment::All => true,
            PolicyAssignment::EgoOnly => index == 0,
        }
    }
}

/// One vehicle's logged state at the end of a tick (tick 0 is the seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: usize,
    pub vehicle_id: VehicleId,
    pub node_id: NodeId,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub accel: f64,
    pub lane_change: LaneChange,
    pub risk_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Collision {
        vehicles: (VehicleId, VehicleId),
        node: NodeId,
        tick: usize,
    },
    Timeout {
        tick: usize,
    },
    AllRetired {
        tick: usize,
    },
}

impl Termination {
    pub fn is_collision(&self) -> bool {
        matches!(self, Termination::Collision { .. })
    }

    pub fn tick(&self) -> usize {
        match *self {
            Termination::Collision { tick, .. }
            | Termination::Timeout { tick }
            | Termination::AllRetired { tick } => tick,
        }
    }
}

/// A decision taken under the primary policy, for learning.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub risk: RiskVector,
    pub action: usize,
    pub log_prob: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentTrace {
    pub vehicle_id: VehicleId,
    pub steps: Vec<Transition>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub episode_id: usize,
    pub seed_id: usize,
    pub rng_seed: u64,
    pub stream: u64,
    pub dt: f64,
    pub termination: Termination,
    pub records: Vec<TickRecord>,
    /// Filled only when traces were requested.
    pub traces: Vec<AgentTrace>,
}

impl Episode {
    /// Node sequence of one vehicle over the logged ticks.
    pub fn node_track(&self, vehicle: VehicleId) -> Vec<(usize, NodeId)> {
        self.records
            .iter()
            .filter(|r| r.vehicle_id == vehicle)
            .map(|r| (r.tick, r.node_id))
            .collect()
    }
}

#[derive(Debug, Clone)]
struct SimVehicle {
    index: usize,
    id: VehicleId,
    node: NodeId,
    arc: f64,
    speed: f64,
    accel: f64,
    /// Planned nodes starting at `node`.
    route: Vec<NodeId>,
    end: PlanEnd,
    target: usize,
    active: bool,
}

impl SimVehicle {
    fn view(&self) -> AgentView<'_> {
        AgentView {
            id: self.id,
            node: self.node,
            arc: self.arc,
            speed: self.speed,
            accel: self.accel,
            route: &self.route,
        }
    }

    fn position(&self, plg: &Plg) -> Point {
        let a = plg.position(self.node);
        match self.route.get(1) {
            Some(&next) => {
                let len = plg.edge_length(self.node, next);
                if len > 0.0 {
                    a.lerp(plg.position(next), self.arc / len)
                } else {
                    a
                }
            }
            None => a,
        }
    }
}

/// Node occupancy within one tick, as fractions of the tick.
#[derive(Debug, Clone, Copy)]
struct Occupancy {
    node: NodeId,
    enter: f64,
    /// `None` for the node held at the end of the tick (occupied through `t = 1`).
    leave: Option<f64>,
}

fn overlap(a: &Occupancy, b: &Occupancy) -> Option<f64> {
    if a.node != b.node {
        return None;
    }
    let start = a.enter.max(b.enter);
    match (a.leave, b.leave) {
        (None, None) => Some(start),
        (Some(e), None) | (None, Some(e)) => (start < e).then_some(start),
        (Some(e1), Some(e2)) => (start < e1.min(e2)).then_some(start),
    }
}

struct World<'a> {
    plg: &'a Plg,
    table: &'a ConditionalTable,
    config: &'a SimConfig,
    max_len: usize,
    vehicles: Vec<SimVehicle>,
}

impl<'a> World<'a> {
    fn replan(&self, v: &mut SimVehicle, from: NodeId, rng: &mut ChaCha8Rng) -> bool {
        match plan_path(self.table, self.plg, from, v.target, self.max_len, rng) {
            Ok(p) => {
                v.route.truncate(v.route.iter().position(|&n| n == from).unwrap_or(0));
                v.route.extend(p.nodes);
                v.end = p.end;
                true
            }
            Err(_) => false,
        }
    }

    fn risks(&self) -> Vec<Option<RiskVector>> {
        let views: Vec<AgentView<'_>> = self
            .vehicles
            .iter()
            .filter(|v| v.active)
            .map(SimVehicle::view)
            .collect();
        self.vehicles
            .iter()
            .map(|v| {
                v.active
                    .then(|| risk_vector(&v.view(), &views, self.plg, &self.config.risk))
            })
            .collect()
    }

    /// Points the route at the most likely successor in a different lane on the
    /// requested side, then replans from there. No effect when none exists.
    fn apply_lane_change(&self, v: &mut SimVehicle, lc: LaneChange, rng: &mut ChaCha8Rng) {
        if lc == LaneChange::None || v.route.len() < 2 {
            return;
        }
        let Some(lane) = self.plg.lane(v.node) else { return };
        let heading = (v.node, v.route[1]);
        let mut best: Option<(NodeId, f64)> = None;
        for &(s, p) in self.plg.successors(v.node) {
            match self.plg.lane(s) {
                Some(l) if l != lane => {}
                _ => continue,
            }
            let side = side_of(self.plg, heading, s);
            let ok = match lc {
                LaneChange::Left => side > 0.0,
                LaneChange::Right => side < 0.0,
                LaneChange::None => false,
            };
            if ok && best.map_or(true, |(_, bp)| p > bp) {
                best = Some((s, p));
            }
        }
        let Some((s, _)) = best else { return };
        if s == v.route[1] {
            return;
        }
        v.route.truncate(1);
        v.route.push(s);
        if self.plg.in_cluster(s, v.target) {
            v.end = PlanEnd::Reached;
        } else if !self.replan(v, s, rng) {
            v.end = PlanEnd::DeadEnd;
        }
        let len = self.plg.edge_length(v.node, s);
        v.arc = v.arc.min(len * (1.0 - 1e-9));
    }

    /// Moves a vehicle `speed * dt` along its route. Returns its node occupancy over
    /// the tick and whether it has left the simulation.
    fn advance(&self, v: &mut SimVehicle, rng: &mut ChaCha8Rng) -> (Vec<Occupancy>, bool) {
        let dist = v.speed * self.config.dt;
        let mut occ = vec![Occupancy {
            node: v.node,
            enter: 0.0,
            leave: None,
        }];
        let mut travelled = 0.0;
        let mut remaining = dist;
        loop {
            if v.route.len() < 2 {
                let from = v.node;
                if v.end == PlanEnd::Truncated && self.replan(v, from, rng) && v.route.len() >= 2 {
                    continue;
                }
                v.arc = 0.0;
                return (occ, true);
            }
            let len = self.plg.edge_length(v.route[0], v.route[1]);
            let to_next = (len - v.arc).max(0.0);
            if remaining < to_next {
                v.arc += remaining;
                return (occ, false);
            }
            remaining -= to_next;
            travelled += to_next;
            let f = if dist > 0.0 { travelled / dist } else { 0.0 };
            occ.last_mut().unwrap().leave = Some(f);
            v.route.remove(0);
            v.node = v.route[0];
            v.arc = 0.0;
            occ.push(Occupancy {
                node: v.node,
                enter: f,
                leave: None,
            });
        }
    }
}

/// Simulates one episode from a seed. With `trace_reward_cap` set, every decision
/// made under the primary policy is returned with its reward.
#[allow(clippy::too_many_arguments)]
pub fn run_episode(
    seed: &SeedState,
    episode_id: usize,
    stream: u64,
    config: &SimConfig,
    policies: Policies<'_>,
    table: &ConditionalTable,
    plg: &Plg,
    trace_reward_cap: Option<f64>,
) -> Result<Episode> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);
    let mut world = World {
        plg,
        table,
        config,
        max_len: config.max_len.unwrap_or_else(|| default_max_len(plg.node_count())),
        vehicles: Vec::with_capacity(seed.vehicles.len()),
    };
    for (index, s) in seed.vehicles.iter().enumerate() {
        if s.node >= plg.node_count() || s.target_cluster >= plg.clusters().len() {
            return Err(Error::Invalid(format!(
                "seed {} does not fit the graph (node {}, cluster {})",
                seed.id, s.node, s.target_cluster
            )));
        }
        let mut v = SimVehicle {
            index,
            id: s.vehicle_id,
            node: s.node,
            arc: s.arc,
            speed: s.speed.clamp(0.0, config.v_max),
            accel: s.accel,
            route: vec![s.node],
            end: PlanEnd::DeadEnd,
            target: s.target_cluster,
            active: true,
        };
        if !world.replan(&mut v, s.node, &mut rng) {
            v.end = PlanEnd::DeadEnd;
        }
        match v.route.get(1) {
            Some(&next) => v.arc = v.arc.min(plg.edge_length(v.node, next) * (1.0 - 1e-9)),
            None => {
                v.arc = 0.0;
                v.active = false;
            }
        }
        world.vehicles.push(v);
    }

    let mut records = Vec::new();
    let mut traces: Vec<AgentTrace> = world
        .vehicles
        .iter()
        .map(|v| AgentTrace {
            vehicle_id: v.id,
            steps: Vec::new(),
        })
        .collect();
    let mut risks = world.risks();
    for v in &world.vehicles {
        let p = v.position(plg);
        records.push(TickRecord {
            tick: 0,
            vehicle_id: v.id,
            node_id: v.node,
            x: p.x,
            y: p.y,
            speed: v.speed,
            accel: v.accel,
            lane_change: LaneChange::None,
            risk_max: risks[v.index].as_ref().map_or(0.0, RiskVector::max),
        });
    }

    let mut termination = Termination::Timeout {
        tick: config.max_ticks,
    };
    for tick in 1..=config.max_ticks {
        if world.vehicles.iter().all(|v| !v.active) {
            termination = Termination::AllRetired { tick: tick - 1 };
            break;
        }
        let n = world.vehicles.len();
        let mut decisions: Vec<Option<(usize, f64, LaneChange, f64)>> = vec![None; n];
        for i in 0..n {
            if !world.vehicles[i].active {
                continue;
            }
            let primary = Policies::uses_primary(config.assignment, i);
            let policy = if primary { policies.primary } else { policies.background };
            let risk = risks[i].as_ref().expect("active vehicles have risk vectors");
            let (joint, log_prob) = policy.sample_joint(risk, &mut rng)?;
            let action = policy.grid().action(joint);
            decisions[i] = Some((joint, log_prob, action.lane_change, policy.grid().accel(action)));
        }

        let mut occupancy: Vec<Vec<Occupancy>> = vec![Vec::new(); n];
        let mut leaving = vec![false; n];
        for i in 0..n {
            let Some((_, _, lc, a)) = decisions[i] else { continue };
            let mut v = world.vehicles[i].clone();
            world.apply_lane_change(&mut v, lc, &mut rng);
            v.accel = a;
            v.speed = (v.speed + a * config.dt).clamp(0.0, config.v_max);
            let (occ, gone) = world.advance(&mut v, &mut rng);
            occupancy[i] = occ;
            leaving[i] = gone;
            world.vehicles[i] = v;
        }

        let mut collision: Option<(f64, usize, usize, NodeId)> = None;
        let pair_key = |i: usize, j: usize| {
            let (x, y) = (world.vehicles[i].id, world.vehicles[j].id);
            (x.min(y), x.max(y))
        };
        let mut offer = |t: f64, i: usize, j: usize, node: NodeId| {
            let better = match collision {
                None => true,
                Some((bt, bi, bj, _)) => t < bt || (t == bt && pair_key(i, j) < pair_key(bi, bj)),
            };
            if better {
                collision = Some((t, i, j, node));
            }
        };
        for i in 0..n {
            for j in i + 1..n {
                for a in &occupancy[i] {
                    for b in &occupancy[j] {
                        if let Some(t) = overlap(a, b) {
                            offer(t, i, j, a.node);
                        }
                    }
                }
                // opposite traversals of one edge inside the tick cross each other
                for wa in occupancy[i].windows(2) {
                    for wb in occupancy[j].windows(2) {
                        if wa[0].node == wb[1].node && wa[1].node == wb[0].node {
                            offer(wa[1].enter.max(wb[1].enter), i, j, wa[1].node);
                        }
                    }
                }
            }
        }

        let post = world.risks();
        for i in 0..n {
            let Some((_, _, lc, _)) = decisions[i] else { continue };
            let v = &world.vehicles[i];
            let mut node = v.node;
            let mut p = v.position(plg);
            if let Some((_, a, b, cn)) = collision {
                if i == a || i == b {
                    node = cn;
                    p = plg.position(cn);
                }
            }
            records.push(TickRecord {
                tick,
                vehicle_id: v.id,
                node_id: node,
                x: p.x,
                y: p.y,
                speed: v.speed,
                accel: v.accel,
                lane_change: lc,
                risk_max: post[i].as_ref().map_or(0.0, RiskVector::max),
            });
        }

        if let Some(cap) = trace_reward_cap {
            for i in 0..n {
                let Some((joint, log_prob, _, _)) = decisions[i] else { continue };
                if !Policies::uses_primary(config.assignment, i) {
                    continue;
                }
                let r = match collision {
                    Some((_, a, b, _)) if i == a || i == b => cap,
                    _ => post[i].as_ref().map_or(0.0, |r| reward(r, cap)),
                };
                traces[i].steps.push(Transition {
                    risk: risks[i].take().expect("active vehicles have risk vectors"),
                    action: joint,
                    log_prob,
                    reward: r,
                });
            }
        }

        if let Some((_, a, b, node)) = collision {
            let (ia, ib) = (world.vehicles[a].id, world.vehicles[b].id);
            termination = Termination::Collision {
                vehicles: (ia.min(ib), ia.max(ib)),
                node,
                tick,
            };
            break;
        }
        for (v, gone) in world.vehicles.iter_mut().zip(&leaving) {
            if *gone {
                v.active = false;
            }
        }
        if world.vehicles.iter().all(|v| !v.active) {
            termination = Termination::AllRetired { tick };
            break;
        }
        risks = world.risks();
    }

    traces.retain(|t| !t.steps.is_empty());
    Ok(Episode {
        episode_id,
        seed_id: seed.id,
        rng_seed: config.seed,
        stream,
        dt: config.dt,
        termination,
        records,
        traces,
    })
}

/// Episodes per seed, with aggregate and per-seed corner-case rates.
#[derive(Debug, Clone)]
pub struct BatchResult {
    pub episodes: Vec<Episode>,
    pub rate: f64,
    /// `(seed id, episodes, collisions)` in seed order.
    pub per_seed: Vec<(usize, usize, usize)>,
}

/// Runs `n_per_seed` episodes for every seed. Episode `k` uses rng stream `k`, so the
/// result does not depend on how episodes are scheduled across threads.
pub fn batch_simulate(
    seeds: &[SeedState],
    n_per_seed: usize,
    config: &SimConfig,
    policies: Policies<'_>,
    table: &ConditionalTable,
    plg: &Plg,
) -> Result<BatchResult> {
    if seeds.is_empty() {
        return Err(Error::Invalid("no seed states to simulate".into()));
    }
    let jobs: Vec<(usize, &SeedState)> = seeds
        .iter()
        .flat_map(|s| std::iter::repeat(s).take(n_per_seed))
        .enumerate()
        .collect();
    let episodes = jobs
        .par_iter()
        .map(|&(k, s)| run_episode(s, k, k as u64, config, policies, table, plg, None))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarise_batch(seeds, episodes))
}

/// Runs a fixed number of episodes cycling through the seed list.
pub fn simulate_episodes(
    seeds: &[SeedState],
    episodes: usize,
    config: &SimConfig,
    policies: Policies<'_>,
    table: &ConditionalTable,
    plg: &Plg,
) -> Result<BatchResult> {
    if seeds.is_empty() {
        return Err(Error::Invalid("no seed states to simulate".into()));
    }
    let out = (0..episodes)
        .into_par_iter()
        .map(|k| {
            run_episode(&seeds[k % seeds.len()], k, k as u64, config, policies, table, plg, None)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarise_batch(seeds, out))
}

fn summarise_batch(seeds: &[SeedState], episodes: Vec<Episode>) -> BatchResult {
    let mut per_seed: Vec<(usize, usize, usize)> = seeds.iter().map(|s| (s.id, 0, 0)).collect();
    let index: std::collections::BTreeMap<usize, usize> =
        seeds.iter().enumerate().map(|(i, s)| (s.id, i)).collect();
    for e in &episodes {
        let slot = &mut per_seed[index[&e.seed_id]];
        slot.1 += 1;
        slot.2 += usize::from(e.termination.is_collision());
    }
    let collisions = episodes.iter().filter(|e| e.termination.is_collision()).count();
    let rate = if episodes.is_empty() {
        0.0
    } else {
        collisions as f64 / episodes.len() as f64
    };
    per_seed.retain(|s| s.1 > 0);
    BatchResult {
        episodes,
        rate,
        per_seed,
    }
}
