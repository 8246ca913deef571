use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, LaneId, TrajectorySample};
use crate::error::{Error, Result};
use crate::geom::Polyline;
use crate::Point;

/// Lane centreline for the synthetic generator. A lane with `joins` set merges into
/// that lane once its own centreline runs out; otherwise vehicles leave the map there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLane {
    pub id: LaneId,
    pub polyline: Vec<[f64; 2]>,
    #[serde(default)]
    pub joins: Option<LaneId>,
}

/// Intelligent-driver-model parameters used by the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriverModel {
    pub max_accel: f64,
    pub comfort_decel: f64,
    pub time_headway: f64,
    pub min_gap: f64,
    pub vehicle_length: f64,
    pub lane_change_duration: f64,
}

impl Default for DriverModel {
    fn default() -> Self {
        Self {
            max_accel: 1.5,
            comfort_decel: 2.0,
            time_headway: 1.2,
            min_gap: 2.0,
            vehicle_length: 4.5,
            lane_change_duration: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub lanes: Vec<SyntheticLane>,
    pub vehicles: usize,
    pub ticks: usize,
    /// Sampling period, seconds.
    pub dt: f64,
    /// Expected lane changes per vehicle-second.
    pub lane_change_rate: f64,
    /// Bound on the lateral in-lane offset, metres.
    pub lateral_noise: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    /// Mean spacing between vehicle entries, seconds.
    pub spawn_interval: f64,
    pub driver: DriverModel,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self::two_lane_merge()
    }
}

impl SyntheticSpec {
    /// Two lanes along +x, the upper one tapering into the lower one near the end.
    pub fn two_lane_merge() -> Self {
        Self {
            lanes: vec![
                SyntheticLane {
                    id: 1,
                    polyline: vec![[0.0, 0.0], [300.0, 0.0]],
                    joins: None,
                },
                SyntheticLane {
                    id: 2,
                    polyline: vec![[0.0, 3.7], [200.0, 3.7], [250.0, 0.0]],
                    joins: Some(1),
                },
            ],
            vehicles: 40,
            ticks: 1500,
            dt: 0.1,
            lane_change_rate: 0.03,
            lateral_noise: 0.2,
            speed_min: 9.0,
            speed_max: 16.0,
            spawn_interval: 2.0,
            driver: DriverModel::default(),
        }
    }

    /// `n` straight parallel lanes of the given length, 3.7 m apart, travelling +x.
    pub fn parallel_lanes(n: usize, length: f64) -> Self {
        let lanes = (0..n)
            .map(|i| SyntheticLane {
                id: i as LaneId + 1,
                polyline: vec![[0.0, 3.7 * i as f64], [length, 3.7 * i as f64]],
                joins: None,
            })
            .collect();
        Self {
            lanes,
            ..Self::two_lane_merge()
        }
    }

    fn validate(&self) -> Result<Vec<Polyline<f64>>> {
        if self.lanes.is_empty() {
            return Err(Error::InvalidConfig("synthetic corpus needs at least one lane".into()));
        }
        if !(self.dt > 0.0) || !(self.spawn_interval >= 0.0) {
            return Err(Error::InvalidConfig("dt must be positive".into()));
        }
        if !(self.speed_min > 0.0 && self.speed_max >= self.speed_min) {
            return Err(Error::InvalidConfig("speed range must be positive and ordered".into()));
        }
        let mut lines = Vec::with_capacity(self.lanes.len());
        for lane in &self.lanes {
            let pts = lane.polyline.iter().map(|p| Point::new(p[0], p[1])).collect();
            let line = Polyline::new(pts).ok_or_else(|| {
                Error::InvalidConfig(format!("lane {} has a degenerate polyline", lane.id))
            })?;
            if let Some(j) = lane.joins {
                if !self.lanes.iter().any(|l| l.id == j) || j == lane.id {
                    return Err(Error::InvalidConfig(format!(
                        "lane {} joins unknown lane {j}",
                        lane.id
                    )));
                }
            }
            lines.push(line);
        }
        Ok(lines)
    }
}

struct LaneChange {
    from: usize,
    elapsed: f64,
}

struct Vehicle {
    id: u64,
    lane: usize,
    arc: f64,
    speed: f64,
    desired: f64,
    offset: f64,
    change: Option<LaneChange>,
}

struct Spawn {
    time: f64,
    lane: usize,
    desired: f64,
}

/// Length of road before a junction over which merging traffic zips together, metres.
const MERGE_ZONE: f64 = 80.0;

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Deterministic (per seed) corpus of vehicles driving the configured lanes under an
/// intelligent-driver car-following model with occasional lane changes.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    let lines = spec.validate()?;
    let lane_index = |id: LaneId| spec.lanes.iter().position(|l| l.id == id).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drv = &spec.driver;

    let schedule: Vec<Spawn> = (0..spec.vehicles)
        .map(|i| {
            let jitter = if spec.spawn_interval > 0.0 {
                rng.gen_range(0.0..0.5 * spec.spawn_interval)
            } else {
                0.0
            };
            let lane = rng.gen_range(0..spec.lanes.len());
            let desired = if spec.speed_max > spec.speed_min {
                rng.gen_range(spec.speed_min..spec.speed_max)
            } else {
                spec.speed_min
            };
            Spawn {
                time: i as f64 * spec.spawn_interval + jitter,
                lane,
                desired,
            }
        })
        .collect();

    let base_position = |v: &Vehicle| -> Point {
        let here = lines[v.lane].point_at(v.arc);
        let p = match &v.change {
            Some(c) => {
                let from = &lines[c.from];
                let there = from.point_at(from.project(here).arc);
                there.lerp(here, smoothstep(c.elapsed / drv.lane_change_duration))
            }
            None => here,
        };
        p.add(lines[v.lane].normal(v.arc).scale(v.offset))
    };

    // (joining lane, joined lane, arc of the junction along the joined lane)
    let merges: Vec<(usize, usize, f64)> = spec
        .lanes
        .iter()
        .enumerate()
        .filter_map(|(k, lane)| {
            let target = lane_index(lane.joins?);
            let end = lines[k].point_at(lines[k].length());
            Some((k, target, lines[target].project(end).arc))
        })
        .collect();

    let mut samples = Vec::new();
    let mut active: Vec<Vehicle> = Vec::new();
    let mut next_spawn = 0;
    for tick in 0..spec.ticks {
        let t = tick as f64 * spec.dt;
        while next_spawn < schedule.len() && schedule[next_spawn].time <= t + 1e-9 {
            let s = &schedule[next_spawn];
            let blocked = active.iter().any(|v| {
                let p = lines[s.lane].project(base_position(v));
                p.lateral.abs() < 1.8 && p.arc < drv.min_gap + 2.0 * drv.vehicle_length
            });
            if blocked {
                break;
            }
            let lead_speed = active
                .iter()
                .filter_map(|v| {
                    let p = lines[s.lane].project(base_position(v));
                    (p.lateral.abs() < 1.8 && p.arc >= 0.0 && p.arc < 60.0).then_some(v.speed)
                })
                .fold(f64::INFINITY, f64::min);
            active.push(Vehicle {
                id: next_spawn as u64 + 1,
                lane: s.lane,
                arc: 0.0,
                speed: s.desired.min(lead_speed),
                desired: s.desired,
                offset: 0.0,
                change: None,
            });
            next_spawn += 1;
        }
        if active.is_empty() {
            if next_spawn >= schedule.len() {
                break;
            }
            continue;
        }

        let positions: Vec<Point> = active.iter().map(|v| base_position(v)).collect();
        // progress along the joined lane for vehicles approaching a merge
        let merge_arcs: Vec<Option<(usize, f64)>> = active
            .iter()
            .enumerate()
            .map(|(i, v)| {
                merges.iter().find_map(|&(joining, target, junction)| {
                    if v.lane != joining && v.lane != target {
                        return None;
                    }
                    let p = lines[target].project(positions[i]);
                    (p.arc >= junction - MERGE_ZONE && p.arc <= junction).then_some((target, p.arc))
                })
            })
            .collect();
        let accels: Vec<f64> = active
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let line = &lines[v.lane];
                let own = line.project(positions[i]).arc;
                let leader = active
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .filter_map(|(j, o)| {
                        let p = line.project(positions[j]);
                        if p.lateral.abs() < 1.8 && p.arc > own {
                            return Some((p.arc - own, o.speed));
                        }
                        match (merge_arcs[i], merge_arcs[j]) {
                            (Some((a, mine)), Some((b, theirs))) if a == b && theirs > mine => {
                                Some((theirs - mine, o.speed))
                            }
                            _ => None,
                        }
                    })
                    .min_by(|a, b| a.0.total_cmp(&b.0));
                let free = 1.0 - (v.speed / v.desired).powi(4);
                let interaction = match leader {
                    Some((dist, lead_speed)) => {
                        let gap = (dist - drv.vehicle_length).max(0.1);
                        let dyn_gap = v.speed * drv.time_headway
                            + v.speed * (v.speed - lead_speed)
                                / (2.0 * (drv.max_accel * drv.comfort_decel).sqrt());
                        let desired_gap = drv.min_gap + dyn_gap.max(0.0);
                        (desired_gap / gap).powi(2)
                    }
                    None => 0.0,
                };
                (drv.max_accel * (free - interaction)).max(-9.0)
            })
            .collect();

        for (i, v) in active.iter().enumerate() {
            let new_speed = (v.speed + accels[i] * spec.dt).max(0.0);
            let lane_id = match &v.change {
                Some(c) if c.elapsed < 0.5 * drv.lane_change_duration => spec.lanes[c.from].id,
                _ => spec.lanes[v.lane].id,
            };
            samples.push(TrajectorySample {
                vehicle_id: v.id,
                time: t,
                x: positions[i].x,
                y: positions[i].y,
                speed: v.speed,
                accel: (new_speed - v.speed) / spec.dt,
                lane_id: Some(lane_id),
            });
        }

        let mut survivors = Vec::with_capacity(active.len());
        let snapshot: Vec<(usize, f64)> = active.iter().map(|v| (v.lane, v.arc)).collect();
        for (i, mut v) in std::mem::take(&mut active).into_iter().enumerate() {
            let new_speed = (v.speed + accels[i] * spec.dt).max(0.0);
            v.speed = new_speed;
            v.arc += new_speed * spec.dt;
            if let Some(c) = &mut v.change {
                c.elapsed += spec.dt;
                if c.elapsed >= drv.lane_change_duration {
                    v.change = None;
                }
            }
            if spec.lateral_noise > 0.0 {
                v.offset = (v.offset + rng.gen_range(-1.0..1.0) * 0.2 * spec.lateral_noise)
                    .clamp(-spec.lateral_noise, spec.lateral_noise);
            }
            let len = lines[v.lane].length();
            if v.arc >= len {
                match spec.lanes[v.lane].joins {
                    Some(j) => {
                        let target = lane_index(j);
                        let end = lines[v.lane].point_at(len);
                        v.arc = lines[target].project(end).arc + (v.arc - len);
                        v.lane = target;
                        v.change = None;
                    }
                    None => continue,
                }
            }
            if spec.lane_change_rate > 0.0
                && v.change.is_none()
                && rng.gen::<f64>() < spec.lane_change_rate * spec.dt
            {
                let here = lines[v.lane].point_at(v.arc);
                let candidates: Vec<(usize, f64)> = lines
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != v.lane)
                    .filter_map(|(k, line)| {
                        let p = line.project(here);
                        let lateral_ok = p.lateral.abs() > 2.0 && p.lateral.abs() < 6.0;
                        let room = p.arc >= 0.0 && p.arc <= line.length() - 40.0;
                        let clear = snapshot.iter().enumerate().all(|(o, (lane, arc))| {
                            o == i || *lane != k || (arc - p.arc).abs() > 10.0
                        });
                        (lateral_ok && room && clear).then_some((k, p.arc))
                    })
                    .collect();
                if !candidates.is_empty() && lines[v.lane].length() - v.arc > 40.0 {
                    let (k, arc) = candidates[rng.gen_range(0..candidates.len())];
                    v.change = Some(LaneChange {
                        from: v.lane,
                        elapsed: 0.0,
                    });
                    v.lane = k;
                    v.arc = arc;
                }
            }
            survivors.push(v);
        }
        active = survivors;
    }

    let (dataset, rejects) = Dataset::from_samples(samples);
    debug_assert!(rejects.is_empty());
    Ok(dataset)
}
