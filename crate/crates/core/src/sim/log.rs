use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Episode, Termination, TickRecord};
use crate::error::{Error, Result};
use crate::policy::LaneChange;

pub const EPISODE_CSV_HEADER: [&str; 10] = [
    "episode_id",
    "tick",
    "vehicle_id",
    "node_id",
    "x",
    "y",
    "speed",
    "accel",
    "lane_change",
    "risk_max",
];

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    episode_id: usize,
    tick: usize,
    vehicle_id: u64,
    node_id: usize,
    x: f64,
    y: f64,
    speed: f64,
    accel: f64,
    lane_change: LaneChange,
    risk_max: f64,
}

/// Termination metadata for one logged episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMeta {
    pub episode_id: usize,
    pub seed_id: usize,
    pub rng_seed: u64,
    pub stream: u64,
    pub dt: f64,
    pub termination: Termination,
}

impl EpisodeMeta {
    pub fn of(e: &Episode) -> Self {
        Self {
            episode_id: e.episode_id,
            seed_id: e.seed_id,
            rng_seed: e.rng_seed,
            stream: e.stream,
            dt: e.dt,
            termination: e.termination,
        }
    }
}

/// JSON companion of the episode CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSidecar {
    pub format_version: u32,
    pub config: serde_json::Value,
    pub corner_case_rate: f64,
    pub episodes: Vec<EpisodeMeta>,
}

pub fn write_episode_csv<W: Write>(episodes: &[Episode], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for e in episodes {
        for r in &e.records {
            w.serialize(Row {
                episode_id: e.episode_id,
                tick: r.tick,
                vehicle_id: r.vehicle_id,
                node_id: r.node_id,
                x: r.x,
                y: r.y,
                speed: r.speed,
                accel: r.accel,
                lane_change: r.lane_change,
                risk_max: r.risk_max,
            })?;
        }
    }
    if episodes.iter().all(|e| e.records.is_empty()) {
        w.write_record(EPISODE_CSV_HEADER)?;
    }
    w.flush().map_err(|e| Error::io("episode log", e))?;
    Ok(())
}

/// Rebuilds episodes from the CSV log and its sidecar metadata.
pub fn read_episode_csv<R: Read>(reader: R, meta: &[EpisodeMeta]) -> Result<Vec<Episode>> {
    let mut rd = csv::Reader::from_reader(reader);
    let mut by_episode: BTreeMap<usize, Vec<TickRecord>> = BTreeMap::new();
    for row in rd.deserialize::<Row>() {
        let r = row?;
        by_episode.entry(r.episode_id).or_default().push(TickRecord {
            tick: r.tick,
            vehicle_id: r.vehicle_id,
            node_id: r.node_id,
            x: r.x,
            y: r.y,
            speed: r.speed,
            accel: r.accel,
            lane_change: r.lane_change,
            risk_max: r.risk_max,
        });
    }
    meta.iter()
        .map(|m| {
            Ok(Episode {
                episode_id: m.episode_id,
                seed_id: m.seed_id,
                rng_seed: m.rng_seed,
                stream: m.stream,
                dt: m.dt,
                termination: m.termination,
                records: by_episode.remove(&m.episode_id).unwrap_or_default(),
                traces: Vec::new(),
            })
        })
        .collect::<Result<Vec<_>>>()
        .and_then(|eps| {
            if let Some(id) = by_episode.keys().next() {
                Err(Error::Invalid(format!("episode {id} in the log has no metadata")))
            } else {
                Ok(eps)
            }
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let e = Episode {
            episode_id: 3,
            seed_id: 1,
            rng_seed: 9,
            stream: 3,
            dt: 0.5,
            termination: Termination::Collision {
                vehicles: (1, 2),
                node: 7,
                tick: 1,
            },
            records: vec![
                TickRecord {
                    tick: 0,
                    vehicle_id: 1,
                    node_id: 4,
                    x: 0.1 + 0.2,
                    y: -1e-7,
                    speed: 12.5,
                    accel: -4.0,
                    lane_change: LaneChange::None,
                    risk_max: f64::INFINITY,
                },
                TickRecord {
                    tick: 1,
                    vehicle_id: 1,
                    node_id: 7,
                    x: 3.0,
                    y: 0.0,
                    speed: 10.5,
                    accel: -4.0,
                    lane_change: LaneChange::Left,
                    risk_max: 0.25,
                },
            ],
            traces: Vec::new(),
        };
        let mut buf = Vec::new();
        write_episode_csv(std::slice::from_ref(&e), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&EPISODE_CSV_HEADER.join(",")));
        let back = read_episode_csv(&buf[..], &[EpisodeMeta::of(&e)]).unwrap();
        assert_eq!(back, vec![e]);
    }
}
