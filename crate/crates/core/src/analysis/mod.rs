//! Corner-case classification, summary statistics, path smoothing and SVG output.

mod svg;

pub use svg::{render_plg, render_scenario, RenderStyle};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::VehicleId;
use crate::plg::{NodeId, Plg};
use crate::sim::{Episode, Termination};
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    /// No lane change by either vehicle inside the window.
    Case1,
    /// Exactly one.
    Case2,
    /// Two or more in total.
    Case3,
}

impl Case {
    pub fn from_count(n: usize) -> Self {
        match n {
            0 => Case::Case1,
            1 => Case::Case2,
            _ => Case::Case3,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerCaseRecord {
    pub episode_id: usize,
    pub seed_id: usize,
    pub case: Case,
    pub lane_changes: usize,
    pub vehicles: (VehicleId, VehicleId),
    pub node: NodeId,
    pub tick: usize,
}

/// Number of ticks covering `horizon` seconds.
pub fn window_ticks(horizon: f64, dt: f64) -> usize {
    (horizon / dt - 1e-9).ceil().max(0.0) as usize
}

/// Lane transitions of one vehicle over the tick steps ending in `(end - w, end]`.
fn lane_changes(episode: &Episode, plg: &Plg, vehicle: VehicleId, end: usize, w: usize) -> usize {
    let track = episode.node_track(vehicle);
    track
        .windows(2)
        .filter(|p| p[1].0 + w > end && p[1].0 <= end)
        .filter(|p| match (plg.lane(p[0].1), plg.lane(p[1].1)) {
            (Some(a), Some(b)) => a != b,
            _ => false,
        })
        .count()
}

/// Counts lane changes by both colliding vehicles within `horizon` seconds before
/// the collision and maps the total to a case.
pub fn classify(episode: &Episode, plg: &Plg, horizon: f64) -> Result<CornerCaseRecord> {
    let Termination::Collision { vehicles, node, tick } = episode.termination else {
        return Err(Error::NotACollision);
    };
    let w = window_ticks(horizon, episode.dt);
    let n = lane_changes(episode, plg, vehicles.0, tick, w) + lane_changes(episode, plg, vehicles.1, tick, w);
    Ok(CornerCaseRecord {
        episode_id: episode.episode_id,
        seed_id: episode.seed_id,
        case: Case::from_count(n),
        lane_changes: n,
        vehicles,
        node,
        tick,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed_id: usize,
    pub episodes: usize,
    pub collisions: usize,
    pub corner_case_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub episodes: usize,
    pub collisions: usize,
    pub corner_case_rate: f64,
    /// Case 1/2/3 counts.
    pub case_counts: [usize; 3],
    /// Case 1/2/3 shares of the collisions; absent when there were none.
    pub case_proportions: Option<[f64; 3]>,
    pub per_seed: Vec<SeedSummary>,
}

pub fn summarise(records: &[CornerCaseRecord], episodes: &[Episode]) -> Summary {
    let mut case_counts = [0usize; 3];
    for r in records {
        case_counts[r.case.index()] += 1;
    }
    let collisions = episodes.iter().filter(|e| e.termination.is_collision()).count();
    let total: usize = case_counts.iter().sum();
    let case_proportions = (total > 0).then(|| case_counts.map(|c| c as f64 / total as f64));
    let mut seeds: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for e in episodes {
        let s = seeds.entry(e.seed_id).or_default();
        s.0 += 1;
        s.1 += usize::from(e.termination.is_collision());
    }
    Summary {
        episodes: episodes.len(),
        collisions,
        corner_case_rate: if episodes.is_empty() {
            0.0
        } else {
            collisions as f64 / episodes.len() as f64
        },
        case_counts,
        case_proportions,
        per_seed: seeds
            .into_iter()
            .map(|(seed_id, (n, c))| SeedSummary {
                seed_id,
                episodes: n,
                collisions: c,
                corner_case_rate: c as f64 / n as f64,
            })
            .collect(),
    }
}

/// Centred moving average; near the ends the window shrinks symmetrically so the
/// first and last points are kept as they are.
pub fn smooth_path(points: &[Point], window: usize) -> Vec<Point> {
    let half = window.max(1).saturating_sub(1) / 2;
    let n = points.len();
    (0..n)
        .map(|i| {
            let k = half.min(i).min(n - 1 - i);
            let span = &points[i - k..=i + k];
            let m = span.len() as f64;
            let (sx, sy) = span.iter().fold((0.0, 0.0), |(x, y), p| (x + p.x, y + p.y));
            Point::new(sx / m, sy / m)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothing_basics() {
        let pts: Vec<Point> = (0..7).map(|i| Point::new(i as f64, 2.0 * i as f64 + 1.0)).collect();
        assert_eq!(smooth_path(&pts, 1), pts);
        let s = smooth_path(&pts, 5);
        assert_eq!(s.len(), pts.len());
        for p in &s {
            assert!((p.y - (2.0 * p.x + 1.0)).abs() < 1e-12);
        }
        assert_eq!(s[0], pts[0]);
        assert_eq!(s[6], pts[6]);
    }

    #[test]
    fn zigzag_deviation_shrinks() {
        let pts: Vec<Point> = (0..20)
            .map(|i| Point::new(i as f64, if i % 2 == 0 { 0.0 } else { 3.7 }))
            .collect();
        let dev = |ps: &[Point]| ps[1..ps.len() - 1].iter().map(|p| (p.y - 1.85).abs()).fold(0.0, f64::max);
        assert!(dev(&smooth_path(&pts, 5)) < dev(&pts));
    }

    #[test]
    fn case_mapping_and_proportions() {
        assert_eq!(Case::from_count(0), Case::Case1);
        assert_eq!(Case::from_count(1), Case::Case2);
        assert_eq!(Case::from_count(4), Case::Case3);
        let rec = |case| CornerCaseRecord {
            episode_id: 0,
            seed_id: 0,
            case,
            lane_changes: 0,
            vehicles: (1, 2),
            node: 0,
            tick: 1,
        };
        let s = summarise(&[rec(Case::Case1), rec(Case::Case1), rec(Case::Case2)], &[]);
        let p = s.case_proportions.unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12 && (p[1] - 1.0 / 3.0).abs() < 1e-12 && p[2] == 0.0);
        let empty = summarise(&[], &[]);
        assert_eq!(empty.case_proportions, None);
        assert_eq!(empty.corner_case_rate, 0.0);
    }
}
