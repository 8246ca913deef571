use std::collections::HashMap;

use super::NodeId;
use crate::Point;

/// Uniform-grid spatial hash over node positions.
#[derive(Debug, Clone)]
pub struct NodeIndex {
    cell: f64,
    points: Vec<Point>,
    grid: HashMap<(i64, i64), Vec<NodeId>>,
    lo: (i64, i64),
    hi: (i64, i64),
}

impl NodeIndex {
    pub fn new(cell: f64) -> Self {
        assert!(cell > 0.0, "grid cell size must be positive");
        Self {
            cell,
            points: Vec::new(),
            grid: HashMap::new(),
            lo: (i64::MAX, i64::MAX),
            hi: (i64::MIN, i64::MIN),
        }
    }

    pub fn from_points(points: impl IntoIterator<Item = Point>, cell: f64) -> Self {
        let mut idx = Self::new(cell);
        for p in points {
            idx.insert(p);
        }
        idx
    }

    fn key(&self, p: Point) -> (i64, i64) {
        ((p.x / self.cell).floor() as i64, (p.y / self.cell).floor() as i64)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Appends a point; its id is the insertion order.
    pub fn insert(&mut self, p: Point) -> NodeId {
        let id = self.points.len();
        let k = self.key(p);
        self.lo = (self.lo.0.min(k.0), self.lo.1.min(k.1));
        self.hi = (self.hi.0.max(k.0), self.hi.1.max(k.1));
        self.grid.entry(k).or_default().push(id);
        self.points.push(p);
        id
    }

    /// True when some indexed point lies within distance `r` (inclusive) of `p`.
    pub fn any_within(&self, p: Point, r: f64) -> bool {
        let (cx, cy) = self.key(p);
        let reach = (r / self.cell).ceil() as i64;
        let r2 = r * r;
        for gx in cx - reach..=cx + reach {
            for gy in cy - reach..=cy + reach {
                if let Some(ids) = self.grid.get(&(gx, gy)) {
                    if ids.iter().any(|&i| self.points[i].distance_sq(p) <= r2) {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Nearest point by Euclidean distance; exact ties go to the lower id.
    pub fn nearest(&self, p: Point) -> Option<NodeId> {
        if self.points.is_empty() {
            return None;
        }
        let (cx, cy) = self.key(p);
        let max_ring = [
            (cx - self.lo.0).abs(),
            (self.hi.0 - cx).abs(),
            (cy - self.lo.1).abs(),
            (self.hi.1 - cy).abs(),
        ]
        .into_iter()
        .max()
        .unwrap();
        let mut best: Option<(f64, NodeId)> = None;
        for ring in 0..=max_ring {
            if let Some((d2, _)) = best {
                let bound = (ring - 1) as f64 * self.cell;
                if bound > 0.0 && bound * bound > d2 {
                    break;
                }
            }
            let mut visit = |gx: i64, gy: i64| {
                if let Some(ids) = self.grid.get(&(gx, gy)) {
                    for &i in ids {
                        let d2 = self.points[i].distance_sq(p);
                        let better = match best {
                            None => true,
                            Some((bd, bi)) => d2 < bd || (d2 == bd && i < bi),
                        };
                        if better {
                            best = Some((d2, i));
                        }
                    }
                }
            };
            if ring == 0 {
                visit(cx, cy);
                continue;
            }
            for gx in cx - ring..=cx + ring {
                visit(gx, cy - ring);
                visit(gx, cy + ring);
            }
            for gy in cy - ring + 1..=cy + ring - 1 {
                visit(cx - ring, gy);
                visit(cx + ring, gy);
            }
        }
        best.map(|(_, i)| i)
    }
}
