use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk::RiskVector;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaneChange {
    Left,
    None,
    Right,
}

impl LaneChange {
    pub const ALL: [LaneChange; 3] = [LaneChange::Left, LaneChange::None, LaneChange::Right];

    pub fn index(self) -> usize {
        match self {
            LaneChange::Left => 0,
            LaneChange::None => 1,
            LaneChange::Right => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LaneChange::Left => "left",
            LaneChange::None => "none",
            LaneChange::Right => "right",
        }
    }
}

impl std::str::FromStr for LaneChange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(LaneChange::Left),
            "none" => Ok(LaneChange::None),
            "right" => Ok(LaneChange::Right),
            other => Err(Error::Invalid(format!("unknown lane change {other:?}"))),
        }
    }
}

/// One joint action `{acceleration, lane change}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionSample {
    pub accel_bin: usize,
    pub lane_change: LaneChange,
}

/// Discrete acceleration levels crossed with the three lane actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionGrid {
    pub accels: Vec<f64>,
}

impl Default for ActionGrid {
    fn default() -> Self {
        Self {
            accels: vec![-4.0, -2.0, -1.0, 0.0, 1.0, 2.0],
        }
    }
}

impl ActionGrid {
    pub fn len(&self) -> usize {
        self.accels.len() * LaneChange::ALL.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accels.is_empty()
    }

    pub fn joint(&self, a: ActionSample) -> usize {
        a.accel_bin * LaneChange::ALL.len() + a.lane_change.index()
    }

    pub fn action(&self, joint: usize) -> ActionSample {
        ActionSample {
            accel_bin: joint / LaneChange::ALL.len(),
            lane_change: LaneChange::ALL[joint % LaneChange::ALL.len()],
        }
    }

    pub fn accel(&self, a: ActionSample) -> f64 {
        self.accels[a.accel_bin]
    }

    /// Grid level closest to `accel`; ties go to the lower level.
    pub fn nearest_accel_bin(&self, accel: f64) -> usize {
        let mut best = 0;
        for (i, &a) in self.accels.iter().enumerate() {
            if (a - accel).abs() < (self.accels[best] - accel).abs() {
                best = i;
            }
        }
        best
    }

    pub fn max_accel_bin(&self) -> usize {
        (0..self.accels.len())
            .max_by(|&a, &b| self.accels[a].total_cmp(&self.accels[b]))
            .unwrap_or(0)
    }

    pub fn min_accel_bin(&self) -> usize {
        (0..self.accels.len())
            .min_by(|&a, &b| self.accels[a].total_cmp(&self.accels[b]))
            .unwrap_or(0)
    }
}

/// Buckets for the leading inverse-MTTC entry, s^-1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskBins {
    /// Ascending finite lower edges; the last bucket is open-ended.
    pub edges: Vec<f64>,
}

impl Default for RiskBins {
    fn default() -> Self {
        Self {
            edges: vec![0.0, 0.1, 0.2, 0.5, 1.0],
        }
    }
}

impl RiskBins {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn bin(&self, inverse_mttc: f64) -> usize {
        self.edges
            .iter()
            .rposition(|&e| inverse_mttc >= e)
            .unwrap_or(0)
    }

    /// `[lo, hi)` of a bucket, `hi` infinite for the last.
    pub fn range(&self, bin: usize) -> (f64, f64) {
        (
            self.edges[bin],
            self.edges.get(bin + 1).copied().unwrap_or(f64::INFINITY),
        )
    }
}

/// Risk vector to network input: one-hot leading-risk bucket, then per-vehicle
/// `r / (1 + r)` signed positive for vehicles ahead and negative for vehicles behind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    pub bins: RiskBins,
    pub k_bv: usize,
}

impl Default for Featurizer {
    fn default() -> Self {
        Self {
            bins: RiskBins::default(),
            k_bv: 4,
        }
    }
}

impl Featurizer {
    pub fn dim(&self) -> usize {
        self.bins.len() + self.k_bv
    }

    pub fn features<T: Scalar>(&self, r: &RiskVector) -> Vec<T> {
        let mut x = vec![T::zero(); self.dim()];
        x[self.bins.bin(r.max())] = T::one();
        for i in 0..self.k_bv {
            let v = r.inverse.get(i).copied().unwrap_or(0.0);
            let squashed = if v.is_infinite() { 1.0 } else { v / (1.0 + v) };
            let sign = if r.bv_ahead.get(i).copied().unwrap_or(false) { 1.0 } else { -1.0 };
            x[self.bins.len() + i] = T::lit(sign * squashed);
        }
        x
    }
}
