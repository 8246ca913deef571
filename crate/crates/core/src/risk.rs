//! Modified time-to-collision and the per-vehicle risk vector built from it.
//!
//! Two vehicles share a collision course only when their node lookaheads intersect,
//! so MTTC is never applied to vehicles whose predicted paths are disjoint.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::VehicleId;
use crate::plg::{NodeId, Plg};
use crate::scalar::Scalar;

/// Time until the follower reaches the leader if the current speed difference and
/// accelerations persist: the smallest positive root of
/// `0.5 * da * t^2 + dv * t - gap = 0`, or `+inf` when there is none.
pub fn mttc<T: Scalar>(gap: T, v_follow: T, v_lead: T, a_follow: T, a_lead: T) -> Result<T> {
    if [gap, v_follow, v_lead, a_follow, a_lead]
        .iter()
        .any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite("mttc input".into()));
    }
    if gap < T::zero() {
        return Err(Error::NegativeGap(gap.to_f64_lossy()));
    }
    if gap == T::zero() {
        return Ok(T::zero());
    }
    let dv = v_follow - v_lead;
    let da = a_follow - a_lead;
    if da.abs() < T::lit(1e-6) {
        return Ok(if dv > T::zero() { gap / dv } else { T::infinity() });
    }
    let half = T::lit(0.5);
    let disc = dv * dv + T::lit(2.0) * da * gap;
    if disc < T::zero() {
        return Ok(T::infinity());
    }
    let root = disc.sqrt();
    // numerically stable pair of roots of a t^2 + b t + c with a = da/2, b = dv, c = -gap
    let q = -half * (dv + if dv >= T::zero() { root } else { -root });
    let mut best = T::infinity();
    for t in [q / (half * da), -gap / q] {
        if t.is_finite() && t > T::zero() && t < best {
            best = t;
        }
    }
    Ok(best)
}

/// Width and reach of the risk featurisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskParams {
    /// Number of nearest course-sharing vehicles kept.
    pub k_bv: usize,
    /// Route nodes (including the current one) searched for shared courses.
    pub lookahead: usize,
}

impl Default for RiskParams {
    fn default() -> Self {
        Self {
            k_bv: 4,
            lookahead: 6,
        }
    }
}

/// What the risk model needs to know about one vehicle.
#[derive(Debug, Clone, Copy)]
pub struct AgentView<'a> {
    pub id: VehicleId,
    pub node: NodeId,
    /// Distance travelled from `node` toward `route[1]`, metres.
    pub arc: f64,
    pub speed: f64,
    pub accel: f64,
    /// Predicted node sequence starting at `node`.
    pub route: &'a [NodeId],
}

/// Fixed-width inverse-MTTC encoding of the risk imposed by nearby vehicles.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RiskVector {
    /// `1 / MTTC` per course-sharing vehicle, descending, zero padded to `k_bv`.
    /// Infinite when the gap is already zero.
    pub inverse: Vec<f64>,
    /// Whether the matching entry's vehicle is ahead of the ego (ego is the follower).
    pub bv_ahead: Vec<bool>,
    /// Raw MTTC values of the contributing vehicles, ascending.
    pub mttc: Vec<f64>,
}

impl RiskVector {
    pub fn zeros(k: usize) -> Self {
        Self {
            inverse: vec![0.0; k],
            bv_ahead: vec![false; k],
            mttc: Vec::new(),
        }
    }

    /// Leading (largest) inverse MTTC.
    pub fn max(&self) -> f64 {
        self.inverse.first().copied().unwrap_or(0.0)
    }

    /// Smallest finite MTTC, if any vehicle is on a closing course.
    pub fn min_mttc(&self) -> Option<f64> {
        self.mttc.iter().copied().find(|m| m.is_finite())
    }
}

fn lookahead(route: &[NodeId], plg: &Plg, n: usize) -> Vec<(NodeId, f64)> {
    let mut out = Vec::with_capacity(n);
    let mut dist = 0.0;
    for (k, &node) in route.iter().take(n.max(1)).enumerate() {
        if k > 0 {
            dist += plg.edge_length(route[k - 1], node);
        }
        out.push((node, dist));
    }
    out
}

fn find(look: &[(NodeId, f64)], node: NodeId) -> Option<f64> {
    look.iter().find(|(n, _)| *n == node).map(|(_, d)| *d)
}

/// Gap along the shared course and whether the ego is the follower, or `None` when
/// the lookaheads do not intersect.
pub fn course_relation(
    ego: &AgentView<'_>,
    bv: &AgentView<'_>,
    plg: &Plg,
    lookahead_nodes: usize,
) -> Option<(f64, bool)> {
    let e = lookahead(ego.route, plg, lookahead_nodes);
    let b = lookahead(bv.route, plg, lookahead_nodes);
    if let Some(d) = find(&e, bv.node) {
        let gap = d + bv.arc - ego.arc;
        return Some(if gap >= 0.0 { (gap, true) } else { (-gap, false) });
    }
    if let Some(d) = find(&b, ego.node) {
        let gap = d + ego.arc - bv.arc;
        return Some(if gap >= 0.0 { (gap, false) } else { (-gap, true) });
    }
    e.iter().find_map(|&(node, de)| {
        find(&b, node).map(|db| {
            let to_ego = de - ego.arc;
            let to_bv = db - bv.arc;
            if to_ego >= to_bv {
                (to_ego - to_bv, true)
            } else {
                (to_bv - to_ego, false)
            }
        })
    })
}

/// Risk imposed on `ego` by `others` (entries with the ego's id are ignored).
/// The result does not depend on the order of `others`.
pub fn risk_vector(
    ego: &AgentView<'_>,
    others: &[AgentView<'_>],
    plg: &Plg,
    params: &RiskParams,
) -> RiskVector {
    struct Contribution {
        gap: f64,
        id: VehicleId,
        mttc: f64,
        bv_ahead: bool,
    }
    let mut found: Vec<Contribution> = others
        .iter()
        .filter(|bv| bv.id != ego.id)
        .filter_map(|bv| {
            let (gap, ego_follows) = course_relation(ego, bv, plg, params.lookahead)?;
            let t = if ego_follows {
                mttc(gap, ego.speed, bv.speed, ego.accel, bv.accel)
            } else {
                mttc(gap, bv.speed, ego.speed, bv.accel, ego.accel)
            }
            .ok()?;
            Some(Contribution {
                gap,
                id: bv.id,
                mttc: t,
                bv_ahead: ego_follows,
            })
        })
        .collect();
    found.sort_by(|a, b| a.gap.total_cmp(&b.gap).then(a.id.cmp(&b.id)));
    found.truncate(params.k_bv);
    found.sort_by(|a, b| {
        a.mttc
            .total_cmp(&b.mttc)
            .then(a.gap.total_cmp(&b.gap))
            .then(a.id.cmp(&b.id))
    });

    let mut out = RiskVector::zeros(params.k_bv);
    for (slot, c) in found.iter().enumerate() {
        out.inverse[slot] = if c.mttc == 0.0 { f64::INFINITY } else { 1.0 / c.mttc };
        out.bv_ahead[slot] = c.bv_ahead;
    }
    out.mttc = found.iter().map(|c| c.mttc).collect();
    out
}
