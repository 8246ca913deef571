//! Target-conditioned next-node sampling with nearest-exit fallback, and exact
//! probabilities of given node sequences under the same rule.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plg::{NodalPath, NodeId, Plg};

type NextCounts = BTreeMap<NodeId, u32>;

/// Empirical counts of `next` given `(current node, target cluster)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTable {
    entries: BTreeMap<NodeId, BTreeMap<usize, NextCounts>>,
}

impl ConditionalTable {
    /// Every adjacent pair of every path with a known target adds one count under
    /// that path's target. Paths without a target cluster are skipped.
    pub fn from_paths(paths: &[NodalPath]) -> Self {
        let mut entries: BTreeMap<NodeId, BTreeMap<usize, NextCounts>> = BTreeMap::new();
        for path in paths {
            let Some(target) = path.target_cluster else {
                continue;
            };
            for w in path.nodes.windows(2) {
                *entries
                    .entry(w[0])
                    .or_default()
                    .entry(target)
                    .or_default()
                    .entry(w[1])
                    .or_insert(0) += 1;
            }
        }
        Self { entries }
    }

    /// Next-node counts for `(node, cluster)`; `None` when the pair was never observed.
    pub fn get(&self, node: NodeId, cluster: usize) -> Option<&NextCounts> {
        self.entries
            .get(&node)
            .and_then(|m| m.get(&cluster))
            .filter(|m| !m.is_empty())
    }

    pub fn contains(&self, node: NodeId, cluster: usize) -> bool {
        self.get(node, cluster).is_some()
    }

    /// All `((node, cluster), next counts)` entries in key order.
    pub fn iter(&self) -> impl Iterator<Item = ((NodeId, usize), &NextCounts)> {
        self.entries
            .iter()
            .flat_map(|(&n, m)| m.iter().map(move |(&c, counts)| ((n, c), counts)))
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn build_conditional_table(paths: &[NodalPath]) -> ConditionalTable {
    ConditionalTable::from_paths(paths)
}

/// First cluster in the target's fallback ordering with data at `node`.
fn lookup<'a>(
    table: &'a ConditionalTable,
    plg: &Plg,
    node: NodeId,
    target: usize,
) -> Option<(usize, &'a NextCounts)> {
    plg.cluster_ordering(target)
        .iter()
        .find_map(|&c| table.get(node, c).map(|m| (c, m)))
}

fn step_log_prob(counts: &NextCounts, next: NodeId) -> f64 {
    let total: u64 = counts.values().map(|&c| u64::from(c)).sum();
    match counts.get(&next) {
        Some(&c) if c > 0 => (c as f64 / total as f64).ln(),
        _ => f64::NEG_INFINITY,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSample {
    pub next: NodeId,
    /// Cluster whose conditional the sample was drawn under.
    pub cluster: usize,
    pub log_prob: f64,
}

/// One draw from `p(next | node, c)` for the first `c` in the target's ordering that
/// has data at `node`.
pub fn sample_next<R: Rng + ?Sized>(
    table: &ConditionalTable,
    plg: &Plg,
    node: NodeId,
    target: usize,
    rng: &mut R,
) -> Result<StepSample> {
    let (cluster, counts) = lookup(table, plg, node, target).ok_or(Error::DeadEnd { node })?;
    let total: u64 = counts.values().map(|&c| u64::from(c)).sum();
    let mut draw = rng.gen_range(0..total);
    let mut next = *counts.keys().next_back().unwrap();
    for (&n, &c) in counts {
        if draw < u64::from(c) {
            next = n;
            break;
        }
        draw -= u64::from(c);
    }
    Ok(StepSample {
        next,
        cluster,
        log_prob: step_log_prob(counts, next),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanEnd {
    /// The last node lies in the requested target cluster.
    Reached,
    /// No cluster in the fallback ordering had data at the last node.
    DeadEnd,
    /// `max_len` steps elapsed first.
    Truncated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedPath {
    pub nodes: Vec<NodeId>,
    pub step_log_probs: Vec<f64>,
    pub step_clusters: Vec<usize>,
    pub log_prob: f64,
    pub target: usize,
    /// Cluster containing the final node, if any.
    pub reached_cluster: Option<usize>,
    pub fallback_used: bool,
    pub end: PlanEnd,
}

/// `4 * sqrt(|N|)`, at least one step.
pub fn default_max_len(node_count: usize) -> usize {
    ((4.0 * (node_count as f64).sqrt()).ceil() as usize).max(1)
}

/// Samples a path from `start` until it enters `target`, hits a dead end, or has taken
/// `max_len` steps. A dead end before the first step is an error.
pub fn plan_path<R: Rng + ?Sized>(
    table: &ConditionalTable,
    plg: &Plg,
    start: NodeId,
    target: usize,
    max_len: usize,
    rng: &mut R,
) -> Result<PlannedPath> {
    if start >= plg.node_count() {
        return Err(Error::Invalid(format!("start node {start} out of range")));
    }
    if target >= plg.clusters().len() {
        return Err(Error::Invalid(format!("target cluster {target} out of range")));
    }
    let mut path = PlannedPath {
        nodes: vec![start],
        step_log_probs: Vec::new(),
        step_clusters: Vec::new(),
        log_prob: 0.0,
        target,
        reached_cluster: None,
        fallback_used: false,
        end: PlanEnd::Truncated,
    };
    let mut current = start;
    if plg.in_cluster(current, target) {
        path.end = PlanEnd::Reached;
    } else {
        for step in 0..max_len.max(1) {
            match sample_next(table, plg, current, target, rng) {
                Ok(s) => {
                    path.nodes.push(s.next);
                    path.step_log_probs.push(s.log_prob);
                    path.step_clusters.push(s.cluster);
                    path.fallback_used |= s.cluster != target;
                    current = s.next;
                    if plg.in_cluster(current, target) {
                        path.end = PlanEnd::Reached;
                        break;
                    }
                }
                Err(Error::DeadEnd { node }) if step > 0 => {
                    debug_assert_eq!(node, current);
                    path.end = PlanEnd::DeadEnd;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
    }
    path.log_prob = path.step_log_probs.iter().fold(0.0, |acc, lp| acc + lp);
    path.reached_cluster = plg.cluster_of(current);
    Ok(path)
}

/// Log-probability of a node sequence toward `target` under the fallback rule.
/// Steps that are graph edges but lack conditional support give `-inf`.
pub fn path_probability(
    table: &ConditionalTable,
    plg: &Plg,
    path: &[NodeId],
    target: usize,
) -> Result<f64> {
    if path.is_empty() {
        return Err(Error::Invalid("empty path".into()));
    }
    if target >= plg.clusters().len() {
        return Err(Error::Invalid(format!("target cluster {target} out of range")));
    }
    let mut total = 0.0;
    for w in path.windows(2) {
        let (from, to) = (w[0], w[1]);
        if from >= plg.node_count() || to >= plg.node_count() || plg.count(from, to) == 0 {
            return Err(Error::Disconnected { from, to });
        }
        let lp = match lookup(table, plg, from, target) {
            Some((_, counts)) => step_log_prob(counts, to),
            None => f64::NEG_INFINITY,
        };
        total += lp;
    }
    Ok(total)
}
