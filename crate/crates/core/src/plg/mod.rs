//! Probabilistic lane graph: nodes at observed vehicle positions plus a directed,
//! frequency-weighted adjacency learnt from discretised trajectories.

mod build;
mod index;
mod io;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{LaneId, VehicleId};
use crate::Point;

pub use build::{
    build_plg, discretise_path, discretise_with_index, extract_clusters, learn_adjacency,
    nodal_paths, seed_nodes, smooth_lanes, ClusterSet, PlgBuild, PlgConfig,
};
pub use index::NodeIndex;
pub use io::{
    deserialise_bundle, deserialise_plg, serialise_bundle, serialise_plg, PlgBundle,
    PLG_FORMAT_VERSION,
};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub position: Point,
    pub lane_id: Option<LaneId>,
}

/// A vehicle trajectory as a duplicate-free chronological node sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodalPath {
    pub vehicle_id: VehicleId,
    pub nodes: Vec<NodeId>,
    /// First arrival time at each retained node.
    pub entry_times: Vec<f64>,
    /// Exit cluster containing the terminal node, once clusters are known.
    pub target_cluster: Option<usize>,
}

impl NodalPath {
    pub fn terminal(&self) -> NodeId {
        *self.nodes.last().expect("nodal paths are non-empty")
    }
}

/// Sparse non-negative transition counts, one ordered row per source node.
pub type CountRows = Vec<BTreeMap<NodeId, u32>>;
/// Row-normalised transition probabilities matching the support of the counts.
pub type ProbRows = Vec<Vec<(NodeId, f64)>>;

/// `G = (N, A)` with exit clusters and their nearest-first fallback orderings.
#[derive(Debug, Clone, PartialEq)]
pub struct Plg {
    nodes: Vec<Node>,
    counts: CountRows,
    probs: ProbRows,
    clusters: Vec<Vec<NodeId>>,
    cluster_orderings: Vec<Vec<usize>>,
    node_cluster: Vec<Option<usize>>,
    min_spacing: f64,
}

pub(crate) fn normalise_rows(counts: &CountRows) -> ProbRows {
    counts
        .iter()
        .map(|row| {
            let total: u64 = row.values().map(|&c| u64::from(c)).sum();
            row.iter()
                .filter(|(_, &c)| c > 0)
                .map(|(&j, &c)| (j, c as f64 / total as f64))
                .collect()
        })
        .collect()
}

impl Plg {
    /// Assembles a graph, checking the structural invariants.
    pub fn new(
        nodes: Vec<Node>,
        mut counts: CountRows,
        clusters: Vec<Vec<NodeId>>,
        cluster_orderings: Vec<Vec<usize>>,
        min_spacing: f64,
    ) -> Result<Self> {
        let n = nodes.len();
        if nodes.iter().enumerate().any(|(i, node)| node.id != i) {
            return Err(Error::Invalid("node ids must be dense 0..N".into()));
        }
        if nodes.iter().any(|node| !node.position.is_finite()) {
            return Err(Error::NonFinite("node position".into()));
        }
        if counts.len() != n {
            return Err(Error::Invalid(format!(
                "count rows ({}) do not match node count ({n})",
                counts.len()
            )));
        }
        for row in &mut counts {
            row.retain(|_, c| *c > 0);
            if row.keys().any(|&j| j >= n) {
                return Err(Error::Invalid("edge target out of range".into()));
            }
        }
        let mut node_cluster = vec![None; n];
        for (ci, members) in clusters.iter().enumerate() {
            for &m in members {
                if m >= n {
                    return Err(Error::Invalid(format!("cluster {ci} references node {m}")));
                }
                if node_cluster[m].replace(ci).is_some() {
                    return Err(Error::Invalid(format!("node {m} is in two clusters")));
                }
            }
        }
        if cluster_orderings.len() != clusters.len()
            || cluster_orderings
                .iter()
                .enumerate()
                .any(|(i, o)| o.first() != Some(&i) || o.iter().any(|&c| c >= clusters.len()))
        {
            return Err(Error::Invalid(
                "each cluster ordering must start with the cluster itself".into(),
            ));
        }
        let probs = normalise_rows(&counts);
        Ok(Self {
            nodes,
            counts,
            probs,
            clusters,
            cluster_orderings,
            node_cluster,
            min_spacing,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn position(&self, id: NodeId) -> Point {
        self.nodes[id].position
    }

    pub fn lane(&self, id: NodeId) -> Option<LaneId> {
        self.nodes[id].lane_id
    }

    pub fn min_spacing(&self) -> f64 {
        self.min_spacing
    }

    pub fn counts(&self) -> &CountRows {
        &self.counts
    }

    pub fn count(&self, from: NodeId, to: NodeId) -> u32 {
        self.counts[from].get(&to).copied().unwrap_or(0)
    }

    pub fn prob(&self, from: NodeId, to: NodeId) -> f64 {
        self.probs[from]
            .iter()
            .find(|(j, _)| *j == to)
            .map_or(0.0, |(_, p)| *p)
    }

    /// Outgoing edges of `from` with their probabilities, ascending by target id.
    pub fn successors(&self, from: NodeId) -> &[(NodeId, f64)] {
        &self.probs[from]
    }

    pub fn probs(&self) -> &ProbRows {
        &self.probs
    }

    /// All edges as `(from, to, count)` triples in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, u32)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |(&j, &c)| (i, j, c)))
    }

    pub fn edge_length(&self, from: NodeId, to: NodeId) -> f64 {
        self.position(from).distance(self.position(to))
    }

    pub fn clusters(&self) -> &[Vec<NodeId>] {
        &self.clusters
    }

    pub fn cluster_ordering(&self, cluster: usize) -> &[usize] {
        &self.cluster_orderings[cluster]
    }

    pub fn cluster_orderings(&self) -> &[Vec<usize>] {
        &self.cluster_orderings
    }

    pub fn cluster_of(&self, node: NodeId) -> Option<usize> {
        self.node_cluster[node]
    }

    pub fn in_cluster(&self, node: NodeId, cluster: usize) -> bool {
        self.node_cluster[node] == Some(cluster)
    }

    /// Replaces the counts; probabilities are recomputed.
    pub fn set_counts(&mut self, counts: CountRows) -> Result<()> {
        let rebuilt = Plg::new(
            self.nodes.clone(),
            counts,
            self.clusters.clone(),
            self.cluster_orderings.clone(),
            self.min_spacing,
        )?;
        *self = rebuilt;
        Ok(())
    }
}
