use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{normalise_rows, CountRows, NodalPath, Node, NodeId, NodeIndex, Plg, ProbRows};
use crate::error::{Error, Result};
use crate::ingest::{Dataset, TrajectorySample};
use crate::kmeans::{kmeans, KMeansConfig};
use crate::Point;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlgConfig {
    /// Minimum node spacing `R`, metres.
    pub radius: f64,
    /// Single-linkage radius for grouping path terminals into exits; `None` means `4 R`.
    pub exit_radius: Option<f64>,
    pub kmeans_max_iters: usize,
    pub kmeans_tolerance: f64,
}

impl Default for PlgConfig {
    fn default() -> Self {
        Self {
            radius: 2.5,
            exit_radius: None,
            kmeans_max_iters: 50,
            kmeans_tolerance: 1e-4,
        }
    }
}

impl PlgConfig {
    pub fn exit_radius(&self) -> f64 {
        self.exit_radius.unwrap_or(4.0 * self.radius)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "node radius must be positive, got {}",
                self.radius
            )));
        }
        if !(self.exit_radius() > 0.0) {
            return Err(Error::InvalidConfig("exit radius must be positive".into()));
        }
        Ok(())
    }
}

/// Greedy radius-gated seeding: vehicles in id order, samples in time order; a sample
/// becomes a node when every existing node is strictly further than `radius` away.
pub fn seed_nodes(data: &Dataset, radius: f64) -> Vec<Node> {
    let mut index = NodeIndex::new(radius);
    let mut nodes = Vec::new();
    for s in data.samples() {
        let p = s.position();
        if !index.any_within(p, radius) {
            let id = index.insert(p);
            nodes.push(Node {
                id,
                position: p,
                lane_id: s.lane_id,
            });
        }
    }
    nodes
}

/// Per-lane k-means with the lane's nodes as initial centres. Node ids, count and
/// lane membership are unchanged; without lane ids this is the identity.
pub fn smooth_lanes(nodes: &[Node], data: &Dataset, config: &KMeansConfig<f64>) -> Vec<Node> {
    let mut out = nodes.to_vec();
    for lane in data.lane_ids() {
        let members: Vec<usize> = out
            .iter()
            .filter(|n| n.lane_id == Some(lane))
            .map(|n| n.id)
            .collect();
        if members.is_empty() {
            log::warn!("lane {lane} has data but no nodes; skipped during smoothing");
            continue;
        }
        let initial: Vec<Point> = members.iter().map(|&i| out[i].position).collect();
        let fit = kmeans(&data.lane_positions(lane), &initial, config);
        for (&i, c) in members.iter().zip(fit.centres) {
            out[i].position = c;
        }
    }
    out
}

/// Nearest-node discretisation of one vehicle using a prebuilt index.
pub fn discretise_with_index(samples: &[TrajectorySample], index: &NodeIndex) -> NodalPath {
    let mut nodes: Vec<NodeId> = Vec::new();
    let mut entry_times = Vec::new();
    let mut seen = HashSet::new();
    for s in samples {
        let n = index
            .nearest(s.position())
            .expect("discretisation requires a non-empty node set");
        if seen.insert(n) {
            nodes.push(n);
            entry_times.push(s.time);
        }
    }
    NodalPath {
        vehicle_id: samples.first().map_or(0, |s| s.vehicle_id),
        nodes,
        entry_times,
        target_cluster: None,
    }
}

/// Maps each sample to its nearest node (ties to the lower id) and keeps only the
/// first visit of every node, in chronological order.
pub fn discretise_path(samples: &[TrajectorySample], nodes: &[Node]) -> NodalPath {
    let index = NodeIndex::from_points(nodes.iter().map(|n| n.position), cell_size(nodes));
    discretise_with_index(samples, &index)
}

fn cell_size(nodes: &[Node]) -> f64 {
    // any positive cell works; use the typical spacing when it can be estimated
    if nodes.len() < 2 {
        return 1.0;
    }
    let d = nodes[0].position.distance(nodes[1].position);
    if d > 0.0 && d.is_finite() {
        d
    } else {
        1.0
    }
}

/// Frequentist adjacency: every consecutive pair in every path adds one count.
pub fn learn_adjacency(paths: &[NodalPath], node_count: usize) -> (CountRows, ProbRows) {
    let mut counts: CountRows = vec![BTreeMap::new(); node_count];
    for path in paths {
        for w in path.nodes.windows(2) {
            *counts[w[0]].entry(w[1]).or_insert(0) += 1;
        }
    }
    let probs = normalise_rows(&counts);
    (counts, probs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    pub clusters: Vec<Vec<NodeId>>,
    pub orderings: Vec<Vec<usize>>,
}

/// Groups path terminals into exits by single linkage within `exit_radius`, then
/// orders every cluster's fallback list by centroid distance, itself first.
pub fn extract_clusters(paths: &[NodalPath], nodes: &[Node], exit_radius: f64) -> ClusterSet {
    let mut terminals: Vec<NodeId> = paths.iter().map(NodalPath::terminal).collect();
    terminals.sort_unstable();
    terminals.dedup();

    let mut parent: Vec<usize> = (0..terminals.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let r2 = exit_radius * exit_radius;
    for a in 0..terminals.len() {
        for b in a + 1..terminals.len() {
            if nodes[terminals[a]].position.distance_sq(nodes[terminals[b]].position) <= r2 {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
    for i in 0..terminals.len() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(terminals[i]);
    }
    // roots are the smallest member index, so clusters come out ordered by lowest node id
    let clusters: Vec<Vec<NodeId>> = groups.into_values().collect();
    let centroids: Vec<Point> = clusters
        .iter()
        .map(|c| {
            let sum = c
                .iter()
                .fold(Point::new(0.0, 0.0), |acc, &n| acc.add(nodes[n].position));
            sum.scale(1.0 / c.len() as f64)
        })
        .collect();
    let orderings = (0..clusters.len())
        .map(|i| {
            let mut others: Vec<usize> = (0..clusters.len()).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| {
                centroids[i]
                    .distance(centroids[a])
                    .total_cmp(&centroids[i].distance(centroids[b]))
                    .then(a.cmp(&b))
            });
            std::iter::once(i).chain(others).collect()
        })
        .collect();
    ClusterSet {
        clusters,
        orderings,
    }
}

/// Everything produced while learning a graph from data.
#[derive(Debug, Clone)]
pub struct PlgBuild {
    pub plg: Plg,
    /// One nodal path per vehicle, with `target_cluster` filled in.
    pub paths: Vec<NodalPath>,
    /// Node set before lane smoothing.
    pub seed_nodes: Vec<Node>,
}

/// Full pipeline: seed, smooth, discretise, count, cluster.
pub fn build_plg(data: &Dataset, config: &PlgConfig) -> Result<PlgBuild> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset { rejected: 0 });
    }
    let seeded = seed_nodes(data, config.radius);
    let kcfg = KMeansConfig {
        max_iters: config.kmeans_max_iters,
        tolerance: config.kmeans_tolerance,
    };
    let nodes = smooth_lanes(&seeded, data, &kcfg);
    let index = NodeIndex::from_points(nodes.iter().map(|n| n.position), config.radius);
    let mut paths: Vec<NodalPath> = data
        .vehicles()
        .map(|(_, samples)| discretise_with_index(samples, &index))
        .collect();
    let (counts, _) = learn_adjacency(&paths, nodes.len());
    let clusters = extract_clusters(&paths, &nodes, config.exit_radius());
    let plg = Plg::new(
        nodes,
        counts,
        clusters.clusters,
        clusters.orderings,
        config.radius,
    )?;
    for p in &mut paths {
        p.target_cluster = plg.cluster_of(p.terminal());
    }
    Ok(PlgBuild {
        plg,
        paths,
        seed_nodes: seeded,
    })
}

/// Re-derives the nodal paths of `data` against an already built graph, as
/// [`build_plg`] produced them.
pub fn nodal_paths(data: &Dataset, plg: &Plg) -> Vec<NodalPath> {
    let index = NodeIndex::from_points(plg.nodes().iter().map(|n| n.position), plg.min_spacing());
    data.vehicles()
        .map(|(_, samples)| {
            let mut p = discretise_with_index(samples, &index);
            p.target_cluster = plg.cluster_of(p.terminal());
            p
        })
        .collect()
}
