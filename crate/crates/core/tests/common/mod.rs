#![allow(dead_code)]

use lanegraph::corpus::TickCorpus;
use lanegraph::ingest::{generate_synthetic_corpus, Dataset, SyntheticSpec};
use lanegraph::planner::{build_conditional_table, ConditionalTable};
use lanegraph::plg::{build_plg, learn_adjacency, NodalPath, Node, NodeId, Plg, PlgBuild, PlgConfig};
use lanegraph::policy::{ActionGrid, ActionPolicy};
use lanegraph::risk::RiskVector;
use lanegraph::sim::{SeedState, SeedVehicle};
use lanegraph::Point;

pub fn node(id: NodeId, x: f64, y: f64, lane: i64) -> Node {
    Node {
        id,
        position: Point::new(x, y),
        lane_id: Some(lane),
    }
}

/// Graph learnt from explicit node sequences; each path's last node decides its
/// cluster. Fallback orderings list the other clusters by index.
pub fn graph(nodes: Vec<Node>, paths: &[Vec<NodeId>], clusters: Vec<Vec<NodeId>>) -> (Plg, ConditionalTable) {
    let k = clusters.len();
    let mut nodal: Vec<NodalPath> = paths
        .iter()
        .enumerate()
        .map(|(i, p)| NodalPath {
            vehicle_id: i as u64,
            nodes: p.clone(),
            entry_times: (0..p.len()).map(|t| t as f64).collect(),
            target_cluster: None,
        })
        .collect();
    let (counts, _) = learn_adjacency(&nodal, nodes.len());
    let orderings = (0..k)
        .map(|c| std::iter::once(c).chain((0..k).filter(|&o| o != c)).collect())
        .collect();
    let plg = Plg::new(nodes, counts, clusters, orderings, 2.5).unwrap();
    for p in &mut nodal {
        p.target_cluster = plg.cluster_of(p.terminal());
    }
    let table = build_conditional_table(&nodal);
    (plg, table)
}

/// Straight lanes along +x, `len` nodes each, `spacing` apart, lane `i` at
/// `y = 3.7 i`. Node ids run lane-major. Each lane ends in its own exit cluster
/// made of its last node.
pub fn parallel_chains(lanes: usize, len: usize, spacing: f64) -> (Plg, ConditionalTable) {
    let mut nodes = Vec::new();
    let mut paths = Vec::new();
    let mut clusters = Vec::new();
    for l in 0..lanes {
        let base = l * len;
        for k in 0..len {
            nodes.push(node(base + k, k as f64 * spacing, 3.7 * l as f64, l as i64 + 1));
        }
        paths.push((base..base + len).collect());
        clusters.push(vec![base + len - 1]);
    }
    graph(nodes, &paths, clusters)
}

pub fn vehicle(id: u64, node: NodeId, speed: f64, target: usize) -> SeedVehicle {
    SeedVehicle {
        vehicle_id: id,
        node,
        arc: 0.0,
        speed,
        accel: 0.0,
        target_cluster: target,
    }
}

pub fn seed(vehicles: Vec<SeedVehicle>) -> SeedState {
    SeedState {
        id: 0,
        tick: 0,
        time: 0.0,
        min_mttc: 0.0,
        vehicles,
    }
}

/// Always picks the same joint action.
pub struct Fixed {
    pub grid: ActionGrid,
    pub joint: usize,
}

impl Fixed {
    pub fn new(accel_bin: usize, lane_change: lanegraph::policy::LaneChange) -> Self {
        let grid = ActionGrid::default();
        let joint = grid.joint(lanegraph::policy::ActionSample {
            accel_bin,
            lane_change,
        });
        Self { grid, joint }
    }

    /// Zero acceleration, no lane change.
    pub fn cruise() -> Self {
        let grid = ActionGrid::default();
        Self::new(grid.nearest_accel_bin(0.0), lanegraph::policy::LaneChange::None)
    }
}

impl ActionPolicy for Fixed {
    fn grid(&self) -> &ActionGrid {
        &self.grid
    }

    fn action_distribution(&self, _r: &RiskVector) -> lanegraph::Result<Vec<f64>> {
        let mut p = vec![0.0; self.grid.len()];
        p[self.joint] = 1.0;
        Ok(p)
    }
}

pub struct Synthetic {
    pub data: Dataset,
    pub build: PlgBuild,
    pub table: ConditionalTable,
    pub corpus: TickCorpus,
}

pub fn synthetic(seed: u64) -> Synthetic {
    let data = generate_synthetic_corpus(&SyntheticSpec::two_lane_merge(), seed).unwrap();
    let build = build_plg(&data, &PlgConfig::default()).unwrap();
    let table = build_conditional_table(&build.paths);
    let corpus = TickCorpus::build(&data, &build.plg, &build.paths, 0.5).unwrap();
    Synthetic {
        data,
        build,
        table,
        corpus,
    }
}
