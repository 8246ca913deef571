use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CountRows, Node, NodeId, Plg};
use crate::container;
use crate::error::Result;
use crate::planner::ConditionalTable;

pub const PLG_FORMAT_VERSION: u32 = 1;
const PLG_KIND: &[u8; 4] = b"PLG_";
const BUNDLE_KIND: &[u8; 4] = b"PLGB";

#[derive(Serialize, Deserialize)]
struct PlgRecord {
    format_version: u32,
    min_spacing: f64,
    nodes: Vec<Node>,
    /// Sparse `(from, to, count)` triples.
    counts: Vec<(NodeId, NodeId, u32)>,
    clusters: Vec<Vec<NodeId>>,
    cluster_orderings: Vec<Vec<usize>>,
}

impl PlgRecord {
    fn from_plg(plg: &Plg) -> Self {
        Self {
            format_version: PLG_FORMAT_VERSION,
            min_spacing: plg.min_spacing(),
            nodes: plg.nodes().to_vec(),
            counts: plg.edges().collect(),
            clusters: plg.clusters().to_vec(),
            cluster_orderings: plg.cluster_orderings().to_vec(),
        }
    }

    fn into_plg(self) -> Result<Plg> {
        let mut counts: CountRows = vec![BTreeMap::new(); self.nodes.len()];
        for (i, j, c) in self.counts {
            if i >= counts.len() {
                return Err(crate::Error::Invalid(format!("edge source {i} out of range")));
            }
            counts[i].insert(j, c);
        }
        Plg::new(
            self.nodes,
            counts,
            self.clusters,
            self.cluster_orderings,
            self.min_spacing,
        )
    }
}

pub fn serialise_plg(plg: &Plg) -> Result<Vec<u8>> {
    container::encode(PLG_KIND, PLG_FORMAT_VERSION, &PlgRecord::from_plg(plg))
}

pub fn deserialise_plg(bytes: &[u8]) -> Result<Plg> {
    let record: PlgRecord = container::decode(PLG_KIND, PLG_FORMAT_VERSION, bytes)?;
    record.into_plg()
}

/// The graph file used by the command line: graph, conditional path table and the
/// configuration it was built with.
#[derive(Debug, Clone)]
pub struct PlgBundle {
    pub plg: Plg,
    pub table: ConditionalTable,
    pub config: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct BundleRecord {
    plg: PlgRecord,
    table: ConditionalTable,
    config: serde_json::Value,
}

pub fn serialise_bundle(bundle: &PlgBundle) -> Result<Vec<u8>> {
    let record = BundleRecord {
        plg: PlgRecord::from_plg(&bundle.plg),
        table: bundle.table.clone(),
        config: bundle.config.clone(),
    };
    container::encode(BUNDLE_KIND, PLG_FORMAT_VERSION, &record)
}

pub fn deserialise_bundle(bytes: &[u8]) -> Result<PlgBundle> {
    let record: BundleRecord = container::decode(BUNDLE_KIND, PLG_FORMAT_VERSION, bytes)?;
    Ok(PlgBundle {
        plg: record.plg.into_plg()?,
        table: record.table,
        config: record.config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;
    use crate::Point;

    fn sample_plg(with_edges: bool) -> Plg {
        let nodes: Vec<Node> = (0..5)
            .map(|i| Node {
                id: i,
                position: Point::new(i as f64 * 2.6 + 0.1, (i % 2) as f64 * 3.7),
                lane_id: if i == 4 { None } else { Some(i as i64 % 2) },
            })
            .collect();
        let mut counts: CountRows = vec![BTreeMap::new(); 5];
        if with_edges {
            counts[0].insert(1, 3);
            counts[0].insert(2, 1);
            counts[1].insert(3, 7);
            counts[2].insert(4, 1);
        }
        Plg::new(nodes, counts, vec![vec![3], vec![4]], vec![vec![0, 1], vec![1, 0]], 2.5).unwrap()
    }

    #[test]
    fn plg_round_trip() {
        for edges in [true, false] {
            let plg = sample_plg(edges);
            let bytes = serialise_plg(&plg).unwrap();
            assert_eq!(deserialise_plg(&bytes).unwrap(), plg);
        }
    }

    #[test]
    fn truncated_payload_fails_checksum() {
        let bytes = serialise_plg(&sample_plg(true)).unwrap();
        assert!(matches!(
            deserialise_plg(&bytes[..bytes.len() - 10]),
            Err(Error::ChecksumMismatch)
        ));
    }
}
