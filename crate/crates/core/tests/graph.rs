mod common;

use common::*;
use lanegraph::planner::{default_max_len, path_probability, plan_path, PlanEnd};
use lanegraph::plg::{
    deserialise_bundle, learn_adjacency, nodal_paths, serialise_bundle, PlgBundle, PlgConfig,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn synthetic_graph_invariants() {
    let syn = synthetic(1);
    let r = PlgConfig::default().radius;
    let seeded = &syn.build.seed_nodes;
    for (i, a) in seeded.iter().enumerate() {
        for b in &seeded[i + 1..] {
            assert!(a.position.distance(b.position) > r);
        }
    }
    let plg = &syn.build.plg;
    assert_eq!(plg.node_count(), seeded.len());
    for (a, b) in plg.nodes().iter().zip(seeded) {
        assert_eq!(a.lane_id, b.lane_id);
    }
    for (i, row) in plg.probs().iter().enumerate() {
        if !row.is_empty() {
            let total: f64 = row.iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-9, "row {i} sums to {total}");
        }
    }
    // all synthetic traffic travels +x
    for (i, j, _) in plg.edges() {
        let back = plg.position(i).x - plg.position(j).x;
        assert!(back <= r, "edge {i} -> {j} runs {back} m against traffic");
    }
    assert!(!plg.clusters().is_empty());
}

#[test]
fn rediscretising_reproduces_build_paths() {
    let syn = synthetic(2);
    assert_eq!(nodal_paths(&syn.data, &syn.build.plg), syn.build.paths);
}

#[test]
fn bundle_round_trip() {
    let syn = synthetic(2);
    let bundle = PlgBundle {
        plg: syn.build.plg.clone(),
        table: syn.table.clone(),
        config: serde_json::json!({"radius": 2.5}),
    };
    let back = deserialise_bundle(&serialise_bundle(&bundle).unwrap()).unwrap();
    assert_eq!(back.plg, bundle.plg);
    assert_eq!(back.table, bundle.table);
    assert_eq!(back.config, bundle.config);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn adjacency_ignores_path_order(shuffle_seed in any::<u64>()) {
        let syn = synthetic(6);
        let n = syn.build.plg.node_count();
        let mut paths = syn.build.paths.clone();
        paths.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
        prop_assert_eq!(learn_adjacency(&paths, n), learn_adjacency(&syn.build.paths, n));
    }
}

#[test]
fn three_to_one_junction_frequencies() {
    let nodes = vec![
        node(0, 0.0, 0.0, 1),
        node(1, 5.0, 0.0, 1),
        node(2, 10.0, 2.0, 1),
        node(3, 10.0, -2.0, 1),
        node(4, 15.0, 0.0, 1),
    ];
    let upper = vec![0, 1, 2, 4];
    let lower = vec![0, 1, 3, 4];
    let (plg, table) = graph(nodes, &[upper.clone(), upper.clone(), upper, lower], vec![vec![4]]);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 10_000;
    let mut upper_count = 0;
    for _ in 0..n {
        let p = plan_path(&table, &plg, 0, 0, 10, &mut rng).unwrap();
        assert_eq!(p.end, PlanEnd::Reached);
        upper_count += usize::from(p.nodes[2] == 2);
    }
    let f = upper_count as f64 / n as f64;
    assert!((f - 0.75).abs() <= 0.02, "upper branch frequency {f}");
}

#[test]
fn planned_paths_terminate_and_score_exactly() {
    let syn = synthetic(1);
    let plg = &syn.build.plg;
    let k = plg.clusters().len();
    let starts: Vec<usize> = (0..plg.node_count())
        .filter(|&n| (0..k).any(|c| syn.table.contains(n, c)))
        .collect();
    assert!(!starts.is_empty());
    let max_len = plg.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut reached = 0;
    for _ in 0..1000 {
        let start = *starts.choose(&mut rng).unwrap();
        let target = rng.gen_range(0..k);
        let p = plan_path(&syn.table, plg, start, target, max_len, &mut rng).unwrap();
        assert!(p.nodes.len() <= max_len + 1);
        match p.end {
            PlanEnd::Reached => {
                assert!(plg.in_cluster(*p.nodes.last().unwrap(), target));
                reached += 1;
            }
            PlanEnd::DeadEnd => {}
            PlanEnd::Truncated => panic!("path from {start} did not end within {max_len} steps"),
        }
        let lp = path_probability(&syn.table, plg, &p.nodes, target).unwrap();
        assert_eq!(lp.to_bits(), p.log_prob.to_bits());
    }
    assert!(reached > 0);
    assert!(default_max_len(plg.node_count()) >= 1);
}
