mod common;

use common::*;
use lanegraph::analysis::{classify, render_plg, render_scenario, summarise, Case, RenderStyle};
use lanegraph::plg::{NodeId, Plg};
use lanegraph::policy::LaneChange;
use lanegraph::sim::{Episode, Termination, TickRecord};

const LEN: usize = 40;

/// Three lanes, `LEN` nodes each, with traffic allowed to switch to a neighbouring
/// lane at every node.
fn lanes() -> Plg {
    let mut nodes = Vec::new();
    for l in 0..3 {
        for k in 0..LEN {
            nodes.push(node(l * LEN + k, k as f64 * 3.0, 3.7 * l as f64, l as i64 + 1));
        }
    }
    let mut paths: Vec<Vec<NodeId>> = (0..3).map(|l| (l * LEN..(l + 1) * LEN).collect()).collect();
    for k in 0..LEN - 1 {
        for (a, b) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
            paths.push(vec![a * LEN + k, b * LEN + k + 1]);
        }
    }
    let clusters = (0..3).map(|l| vec![(l + 1) * LEN - 1]).collect();
    graph(nodes, &paths, clusters).0
}

/// Node per tick of a vehicle that moves into the given lane at each listed tick.
fn track(start_lane: usize, changes: &[(usize, usize)], ticks: usize) -> Vec<NodeId> {
    let mut lane = start_lane;
    (0..=ticks)
        .map(|t| {
            if let Some(&(_, l)) = changes.iter().find(|(ct, _)| *ct == t) {
                lane = l;
            }
            lane * LEN + t
        })
        .collect()
}

fn episode(plg: &Plg, a: &[NodeId], b: &[NodeId], collision_node: NodeId) -> Episode {
    let tick = a.len() - 1;
    let mut records = Vec::new();
    for t in 0..=tick {
        for (id, tr) in [(1u64, a), (2u64, b)] {
            let n = if t == tick { collision_node } else { tr[t] };
            let p = plg.position(n);
            records.push(TickRecord {
                tick: t,
                vehicle_id: id,
                node_id: n,
                x: p.x,
                y: p.y,
                speed: 6.0,
                accel: 0.0,
                lane_change: LaneChange::None,
                risk_max: 0.0,
            });
        }
    }
    Episode {
        episode_id: 0,
        seed_id: 0,
        rng_seed: 0,
        stream: 0,
        dt: 0.5,
        termination: Termination::Collision {
            vehicles: (1, 2),
            node: collision_node,
            tick,
        },
        records,
        traces: Vec::new(),
    }
}

#[test]
fn same_lane_throughout_is_case1() {
    let plg = lanes();
    let a = track(0, &[], 20);
    let e = episode(&plg, &a, &a, a[20]);
    let r = classify(&e, &plg, 5.0).unwrap();
    assert_eq!((r.case, r.lane_changes), (Case::Case1, 0));
}

#[test]
fn window_excludes_earlier_change() {
    let plg = lanes();
    // dt 0.5 and T = 5 s give a 10-tick window (10, 20]
    let a = track(0, &[(5, 1), (15, 0)], 20);
    let b = track(0, &[], 20);
    let e = episode(&plg, &a, &b, a[20]);
    let r = classify(&e, &plg, 5.0).unwrap();
    assert_eq!((r.case, r.lane_changes), (Case::Case2, 1));
    // a change exactly at the window's open end is outside it
    let b = track(1, &[], 20);
    let a = track(0, &[(10, 1)], 20);
    let e = episode(&plg, &a, &b, b[20]);
    assert_eq!(classify(&e, &plg, 5.0).unwrap().case, Case::Case1);
    let a = track(0, &[(11, 1)], 20);
    let e = episode(&plg, &a, &b, b[20]);
    assert_eq!(classify(&e, &plg, 5.0).unwrap().case, Case::Case2);
}

#[test]
fn opposing_simultaneous_changes_are_case3() {
    let plg = lanes();
    // both move into the middle lane on the collision tick
    let a = track(0, &[(20, 1)], 20);
    let b = track(2, &[(20, 1)], 20);
    let e = episode(&plg, &a, &b, a[20]);
    let r = classify(&e, &plg, 5.0).unwrap();
    assert_eq!((r.case, r.lane_changes), (Case::Case3, 2));
}

#[test]
fn classification_ignores_pair_order() {
    let plg = lanes();
    let a = track(0, &[(16, 1)], 20);
    let b = track(1, &[], 20);
    let mut e = episode(&plg, &a, &b, b[20]);
    let first = classify(&e, &plg, 5.0).unwrap();
    if let Termination::Collision { vehicles, .. } = &mut e.termination {
        *vehicles = (vehicles.1, vehicles.0);
    }
    let second = classify(&e, &plg, 5.0).unwrap();
    assert_eq!(first.case, second.case);
    assert_eq!(first.lane_changes, second.lane_changes);
}

#[test]
fn non_collisions_are_rejected() {
    let plg = lanes();
    let a = track(0, &[], 5);
    let mut e = episode(&plg, &a, &a, a[5]);
    e.termination = Termination::Timeout { tick: 5 };
    assert!(classify(&e, &plg, 5.0).is_err());
}

#[test]
fn summary_counts_and_permutation_invariance() {
    let plg = lanes();
    let b = track(1, &[], 20);
    let mut eps = vec![
        episode(&plg, &track(1, &[], 20), &b, b[20]),
        episode(&plg, &track(1, &[], 20), &b, b[20]),
        episode(&plg, &track(0, &[(18, 1)], 20), &b, b[20]),
    ];
    let mut quiet = episode(&plg, &b, &b, b[20]);
    quiet.termination = Termination::Timeout { tick: 20 };
    eps.push(quiet);
    for (i, e) in eps.iter_mut().enumerate() {
        e.episode_id = i;
        e.seed_id = i % 2;
    }
    let records: Vec<_> = eps
        .iter()
        .filter(|e| e.termination.is_collision())
        .map(|e| classify(e, &plg, 5.0).unwrap())
        .collect();
    let s = summarise(&records, &eps);
    assert_eq!(s.case_counts, [2, 1, 0]);
    let p = s.case_proportions.unwrap();
    assert!((p[0] - 2.0 / 3.0).abs() < 1e-12 && (p[1] - 1.0 / 3.0).abs() < 1e-12 && p[2] == 0.0);
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert_eq!(s.corner_case_rate, 0.75);

    let mut rev_eps = eps.clone();
    rev_eps.reverse();
    let mut rev_rec = records.clone();
    rev_rec.reverse();
    let t = summarise(&rev_rec, &rev_eps);
    assert_eq!(t, s);

    let empty = summarise(&[], &eps[3..]);
    assert_eq!(empty.case_proportions, None);
    assert_eq!(empty.corner_case_rate, 0.0);
}

#[test]
fn chain_svg_has_three_nodes_and_two_edges() {
    let nodes = vec![node(0, 0.0, 0.0, 1), node(1, 5.0, 0.0, 1), node(2, 10.0, 0.0, 1)];
    let (plg, _) = graph(nodes, &[vec![0, 1, 2]], vec![vec![2]]);
    let svg = render_plg(&plg, &RenderStyle::default());
    assert_eq!(svg.matches("<circle").count(), 3);
    assert_eq!(svg.matches("<line").count(), 2);
    // both edges carry probability 1
    assert_eq!(svg.matches(r#"stroke-opacity="1.000""#).count(), 2);
    assert_eq!(svg, render_plg(&plg, &RenderStyle::default()));
}

#[test]
fn scenario_svg_is_deterministic() {
    let plg = lanes();
    let a = track(0, &[(16, 1)], 20);
    let b = track(1, &[], 20);
    let e = episode(&plg, &a, &b, b[20]);
    let style = RenderStyle::default();
    let svg = render_scenario(&e, &plg, &style);
    assert_eq!(svg, render_scenario(&e, &plg, &style));
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert_eq!(svg.matches(r#"class="collision""#).count(), 1);
}
