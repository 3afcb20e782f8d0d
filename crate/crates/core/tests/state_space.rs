//! The enumerated state space against an independent flow count. States
//! whose paths add up to an acyclic flow match acyclic integer max flows
//! one to one. With both terminals on the outer face there are no other
//! states; an interior terminal also admits non-crossing path pairs that
//! wind around it and add up to a flow with a directed cycle.

mod common;

use std::collections::HashSet;
use std::sync::Arc;

use planarflow::{enumerate_states, initial_state, max_flow, AugmentStrategy, PlanarRoadGraph};

fn check_one_state_per_flow(name: &str, g: &Arc<PlanarRoadGraph>) {
    let space = enumerate_states(g, 200_000).unwrap();
    let mf = max_flow(g, AugmentStrategy::BreadthFirst).value() as i64;
    assert_eq!(space.mf() as i64, mf, "{name}");
    let flows = common::count_acyclic_flows(g, mf);
    let nets: Vec<Vec<i64>> = space.states().iter().map(common::net_flow).collect();
    let acyclic: Vec<&Vec<i64>> = nets.iter().filter(|n| common::is_acyclic(g, n)).collect();
    let distinct: HashSet<&Vec<i64>> = acyclic.iter().copied().collect();
    assert_eq!(distinct.len(), acyclic.len(), "{name}: two states share an acyclic flow");
    assert_eq!(acyclic.len() as u64, flows, "{name}: acyclic states vs acyclic flows");
    if g.outer_arrival(g.source()).is_some() && g.outer_arrival(g.sink()).is_some() {
        assert_eq!(space.len(), acyclic.len(), "{name}: cyclic state with outer terminals");
    }
    for x in space.states() {
        common::audit(x, space.mf()).unwrap();
    }
    for strategy in [AugmentStrategy::BreadthFirst, AugmentStrategy::ShortestLength] {
        let start = initial_state(g, strategy);
        assert!(space.index_of(&start).is_some(), "{name}: start state outside the space");
    }
}

#[test]
fn grid_4x4_has_69_states() {
    let g = common::grid4();
    assert_eq!(common::count_acyclic_flows(&g, 2), 69);
    check_one_state_per_flow("grid 4x4", &g);
}

#[test]
fn exact_suite_matches_flow_count() {
    for (name, g) in common::exact_suite() {
        check_one_state_per_flow(&name, &g);
    }
}

#[test]
fn interior_source_adds_winding_states() {
    let mut spec = planarflow::synth::grid_spec(4, 4, 1.0, 1);
    spec.sources = vec!["6".into()];
    let g = Arc::new(PlanarRoadGraph::from_spec(&spec).unwrap());
    let space = enumerate_states(&g, 10_000).unwrap();
    assert_eq!(common::count_acyclic_flows(&g, 2), 107);
    assert_eq!(space.len(), 109);
    let cyclic: Vec<Vec<Vec<&str>>> = space
        .states()
        .iter()
        .filter(|x| !common::is_acyclic(&g, &common::net_flow(x)))
        .map(|x| x.paths().iter().map(|p| p.node_ids(&g)).collect())
        .collect();
    assert_eq!(
        cyclic,
        vec![
            vec![
                vec!["6", "7", "3", "2", "1", "5", "9", "10", "14", "15", "16"],
                vec!["6", "10", "11", "7", "8", "12", "16"]
            ],
            vec![
                vec!["6", "7", "11", "10", "14", "15", "16"],
                vec!["6", "10", "9", "5", "1", "2", "3", "7", "8", "12", "16"]
            ],
        ]
    );
}

#[test]
fn random_terminals_match_flow_count() {
    for seed in 0..25 {
        let g = Arc::new(PlanarRoadGraph::from_spec(&common::random_small_spec(seed)).unwrap());
        check_one_state_per_flow(&format!("random seed {seed}"), &g);
    }
}
