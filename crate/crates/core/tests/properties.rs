mod common;

use std::sync::Arc;

use planarflow::chain::reroute;
use planarflow::crossing::paths_cross;
use planarflow::{
    edge_loading, initial_state, synth, AugmentStrategy, ChainParams, FlowState, MarkovChain, PlanarRoadGraph, UnitPath,
};
use proptest::prelude::*;

fn fixture(seed: u64) -> Arc<PlanarRoadGraph> {
    Arc::new(PlanarRoadGraph::from_spec(&common::random_small_spec(seed)).unwrap())
}

/// States visited by a short chain run, one every `every` steps.
fn visited(g: &Arc<PlanarRoadGraph>, lambda: f64, seed: u64, count: usize, every: u64) -> Vec<FlowState> {
    let mut x = initial_state(g, AugmentStrategy::BreadthFirst);
    let mut chain = MarkovChain::new(Arc::clone(g), ChainParams::new(lambda, seed)).unwrap();
    (0..count)
        .map(|_| {
            chain.run(&mut x, every);
            x.clone()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reroute_is_an_involution(seed in 0u64..10_000, walk in 0u64..500) {
        let g = fixture(seed);
        let x = visited(&g, 1.0, seed, 1, walk).pop().unwrap();
        for p in x.paths() {
            for f in 0..g.face_count() {
                if let Some(q) = reroute(&g, p, f) {
                    let back = reroute(&g, &q, f);
                    prop_assert_eq!(back.as_ref().map(UnitPath::nodes), Some(p.nodes()));
                    prop_assert!(q.is_simple());
                }
            }
        }
    }

    #[test]
    fn crossing_is_symmetric(seed in 0u64..10_000) {
        let g = Arc::new(synth::random_planar(4, 4, 0.8, 2, seed));
        let paths: Vec<UnitPath> = visited(&g, 1.0, seed, 12, 40)
            .into_iter()
            .flat_map(|x| x.paths().to_vec())
            .collect();
        for p in &paths {
            for q in &paths {
                prop_assert_eq!(paths_cross(&g, p, q), paths_cross(&g, q, p));
            }
        }
    }

    #[test]
    fn chain_keeps_invariants(seed in 0u64..10_000, lambda in 0.5f64..1.5) {
        let g = fixture(seed);
        let mut x = initial_state(&g, AugmentStrategy::ShortestLength);
        let mf = x.mf();
        let mut chain = MarkovChain::new(Arc::clone(&g), ChainParams::new(lambda, seed)).unwrap();
        for _ in 0..2_000 {
            chain.step(&mut x);
            prop_assert_eq!(common::audit(&x, mf), Ok(()));
        }
    }

    #[test]
    fn loading_conserves_length(seed in 0u64..10_000, n in 1usize..6) {
        let g = Arc::new(synth::random_planar(4, 5, 0.7, 2, seed));
        let states = visited(&g, 1.0, seed, n, 30);
        let report = edge_loading(&states).unwrap();
        let total: f64 = states.iter().map(FlowState::total_length).sum();
        prop_assert!((report.total_load() - total).abs() <= 1e-9 * total);
        prop_assert_eq!(report.solutions, n);
        prop_assert!(report.max_load >= report.mean_load);
    }

    #[test]
    fn loading_scales_with_length(seed in 0u64..10_000, scale in 0.1f64..10.0) {
        let short = Arc::new(synth::grid(4, 5, 1.0, 1));
        let long = Arc::new(synth::grid(4, 5, scale, 1));
        // The same walk on both grids: lengths are uniform, so the move
        // sequence only depends on the random stream at lambda = 1.
        let a = visited(&short, 1.0, seed, 4, 25);
        let b = visited(&long, 1.0, seed, 4, 25);
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.canonical_key(), y.canonical_key());
        }
        let ra = edge_loading(&a).unwrap();
        let rb = edge_loading(&b).unwrap();
        prop_assert!((rb.normalized_mean - scale * ra.normalized_mean).abs() <= 1e-9 * rb.normalized_mean);
        prop_assert!((rb.avg_solution_length - scale * ra.avg_solution_length).abs() <= 1e-9 * rb.avg_solution_length);
        prop_assert_eq!(ra.loaded_edge_count, rb.loaded_edge_count);
    }
}
