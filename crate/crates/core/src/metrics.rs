//! Link loading and length statistics of a set of solutions.
//!
//! Each unit path deposits, on every road it uses, a load equal to that
//! road's length. Summed over the solutions this is a deterministic stand-in
//! for emitted pollution: spreading traffic over more roads lowers the mean
//! load per loaded road.

use serde::{Deserialize, Serialize};

use crate::chain::FlowState;
use crate::error::{MetricsError, StateError};
use crate::graph::EdgeIdx;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadingReport {
    /// Load per edge, indexed by edge; zero for virtual edges.
    pub per_edge_load: Vec<f64>,
    /// Mean load over loaded edges.
    pub mean_load: f64,
    pub max_load: f64,
    pub loaded_edge_count: usize,
    /// `mean_load / solutions`.
    pub normalized_mean: f64,
    /// Mean length of a unit path over all solutions.
    pub avg_solution_length: f64,
    pub solutions: usize,
}

impl LoadingReport {
    pub fn load(&self, e: EdgeIdx) -> f64 {
        self.per_edge_load[e]
    }

    pub fn total_load(&self) -> f64 {
        self.per_edge_load.iter().sum()
    }
}

fn collect<'a>(solutions: impl IntoIterator<Item = &'a FlowState>) -> Result<Vec<&'a FlowState>, MetricsError> {
    let all: Vec<&FlowState> = solutions.into_iter().collect();
    let first = all.first().ok_or(MetricsError::EmptySet)?;
    if all.iter().any(|s| !s.same_graph(first)) {
        return Err(StateError::GraphMismatch.into());
    }
    Ok(all)
}

/// Loads every road with the traffic of all solutions.
pub fn edge_loading<'a>(solutions: impl IntoIterator<Item = &'a FlowState>) -> Result<LoadingReport, MetricsError> {
    let all = collect(solutions)?;
    let graph = all[0].graph();
    let mut load = vec![0.0f64; graph.edge_count()];
    for s in &all {
        for p in s.paths() {
            for &e in p.edges() {
                let edge = graph.edge(e);
                if !edge.is_virtual {
                    load[e] += edge.length;
                }
            }
        }
    }
    let loaded: Vec<f64> = load.iter().copied().filter(|&l| l > 0.0).collect();
    let loaded_edge_count = loaded.len();
    let mean_load = if loaded.is_empty() { 0.0 } else { loaded.iter().sum::<f64>() / loaded_edge_count as f64 };
    let max_load = loaded.iter().copied().fold(0.0, f64::max);
    let (avg_solution_length, _) = length_stats(&all);
    Ok(LoadingReport {
        per_edge_load: load,
        mean_load,
        max_load,
        loaded_edge_count,
        normalized_mean: mean_load / all.len() as f64,
        avg_solution_length,
        solutions: all.len(),
    })
}

fn length_stats(all: &[&FlowState]) -> (f64, f64) {
    let paths: usize = all.iter().map(|s| s.mf()).sum();
    let total: f64 = all.iter().flat_map(|s| s.paths()).map(|p| p.length()).sum();
    let avg = if paths == 0 { 0.0 } else { total / paths as f64 };
    (avg, total)
}

/// `(mean unit-path length, total length)` over all solutions.
pub fn solution_length_stats<'a>(
    solutions: impl IntoIterator<Item = &'a FlowState>,
) -> Result<(f64, f64), MetricsError> {
    Ok(length_stats(&collect(solutions)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeSpec, NetworkSpec, NodeRecord, PlanarRoadGraph};
    use crate::maxflow::{initial_state, AugmentStrategy};
    use std::sync::Arc;

    fn two_roads() -> Arc<PlanarRoadGraph> {
        Arc::new(
            PlanarRoadGraph::from_spec(&NetworkSpec {
                nodes: vec![
                    NodeRecord::new("s", 0.0, 0.0),
                    NodeRecord::new("m", 100.0, 0.0),
                    NodeRecord::new("t", 150.0, 0.0),
                ],
                edges: vec![EdgeSpec::new("a", "s", "m", 100.0, 1), EdgeSpec::new("b", "m", "t", 50.0, 1)],
                sources: vec!["s".into()],
                sinks: vec!["t".into()],
            })
            .unwrap(),
        )
    }

    #[test]
    fn single_path_arithmetic() {
        let g = two_roads();
        let x = initial_state(&g, AugmentStrategy::BreadthFirst);
        let r = edge_loading([&x]).unwrap();
        assert_eq!(r.per_edge_load, vec![100.0, 50.0]);
        assert_eq!(r.loaded_edge_count, 2);
        assert_eq!(r.normalized_mean, 75.0);
        assert_eq!(r.max_load, 100.0);
        assert_eq!(r.avg_solution_length, 150.0);
    }

    #[test]
    fn repetition_keeps_normalized_mean() {
        let g = two_roads();
        let x = initial_state(&g, AugmentStrategy::BreadthFirst);
        let once = edge_loading([&x]).unwrap();
        let twice = edge_loading([&x, &x]).unwrap();
        assert_eq!(once.normalized_mean, twice.normalized_mean);
        assert_eq!(twice.total_load(), 2.0 * once.total_load());
    }

    #[test]
    fn two_path_lengths() {
        let spec = NetworkSpec {
            nodes: vec![
                NodeRecord::new("s", 0.0, 0.0),
                NodeRecord::new("u", 100.0, 100.0),
                NodeRecord::new("t", 200.0, 0.0),
                NodeRecord::new("d", 100.0, -100.0),
            ],
            edges: vec![
                EdgeSpec::new("su", "s", "u", 150.0, 1),
                EdgeSpec::new("ut", "u", "t", 150.0, 1),
                EdgeSpec::new("sd", "s", "d", 250.0, 1),
                EdgeSpec::new("dt", "d", "t", 250.0, 1),
            ],
            sources: vec!["s".into()],
            sinks: vec!["t".into()],
        };
        let g = Arc::new(PlanarRoadGraph::from_spec(&spec).unwrap());
        let x = initial_state(&g, AugmentStrategy::BreadthFirst);
        assert_eq!(solution_length_stats([&x]).unwrap(), (400.0, 800.0));
    }

    #[test]
    fn errors() {
        let empty: [&FlowState; 0] = [];
        assert_eq!(edge_loading(empty).unwrap_err(), MetricsError::EmptySet);
        let x = initial_state(&two_roads(), AugmentStrategy::BreadthFirst);
        let y = initial_state(&two_roads(), AugmentStrategy::BreadthFirst);
        assert_eq!(edge_loading([&x, &y]).unwrap_err(), MetricsError::State(StateError::GraphMismatch));
        assert_eq!(solution_length_stats(empty).unwrap_err(), MetricsError::EmptySet);
    }
}
