//! Synthetic road networks for experiments and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{EdgeSpec, NetworkSpec, NodeRecord, PlanarRoadGraph};

/// A `rows x cols` lattice with uniform edge length and capacity.
///
/// Nodes are numbered `1..=rows*cols` row by row starting at the origin;
/// the source is node `1` and the sink the opposite corner.
pub fn grid_spec(rows: usize, cols: usize, length: f64, capacity: i64) -> NetworkSpec {
    assert!(rows >= 1 && cols >= 1 && rows * cols >= 2, "grid needs at least two nodes");
    let id = |r: usize, c: usize| (r * cols + c + 1).to_string();
    let mut nodes = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            nodes.push(NodeRecord::new(id(r, c), c as f64 * length, r as f64 * length));
        }
    }
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                let eid = format!("{}-{}", id(r, c), id(r, c + 1));
                edges.push(EdgeSpec::new(eid, id(r, c), id(r, c + 1), length, capacity));
            }
            if r + 1 < rows {
                let eid = format!("{}-{}", id(r, c), id(r + 1, c));
                edges.push(EdgeSpec::new(eid, id(r, c), id(r + 1, c), length, capacity));
            }
        }
    }
    NetworkSpec { nodes, edges, sources: vec![id(0, 0)], sinks: vec![id(rows - 1, cols - 1)] }
}

pub fn grid(rows: usize, cols: usize, length: f64, capacity: i64) -> PlanarRoadGraph {
    PlanarRoadGraph::from_spec(&grid_spec(rows, cols, length, capacity)).expect("lattice is planar and connected")
}

/// A jittered lattice where each interior road survives with probability
/// `density` and each cell gains a random diagonal with the same probability.
/// The outer boundary is always kept, so the corner terminals stay
/// connected. Lengths are Euclidean (rounded to decimeters), capacities are
/// uniform in `1..=max_capacity`.
pub fn random_planar_spec(rows: usize, cols: usize, density: f64, max_capacity: i64, seed: u64) -> NetworkSpec {
    assert!(rows >= 2 && cols >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spacing = 100.0;
    let id = |r: usize, c: usize| (r * cols + c + 1).to_string();
    let mut pos = Vec::with_capacity(rows * cols);
    let mut nodes = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let jx = rng.random_range(-0.15..0.15) * spacing;
            let jy = rng.random_range(-0.15..0.15) * spacing;
            let p = (c as f64 * spacing + jx, r as f64 * spacing + jy);
            pos.push(p);
            nodes.push(NodeRecord::new(id(r, c), p.0, p.1));
        }
    }
    let mut edges = Vec::new();
    let mut add = |rng: &mut ChaCha8Rng, a: (usize, usize), b: (usize, usize)| {
        let (pa, pb) = (pos[a.0 * cols + a.1], pos[b.0 * cols + b.1]);
        let length = (((pa.0 - pb.0).powi(2) + (pa.1 - pb.1).powi(2)).sqrt() * 10.0).round() / 10.0;
        let capacity = rng.random_range(1..=max_capacity);
        let (ia, ib) = (id(a.0, a.1), id(b.0, b.1));
        edges.push(EdgeSpec::new(format!("{ia}-{ib}"), ia, ib, length, capacity));
    };
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                let boundary = r == 0 || r == rows - 1;
                if boundary || rng.random_bool(density) {
                    add(&mut rng, (r, c), (r, c + 1));
                }
            }
            if r + 1 < rows {
                let boundary = c == 0 || c == cols - 1;
                if boundary || rng.random_bool(density) {
                    add(&mut rng, (r, c), (r + 1, c));
                }
            }
            if r + 1 < rows && c + 1 < cols && rng.random_bool(density) {
                if rng.random_bool(0.5) {
                    add(&mut rng, (r, c), (r + 1, c + 1));
                } else {
                    add(&mut rng, (r, c + 1), (r + 1, c));
                }
            }
        }
    }
    NetworkSpec { nodes, edges, sources: vec![id(0, 0)], sinks: vec![id(rows - 1, cols - 1)] }
}

pub fn random_planar(rows: usize, cols: usize, density: f64, max_capacity: i64, seed: u64) -> PlanarRoadGraph {
    PlanarRoadGraph::from_spec(&random_planar_spec(rows, cols, density, max_capacity, seed))
        .expect("jittered lattice is planar")
}

/// A jittered lattice with every road and one diagonal per cell.
pub fn triangulation(rows: usize, cols: usize, seed: u64) -> PlanarRoadGraph {
    random_planar(rows, cols, 1.0, 1, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_ids_and_terminals() {
        let g = grid(3, 4, 10.0, 2);
        assert_eq!(g.node(g.source()).id, "1");
        assert_eq!(g.node(g.sink()).id, "12");
        assert_eq!(g.edge_count(), 3 * 3 + 2 * 4);
        assert!(g.edges().iter().all(|e| e.capacity == 2 && e.length == 10.0));
    }

    #[test]
    fn random_graphs_are_reproducible() {
        let a = random_planar_spec(5, 5, 0.6, 2, 3);
        let b = random_planar_spec(5, 5, 0.6, 2, 3);
        assert_eq!(a, b);
        assert_ne!(a, random_planar_spec(5, 5, 0.6, 2, 4));
    }

    #[test]
    fn triangulation_30_nodes_satisfies_euler() {
        for seed in 0..5 {
            let g = triangulation(5, 6, seed);
            assert_eq!(g.node_count(), 30);
            assert_eq!(g.edge_count(), 4 * 6 + 5 * 5 + 4 * 5);
            assert_eq!(g.face_count() + g.node_count(), 2 + g.edge_count());
        }
    }
}
