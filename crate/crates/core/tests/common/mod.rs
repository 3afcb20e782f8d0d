//! Independent oracles shared by the integration tests. Nothing here calls
//! the library's flow, chain or enumeration code; only graph accessors.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use planarflow::graph::{EdgeIdx, NodeIdx};
use planarflow::{synth, FlowState, NetworkSpec, PlanarRoadGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The 4x4 unit-capacity grid with corner terminals.
pub fn grid4() -> Arc<PlanarRoadGraph> {
    Arc::new(synth::grid(4, 4, 1.0, 1))
}

/// Small single-terminal graphs small enough for exact enumeration.
pub fn exact_suite() -> Vec<(String, Arc<PlanarRoadGraph>)> {
    let mut interior = synth::grid_spec(4, 4, 1.0, 1);
    interior.sources = vec!["6".into()];
    let mut out: Vec<(String, PlanarRoadGraph)> = vec![
        ("grid 4x4".into(), synth::grid(4, 4, 1.0, 1)),
        ("grid 2x2".into(), synth::grid(2, 2, 1.0, 1)),
        ("grid 3x4 capacity 2".into(), synth::grid(3, 4, 1.0, 2)),
        ("grid 4x4 interior source".into(), PlanarRoadGraph::from_spec(&interior).unwrap()),
        ("triangulation 3x4".into(), synth::triangulation(3, 4, 1)),
    ];
    for seed in [3, 7, 11] {
        out.push((format!("random 3x4 seed {seed}"), synth::random_planar(3, 4, 0.7, 2, seed)));
    }
    out.into_iter().map(|(n, g)| (n, Arc::new(g))).collect()
}

/// Random jittered lattice with at most 12 nodes, random capacities and a
/// random source/sink pair (not necessarily on the outer face).
pub fn random_small_spec(seed: u64) -> NetworkSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, cols) = [(2, 3), (3, 3), (3, 4), (2, 5), (2, 6), (4, 3)][rng.random_range(0..6)];
    let density = rng.random_range(0.3..1.0);
    let mut spec = synth::random_planar_spec(rows, cols, density, 3, seed);
    let n = spec.nodes.len();
    // Sparse draws can strand a node; redraw until the terminals connect.
    loop {
        let s = rng.random_range(0..n);
        let mut t = rng.random_range(0..n - 1);
        if t >= s {
            t += 1;
        }
        spec.sources = vec![spec.nodes[s].id.clone()];
        spec.sinks = vec![spec.nodes[t].id.clone()];
        if PlanarRoadGraph::from_spec(&spec).is_ok() {
            return spec;
        }
    }
}

/// Minimum s-t cut by enumerating every node subset that holds the source
/// and not the sink. Roads are undirected, so a cut costs the capacity of
/// every road with exactly one end inside.
pub fn brute_min_cut(g: &PlanarRoadGraph) -> u64 {
    let n = g.node_count();
    assert!(n <= 20, "brute force is exponential");
    let (s, t) = (g.source(), g.sink());
    let mut best = u64::MAX;
    for mask in 0u32..(1 << n) {
        if mask & (1 << s) == 0 || mask & (1 << t) != 0 {
            continue;
        }
        let cut: u64 = g.edges().iter().filter(|e| (mask >> e.u & 1) != (mask >> e.v & 1)).map(|e| e.capacity).sum();
        best = best.min(cut);
    }
    best
}

/// Real (non-virtual) roads used by any path of the state.
pub fn used_roads(x: &FlowState) -> BTreeSet<EdgeIdx> {
    let g = x.graph();
    x.paths().iter().flat_map(|p| p.edges().iter().copied()).filter(|&e| !g.edge(e).is_virtual).collect()
}

/// Recomputes every state invariant from the raw paths. Returns a
/// description of the first violation.
pub fn audit(x: &FlowState, mf: usize) -> Result<(), String> {
    let g = x.graph();
    if x.paths().len() != mf {
        return Err(format!("{} paths, expected {mf}", x.paths().len()));
    }
    let mut usage = vec![0u64; g.edge_count()];
    let mut total = 0.0;
    for (i, p) in x.paths().iter().enumerate() {
        let nodes = p.nodes();
        if nodes.first() != Some(&g.source()) || nodes.last() != Some(&g.sink()) {
            return Err(format!("path {i} does not run from source to sink"));
        }
        if nodes.len() != p.edges().len() + 1 {
            return Err(format!("path {i} has mismatched node and edge lists"));
        }
        let distinct: HashSet<NodeIdx> = nodes.iter().copied().collect();
        if distinct.len() != nodes.len() {
            return Err(format!("path {i} repeats a node"));
        }
        for (k, &e) in p.edges().iter().enumerate() {
            let r = g.edge(e);
            let (a, b) = (nodes[k], nodes[k + 1]);
            if !((r.u == a && r.v == b) || (r.u == b && r.v == a)) {
                return Err(format!("path {i} edge {k} does not join its nodes"));
            }
            usage[e] += 1;
            total += r.length;
        }
    }
    for (e, &u) in usage.iter().enumerate() {
        if u > g.edge(e).capacity {
            return Err(format!("edge {e} carries {u} > capacity {}", g.edge(e).capacity));
        }
        if u != x.usage(e) as u64 {
            return Err(format!("cached usage of edge {e} is stale"));
        }
    }
    if (total - x.total_length()).abs() > 1e-6 * total.max(1.0) {
        return Err("cached total length is stale".into());
    }
    Ok(())
}

/// Counts integer flows of value `mf` with no directed cycle, by
/// backtracking over per-edge net flows in `-c..=c`. Every node's balance
/// is checked as soon as its last incident edge is fixed.
pub fn count_acyclic_flows(g: &PlanarRoadGraph, mf: i64) -> u64 {
    let n = g.node_count();
    let m = g.edge_count();
    let (s, t) = (g.source(), g.sink());
    let demand: Vec<i64> = (0..n)
        .map(|v| {
            if v == s {
                mf
            } else if v == t {
                -mf
            } else {
                0
            }
        })
        .collect();
    // Last edge (in order) incident to each node.
    let mut last = vec![usize::MAX; n];
    let mut remaining_cap = vec![vec![0i64; n]; m + 1];
    for (i, e) in g.edges().iter().enumerate() {
        last[e.u] = i;
        last[e.v] = i;
    }
    for i in (0..m).rev() {
        remaining_cap[i] = remaining_cap[i + 1].clone();
        let e = g.edge(i);
        remaining_cap[i][e.u] += e.capacity as i64;
        remaining_cap[i][e.v] += e.capacity as i64;
    }
    let mut out = vec![0i64; n];
    let mut flow = vec![0i64; m];
    let mut count = 0;
    rec(g, 0, &demand, &last, &remaining_cap, &mut out, &mut flow, &mut count);
    count
}

#[allow(clippy::too_many_arguments)]
fn rec(
    g: &PlanarRoadGraph,
    i: usize,
    demand: &[i64],
    last: &[usize],
    rem: &[Vec<i64>],
    out: &mut [i64],
    flow: &mut [i64],
    count: &mut u64,
) {
    if i == g.edge_count() {
        if is_acyclic(g, flow) {
            *count += 1;
        }
        return;
    }
    let e = g.edge(i);
    let c = e.capacity as i64;
    for f in -c..=c {
        out[e.u] += f;
        out[e.v] -= f;
        let ok = [e.u, e.v].iter().all(|&v| {
            let gap = demand[v] - out[v];
            if last[v] == i {
                gap == 0
            } else {
                gap.abs() <= rem[i + 1][v]
            }
        });
        if ok {
            flow[i] = f;
            rec(g, i + 1, demand, last, rem, out, flow, count);
        }
        out[e.u] -= f;
        out[e.v] += f;
    }
    flow[i] = 0;
}

/// Whether a net flow (oriented `u` to `v`) has no directed cycle.
pub fn is_acyclic(g: &PlanarRoadGraph, flow: &[i64]) -> bool {
    let n = g.node_count();
    let mut adj = vec![Vec::new(); n];
    for (i, &f) in flow.iter().enumerate() {
        let e = g.edge(i);
        if f > 0 {
            adj[e.u].push(e.v);
        } else if f < 0 {
            adj[e.v].push(e.u);
        }
    }
    // Kahn's algorithm.
    let mut indeg = vec![0usize; n];
    for a in &adj {
        for &b in a {
            indeg[b] += 1;
        }
    }
    let mut stack: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = stack.pop() {
        seen += 1;
        for &b in &adj[v] {
            indeg[b] -= 1;
            if indeg[b] == 0 {
                stack.push(b);
            }
        }
    }
    seen == n
}

/// Net flow of a state on every edge, oriented from `u` to `v`.
pub fn net_flow(x: &FlowState) -> Vec<i64> {
    let g = x.graph();
    let mut net = vec![0i64; g.edge_count()];
    for p in x.paths() {
        for (k, &e) in p.edges().iter().enumerate() {
            net[e] += if g.edge(e).u == p.nodes()[k] { 1 } else { -1 };
        }
    }
    net
}
