//! Integer maximum flow on undirected roads and its decomposition into
//! unit paths.
//!
//! Each road is a pair of opposing arcs sharing one capacity budget. Flow is
//! stored as a signed net value per edge, so opposite traversals cancel by
//! construction.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::sync::Arc;

use crate::chain::FlowState;
use crate::crossing::{first_crossing, first_crossing_stretch, PathIndex};
use crate::error::{FlowError, StateError};
use crate::graph::{EdgeIdx, HalfEdge, NodeIdx, PlanarRoadGraph};

/// How augmenting paths are chosen in the residual graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AugmentStrategy {
    /// Fewest edges (Edmonds-Karp).
    #[default]
    BreadthFirst,
    /// Minimum total length (Dijkstra).
    ShortestLength,
}

/// A simple source-to-sink path carrying one unit of flow.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitPath {
    nodes: Vec<NodeIdx>,
    edges: Vec<EdgeIdx>,
    length: f64,
}

impl UnitPath {
    /// Builds a path from consecutive edges starting at `start`. Only checks
    /// that the edges form a walk.
    pub fn from_edges(graph: &PlanarRoadGraph, start: NodeIdx, edges: Vec<EdgeIdx>) -> Result<Self, StateError> {
        let mut nodes = Vec::with_capacity(edges.len() + 1);
        nodes.push(start);
        let mut at = start;
        for &e in &edges {
            let edge = graph.edge(e);
            if edge.u != at && edge.v != at {
                return Err(StateError::Disconnected(0));
            }
            at = edge.other(at);
            nodes.push(at);
        }
        let length = edges.iter().map(|&e| graph.edge(e).length).sum();
        Ok(UnitPath { nodes, edges, length })
    }

    /// Builds a path from its node sequence.
    pub fn from_nodes(graph: &PlanarRoadGraph, nodes: Vec<NodeIdx>) -> Result<Self, StateError> {
        let edges = nodes
            .windows(2)
            .map(|w| graph.edge_between(w[0], w[1]).ok_or(StateError::Disconnected(0)))
            .collect::<Result<Vec<_>, _>>()?;
        let length = edges.iter().map(|&e| graph.edge(e).length).sum();
        Ok(UnitPath { nodes, edges, length })
    }

    pub(crate) fn from_parts(graph: &PlanarRoadGraph, nodes: Vec<NodeIdx>, edges: Vec<EdgeIdx>) -> Self {
        debug_assert_eq!(nodes.len(), edges.len() + 1);
        let length = edges.iter().map(|&e| graph.edge(e).length).sum();
        UnitPath { nodes, edges, length }
    }

    pub fn nodes(&self) -> &[NodeIdx] {
        &self.nodes
    }

    pub fn edges(&self) -> &[EdgeIdx] {
        &self.edges
    }

    /// Sum of edge lengths in meters.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn is_simple(&self) -> bool {
        let mut seen: Vec<NodeIdx> = self.nodes.clone();
        seen.sort_unstable();
        seen.windows(2).all(|w| w[0] != w[1])
    }

    /// Node ids in traversal order.
    pub fn node_ids<'g>(&self, graph: &'g PlanarRoadGraph) -> Vec<&'g str> {
        self.nodes.iter().map(|&n| graph.node(n).id.as_str()).collect()
    }
}

/// An integer flow from the source to the sink of a graph.
#[derive(Debug, Clone)]
pub struct IntegerFlow {
    graph: Arc<PlanarRoadGraph>,
    /// Net flow along each edge in its `u -> v` orientation.
    net: Vec<i64>,
    value: u64,
}

impl IntegerFlow {
    /// Wraps a net-flow vector after checking capacity and conservation.
    pub fn from_net(graph: Arc<PlanarRoadGraph>, net: Vec<i64>) -> Result<Self, FlowError> {
        if net.len() != graph.edge_count() {
            return Err(FlowError::WrongLength { expected: graph.edge_count(), got: net.len() });
        }
        let mut excess = vec![0i64; graph.node_count()];
        for (e, &f) in net.iter().enumerate() {
            let edge = graph.edge(e);
            if f.unsigned_abs() > edge.capacity {
                return Err(FlowError::CapacityExceeded(edge.id.clone()));
            }
            excess[edge.u] -= f;
            excess[edge.v] += f;
        }
        for (n, &x) in excess.iter().enumerate() {
            if n != graph.source() && n != graph.sink() && x != 0 {
                return Err(FlowError::NotConserved(graph.node(n).id.clone()));
            }
        }
        let value = (-excess[graph.source()]).max(0) as u64;
        Ok(IntegerFlow { graph, net, value })
    }

    pub fn graph(&self) -> &Arc<PlanarRoadGraph> {
        &self.graph
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn net(&self) -> &[i64] {
        &self.net
    }

    /// Units of flow on an edge regardless of direction.
    pub fn usage(&self, e: EdgeIdx) -> u64 {
        self.net[e].unsigned_abs()
    }

    /// Sum over edges of `usage * length`.
    pub fn cost(&self) -> f64 {
        self.net.iter().enumerate().map(|(e, f)| f.unsigned_abs() as f64 * self.graph.edge(e).length).sum()
    }
}

/// Flow from `from` toward the other endpoint of `e`.
#[inline]
fn directed(graph: &PlanarRoadGraph, net: &[i64], e: EdgeIdx, from: NodeIdx) -> i64 {
    if graph.edge(e).u == from {
        net[e]
    } else {
        -net[e]
    }
}

#[inline]
fn residual(graph: &PlanarRoadGraph, net: &[i64], e: EdgeIdx, from: NodeIdx) -> i64 {
    graph.edge(e).capacity as i64 - directed(graph, net, e, from)
}

/// Ford-Fulkerson with the given augmenting-path rule.
///
/// Among equally short augmenting paths the one with the lexicographically
/// smallest edge-index sequence is taken, which makes the result fully
/// deterministic.
pub fn max_flow(graph: &Arc<PlanarRoadGraph>, strategy: AugmentStrategy) -> IntegerFlow {
    let g = graph.as_ref();
    let mut net = vec![0i64; g.edge_count()];
    let mut value = 0u64;
    let usable = |net: &[i64], e: EdgeIdx, from: NodeIdx| residual(g, net, e, from) > 0;
    loop {
        let path = match strategy {
            AugmentStrategy::BreadthFirst => fewest_edges_path(g, |e, a| usable(&net, e, a)),
            AugmentStrategy::ShortestLength => shortest_length_path(g, |e, a| usable(&net, e, a)),
        };
        let Some(path) = path else { break };
        let mut at = g.source();
        let mut bottleneck = i64::MAX;
        for &e in &path {
            bottleneck = bottleneck.min(residual(g, &net, e, at));
            at = g.edge(e).other(at);
        }
        at = g.source();
        for &e in &path {
            net[e] += if g.edge(e).u == at { bottleneck } else { -bottleneck };
            at = g.edge(e).other(at);
        }
        value += bottleneck as u64;
    }
    IntegerFlow { graph: Arc::clone(graph), net, value }
}

/// Fewest-edge source-to-sink path over arcs admitted by `usable(e, from)`,
/// lexicographically smallest by edge index among ties.
fn fewest_edges_path(g: &PlanarRoadGraph, usable: impl Fn(EdgeIdx, NodeIdx) -> bool) -> Option<Vec<EdgeIdx>> {
    let (s, t) = (g.source(), g.sink());
    let mut hops = vec![u32::MAX; g.node_count()];
    hops[t] = 0;
    let mut queue = VecDeque::from([t]);
    while let Some(b) = queue.pop_front() {
        if b == s {
            break;
        }
        for &e in g.incident(b) {
            let a = g.edge(e).other(b);
            if hops[a] == u32::MAX && usable(e, a) {
                hops[a] = hops[b] + 1;
                queue.push_back(a);
            }
        }
    }
    if hops[s] == u32::MAX {
        return None;
    }
    let mut path = Vec::with_capacity(hops[s] as usize);
    let mut at = s;
    while at != t {
        let e = g
            .incident(at)
            .iter()
            .copied()
            .find(|&e| {
                let b = g.edge(e).other(at);
                hops[b] != u32::MAX && hops[b] + 1 == hops[at] && usable(e, at)
            })
            .expect("a tight arc leaves every labelled node");
        path.push(e);
        at = g.edge(e).other(at);
    }
    Some(path)
}

#[derive(PartialEq)]
struct Label {
    dist: f64,
    hops: u32,
    node: NodeIdx,
}

impl Eq for Label {}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed for a min-heap.
        other.dist.total_cmp(&self.dist).then(other.hops.cmp(&self.hops)).then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimum-length source-to-sink path, ties broken by fewer edges and then
/// by the lexicographically smallest edge sequence.
fn shortest_length_path(g: &PlanarRoadGraph, usable: impl Fn(EdgeIdx, NodeIdx) -> bool) -> Option<Vec<EdgeIdx>> {
    let (s, t) = (g.source(), g.sink());
    let mut dist = vec![f64::INFINITY; g.node_count()];
    let mut hops = vec![u32::MAX; g.node_count()];
    let mut done = vec![false; g.node_count()];
    dist[t] = 0.0;
    hops[t] = 0;
    let mut heap = BinaryHeap::from([Label { dist: 0.0, hops: 0, node: t }]);
    while let Some(Label { node: b, .. }) = heap.pop() {
        if done[b] {
            continue;
        }
        done[b] = true;
        if b == s {
            break;
        }
        for &e in g.incident(b) {
            let a = g.edge(e).other(b);
            if done[a] || !usable(e, a) {
                continue;
            }
            let d = g.edge(e).length + dist[b];
            let h = hops[b] + 1;
            if d < dist[a] || (d == dist[a] && h < hops[a]) {
                dist[a] = d;
                hops[a] = h;
                heap.push(Label { dist: d, hops: h, node: a });
            }
        }
    }
    if !done[s] {
        return None;
    }
    let mut path = Vec::new();
    let mut at = s;
    while at != t {
        let e = g
            .incident(at)
            .iter()
            .copied()
            .find(|&e| {
                let b = g.edge(e).other(at);
                done[b] && hops[b] + 1 == hops[at] && g.edge(e).length + dist[b] == dist[at] && usable(e, at)
            })
            .expect("a tight arc leaves every settled node");
        path.push(e);
        at = g.edge(e).other(at);
    }
    Some(path)
}

/// Splits a flow into `value` pairwise non-crossing unit paths.
///
/// Directed cycles of the flow are cancelled first (they only add length).
/// Paths are then peeled off one at a time, each taking the leftmost turn
/// at every node, starting against the outer face at the source when the
/// source lies on it.
pub fn decompose(flow: &IntegerFlow) -> Result<FlowState, FlowError> {
    let g = flow.graph.as_ref();
    let mut remaining = flow.net.clone();
    cancel_cycles(g, &mut remaining);
    let mut paths = Vec::with_capacity(flow.value as usize);
    for found in 0..flow.value {
        let edges = leftmost_path(g, &remaining).ok_or(FlowError::Decomposition { expected: flow.value, found })?;
        let mut at = g.source();
        for &e in &edges {
            remaining[e] -= if g.edge(e).u == at { 1 } else { -1 };
            at = g.edge(e).other(at);
        }
        let path = UnitPath::from_edges(g, g.source(), edges).expect("decomposition follows graph edges");
        paths.push(path);
    }
    if !uncross(g, &mut paths) {
        return Err(FlowError::Decomposition { expected: flow.value, found: flow.value });
    }
    FlowState::new(Arc::clone(&flow.graph), paths)
        .map_err(|_| FlowError::Decomposition { expected: flow.value, found: flow.value })
}

/// Swaps the tails of crossing paths after their crossing stretch until no
/// pair crosses. The edge multiset, and so the flow, is unchanged. The
/// paths come from an acyclic flow, so everything before a shared node
/// precedes everything after it and the swapped paths stay simple.
///
/// Leftmost peeling alone leaves no crossings when the source is on the
/// outer face; this repairs the other case.
fn uncross(g: &PlanarRoadGraph, paths: &mut [UnitPath]) -> bool {
    let mut index = PathIndex::new(g.node_count());
    let limit = 16 + 4 * paths.len() * paths.len() * g.node_count();
    for _ in 0..limit {
        let Some((i, j)) = first_crossing(g, paths) else { return true };
        index.load(&paths[i]);
        let Some((a, b, true)) = first_crossing_stretch(g, &paths[i], &index, &paths[j]) else {
            return false;
        };
        let (p, q) = (&paths[i], &paths[j]);
        let np = UnitPath::from_parts(
            g,
            [&p.nodes()[..=a], &q.nodes()[b + 1..]].concat(),
            [&p.edges()[..a], &q.edges()[b..]].concat(),
        );
        let nq = UnitPath::from_parts(
            g,
            [&q.nodes()[..=b], &p.nodes()[a + 1..]].concat(),
            [&q.edges()[..b], &p.edges()[a..]].concat(),
        );
        paths[i] = np;
        paths[j] = nq;
    }
    false
}

/// Removes every directed cycle from the positive part of `net`.
fn cancel_cycles(g: &PlanarRoadGraph, net: &mut [i64]) {
    while let Some(cycle) = find_cycle(g, net) {
        let amount = cycle.iter().map(|&(e, from)| directed(g, net, e, from)).min().unwrap_or(0);
        for (e, from) in cycle {
            net[e] -= if g.edge(e).u == from { amount } else { -amount };
        }
    }
}

/// A directed cycle of positive flow as `(edge, tail)` pairs.
fn find_cycle(g: &PlanarRoadGraph, net: &[i64]) -> Option<Vec<(EdgeIdx, NodeIdx)>> {
    const WHITE: u8 = 0;
    const GREY: u8 = 1;
    const BLACK: u8 = 2;
    let n = g.node_count();
    let mut color = vec![WHITE; n];
    let mut via: Vec<Option<(EdgeIdx, NodeIdx)>> = vec![None; n];
    for root in 0..n {
        if color[root] != WHITE {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        color[root] = GREY;
        while let Some(&(a, pos)) = stack.last() {
            let inc = g.incident(a);
            if pos == inc.len() {
                color[a] = BLACK;
                stack.pop();
                continue;
            }
            let e = inc[pos];
            stack.last_mut().expect("non-empty").1 += 1;
            if directed(g, net, e, a) <= 0 {
                continue;
            }
            let b = g.edge(e).other(a);
            match color[b] {
                WHITE => {
                    color[b] = GREY;
                    via[b] = Some((e, a));
                    stack.push((b, 0));
                }
                GREY => {
                    let mut cycle = vec![(e, a)];
                    let mut at = a;
                    while at != b {
                        let (pe, prev) = via[at].expect("grey nodes have a parent");
                        cycle.push((pe, prev));
                        at = prev;
                    }
                    return Some(cycle);
                }
                _ => {}
            }
        }
    }
    None
}

/// Leftmost source-to-sink walk over edges carrying positive flow.
fn leftmost_path(g: &PlanarRoadGraph, net: &[i64]) -> Option<Vec<EdgeIdx>> {
    let (s, t) = (g.source(), g.sink());
    let mut path = Vec::new();
    let mut at = s;
    let mut arrival = g.outer_arrival(s);
    while at != t {
        let carries = |e: EdgeIdx| directed(g, net, e, at) > 0;
        let mut next = g.incident(at).iter().copied().filter(|&e| g.edge(e).is_virtual && carries(e)).min();
        if next.is_none() {
            let around = g.rotation(at);
            let d = around.len();
            let back = arrival
                .filter(|h| !g.edge(h.edge()).is_virtual)
                .or_else(|| g.outer_arrival(at))
                .and_then(|h| g.rotation_index(h.twin()))
                .unwrap_or(0);
            next = (1..=d).map(|k| around[(back + d - k % d) % d].edge()).find(|&e| carries(e));
        }
        let e = next?;
        path.push(e);
        if path.len() > g.edge_count() {
            return None;
        }
        arrival = Some(HalfEdge::new(e, g.edge(e).u != at));
        at = g.edge(e).other(at);
    }
    Some(path)
}

/// Max flow followed by decomposition: the usual initial chain state.
pub fn initial_state(graph: &Arc<PlanarRoadGraph>, strategy: AugmentStrategy) -> FlowState {
    decompose(&max_flow(graph, strategy)).expect("a computed max flow always decomposes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeSpec, NetworkSpec, NodeRecord};
    use crate::synth;

    fn arc(spec: NetworkSpec) -> Arc<PlanarRoadGraph> {
        Arc::new(PlanarRoadGraph::from_spec(&spec).unwrap())
    }

    fn single_edge(capacity: i64) -> Arc<PlanarRoadGraph> {
        arc(NetworkSpec {
            nodes: vec![NodeRecord::new("s", 0.0, 0.0), NodeRecord::new("t", 10.0, 0.0)],
            edges: vec![EdgeSpec::new("st", "s", "t", 10.0, capacity)],
            sources: vec!["s".into()],
            sinks: vec!["t".into()],
        })
    }

    #[test]
    fn grid_4x4_max_flow_is_two() {
        let g = Arc::new(synth::grid(4, 4, 1.0, 1));
        for strategy in [AugmentStrategy::BreadthFirst, AugmentStrategy::ShortestLength] {
            let flow = max_flow(&g, strategy);
            assert_eq!(flow.value(), 2);
            let state = decompose(&flow).unwrap();
            assert_eq!(state.paths().len(), 2);
            let (a, b) = (state.paths()[0].edges(), state.paths()[1].edges());
            assert!(a.iter().all(|e| !b.contains(e)), "paths are edge-disjoint");
            assert!(state.paths().iter().all(UnitPath::is_simple));
        }
    }

    #[test]
    fn single_edge_capacity() {
        let g = single_edge(5);
        assert_eq!(max_flow(&g, AugmentStrategy::BreadthFirst).value(), 5);
        let g = single_edge(3);
        let state = decompose(&max_flow(&g, AugmentStrategy::ShortestLength)).unwrap();
        assert_eq!(state.paths().len(), 3);
        assert!(state.paths().iter().all(|p| p.edges() == [0]));
    }

    #[test]
    fn detached_cycle_is_dropped() {
        // Square s-a-t-b plus a triangle c-d-e away from the terminals.
        let g = arc(NetworkSpec {
            nodes: vec![
                NodeRecord::new("s", 0.0, 0.0),
                NodeRecord::new("a", 1.0, 1.0),
                NodeRecord::new("t", 2.0, 0.0),
                NodeRecord::new("b", 1.0, -1.0),
                NodeRecord::new("c", 5.0, 0.0),
                NodeRecord::new("d", 6.0, 0.0),
                NodeRecord::new("e", 5.5, 1.0),
            ],
            edges: vec![
                EdgeSpec::new("sa", "s", "a", 1.5, 1),
                EdgeSpec::new("at", "a", "t", 1.5, 1),
                EdgeSpec::new("tb", "t", "b", 1.5, 1),
                EdgeSpec::new("bs", "b", "s", 1.5, 1),
                EdgeSpec::new("cd", "c", "d", 1.0, 1),
                EdgeSpec::new("de", "d", "e", 1.0, 1),
                EdgeSpec::new("ec", "e", "c", 1.0, 1),
                EdgeSpec::new("tc", "t", "c", 3.0, 1),
            ],
            sources: vec!["s".into()],
            sinks: vec!["t".into()],
        });
        // s->a->t, s->b->t (tb oriented t->b so -1, bs oriented b->s so -1),
        // plus circulation c->d->e->c.
        let net = vec![1, 1, -1, -1, 1, 1, 1, 0];
        let flow = IntegerFlow::from_net(Arc::clone(&g), net.clone()).unwrap();
        assert_eq!(flow.value(), 2);
        let state = decompose(&flow).unwrap();
        assert_eq!(state.paths().len(), 2);
        let mut recount = vec![0u32; g.edge_count()];
        for p in state.paths() {
            for &e in p.edges() {
                recount[e] += 1;
            }
        }
        assert_eq!(recount, vec![1, 1, 1, 1, 0, 0, 0, 0]);
    }

    #[test]
    fn from_net_rejects_invalid_flows() {
        let g = Arc::new(synth::grid(2, 2, 1.0, 1));
        assert!(matches!(IntegerFlow::from_net(Arc::clone(&g), vec![2, 0, 0, 0]), Err(FlowError::CapacityExceeded(_))));
        assert!(matches!(IntegerFlow::from_net(Arc::clone(&g), vec![1, 0, 0, 0]), Err(FlowError::NotConserved(_))));
        assert!(matches!(IntegerFlow::from_net(g, vec![0]), Err(FlowError::WrongLength { .. })));
    }

    #[test]
    fn shortest_length_prefers_short_detour() {
        // Two routes s->t: s-a-t (2 edges, 30 m) and s-b-c-t (3 edges, 9 m).
        let g = arc(NetworkSpec {
            nodes: vec![
                NodeRecord::new("s", 0.0, 0.0),
                NodeRecord::new("a", 1.0, 2.0),
                NodeRecord::new("t", 3.0, 0.0),
                NodeRecord::new("b", 1.0, -1.0),
                NodeRecord::new("c", 2.0, -1.0),
            ],
            edges: vec![
                EdgeSpec::new("sa", "s", "a", 15.0, 1),
                EdgeSpec::new("at", "a", "t", 15.0, 1),
                EdgeSpec::new("sb", "s", "b", 3.0, 1),
                EdgeSpec::new("bc", "b", "c", 3.0, 1),
                EdgeSpec::new("ct", "c", "t", 3.0, 1),
                EdgeSpec::new("bt", "b", "t", 40.0, 1),
            ],
            sources: vec!["s".into()],
            sinks: vec!["t".into()],
        });
        let bfs = decompose(&max_flow(&g, AugmentStrategy::BreadthFirst)).unwrap();
        let dij = decompose(&max_flow(&g, AugmentStrategy::ShortestLength)).unwrap();
        assert_eq!(bfs.paths().len(), 2);
        assert_eq!(dij.paths().len(), 2);
        assert!(dij.total_length() <= bfs.total_length());
    }
}
