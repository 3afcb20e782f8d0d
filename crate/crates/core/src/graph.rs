//! Planar road networks: validation, straight-line embedding and faces.
//!
//! A [`PlanarRoadGraph`] is immutable once built. Roads are undirected edges
//! with a positive length (meters) and an integer capacity (lanes). Faces are
//! traced from the rotation system obtained by sorting the incident edges of
//! every node by angle, so the input coordinates fully determine the
//! embedding.
//!
//! Graphs with several sources or sinks are reduced to a single source and
//! sink by [`augment_terminals`]. The virtual edges it adds never take part
//! in planarity checks or faces.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::error::GraphError;

pub type NodeIdx = usize;
pub type EdgeIdx = usize;
pub type FaceIdx = usize;

const NO_FACE: u32 = u32::MAX;

/// Ids of the virtual terminals created by [`augment_terminals`].
pub const VIRTUAL_SOURCE_ID: &str = "__source__";
pub const VIRTUAL_SINK_ID: &str = "__sink__";

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub is_virtual: bool,
}

impl NodeRecord {
    pub fn new(id: impl Into<String>, x: f64, y: f64) -> Self {
        NodeRecord { id: id.into(), x, y, is_virtual: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    pub id: String,
    pub u: NodeIdx,
    pub v: NodeIdx,
    pub length: f64,
    pub capacity: u64,
    pub is_virtual: bool,
}

impl EdgeRecord {
    /// The endpoint opposite to `node`.
    #[inline]
    pub fn other(&self, node: NodeIdx) -> NodeIdx {
        if node == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// Edge description by node ids, as found in graph documents.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpec {
    pub id: String,
    pub u: String,
    pub v: String,
    pub length: f64,
    pub capacity: i64,
}

impl EdgeSpec {
    pub fn new(id: impl Into<String>, u: impl Into<String>, v: impl Into<String>, length: f64, capacity: i64) -> Self {
        EdgeSpec { id: id.into(), u: u.into(), v: v.into(), length, capacity }
    }
}

/// A road network before validation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkSpec {
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeSpec>,
    pub sources: Vec<String>,
    pub sinks: Vec<String>,
}

/// One traversal direction of an edge. `2 * e` runs `u -> v`, `2 * e + 1`
/// runs `v -> u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfEdge(pub u32);

impl HalfEdge {
    #[inline]
    pub fn new(edge: EdgeIdx, reversed: bool) -> Self {
        HalfEdge((edge as u32) << 1 | reversed as u32)
    }

    #[inline]
    pub fn edge(self) -> EdgeIdx {
        (self.0 >> 1) as usize
    }

    #[inline]
    pub fn is_reversed(self) -> bool {
        self.0 & 1 == 1
    }

    #[inline]
    pub fn twin(self) -> Self {
        HalfEdge(self.0 ^ 1)
    }

    #[inline]
    fn index(self) -> usize {
        self.0 as usize
    }
}

/// A face of the embedding, given by its closed boundary walk.
///
/// Bridges appear twice in the walk of the face that surrounds them.
/// `cycle` is the walk with dead ends pruned: every immediate back-and-forth
/// `h, twin(h)` is cancelled until none is left. Tree-like spikes into the
/// face are never part of a simple path around it, so rerouting uses
/// `cycle`.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceRecord {
    pub id: FaceIdx,
    pub walk: Vec<HalfEdge>,
    pub cycle: Vec<HalfEdge>,
    pub is_outer: bool,
}

impl FaceRecord {
    pub fn boundary_edges(&self) -> impl Iterator<Item = EdgeIdx> + '_ {
        self.walk.iter().map(|h| h.edge())
    }

    pub fn len(&self) -> usize {
        self.walk.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walk.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct PlanarRoadGraph {
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
    node_index: HashMap<String, NodeIdx>,
    edge_index: HashMap<String, EdgeIdx>,
    incident: Vec<Vec<EdgeIdx>>,
    faces: Vec<FaceRecord>,
    half_face: Vec<u32>,
    half_pos: Vec<u32>,
    rotation: Vec<Vec<HalfEdge>>,
    rot_pos: Vec<u32>,
    source: NodeIdx,
    sink: NodeIdx,
}

impl PlanarRoadGraph {
    /// Validates a network. With exactly one source and one sink they become
    /// the terminals; otherwise virtual terminals are added as in
    /// [`augment_terminals`].
    pub fn from_spec(spec: &NetworkSpec) -> Result<Self, GraphError> {
        match (spec.sources.as_slice(), spec.sinks.as_slice()) {
            ([], _) => Err(GraphError::NoSource),
            (_, []) => Err(GraphError::NoSink),
            ([s], [t]) => {
                if s == t {
                    return Err(GraphError::SameTerminal(s.clone()));
                }
                Self::assemble(spec.nodes.clone(), &spec.edges, s, t)
            }
            (sources, sinks) => {
                let (nodes, edges, s, t) = augmented_parts(spec.nodes.clone(), spec.edges.clone(), sources, sinks)?;
                Self::assemble(nodes, &edges, &s, &t)
            }
        }
    }

    fn assemble(nodes: Vec<NodeRecord>, edge_specs: &[EdgeSpec], source: &str, sink: &str) -> Result<Self, GraphError> {
        let mut node_index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if !n.x.is_finite() || !n.y.is_finite() {
                return Err(GraphError::NonFiniteCoordinate(n.id.clone()));
            }
            if node_index.insert(n.id.clone(), i).is_some() {
                return Err(GraphError::DuplicateNodeId(n.id.clone()));
            }
        }

        let mut edges = Vec::with_capacity(edge_specs.len());
        let mut edge_index = HashMap::with_capacity(edge_specs.len());
        for spec in edge_specs {
            let u = *node_index.get(&spec.u).ok_or_else(|| GraphError::UnknownNode(spec.u.clone()))?;
            let v = *node_index.get(&spec.v).ok_or_else(|| GraphError::UnknownNode(spec.v.clone()))?;
            if u == v {
                return Err(GraphError::SelfLoop(spec.id.clone()));
            }
            let is_virtual = nodes[u].is_virtual || nodes[v].is_virtual;
            let length_ok = spec.length.is_finite() && (spec.length > 0.0 || (is_virtual && spec.length == 0.0));
            if !length_ok {
                return Err(GraphError::NonPositiveLength { id: spec.id.clone(), length: spec.length });
            }
            if spec.capacity < 1 {
                return Err(GraphError::NonPositiveCapacity { id: spec.id.clone(), capacity: spec.capacity });
            }
            if edge_index.insert(spec.id.clone(), edges.len()).is_some() {
                return Err(GraphError::DuplicateEdgeId(spec.id.clone()));
            }
            edges.push(EdgeRecord {
                id: spec.id.clone(),
                u,
                v,
                length: spec.length,
                capacity: spec.capacity as u64,
                is_virtual,
            });
        }

        check_coincident(&nodes)?;
        if let Some((a, b)) = find_crossing(&nodes, &edges) {
            return Err(GraphError::Crossing(edges[a].id.clone(), edges[b].id.clone()));
        }

        let s = *node_index.get(source).ok_or_else(|| GraphError::UnknownNode(source.to_string()))?;
        let t = *node_index.get(sink).ok_or_else(|| GraphError::UnknownNode(sink.to_string()))?;
        if s == t {
            return Err(GraphError::SameTerminal(source.to_string()));
        }

        let mut incident = vec![Vec::new(); nodes.len()];
        for (e, edge) in edges.iter().enumerate() {
            incident[edge.u].push(e);
            incident[edge.v].push(e);
        }

        let mut graph = PlanarRoadGraph {
            nodes,
            edges,
            node_index,
            edge_index,
            incident,
            faces: Vec::new(),
            half_face: Vec::new(),
            half_pos: Vec::new(),
            rotation: Vec::new(),
            rot_pos: Vec::new(),
            source: s,
            sink: t,
        };
        if !graph.connected(s, t) {
            return Err(GraphError::DisconnectedTerminals {
                source_id: graph.nodes[s].id.clone(),
                sink_id: graph.nodes[t].id.clone(),
            });
        }
        graph.compute_faces();
        Ok(graph)
    }

    fn connected(&self, s: NodeIdx, t: NodeIdx) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([s]);
        seen[s] = true;
        while let Some(n) = queue.pop_front() {
            if n == t {
                return true;
            }
            for &e in &self.incident[n] {
                let m = self.edges[e].other(n);
                if !seen[m] {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
        false
    }

    /// Traces all faces of the real (non-virtual) subgraph.
    fn compute_faces(&mut self) {
        let half_count = 2 * self.edges.len();
        // Outgoing real half-edges around each node, counter-clockwise.
        let mut rotation: Vec<Vec<HalfEdge>> = vec![Vec::new(); self.nodes.len()];
        for (e, edge) in self.edges.iter().enumerate() {
            if edge.is_virtual {
                continue;
            }
            rotation[edge.u].push(HalfEdge::new(e, false));
            rotation[edge.v].push(HalfEdge::new(e, true));
        }
        let mut rot_pos = vec![0u32; half_count];
        for (n, around) in rotation.iter_mut().enumerate() {
            let (x0, y0) = (self.nodes[n].x, self.nodes[n].y);
            let angle = |h: &HalfEdge| {
                let head = &self.nodes[self.head(*h)];
                (head.y - y0).atan2(head.x - x0)
            };
            around.sort_by(|a, b| angle(a).total_cmp(&angle(b)).then(a.cmp(b)));
            for (i, h) in around.iter().enumerate() {
                rot_pos[h.index()] = i as u32;
            }
        }

        let mut half_face = vec![NO_FACE; half_count];
        let mut half_pos = vec![NO_FACE; half_count];
        let mut faces = Vec::new();
        for start in 0..half_count {
            let h0 = HalfEdge(start as u32);
            if self.edges[h0.edge()].is_virtual || half_face[start] != NO_FACE {
                continue;
            }
            let id = faces.len();
            let mut walk = Vec::new();
            let mut h = h0;
            loop {
                half_face[h.index()] = id as u32;
                walk.push(h);
                // Next edge clockwise from the twin at the head node keeps the
                // face on the left.
                let twin = h.twin();
                let around = &rotation[self.tail(twin)];
                let i = rot_pos[twin.index()] as usize;
                h = around[(i + around.len() - 1) % around.len()];
                if h == h0 {
                    break;
                }
            }
            let area2: f64 = walk
                .iter()
                .map(|&h| {
                    let a = &self.nodes[self.tail(h)];
                    let b = &self.nodes[self.head(h)];
                    a.x * b.y - b.x * a.y
                })
                .sum();
            let cycle = prune_spikes(&walk);
            for h in &walk {
                half_pos[h.index()] = NO_FACE;
            }
            for (i, h) in cycle.iter().enumerate() {
                half_pos[h.index()] = i as u32;
            }
            faces.push(FaceRecord { id, walk, cycle, is_outer: area2 <= 0.0 });
        }
        self.faces = faces;
        self.half_face = half_face;
        self.half_pos = half_pos;
        self.rotation = rotation;
        self.rot_pos = rot_pos;
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }

    pub fn faces(&self) -> &[FaceRecord] {
        &self.faces
    }

    pub fn node(&self, n: NodeIdx) -> &NodeRecord {
        &self.nodes[n]
    }

    pub fn edge(&self, e: EdgeIdx) -> &EdgeRecord {
        &self.edges[e]
    }

    pub fn face(&self, f: FaceIdx) -> &FaceRecord {
        &self.faces[f]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn source(&self) -> NodeIdx {
        self.source
    }

    pub fn sink(&self) -> NodeIdx {
        self.sink
    }

    /// Edges incident to `n`, in edge-index order.
    pub fn incident(&self, n: NodeIdx) -> &[EdgeIdx] {
        &self.incident[n]
    }

    pub fn node_by_id(&self, id: &str) -> Option<NodeIdx> {
        self.node_index.get(id).copied()
    }

    pub fn edge_by_id(&self, id: &str) -> Option<EdgeIdx> {
        self.edge_index.get(id).copied()
    }

    /// Edge between two nodes, if any.
    pub fn edge_between(&self, a: NodeIdx, b: NodeIdx) -> Option<EdgeIdx> {
        self.incident[a].iter().copied().find(|&e| self.edges[e].other(a) == b)
    }

    pub fn virtual_edge_ids(&self) -> impl Iterator<Item = EdgeIdx> + '_ {
        self.edges.iter().enumerate().filter(|(_, e)| e.is_virtual).map(|(i, _)| i)
    }

    #[inline]
    pub fn tail(&self, h: HalfEdge) -> NodeIdx {
        let e = &self.edges[h.edge()];
        if h.is_reversed() {
            e.v
        } else {
            e.u
        }
    }

    #[inline]
    pub fn head(&self, h: HalfEdge) -> NodeIdx {
        self.tail(h.twin())
    }

    /// Face on the left of `h` and the position of `h` in that face's
    /// pruned `cycle`. `None` for virtual edges and for half-edges pruned
    /// as dead ends.
    #[inline]
    pub fn face_of(&self, h: HalfEdge) -> Option<(FaceIdx, usize)> {
        let f = self.half_face[h.index()];
        let pos = self.half_pos[h.index()];
        (f != NO_FACE && pos != NO_FACE).then_some((f as usize, pos as usize))
    }

    /// Face on the left of a real half-edge, pruned or not.
    pub fn face_left_of(&self, h: HalfEdge) -> Option<FaceIdx> {
        let f = self.half_face[h.index()];
        (f != NO_FACE).then_some(f as usize)
    }

    /// Real half-edges leaving `n`, counter-clockwise by angle.
    pub fn rotation(&self, n: NodeIdx) -> &[HalfEdge] {
        &self.rotation[n]
    }

    /// Position of a real half-edge in the rotation at its tail.
    #[inline]
    pub fn rotation_index(&self, h: HalfEdge) -> Option<usize> {
        (!self.edges[h.edge()].is_virtual).then(|| self.rot_pos[h.index()] as usize)
    }

    /// A half-edge of an outer face walk that ends at `n`, if `n` lies on
    /// an outer face.
    pub fn outer_arrival(&self, n: NodeIdx) -> Option<HalfEdge> {
        self.faces.iter().filter(|f| f.is_outer).flat_map(|f| f.walk.iter().copied()).find(|&h| self.head(h) == n)
    }

    /// Sum of all real edge capacities.
    pub fn total_real_capacity(&self) -> u64 {
        self.edges.iter().filter(|e| !e.is_virtual).map(|e| e.capacity).sum()
    }

    /// `(nodes, edges, faces)` of every connected component of the real
    /// subgraph that contains at least one edge.
    pub fn component_counts(&self) -> Vec<(usize, usize, usize)> {
        let n = self.nodes.len();
        let mut comp = vec![usize::MAX; n];
        let mut counts = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX || self.nodes[start].is_virtual {
                continue;
            }
            let id = counts.len();
            let mut stack = vec![start];
            comp[start] = id;
            let mut nodes = 0;
            while let Some(a) = stack.pop() {
                nodes += 1;
                for &e in &self.incident[a] {
                    if self.edges[e].is_virtual {
                        continue;
                    }
                    let b = self.edges[e].other(a);
                    if comp[b] == usize::MAX {
                        comp[b] = id;
                        stack.push(b);
                    }
                }
            }
            counts.push((nodes, 0, 0));
        }
        for e in self.edges.iter().filter(|e| !e.is_virtual) {
            counts[comp[e.u]].1 += 1;
        }
        for f in &self.faces {
            let first = f.walk[0];
            counts[comp[self.tail(first)]].2 += 1;
        }
        counts.into_iter().filter(|c| c.1 > 0).collect()
    }

    /// The input form of this graph, with terminals collapsed to `s`, `t`.
    pub fn to_spec(&self) -> NetworkSpec {
        NetworkSpec {
            nodes: self.nodes.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeSpec {
                    id: e.id.clone(),
                    u: self.nodes[e.u].id.clone(),
                    v: self.nodes[e.v].id.clone(),
                    length: e.length,
                    capacity: e.capacity as i64,
                })
                .collect(),
            sources: vec![self.nodes[self.source].id.clone()],
            sinks: vec![self.nodes[self.sink].id.clone()],
        }
    }

    /// Hex SHA-256 over the topology, lengths, capacities and terminals.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for n in &self.nodes {
            hasher.update(n.id.as_bytes());
            hasher.update([0]);
        }
        for e in &self.edges {
            hasher.update(e.id.as_bytes());
            hasher.update([0]);
            hasher.update((e.u as u64).to_le_bytes());
            hasher.update((e.v as u64).to_le_bytes());
            hasher.update(e.length.to_bits().to_le_bytes());
            hasher.update(e.capacity.to_le_bytes());
        }
        hasher.update((self.source as u64).to_le_bytes());
        hasher.update((self.sink as u64).to_le_bytes());
        let mut out = String::with_capacity(64);
        for b in hasher.finalize() {
            let _ = write!(out, "{b:02x}");
        }
        out
    }
}

/// Adds a virtual source `s*` joined to every source and a virtual sink `t*`
/// joined from every sink. Virtual edges have zero length and a capacity of
/// one more than the total real capacity, so they never bind.
///
/// Faces of the result are exactly the faces of the input.
pub fn augment_terminals(
    graph: &PlanarRoadGraph,
    sources: &[&str],
    sinks: &[&str],
) -> Result<PlanarRoadGraph, GraphError> {
    let spec = graph.to_spec();
    // Keep only the real part; terminals are replaced.
    let nodes: Vec<NodeRecord> = spec.nodes.into_iter().filter(|n| !n.is_virtual).collect();
    let real: HashSet<&str> = nodes.iter().map(|n| n.id.as_str()).collect();
    let edges: Vec<EdgeSpec> =
        spec.edges.into_iter().filter(|e| real.contains(e.u.as_str()) && real.contains(e.v.as_str())).collect();
    let sources: Vec<String> = sources.iter().map(|s| s.to_string()).collect();
    let sinks: Vec<String> = sinks.iter().map(|s| s.to_string()).collect();
    let (nodes, edges, s, t) = augmented_parts(nodes, edges, &sources, &sinks)?;
    PlanarRoadGraph::assemble(nodes, &edges, &s, &t)
}

fn augmented_parts(
    mut nodes: Vec<NodeRecord>,
    mut edges: Vec<EdgeSpec>,
    sources: &[String],
    sinks: &[String],
) -> Result<(Vec<NodeRecord>, Vec<EdgeSpec>, String, String), GraphError> {
    if sources.is_empty() {
        return Err(GraphError::NoSource);
    }
    if sinks.is_empty() {
        return Err(GraphError::NoSink);
    }
    if let Some(both) = sources.iter().find(|s| sinks.contains(s)) {
        return Err(GraphError::OverlappingTerminals(both.clone()));
    }
    let position: HashMap<&str, (f64, f64)> = nodes.iter().map(|n| (n.id.as_str(), (n.x, n.y))).collect();
    let centroid = |ids: &[String]| -> Result<(f64, f64), GraphError> {
        let mut sum = (0.0, 0.0);
        for id in ids {
            let p = position.get(id.as_str()).ok_or_else(|| GraphError::UnknownNode(id.clone()))?;
            sum.0 += p.0;
            sum.1 += p.1;
        }
        Ok((sum.0 / ids.len() as f64, sum.1 / ids.len() as f64))
    };
    let src_at = centroid(sources)?;
    let snk_at = centroid(sinks)?;

    let taken: HashSet<String> = nodes.iter().map(|n| n.id.clone()).collect();
    let fresh = |base: &str| {
        let mut id = base.to_string();
        while taken.contains(&id) {
            id.push('_');
        }
        id
    };
    let s = fresh(VIRTUAL_SOURCE_ID);
    let t = fresh(VIRTUAL_SINK_ID);

    let sentinel: i64 = edges.iter().map(|e| e.capacity.max(0)).sum::<i64>() + 1;
    nodes.push(NodeRecord { id: s.clone(), x: src_at.0, y: src_at.1, is_virtual: true });
    nodes.push(NodeRecord { id: t.clone(), x: snk_at.0, y: snk_at.1, is_virtual: true });
    for src in sources {
        edges.push(EdgeSpec::new(format!("{s}->{src}"), s.clone(), src.clone(), 0.0, sentinel));
    }
    for snk in sinks {
        edges.push(EdgeSpec::new(format!("{snk}->{t}"), snk.clone(), t.clone(), 0.0, sentinel));
    }
    Ok((nodes, edges, s, t))
}

/// Cancels adjacent `h, twin(h)` pairs of a closed walk, cyclically.
fn prune_spikes(walk: &[HalfEdge]) -> Vec<HalfEdge> {
    let mut out: Vec<HalfEdge> = Vec::with_capacity(walk.len());
    for &h in walk {
        if out.last() == Some(&h.twin()) {
            out.pop();
        } else {
            out.push(h);
        }
    }
    let mut lo = 0;
    let mut hi = out.len();
    while hi - lo >= 2 && out[lo] == out[hi - 1].twin() {
        lo += 1;
        hi -= 1;
    }
    out[lo..hi].to_vec()
}

fn check_coincident(nodes: &[NodeRecord]) -> Result<(), GraphError> {
    let mut seen: HashMap<(u64, u64), usize> = HashMap::new();
    for (i, n) in nodes.iter().enumerate().filter(|(_, n)| !n.is_virtual) {
        // +0.0 folds negative zero.
        let key = ((n.x + 0.0).to_bits(), (n.y + 0.0).to_bits());
        if let Some(&j) = seen.get(&key) {
            return Err(GraphError::CoincidentNodes(nodes[j].id.clone(), n.id.clone()));
        }
        seen.insert(key, i);
    }
    Ok(())
}

#[inline]
fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// `p` is collinear with `a`-`b`; is it inside the segment's bounding box?
#[inline]
fn within(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> bool {
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

fn segments_conflict(nodes: &[NodeRecord], a: &EdgeRecord, b: &EdgeRecord) -> bool {
    let pos = |n: NodeIdx| (nodes[n].x, nodes[n].y);
    let shared: Vec<NodeIdx> = [a.u, a.v].into_iter().filter(|&n| n == b.u || n == b.v).collect();
    match shared.as_slice() {
        [_, _] => true,
        [o] => {
            let (o, p, q) = (pos(*o), pos(a.other(*o)), pos(b.other(*o)));
            let dot = (p.0 - o.0) * (q.0 - o.0) + (p.1 - o.1) * (q.1 - o.1);
            orient(o, p, q) == 0.0 && dot > 0.0
        }
        _ => {
            let (p1, p2, p3, p4) = (pos(a.u), pos(a.v), pos(b.u), pos(b.v));
            let d1 = orient(p3, p4, p1);
            let d2 = orient(p3, p4, p2);
            let d3 = orient(p1, p2, p3);
            let d4 = orient(p1, p2, p4);
            if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
            {
                return true;
            }
            (d1 == 0.0 && within(p3, p4, p1))
                || (d2 == 0.0 && within(p3, p4, p2))
                || (d3 == 0.0 && within(p1, p2, p3))
                || (d4 == 0.0 && within(p1, p2, p4))
        }
    }
}

/// Smallest pair `(a, b)`, `a < b`, of real edges whose straight-line
/// drawings meet anywhere other than a shared endpoint.
fn find_crossing(nodes: &[NodeRecord], edges: &[EdgeRecord]) -> Option<(EdgeIdx, EdgeIdx)> {
    let real: Vec<EdgeIdx> = (0..edges.len()).filter(|&e| !edges[e].is_virtual).collect();
    if real.len() < 2 {
        return None;
    }
    let (mut min_x, mut min_y, mut max_x, mut max_y) =
        (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &e in &real {
        for n in [edges[e].u, edges[e].v] {
            min_x = min_x.min(nodes[n].x);
            max_x = max_x.max(nodes[n].x);
            min_y = min_y.min(nodes[n].y);
            max_y = max_y.max(nodes[n].y);
        }
    }
    let (w, h) = (max_x - min_x, max_y - min_y);
    let count = real.len() as f64;
    let mut cell = if w * h > 0.0 { (w * h / count).sqrt() } else { w.max(h) / count };
    if !(cell.is_finite() && cell > 0.0) {
        cell = 1.0;
    }
    let cell_of = |x: f64, y: f64| (((x - min_x) / cell) as i64, ((y - min_y) / cell) as i64);

    let mut buckets: HashMap<(i64, i64), Vec<EdgeIdx>> = HashMap::new();
    for &e in &real {
        let (a, b) = (&nodes[edges[e].u], &nodes[edges[e].v]);
        let lo = cell_of(a.x.min(b.x), a.y.min(b.y));
        let hi = cell_of(a.x.max(b.x), a.y.max(b.y));
        for cx in lo.0..=hi.0 {
            for cy in lo.1..=hi.1 {
                buckets.entry((cx, cy)).or_default().push(e);
            }
        }
    }
    let mut best: Option<(EdgeIdx, EdgeIdx)> = None;
    for bucket in buckets.values() {
        for (i, &a) in bucket.iter().enumerate() {
            for &b in &bucket[i + 1..] {
                let pair = (a.min(b), a.max(b));
                if best.is_some_and(|p| p <= pair) {
                    continue;
                }
                if segments_conflict(nodes, &edges[a], &edges[b]) {
                    best = Some(pair);
                }
            }
        }
    }
    best
}
