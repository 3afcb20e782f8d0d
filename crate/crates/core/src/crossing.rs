//! Whether two unit paths cross in the embedding.
//!
//! Two paths may share nodes and edges. Each maximal stretch they share
//! (a single node, or a run of common edges) is entered by the second path
//! from one side of the first and left to one side. The paths cross when
//! some stretch is entered and left on different sides. Stretches that
//! touch a terminal, or whose side cannot be read from the rotation system
//! because a virtual edge is involved, never count as crossings.

use std::collections::HashSet;

use crate::graph::{EdgeIdx, HalfEdge, NodeIdx, PlanarRoadGraph};
use crate::maxflow::UnitPath;

/// Node positions along one path, reusable across calls.
#[derive(Debug, Clone, Default)]
pub struct PathIndex {
    pos: Vec<u32>,
    stamp: Vec<u32>,
    current: u32,
}

impl PathIndex {
    pub fn new(nodes: usize) -> Self {
        PathIndex { pos: vec![0; nodes], stamp: vec![0; nodes], current: 0 }
    }

    pub fn load(&mut self, path: &UnitPath) {
        let needed = path.nodes().iter().copied().max().map_or(0, |m| m + 1);
        if self.stamp.len() < needed {
            self.stamp.resize(needed, 0);
            self.pos.resize(needed, 0);
        }
        self.current = self.current.wrapping_add(1);
        if self.current == 0 {
            self.stamp.fill(0);
            self.current = 1;
        }
        for (i, &n) in path.nodes().iter().enumerate() {
            self.stamp[n] = self.current;
            self.pos[n] = i as u32;
        }
    }

    #[inline]
    pub fn get(&self, n: NodeIdx) -> Option<usize> {
        (n < self.stamp.len() && self.stamp[n] == self.current).then(|| self.pos[n] as usize)
    }
}

/// Half-edge of `e` leaving `v`.
fn leaving(graph: &PlanarRoadGraph, e: EdgeIdx, v: NodeIdx) -> HalfEdge {
    HalfEdge::new(e, graph.edge(e).u != v)
}

/// Whether edge `e` at `p.nodes()[i]` lies on the left of `p`.
fn left_of(graph: &PlanarRoadGraph, p: &UnitPath, i: usize, e: EdgeIdx) -> Option<bool> {
    let v = p.nodes()[i];
    let ra = graph.rotation_index(leaving(graph, p.edges()[i - 1], v))?;
    let rb = graph.rotation_index(leaving(graph, p.edges()[i], v))?;
    let re = graph.rotation_index(leaving(graph, e, v))?;
    let d = graph.rotation(v).len();
    Some((re + d - rb) % d < (ra + d - rb) % d)
}

/// Crossing test with the positions of `p` already loaded into `index`.
pub fn crosses_indexed(graph: &PlanarRoadGraph, p: &UnitPath, index: &PathIndex, q: &UnitPath) -> bool {
    first_crossing_stretch(graph, p, index, q).is_some()
}

/// Where `q` leaves the first stretch at which it crosses `p`: positions
/// of the stretch's last node in `p` and in `q`, and whether `q` runs the
/// stretch in the same direction as `p`.
pub(crate) fn first_crossing_stretch(
    graph: &PlanarRoadGraph,
    p: &UnitPath,
    index: &PathIndex,
    q: &UnitPath,
) -> Option<(usize, usize, bool)> {
    let (pn, pe) = (p.nodes(), p.edges());
    let (qn, qe) = (q.nodes(), q.edges());
    let interior = |i: usize| i > 0 && i + 1 < pn.len();
    let mut j = 0;
    while j < qn.len() {
        let Some(i0) = index.get(qn[j]) else {
            j += 1;
            continue;
        };
        let forward = |i: usize, j: usize| i + 1 < pn.len() && qn[j + 1] == pn[i + 1] && qe[j] == pe[i];
        let backward = |i: usize, j: usize| i >= 1 && qn[j + 1] == pn[i - 1] && qe[j] == pe[i - 1];
        let (mut i1, mut j1) = (i0, j);
        let mut same_way = true;
        if j + 1 < qn.len() {
            if forward(i0, j) {
                while j1 + 1 < qn.len() && forward(i1, j1) {
                    i1 += 1;
                    j1 += 1;
                }
            } else if backward(i0, j) {
                same_way = false;
                while j1 + 1 < qn.len() && backward(i1, j1) {
                    i1 -= 1;
                    j1 += 1;
                }
            }
        }
        if j > 0 && j1 + 1 < qn.len() && interior(i0) && interior(i1) {
            let entry = left_of(graph, p, i0, qe[j - 1]);
            let exit = left_of(graph, p, i1, qe[j1]);
            if let (Some(a), Some(b)) = (entry, exit) {
                if a != b {
                    return Some((i1, j1, same_way));
                }
            }
        }
        j = j1 + 1;
    }
    None
}

/// Whether `p` and `q` cross.
pub fn paths_cross(graph: &PlanarRoadGraph, p: &UnitPath, q: &UnitPath) -> bool {
    let mut index = PathIndex::new(graph.node_count());
    index.load(p);
    crosses_indexed(graph, p, &index, q)
}

/// First crossing pair `(i, j)`, `i < j`, among `paths`.
pub fn first_crossing(graph: &PlanarRoadGraph, paths: &[UnitPath]) -> Option<(usize, usize)> {
    let mut index = PathIndex::new(graph.node_count());
    let mut seen: HashSet<&[NodeIdx]> = HashSet::new();
    for (i, p) in paths.iter().enumerate() {
        if !seen.insert(p.nodes()) {
            // An identical path crosses exactly what its twin crosses.
            continue;
        }
        index.load(p);
        for (j, q) in paths.iter().enumerate().skip(i + 1) {
            if crosses_indexed(graph, p, &index, q) {
                return Some((i, j));
            }
        }
    }
    None
}
