//! The max-flow Markov chain.
//!
//! A state is a multiset of `mf` simple unit paths whose superposition
//! respects edge capacities and no two of which cross (see
//! [`crate::crossing`]). Every integer max flow without circulations has
//! exactly one such decomposition, so states and flows correspond one to
//! one. Allowing crossing decompositions would split the move graph into
//! several closed classes. One step flips a fair coin (heads keeps the
//! state), then picks a face and a path uniformly at random and tries to
//! push the path across the face. The move is accepted with the Metropolis
//! probability for the target `pi(x) ~ lambda^|x|`, where `|x|` is the total
//! length in meters. A move that would make two paths cross is refused
//! like a capacity violation; the reverse of an allowed move is always
//! allowed, so this keeps the chain reversible.
//!
//! When a state contains identical paths, choosing a path index uniformly
//! makes duplicated paths proportionally more likely to move. The
//! acceptance ratio carries the matching Hastings factor
//! `m_y(p') / m_x(p)` (path multiplicities before and after the move) so
//! that `lambda^|x|` stays exactly stationary. Without duplicates the factor
//! is 1.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::crossing::{crosses_indexed, first_crossing, PathIndex};
use crate::error::{ConfigError, StateError};
use crate::graph::{EdgeIdx, FaceIdx, HalfEdge, NodeIdx, PlanarRoadGraph};
use crate::maxflow::UnitPath;

/// A max-flow solution as a multiset of unit paths.
#[derive(Debug, Clone)]
pub struct FlowState {
    graph: Arc<PlanarRoadGraph>,
    paths: Vec<UnitPath>,
    usage: Vec<u32>,
    total_length: f64,
}

impl FlowState {
    /// Checks endpoints, simplicity, capacities and that no two paths cross.
    pub fn new(graph: Arc<PlanarRoadGraph>, paths: Vec<UnitPath>) -> Result<Self, StateError> {
        let mut usage = vec![0u32; graph.edge_count()];
        for (i, p) in paths.iter().enumerate() {
            if p.nodes().first() != Some(&graph.source()) || p.nodes().last() != Some(&graph.sink()) {
                return Err(StateError::WrongEndpoints(i));
            }
            if !p.is_simple() {
                return Err(StateError::NotSimple(i));
            }
            for (w, &e) in p.nodes().windows(2).zip(p.edges()) {
                let edge = graph.edge(e);
                if !((edge.u == w[0] && edge.v == w[1]) || (edge.v == w[0] && edge.u == w[1])) {
                    return Err(StateError::Disconnected(i));
                }
                usage[e] += 1;
            }
        }
        for (e, &u) in usage.iter().enumerate() {
            if u as u64 > graph.edge(e).capacity {
                return Err(StateError::CapacityExceeded(graph.edge(e).id.clone()));
            }
        }
        if let Some((i, j)) = first_crossing(&graph, &paths) {
            return Err(StateError::Crossing(i, j));
        }
        let total_length = paths.iter().map(UnitPath::length).sum();
        Ok(FlowState { graph, paths, usage, total_length })
    }

    /// Builds a state from paths given as node-id sequences.
    pub fn from_node_ids<S: AsRef<str>>(graph: Arc<PlanarRoadGraph>, paths: &[Vec<S>]) -> Result<Self, StateError> {
        let mut built = Vec::with_capacity(paths.len());
        for (i, ids) in paths.iter().enumerate() {
            let nodes = ids
                .iter()
                .map(|id| graph.node_by_id(id.as_ref()).ok_or_else(|| StateError::UnknownNode(id.as_ref().to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            let path = UnitPath::from_nodes(&graph, nodes).map_err(|_| StateError::Disconnected(i))?;
            built.push(path);
        }
        FlowState::new(graph, built)
    }

    pub fn graph(&self) -> &Arc<PlanarRoadGraph> {
        &self.graph
    }

    pub fn paths(&self) -> &[UnitPath] {
        &self.paths
    }

    /// Number of unit paths, i.e. the flow value.
    pub fn mf(&self) -> usize {
        self.paths.len()
    }

    /// Number of paths using `e`.
    pub fn usage(&self, e: EdgeIdx) -> u32 {
        self.usage[e]
    }

    pub fn usage_slice(&self) -> &[u32] {
        &self.usage
    }

    /// Total length `|x|` in meters.
    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn same_graph(&self, other: &FlowState) -> bool {
        Arc::ptr_eq(&self.graph, &other.graph)
    }

    /// Sorted real edges with nonzero usage.
    pub fn edge_set(&self) -> Vec<EdgeIdx> {
        self.usage
            .iter()
            .enumerate()
            .filter(|&(e, &u)| u > 0 && !self.graph.edge(e).is_virtual)
            .map(|(e, _)| e)
            .collect()
    }

    /// Paths as node sequences, sorted; equal for equal multisets.
    pub fn canonical_key(&self) -> Vec<Vec<NodeIdx>> {
        let mut key: Vec<Vec<NodeIdx>> = self.paths.iter().map(|p| p.nodes().to_vec()).collect();
        key.sort_unstable();
        key
    }

    /// Full recheck of every state invariant, including the cached usage and
    /// length.
    pub fn check_invariants(&self, mf: usize) -> Result<(), StateError> {
        if self.paths.len() != mf {
            return Err(StateError::WrongPathCount { expected: mf, got: self.paths.len() });
        }
        let fresh = FlowState::new(Arc::clone(&self.graph), self.paths.clone())?;
        if fresh.usage != self.usage {
            return Err(StateError::CapacityExceeded("<stale usage cache>".into()));
        }
        if fresh.total_length != self.total_length {
            return Err(StateError::CapacityExceeded("<stale length cache>".into()));
        }
        for p in &self.paths {
            let len: f64 = p.edges().iter().map(|&e| self.graph.edge(e).length).sum();
            if len != p.length() {
                return Err(StateError::CapacityExceeded("<stale path length>".into()));
            }
        }
        Ok(())
    }

    fn multiplicity(&self, path: &UnitPath) -> usize {
        self.paths.iter().filter(|q| q.nodes() == path.nodes()).count()
    }

    fn replace(&mut self, index: usize, path: UnitPath) {
        for &e in self.paths[index].edges() {
            self.usage[e] -= 1;
        }
        for &e in path.edges() {
            self.usage[e] += 1;
        }
        self.paths[index] = path;
        self.total_length = self.paths.iter().map(UnitPath::length).sum();
    }
}

/// Length bias and random stream of one chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParams {
    pub lambda: f64,
    pub seed: u64,
    /// Independent ChaCha stream for the same seed.
    pub stream: u64,
}

impl ChainParams {
    pub fn new(lambda: f64, seed: u64) -> Self {
        ChainParams { lambda, seed, stream: 0 }
    }

    /// Parameters for the `i`-th independent chain sharing this seed.
    pub fn split(&self, i: u64) -> Self {
        ChainParams { stream: i, ..*self }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.lambda.is_finite() && self.lambda > 0.0 {
            Ok(())
        } else {
            Err(ConfigError::Lambda(self.lambda))
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// `min(0, (y_len - x_len) * ln(lambda))`, the log of the Metropolis
/// acceptance probability `min{1, lambda^|y| / lambda^|x|}`.
pub fn acceptance_log_ratio(x_len: f64, y_len: f64, lambda: f64) -> f64 {
    ((y_len - x_len) * lambda.ln()).min(0.0)
}

/// Log acceptance including the Hastings factor for duplicated paths:
/// `min(0, (y_len - x_len) ln(lambda) + ln(m_to / m_from))`.
pub fn corrected_log_acceptance(x_len: f64, y_len: f64, lambda: f64, m_from: usize, m_to: usize) -> f64 {
    let correction = if m_from == m_to { 0.0 } else { (m_to as f64).ln() - (m_from as f64).ln() };
    ((y_len - x_len) * lambda.ln() + correction).min(0.0)
}

/// Outcome of one chain step. Everything except `Accepted` leaves the state
/// unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepOutcome {
    /// The fair coin chose to stay.
    Lazy,
    /// The chosen path and face share no edge.
    NoSharedEdge,
    /// Shared edges are not one segment, or the reroute is not simple.
    Undefined,
    CapacityViolation,
    /// The rerouted path would cross another path of the state.
    Crossing,
    Rejected,
    Accepted,
}

/// Per-outcome tallies over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChainStats {
    pub steps: u64,
    pub lazy: u64,
    pub no_shared_edge: u64,
    pub undefined: u64,
    pub capacity_violation: u64,
    pub crossing: u64,
    pub rejected: u64,
    pub accepted: u64,
}

impl ChainStats {
    pub fn record(&mut self, outcome: StepOutcome) {
        self.steps += 1;
        match outcome {
            StepOutcome::Lazy => self.lazy += 1,
            StepOutcome::NoSharedEdge => self.no_shared_edge += 1,
            StepOutcome::Undefined => self.undefined += 1,
            StepOutcome::CapacityViolation => self.capacity_violation += 1,
            StepOutcome::Crossing => self.crossing += 1,
            StepOutcome::Rejected => self.rejected += 1,
            StepOutcome::Accepted => self.accepted += 1,
        }
    }

    pub fn self_loops(&self) -> u64 {
        self.steps - self.accepted
    }
}

/// Node marks reused across reroutes.
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    stamp: Vec<u32>,
    current: u32,
}

impl Scratch {
    pub fn new(nodes: usize) -> Self {
        Scratch { stamp: vec![0; nodes], current: 0 }
    }

    fn next_round(&mut self, nodes: usize) {
        if self.stamp.len() < nodes {
            self.stamp.resize(nodes, 0);
        }
        self.current = self.current.wrapping_add(1);
        if self.current == 0 {
            self.stamp.fill(0);
            self.current = 1;
        }
    }

    #[inline]
    fn mark(&mut self, n: NodeIdx) -> bool {
        let fresh = self.stamp[n] != self.current;
        self.stamp[n] = self.current;
        fresh
    }
}

/// Pushes `path` across `face`.
///
/// Defined only when the edges shared by the path and the face boundary form
/// one contiguous segment of the path and one contiguous arc of the boundary
/// walk, with dead-end spikes of the face ignored. The segment is then
/// replaced by the rest of the boundary. Returns
/// `None` when there is no shared edge, the sharing is not a single segment,
/// a shared edge is walked twice by the face (a bridge), or the result is not
/// a simple path.
///
/// The operation is an involution: if `reroute(p, f) == Some(q)` then
/// `reroute(q, f) == Some(p)`.
pub fn reroute(graph: &PlanarRoadGraph, path: &UnitPath, face: FaceIdx) -> Option<UnitPath> {
    let mut scratch = Scratch::new(graph.node_count());
    match propose(graph, path, face, &mut scratch) {
        Proposal::Move { path, .. } => Some(path),
        _ => None,
    }
}

pub(crate) enum Proposal {
    NoSharedEdge,
    Undefined,
    /// The rerouted path; `arc` is the range of its edges that are new.
    Move {
        path: UnitPath,
        arc: std::ops::Range<usize>,
    },
}

pub(crate) fn propose(graph: &PlanarRoadGraph, path: &UnitPath, face: FaceIdx, scratch: &mut Scratch) -> Proposal {
    let walk = &graph.face(face).cycle;
    let w = walk.len();
    let on_face = |h: HalfEdge| graph.face_of(h).filter(|&(f, _)| f == face).map(|(_, pos)| pos);

    // Shared segment as path edge indices first..=last.
    let mut first: Option<usize> = None;
    let mut last = 0;
    let mut pos_first = 0;
    let mut pos_prev = 0;
    let mut dir = 0i8;
    for (i, &e) in path.edges().iter().enumerate() {
        let pos = match (on_face(HalfEdge::new(e, false)), on_face(HalfEdge::new(e, true))) {
            (None, None) => continue,
            (Some(_), Some(_)) => return Proposal::Undefined,
            (Some(p), None) | (None, Some(p)) => p,
        };
        match first {
            None => {
                first = Some(i);
                pos_first = pos;
            }
            Some(_) => {
                if i != last + 1 {
                    return Proposal::Undefined;
                }
                let step = if (pos_prev + 1) % w == pos {
                    1
                } else if (pos + 1) % w == pos_prev {
                    -1
                } else {
                    return Proposal::Undefined;
                };
                if dir != 0 && dir != step {
                    return Proposal::Undefined;
                }
                dir = step;
            }
        }
        last = i;
        pos_prev = pos;
    }
    let Some(first) = first else { return Proposal::NoSharedEdge };
    let shared = last - first + 1;
    // Boundary run in walk order.
    let (run_start, run_end) = if dir >= 0 { (pos_first, pos_prev) } else { (pos_prev, pos_first) };

    let nodes = path.nodes();
    let a = nodes[first];
    let arc_len = w - shared;
    // The arc walks from head(walk[run_end]) around to tail(walk[run_start]).
    let arc_half = |j: usize| walk[(run_end + 1 + j) % w];
    let forward = graph.tail(walk[run_start]) != a;

    scratch.next_round(graph.node_count());
    for &n in nodes[..=first].iter().chain(&nodes[last + 1..]) {
        scratch.mark(n);
    }
    let mut new_nodes = Vec::with_capacity(nodes.len() - shared + arc_len);
    let mut new_edges = Vec::with_capacity(path.edges().len() - shared + arc_len);
    new_nodes.extend_from_slice(&nodes[..=first]);
    new_edges.extend_from_slice(&path.edges()[..first]);
    for j in 0..arc_len {
        let h = if forward { arc_half(j) } else { arc_half(arc_len - 1 - j) };
        new_edges.push(h.edge());
        if j + 1 < arc_len {
            let n = if forward { graph.head(h) } else { graph.tail(h) };
            if !scratch.mark(n) {
                return Proposal::Undefined;
            }
            new_nodes.push(n);
        }
    }
    new_nodes.extend_from_slice(&nodes[last + 1..]);
    new_edges.extend_from_slice(&path.edges()[last + 1..]);
    let arc = first..first + arc_len;
    Proposal::Move { path: UnitPath::from_parts(graph, new_nodes, new_edges), arc }
}

/// One running chain: parameters, its random stream and scratch space.
#[derive(Debug, Clone)]
pub struct MarkovChain {
    graph: Arc<PlanarRoadGraph>,
    lambda: f64,
    rng: ChaCha8Rng,
    scratch: Scratch,
    index: PathIndex,
}

impl MarkovChain {
    pub fn new(graph: Arc<PlanarRoadGraph>, params: ChainParams) -> Result<Self, ConfigError> {
        params.validate()?;
        let scratch = Scratch::new(graph.node_count());
        let index = PathIndex::new(graph.node_count());
        Ok(MarkovChain { graph, lambda: params.lambda, rng: params.rng(), scratch, index })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Advances `state` by one transition.
    pub fn step(&mut self, state: &mut FlowState) -> StepOutcome {
        debug_assert!(Arc::ptr_eq(&self.graph, &state.graph));
        if !self.rng.random_bool(0.5) {
            return StepOutcome::Lazy;
        }
        let faces = self.graph.face_count();
        let mf = state.paths.len();
        if faces == 0 || mf == 0 {
            return StepOutcome::NoSharedEdge;
        }
        let face = self.rng.random_range(0..faces);
        let index = self.rng.random_range(0..mf);
        let graph = self.graph.as_ref();
        let (new_path, arc) = match propose(graph, &state.paths[index], face, &mut self.scratch) {
            Proposal::NoSharedEdge => return StepOutcome::NoSharedEdge,
            Proposal::Undefined => return StepOutcome::Undefined,
            Proposal::Move { path, arc } => (path, arc),
        };
        let arc_edges = &new_path.edges()[arc];
        if arc_edges.iter().any(|&e| state.usage[e] as u64 >= graph.edge(e).capacity) {
            return StepOutcome::CapacityViolation;
        }

        let old = &state.paths[index];
        let m_from = if old.edges().iter().all(|&e| state.usage[e] >= 2) { state.multiplicity(old) } else { 1 };
        let m_to = if arc_edges.iter().all(|&e| state.usage[e] >= 1) { state.multiplicity(&new_path) + 1 } else { 1 };
        let x_len = state.total_length;
        let y_len: f64 =
            state.paths.iter().enumerate().map(|(i, p)| if i == index { new_path.length() } else { p.length() }).sum();
        let log_accept = corrected_log_acceptance(x_len, y_len, self.lambda, m_from, m_to);
        if log_accept < 0.0 {
            let u: f64 = self.rng.random();
            if u.ln() >= log_accept {
                return StepOutcome::Rejected;
            }
        }
        self.index.load(&new_path);
        let crossed = state.paths.iter().enumerate().any(|(i, p)| {
            i != index && p.nodes() != new_path.nodes() && crosses_indexed(graph, &new_path, &self.index, p)
        });
        if crossed {
            return StepOutcome::Crossing;
        }
        state.replace(index, new_path);
        StepOutcome::Accepted
    }

    /// Runs `steps` transitions and tallies their outcomes.
    pub fn run(&mut self, state: &mut FlowState, steps: u64) -> ChainStats {
        let mut stats = ChainStats::default();
        for _ in 0..steps {
            stats.record(self.step(state));
        }
        stats
    }
}
