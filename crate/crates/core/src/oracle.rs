//! Exact analysis of the chain on small graphs.
//!
//! [`enumerate_states`] lists every max-flow state, [`exact_transition_matrix`]
//! builds the one-step transition probabilities and the target distribution,
//! and the remaining functions compare them with each other and with a
//! simulated run.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chain::{corrected_log_acceptance, reroute, ChainParams, FlowState, MarkovChain, StepOutcome};
use crate::crossing::{first_crossing, paths_cross};
use crate::error::OracleError;
use crate::graph::{NodeIdx, PlanarRoadGraph};
use crate::maxflow::{max_flow, AugmentStrategy, UnitPath};

pub const DEFAULT_STATE_CAP: usize = 100_000;

type Key = Vec<Vec<NodeIdx>>;

/// Every max-flow state of a graph, in canonical order.
#[derive(Debug, Clone)]
pub struct StateSpace {
    graph: Arc<PlanarRoadGraph>,
    mf: usize,
    states: Vec<FlowState>,
    index: HashMap<Key, usize>,
}

impl StateSpace {
    pub fn graph(&self) -> &Arc<PlanarRoadGraph> {
        &self.graph
    }

    pub fn mf(&self) -> usize {
        self.mf
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[FlowState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &FlowState {
        &self.states[i]
    }

    pub fn index_of(&self, state: &FlowState) -> Option<usize> {
        self.index.get(&state.canonical_key()).copied()
    }
}

/// Enumerates all multisets of `mf` simple s-t paths whose superposition
/// fits the capacities and no two of which cross. Refuses with the partial count once either the
/// number of simple paths or the number of states exceeds `cap`.
pub fn enumerate_states(graph: &Arc<PlanarRoadGraph>, cap: usize) -> Result<StateSpace, OracleError> {
    let mf = max_flow(graph, AugmentStrategy::BreadthFirst).value() as usize;
    let mut paths = simple_paths(graph, cap)?;
    paths.sort_by(|a, b| a.nodes().cmp(b.nodes()));

    let mut states = Vec::new();
    let mut usage = vec![0u64; graph.edge_count()];
    let mut chosen = Vec::with_capacity(mf);
    let mut stack_err = None;
    choose(graph, &paths, mf, 0, &mut usage, &mut chosen, &mut states, cap, &mut stack_err);
    if let Some(partial) = stack_err {
        return Err(OracleError::CapExceeded { cap, partial });
    }

    let states: Vec<FlowState> = states
        .into_iter()
        .map(|idx: Vec<usize>| {
            let ps = idx.iter().map(|&i| paths[i].clone()).collect();
            FlowState::new(Arc::clone(graph), ps).expect("enumerated state is valid")
        })
        .collect();
    let index = states.iter().enumerate().map(|(i, s)| (s.canonical_key(), i)).collect();
    Ok(StateSpace { graph: Arc::clone(graph), mf, states, index })
}

fn simple_paths(graph: &PlanarRoadGraph, cap: usize) -> Result<Vec<UnitPath>, OracleError> {
    let (s, t) = (graph.source(), graph.sink());
    let mut out = Vec::new();
    let mut on_path = vec![false; graph.node_count()];
    let mut nodes = vec![s];
    let mut edges = Vec::new();
    // Each frame is (node, next incident position).
    let mut frames = vec![(s, 0usize)];
    on_path[s] = true;
    while let Some(&(n, pos)) = frames.last() {
        if n == t && pos == 0 {
            if out.len() == cap {
                return Err(OracleError::CapExceeded { cap, partial: out.len() });
            }
            out.push(UnitPath::from_parts(graph, nodes.clone(), edges.clone()));
        }
        let inc = graph.incident(n);
        let next = if n == t { None } else { inc[pos..].iter().position(|&e| !on_path[graph.edge(e).other(n)]) };
        match next {
            Some(off) => {
                let e = inc[pos + off];
                frames.last_mut().unwrap().1 = pos + off + 1;
                let m = graph.edge(e).other(n);
                on_path[m] = true;
                nodes.push(m);
                edges.push(e);
                frames.push((m, 0));
            }
            None => {
                frames.pop();
                on_path[n] = false;
                nodes.pop();
                edges.pop();
            }
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn choose(
    graph: &PlanarRoadGraph,
    paths: &[UnitPath],
    remaining: usize,
    start: usize,
    usage: &mut [u64],
    chosen: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
    cap: usize,
    overflow: &mut Option<usize>,
) {
    if overflow.is_some() {
        return;
    }
    if remaining == 0 {
        if out.len() == cap {
            *overflow = Some(out.len());
            return;
        }
        out.push(chosen.clone());
        return;
    }
    for i in start..paths.len() {
        let p = &paths[i];
        if p.edges().iter().any(|&e| usage[e] >= graph.edge(e).capacity) {
            continue;
        }
        if chosen.iter().any(|&c| paths[c].nodes() != p.nodes() && paths_cross(graph, &paths[c], p)) {
            continue;
        }
        for &e in p.edges() {
            usage[e] += 1;
        }
        chosen.push(i);
        choose(graph, paths, remaining - 1, i, usage, chosen, out, cap, overflow);
        chosen.pop();
        for &e in p.edges() {
            usage[e] -= 1;
        }
        if overflow.is_some() {
            return;
        }
    }
}

/// One distinct legal move out of a state: target state, number of
/// (face, path index) proposals producing it, and path multiplicities of
/// the moved path before and of the new path after.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Move {
    target: usize,
    proposals: usize,
    m_from: usize,
    m_to: usize,
}

fn moves(space: &StateSpace) -> Vec<Vec<Move>> {
    let graph = space.graph.as_ref();
    space
        .states
        .iter()
        .map(|x| {
            let mut found: Vec<Move> = Vec::new();
            for (i, p) in x.paths().iter().enumerate() {
                for f in 0..graph.face_count() {
                    let Some(q) = reroute(graph, p, f) else { continue };
                    let mut usage = x.usage_slice().to_vec();
                    for &e in p.edges() {
                        usage[e] -= 1;
                    }
                    if q.edges().iter().any(|&e| {
                        usage[e] += 1;
                        usage[e] as u64 > graph.edge(e).capacity
                    }) {
                        continue;
                    }
                    let mut ys = x.paths().to_vec();
                    ys[i] = q.clone();
                    if first_crossing(graph, &ys).is_some() {
                        continue;
                    }
                    let mut key: Key = ys.iter().map(|p| p.nodes().to_vec()).collect();
                    key.sort();
                    let target = *space.index.get(&key).expect("legal move leads into the state space");
                    let m_from = x.paths().iter().filter(|r| r.nodes() == p.nodes()).count();
                    let m_to = key.iter().filter(|r| r.as_slice() == q.nodes()).count();
                    match found.iter_mut().find(|m| m.target == target) {
                        Some(m) => m.proposals += 1,
                        None => found.push(Move { target, proposals: 1, m_from, m_to }),
                    }
                }
            }
            found.sort_by_key(|m| m.target);
            found
        })
        .collect()
}

/// Exact target distribution and transition probabilities.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    pub lambda: f64,
    /// `pi[x] = lambda^|x| / Z`.
    pub pi: Vec<f64>,
    /// `ln Z`.
    pub log_z: f64,
    /// Off-diagonal entries of each row, sorted by column.
    pub transitions: Vec<Vec<(usize, f64)>>,
    /// Diagonal entries.
    pub stay: Vec<f64>,
}

/// Builds `P` and `pi` for the chain at `lambda` on an enumerated space.
pub fn exact_transition_matrix(space: &StateSpace, lambda: f64) -> ExactDistribution {
    let faces = space.graph.face_count() as f64;
    let mf = space.mf as f64;
    let lengths: Vec<f64> = space.states.iter().map(FlowState::total_length).collect();

    let log_w: Vec<f64> = lengths.iter().map(|&l| l * lambda.ln()).collect();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = max + log_w.iter().map(|w| (w - max).exp()).sum::<f64>().ln();
    let pi = log_w.iter().map(|w| (w - log_z).exp()).collect();

    let mut transitions = Vec::with_capacity(space.len());
    let mut stay = Vec::with_capacity(space.len());
    for (x, row) in moves(space).into_iter().enumerate() {
        let entries: Vec<(usize, f64)> = row
            .iter()
            .map(|m| {
                let accept = corrected_log_acceptance(lengths[x], lengths[m.target], lambda, m.m_from, m.m_to).exp();
                (m.target, 0.5 / (faces * mf) * m.proposals as f64 * accept)
            })
            .collect();
        stay.push(1.0 - entries.iter().map(|e| e.1).sum::<f64>());
        transitions.push(entries);
    }
    ExactDistribution { lambda, pi, log_z, transitions, stay }
}

impl ExactDistribution {
    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    /// `P(x, y)`.
    pub fn probability(&self, x: usize, y: usize) -> f64 {
        if x == y {
            return self.stay[x];
        }
        match self.transitions[x].binary_search_by_key(&y, |e| e.0) {
            Ok(i) => self.transitions[x][i].1,
            Err(_) => 0.0,
        }
    }

    /// `max |pi(x) P(x,y) - pi(y) P(y,x)|` over all pairs.
    pub fn detailed_balance_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (x, row) in self.transitions.iter().enumerate() {
            for &(y, p) in row {
                let r = (self.pi[x] * p - self.pi[y] * self.probability(y, x)).abs();
                worst = worst.max(r);
            }
        }
        worst
    }

    /// `max_y |(pi P)(y) - pi(y)|`.
    pub fn stationarity_residual(&self) -> f64 {
        let mut flow: Vec<f64> = self.pi.iter().zip(&self.stay).map(|(p, s)| p * s).collect();
        for (x, row) in self.transitions.iter().enumerate() {
            for &(y, p) in row {
                flow[y] += self.pi[x] * p;
            }
        }
        flow.iter().zip(&self.pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Largest deviation of a row sum from 1.
    pub fn row_sum_error(&self) -> f64 {
        self.transitions
            .iter()
            .zip(&self.stay)
            .map(|(row, s)| (row.iter().map(|e| e.1).sum::<f64>() + s - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest deviation of `pi` from the uniform distribution.
    pub fn uniform_deviation(&self) -> f64 {
        let u = 1.0 / self.pi.len() as f64;
        self.pi.iter().map(|p| (p - u).abs()).fold(0.0, f64::max)
    }

    /// Expected total length under `pi`.
    pub fn expected_length(&self, space: &StateSpace) -> f64 {
        self.pi.iter().zip(space.states()).map(|(p, s)| p * s.total_length()).sum()
    }
}

/// Result of the strong-connectivity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Irreducibility {
    pub connected: bool,
    /// A pair `(x, y)` such that `y` cannot be reached from `x`.
    pub witness: Option<(usize, usize)>,
}

/// Tests whether the graph of legal moves over `space` is strongly
/// connected.
pub fn check_irreducible(space: &StateSpace) -> Irreducibility {
    let n = space.len();
    if n <= 1 {
        return Irreducibility { connected: true, witness: None };
    }
    let fwd: Vec<Vec<usize>> = moves(space).into_iter().map(|r| r.into_iter().map(|m| m.target).collect()).collect();
    let mut rev = vec![Vec::new(); n];
    for (x, row) in fwd.iter().enumerate() {
        for &y in row {
            rev[y].push(x);
        }
    }
    let reach = |adj: &[Vec<usize>]| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(x) = stack.pop() {
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen
    };
    if let Some(y) = reach(&fwd).iter().position(|&s| !s) {
        return Irreducibility { connected: false, witness: Some((0, y)) };
    }
    if let Some(x) = reach(&rev).iter().position(|&s| !s) {
        return Irreducibility { connected: false, witness: Some((x, 0)) };
    }
    Irreducibility { connected: true, witness: None }
}

/// Total-variation distance between a visit histogram and `pi`.
pub fn tv_distance(counts: &[u64], exact: &ExactDistribution) -> Result<f64, OracleError> {
    if counts.len() != exact.len() {
        return Err(OracleError::IndexMismatch { expected: exact.len(), got: counts.len() });
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Ok(1.0);
    }
    let total = total as f64;
    Ok(0.5 * counts.iter().zip(&exact.pi).map(|(&c, p)| (c as f64 / total - p).abs()).sum::<f64>())
}

/// Runs the chain from `start`, discards `burn_in` steps, then records the
/// TV distance of the visit histogram at each checkpoint (counted in
/// post-burn-in steps, ascending).
pub fn tv_trajectory(
    space: &StateSpace,
    exact: &ExactDistribution,
    start: FlowState,
    params: ChainParams,
    burn_in: u64,
    checkpoints: &[u64],
) -> Result<Vec<TvPoint>, OracleError> {
    let mut chain = MarkovChain::new(Arc::clone(&space.graph), params).expect("validated parameters");
    let mut x = start;
    let mut current = space.index_of(&x).ok_or(OracleError::UnknownState)?;
    for _ in 0..burn_in {
        if chain.step(&mut x) == StepOutcome::Accepted {
            current = space.index_of(&x).ok_or(OracleError::UnknownState)?;
        }
    }
    let mut counts = vec![0u64; space.len()];
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut done = 0u64;
    for &cp in checkpoints {
        while done < cp {
            if chain.step(&mut x) == StepOutcome::Accepted {
                current = space.index_of(&x).ok_or(OracleError::UnknownState)?;
            }
            counts[current] += 1;
            done += 1;
        }
        out.push(TvPoint { steps: cp, tv: tv_distance(&counts, exact)? });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvPoint {
    pub steps: u64,
    pub tv: f64,
}

/// Per-graph summary of the exact checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub graph_fingerprint: String,
    pub states: usize,
    pub mf: usize,
    pub lambda: f64,
    pub max_detailed_balance_residual: f64,
    pub stationarity_residual: f64,
    pub row_sum_error: f64,
    pub pi_uniform: bool,
    pub strongly_connected: bool,
    /// Node-id paths of two states with no route from the first to the second.
    pub witness: Option<[Vec<Vec<String>>; 2]>,
    pub tv_trajectory: Vec<TvPoint>,
}

impl DiagnosticReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.strongly_connected && self.max_detailed_balance_residual <= tolerance
    }
}

/// Enumerates, builds the exact matrix, checks connectivity and simulates
/// the chain from the Ford-Fulkerson state with checkpoints at every power
/// of ten up to `steps` (and `steps` itself).
pub fn diagnose(
    graph: &Arc<PlanarRoadGraph>,
    lambda: f64,
    steps: u64,
    cap: usize,
    seed: u64,
) -> Result<DiagnosticReport, OracleError> {
    let space = enumerate_states(graph, cap)?;
    let exact = exact_transition_matrix(&space, lambda);
    let irr = check_irreducible(&space);
    let ids = |i: usize| -> Vec<Vec<String>> {
        space.state(i).paths().iter().map(|p| p.node_ids(graph).into_iter().map(String::from).collect()).collect()
    };
    let mut checkpoints = Vec::new();
    let mut cp = 10u64;
    while cp < steps {
        checkpoints.push(cp);
        cp = cp.saturating_mul(10);
    }
    if steps > 0 {
        checkpoints.push(steps);
    }
    let start = crate::maxflow::initial_state(graph, AugmentStrategy::BreadthFirst);
    let tv = tv_trajectory(&space, &exact, start, ChainParams::new(lambda, seed), 0, &checkpoints)?;
    Ok(DiagnosticReport {
        graph_fingerprint: graph.fingerprint(),
        states: space.len(),
        mf: space.mf(),
        lambda,
        max_detailed_balance_residual: exact.detailed_balance_residual(),
        stationarity_residual: exact.stationarity_residual(),
        row_sum_error: exact.row_sum_error(),
        pi_uniform: exact.uniform_deviation() <= 1e-12,
        strongly_connected: irr.connected,
        witness: irr.witness.map(|(a, b)| [ids(a), ids(b)]),
        tv_trajectory: tv,
    })
}
