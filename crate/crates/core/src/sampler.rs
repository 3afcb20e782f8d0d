//! Collecting a k-optimal set of max flows from a running chain.
//!
//! The chain starts from a Ford-Fulkerson solution, runs `mix_iter`
//! iterations unobserved, then every `sf`-th iteration offers its current
//! state to the set. A state is kept when it shares at most `k` real edges
//! with every member already kept and is not a copy of one of them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chain::{ChainParams, ChainStats, FlowState, MarkovChain};
use crate::error::{ConfigError, StateError};
use crate::graph::{EdgeIdx, PlanarRoadGraph};
use crate::maxflow::{initial_state, AugmentStrategy};

pub const DEFAULT_MAX_TOTAL_ITER: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum ExitCondition {
    /// Stop after `mix_iter + num_iter` iterations.
    FixedIterations { num_iter: u64 },
    /// Stop once the set holds `solutions` members, or after
    /// `max_total_iter` iterations in total.
    TargetCount { solutions: usize, max_total_iter: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub lambda: f64,
    pub k: usize,
    pub mix_iter: u64,
    /// Sampling frequency in iterations.
    pub sf: u64,
    pub exit: ExitCondition,
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
    #[serde(default, with = "crate::io::strategy_serde")]
    pub initial: AugmentStrategy,
}

impl SamplerConfig {
    pub fn fixed(lambda: f64, k: usize, mix_iter: u64, num_iter: u64, sf: u64, seed: u64) -> Self {
        SamplerConfig {
            lambda,
            k,
            mix_iter,
            sf,
            exit: ExitCondition::FixedIterations { num_iter },
            seed,
            stream: 0,
            initial: AugmentStrategy::BreadthFirst,
        }
    }

    pub fn until(lambda: f64, k: usize, mix_iter: u64, solutions: usize, sf: u64, seed: u64) -> Self {
        SamplerConfig {
            exit: ExitCondition::TargetCount { solutions, max_total_iter: DEFAULT_MAX_TOTAL_ITER },
            ..Self::fixed(lambda, k, mix_iter, 0, sf, seed)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.chain_params().validate()?;
        if self.sf == 0 {
            return Err(ConfigError::SamplingFrequency);
        }
        if let ExitCondition::TargetCount { solutions: 0, .. } = self.exit {
            return Err(ConfigError::TargetCount);
        }
        Ok(())
    }

    pub fn chain_params(&self) -> ChainParams {
        ChainParams { lambda: self.lambda, seed: self.seed, stream: self.stream }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub state: FlowState,
    /// Iteration at which the state was sampled.
    pub iteration: u64,
    pub seed: u64,
    edges: Vec<EdgeIdx>,
}

impl Solution {
    pub fn new(state: FlowState, iteration: u64, seed: u64) -> Self {
        let edges = state.edge_set();
        Solution { state, iteration, seed, edges }
    }

    /// Sorted real edges used by the solution.
    pub fn edges(&self) -> &[EdgeIdx] {
        &self.edges
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolutionSet {
    solutions: Vec<Solution>,
}

impl SolutionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, solution: Solution) {
        self.solutions.push(solution);
    }

    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn solutions(&self) -> &[Solution] {
        &self.solutions
    }

    pub fn states(&self) -> impl Iterator<Item = &FlowState> + Clone {
        self.solutions.iter().map(|s| &s.state)
    }

    /// Keeps only the first `n` members.
    pub fn truncate(&mut self, n: usize) {
        self.solutions.truncate(n);
    }
}

impl FromIterator<Solution> for SolutionSet {
    fn from_iter<I: IntoIterator<Item = Solution>>(iter: I) -> Self {
        SolutionSet { solutions: iter.into_iter().collect() }
    }
}

fn sorted_intersection(a: &[EdgeIdx], b: &[EdgeIdx]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Number of real edges used by both solutions, ignoring multiplicity.
pub fn common_edges(x: &FlowState, y: &FlowState) -> Result<usize, StateError> {
    if !x.same_graph(y) {
        return Err(StateError::GraphMismatch);
    }
    Ok(sorted_intersection(&x.edge_set(), &y.edge_set()))
}

/// Whether `candidate` shares at most `k` edges with every member of `set`.
pub fn is_koptimal(candidate: &FlowState, set: &SolutionSet, k: usize) -> bool {
    let edges = candidate.edge_set();
    set.solutions.iter().all(|s| sorted_intersection(&edges, &s.edges) <= k)
}

/// Result of one sampler run.
#[derive(Debug, Clone)]
pub struct SampleRun {
    pub set: SolutionSet,
    /// Iterations actually performed.
    pub iterations: u64,
    pub stats: ChainStats,
    /// The target count was not reached within `max_total_iter`.
    pub exhausted: bool,
}

/// Runs the sampler on `graph`.
pub fn sample_koptimal(graph: &Arc<PlanarRoadGraph>, config: &SamplerConfig) -> Result<SampleRun, ConfigError> {
    config.validate()?;
    let mut chain = MarkovChain::new(Arc::clone(graph), config.chain_params())?;
    let mut x = initial_state(graph, config.initial);
    let mut set = SolutionSet::new();
    let mut stats = ChainStats::default();
    let mut exhausted = false;
    let mut iter: u64 = 1;
    loop {
        match config.exit {
            ExitCondition::FixedIterations { num_iter } => {
                if iter > config.mix_iter + num_iter {
                    break;
                }
            }
            ExitCondition::TargetCount { solutions, max_total_iter } => {
                if set.len() >= solutions {
                    break;
                }
                if iter > max_total_iter {
                    exhausted = true;
                    break;
                }
            }
        }
        if iter > config.mix_iter && iter % config.sf == 0 {
            offer(&mut set, &x, iter, config);
        }
        stats.record(chain.step(&mut x));
        iter += 1;
    }
    if set.is_empty() {
        log::warn!("no state passed the k-optimality filter within {} iterations", iter - 1);
    }
    if exhausted {
        log::warn!("iteration budget exhausted with {} solution(s) collected", set.len());
    }
    Ok(SampleRun { set, iterations: iter - 1, stats, exhausted })
}

fn offer(set: &mut SolutionSet, x: &FlowState, iter: u64, config: &SamplerConfig) -> bool {
    let edges = x.edge_set();
    for s in &set.solutions {
        if sorted_intersection(&edges, &s.edges) > config.k {
            return false;
        }
        if s.edges == edges && s.state.usage_slice() == x.usage_slice() {
            return false;
        }
    }
    set.solutions.push(Solution { state: x.clone(), iteration: iter, seed: config.seed, edges });
    true
}
