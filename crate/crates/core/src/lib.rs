//! Sampling diverse integer maximum flows on planar road networks.
//!
//! A road network is a planar straight-line graph whose roads carry a length
//! and an integer capacity. [`maxflow`] finds one maximum flow and splits it
//! into unit paths; [`chain`] walks between maximum flows by rerouting one
//! path around one face at a time, favouring shorter solutions; [`sampler`]
//! keeps a set of states that pairwise share few roads; [`metrics`]
//! summarises how much traffic each road would carry. [`oracle`] computes
//! the exact transition matrix on small graphs for checking the chain.

pub mod chain;
pub mod crossing;
pub mod error;
pub mod graph;
pub mod io;
pub mod maxflow;
pub mod metrics;
pub mod oracle;
pub mod sampler;
pub mod synth;

pub use chain::{ChainParams, FlowState, MarkovChain, StepOutcome};
pub use error::{ConfigError, FlowError, FormatError, GraphError, MetricsError, OracleError, StateError};
pub use graph::{augment_terminals, NetworkSpec, PlanarRoadGraph};
pub use maxflow::{decompose, initial_state, max_flow, AugmentStrategy, IntegerFlow, UnitPath};
pub use metrics::{edge_loading, solution_length_stats, LoadingReport};
pub use oracle::{
    check_irreducible, enumerate_states, exact_transition_matrix, tv_distance, ExactDistribution, StateSpace,
};
pub use sampler::{common_edges, is_koptimal, sample_koptimal, ExitCondition, SamplerConfig, SolutionSet};
