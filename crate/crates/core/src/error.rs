use thiserror::Error;

/// Problems found while parsing or validating a road network.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("duplicate node id `{0}`")]
    DuplicateNodeId(String),
    #[error("duplicate edge id `{0}`")]
    DuplicateEdgeId(String),
    #[error("unknown node id `{0}`")]
    UnknownNode(String),
    #[error("node `{0}` has a non-finite coordinate")]
    NonFiniteCoordinate(String),
    #[error("nodes `{0}` and `{1}` share the same coordinates")]
    CoincidentNodes(String, String),
    #[error("edge `{0}` is a self-loop")]
    SelfLoop(String),
    #[error("edge `{id}` has non-positive length {length}")]
    NonPositiveLength { id: String, length: f64 },
    #[error("edge `{id}` has non-positive capacity {capacity}")]
    NonPositiveCapacity { id: String, capacity: i64 },
    #[error("planarity violation: edges `{0}` and `{1}` cross")]
    Crossing(String, String),
    #[error("source and sink must differ (both `{0}`)")]
    SameTerminal(String),
    #[error("no source given")]
    NoSource,
    #[error("no sink given")]
    NoSink,
    #[error("node `{0}` is listed as both source and sink")]
    OverlappingTerminals(String),
    #[error("source `{source_id}` is not connected to sink `{sink_id}`")]
    DisconnectedTerminals { source_id: String, sink_id: String },
}

/// Failures of max-flow construction and decomposition.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("edge `{0}` carries more flow than its capacity")]
    CapacityExceeded(String),
    #[error("flow is not conserved at node `{0}`")]
    NotConserved(String),
    #[error("flow vector has {got} entries, graph has {expected} edges")]
    WrongLength { expected: usize, got: usize },
    #[error("internal error: decomposition found only {found} of {expected} unit paths")]
    Decomposition { expected: u64, found: u64 },
}

/// A set of unit paths that does not form a valid chain state.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("expected {expected} paths, got {got}")]
    WrongPathCount { expected: usize, got: usize },
    #[error("path {0} does not run from source to sink")]
    WrongEndpoints(usize),
    #[error("path {0} is not simple")]
    NotSimple(usize),
    #[error("path {0} is not a walk in the graph")]
    Disconnected(usize),
    #[error("edge `{0}` is used above its capacity")]
    CapacityExceeded(String),
    #[error("paths {0} and {1} cross")]
    Crossing(usize, usize),
    #[error("states belong to different graphs")]
    GraphMismatch,
    #[error("unknown node id `{0}` in path")]
    UnknownNode(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("lambda must be positive and finite, got {0}")]
    Lambda(f64),
    #[error("sampling frequency must be at least 1")]
    SamplingFrequency,
    #[error("target solution count must be at least 1")]
    TargetCount,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("state space exceeds the enumeration cap of {cap} (stopped after {partial})")]
    CapExceeded { cap: usize, partial: usize },
    #[error("histogram has {got} bins, state space has {expected} states")]
    IndexMismatch { expected: usize, got: usize },
    #[error("state is not a member of the enumerated state space")]
    UnknownState,
    #[error(transparent)]
    Flow(#[from] FlowError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("solution set is empty")]
    EmptySet,
    #[error(transparent)]
    State(#[from] StateError),
}

/// Problems reading or cross-checking the file formats in [`crate::io`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("parse error: {0}")]
    Json(String),
    #[error("unsupported format tag `{0}`")]
    Tag(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("solution {index}: {source}")]
    State { index: usize, source: StateError },
    #[error("solutions were computed on a different graph (fingerprint {found}, expected {expected})")]
    Fingerprint { expected: String, found: String },
    #[error("solution {index}: usage map disagrees with its paths on edge `{edge}`")]
    Usage { index: usize, edge: String },
    #[error("solution file holds no solutions")]
    Empty,
}
