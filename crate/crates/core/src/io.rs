//! JSON documents read and written by the command-line tool.
//!
//! Everything here works on strings; writing files (atomically) is left to
//! the caller.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::chain::FlowState;
use crate::error::{FormatError, GraphError};
use crate::graph::{EdgeSpec, NetworkSpec, NodeRecord, PlanarRoadGraph};
use crate::maxflow::AugmentStrategy;
use crate::metrics::LoadingReport;
use crate::sampler::{SamplerConfig, Solution, SolutionSet};

pub const SOLUTIONS_TAG: &str = "planarflow-solutions/1";

#[derive(Deserialize)]
#[serde(untagged)]
enum RawId {
    Int(i64),
    Str(String),
}

impl RawId {
    fn into_string(self) -> String {
        match self {
            RawId::Int(i) => i.to_string(),
            RawId::Str(s) => s,
        }
    }
}

#[derive(Deserialize)]
struct RawNode {
    id: RawId,
    x: f64,
    y: f64,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

#[derive(Deserialize)]
struct RawEdge {
    id: RawId,
    u: RawId,
    v: RawId,
    length: f64,
    capacity: serde_json::Number,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

#[derive(Deserialize)]
struct RawGraph {
    nodes: Vec<RawNode>,
    edges: Vec<RawEdge>,
    sources: Vec<RawId>,
    sinks: Vec<RawId>,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

/// Parses a graph document. Unknown fields are returned as warnings.
pub fn parse_graph_document(text: &str) -> Result<(NetworkSpec, Vec<String>), GraphError> {
    let raw: RawGraph = serde_json::from_str(text).map_err(|e| GraphError::Parse(e.to_string()))?;
    let mut warnings: Vec<String> = raw.extra.keys().map(|k| format!("ignoring unknown field `{k}`")).collect();
    let mut nodes = Vec::with_capacity(raw.nodes.len());
    for n in raw.nodes {
        let id = n.id.into_string();
        warnings.extend(n.extra.keys().map(|k| format!("node `{id}`: ignoring unknown field `{k}`")));
        nodes.push(NodeRecord::new(id, n.x, n.y));
    }
    let mut edges = Vec::with_capacity(raw.edges.len());
    for e in raw.edges {
        let id = e.id.into_string();
        warnings.extend(e.extra.keys().map(|k| format!("edge `{id}`: ignoring unknown field `{k}`")));
        let capacity = e
            .capacity
            .as_i64()
            .ok_or_else(|| GraphError::Parse(format!("edge `{id}`: capacity must be an integer")))?;
        edges.push(EdgeSpec::new(id, e.u.into_string(), e.v.into_string(), e.length, capacity));
    }
    let spec = NetworkSpec {
        nodes,
        edges,
        sources: raw.sources.into_iter().map(RawId::into_string).collect(),
        sinks: raw.sinks.into_iter().map(RawId::into_string).collect(),
    };
    Ok((spec, warnings))
}

/// Parses and validates a graph document, logging a warning per unknown
/// field.
pub fn load_graph(text: &str) -> Result<PlanarRoadGraph, GraphError> {
    let (spec, warnings) = parse_graph_document(text)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    PlanarRoadGraph::from_spec(&spec)
}

pub fn graph_document(spec: &NetworkSpec) -> String {
    let doc = json!({
        "nodes": spec.nodes.iter().map(|n| json!({"id": n.id, "x": n.x, "y": n.y})).collect::<Vec<_>>(),
        "edges": spec.edges.iter().map(|e| json!({
            "id": e.id, "u": e.u, "v": e.v, "length": e.length, "capacity": e.capacity,
        })).collect::<Vec<_>>(),
        "sources": spec.sources,
        "sinks": spec.sinks,
    });
    to_pretty(&doc)
}

fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub iteration: u64,
    pub seed: u64,
    pub total_length: f64,
    pub paths: Vec<Vec<String>>,
    /// Number of paths using each real edge, by edge id; unused edges omitted.
    pub usage: BTreeMap<String, u32>,
}

impl SolutionRecord {
    pub fn from_state(state: &FlowState, iteration: u64, seed: u64) -> Self {
        let g = state.graph();
        SolutionRecord {
            iteration,
            seed,
            total_length: state.total_length(),
            paths: state.paths().iter().map(|p| p.node_ids(g).into_iter().map(String::from).collect()).collect(),
            usage: state.edge_set().into_iter().map(|e| (g.edge(e).id.clone(), state.usage(e))).collect(),
        }
    }
}

/// A solution set with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub format: String,
    pub graph_fingerprint: String,
    pub mf: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<SamplerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u64>,
    #[serde(default)]
    pub exhausted: bool,
    pub solutions: Vec<SolutionRecord>,
}

impl SolutionFile {
    pub fn from_set(graph: &PlanarRoadGraph, set: &SolutionSet, mf: usize) -> Self {
        SolutionFile {
            format: SOLUTIONS_TAG.to_string(),
            graph_fingerprint: graph.fingerprint(),
            mf,
            config: None,
            iterations: None,
            exhausted: false,
            solutions: set
                .solutions()
                .iter()
                .map(|s| SolutionRecord::from_state(&s.state, s.iteration, s.seed))
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        to_pretty(self)
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let file: SolutionFile = serde_json::from_str(text).map_err(|e| FormatError::Json(e.to_string()))?;
        if file.format != SOLUTIONS_TAG {
            return Err(FormatError::Tag(file.format));
        }
        Ok(file)
    }

    /// Rebuilds the solutions on `graph`, checking the graph fingerprint,
    /// every state invariant and the stored usage maps.
    pub fn to_set(&self, graph: &Arc<PlanarRoadGraph>) -> Result<SolutionSet, FormatError> {
        let expected = graph.fingerprint();
        if self.graph_fingerprint != expected {
            return Err(FormatError::Fingerprint { expected, found: self.graph_fingerprint.clone() });
        }
        if self.solutions.is_empty() {
            return Err(FormatError::Empty);
        }
        let mut set = SolutionSet::new();
        for (index, r) in self.solutions.iter().enumerate() {
            let state = FlowState::from_node_ids(Arc::clone(graph), &r.paths)
                .map_err(|source| FormatError::State { index, source })?;
            state.check_invariants(self.mf).map_err(|source| FormatError::State { index, source })?;
            let fresh = SolutionRecord::from_state(&state, r.iteration, r.seed);
            if fresh.usage != r.usage {
                let edge = fresh
                    .usage
                    .iter()
                    .find(|(k, v)| r.usage.get(*k) != Some(v))
                    .or_else(|| r.usage.iter().find(|(k, v)| fresh.usage.get(*k) != Some(v)))
                    .map(|(k, _)| k.clone())
                    .unwrap_or_default();
                return Err(FormatError::Usage { index, edge });
            }
            set.push(Solution::new(state, r.iteration, r.seed));
        }
        Ok(set)
    }
}

/// Output of the `maxflow` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub graph_fingerprint: String,
    #[serde(with = "strategy_serde")]
    pub strategy: AugmentStrategy,
    pub value: u64,
    pub total_length: f64,
    pub avg_path_length: f64,
    pub paths: Vec<Vec<String>>,
}

impl FlowReport {
    pub fn new(state: &FlowState, strategy: AugmentStrategy) -> Self {
        let g = state.graph();
        let value = state.mf() as u64;
        FlowReport {
            graph_fingerprint: g.fingerprint(),
            strategy,
            value,
            total_length: state.total_length(),
            avg_path_length: if value == 0 { 0.0 } else { state.total_length() / value as f64 },
            paths: state.paths().iter().map(|p| p.node_ids(g).into_iter().map(String::from).collect()).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        to_pretty(self)
    }
}

pub(crate) mod strategy_serde {
    use crate::maxflow::AugmentStrategy;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn name(s: AugmentStrategy) -> &'static str {
        match s {
            AugmentStrategy::BreadthFirst => "bfs",
            AugmentStrategy::ShortestLength => "dijkstra",
        }
    }

    pub fn serialize<S: Serializer>(s: &AugmentStrategy, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(name(*s))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<AugmentStrategy, D::Error> {
        match String::deserialize(de)?.as_str() {
            "bfs" => Ok(AugmentStrategy::BreadthFirst),
            "dijkstra" => Ok(AugmentStrategy::ShortestLength),
            other => Err(serde::de::Error::custom(format!("unknown strategy `{other}`"))),
        }
    }
}

/// Parameters echoed into a manifest, per command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum ManifestParams {
    Maxflow {
        #[serde(with = "strategy_serde")]
        strategy: AugmentStrategy,
    },
    Sample {
        config: SamplerConfig,
        runs: usize,
    },
    Validate {
        lambda: f64,
        steps: u64,
        cap: usize,
        seed: u64,
    },
    Metrics {
        solutions: Vec<String>,
    },
    GenGrid {
        rows: usize,
        cols: usize,
        length: f64,
        capacity: i64,
    },
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub params: ManifestParams,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        to_pretty(self)
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        serde_json::from_str(text).map_err(|e| FormatError::Json(e.to_string()))
    }
}

/// Loading report without the per-edge vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadingSummary {
    pub solutions: usize,
    pub loaded_edge_count: usize,
    pub mean_load: f64,
    pub max_load: f64,
    pub normalized_mean: f64,
    pub avg_solution_length: f64,
    pub total_load: f64,
}

impl From<&LoadingReport> for LoadingSummary {
    fn from(r: &LoadingReport) -> Self {
        LoadingSummary {
            solutions: r.solutions,
            loaded_edge_count: r.loaded_edge_count,
            mean_load: r.mean_load,
            max_load: r.max_load,
            normalized_mean: r.normalized_mean,
            avg_solution_length: r.avg_solution_length,
            total_load: r.total_load(),
        }
    }
}

/// Tab-separated `edge_id<TAB>load` for every real edge, preceded by `#`
/// summary lines.
pub fn loading_table(graph: &PlanarRoadGraph, report: &LoadingReport) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let s = LoadingSummary::from(report);
    let _ = writeln!(out, "# solutions\t{}", s.solutions);
    let _ = writeln!(out, "# loaded_edges\t{}", s.loaded_edge_count);
    let _ = writeln!(out, "# mean_load\t{}", s.mean_load);
    let _ = writeln!(out, "# max_load\t{}", s.max_load);
    let _ = writeln!(out, "# normalized_mean\t{}", s.normalized_mean);
    let _ = writeln!(out, "# avg_solution_length\t{}", s.avg_solution_length);
    out.push_str("edge_id\tload\n");
    for (e, edge) in graph.edges().iter().enumerate() {
        if !edge.is_virtual {
            let _ = writeln!(out, "{}\t{}", edge.id, report.per_edge_load[e]);
        }
    }
    out
}

/// GeoJSON `FeatureCollection` with one `LineString` per real edge carrying
/// its load and its load relative to the maximum.
pub fn loading_geojson(graph: &PlanarRoadGraph, report: &LoadingReport) -> String {
    let features: Vec<Value> = graph
        .edges()
        .iter()
        .enumerate()
        .filter(|(_, e)| !e.is_virtual)
        .map(|(i, e)| {
            let (a, b) = (graph.node(e.u), graph.node(e.v));
            let load = report.per_edge_load[i];
            let relative = if report.max_load > 0.0 { load / report.max_load } else { 0.0 };
            json!({
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": [[a.x, a.y], [b.x, b.y]]},
                "properties": {"id": e.id, "load": load, "relative_load": relative},
            })
        })
        .collect();
    to_pretty(&json!({"type": "FeatureCollection", "features": features}))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxflow::initial_state;
    use crate::metrics::edge_loading;
    use crate::synth;

    #[test]
    fn integer_and_string_ids() {
        let text = r#"{
            "nodes": [{"id": 1, "x": 0, "y": 0}, {"id": "b", "x": 1.5, "y": 0, "name": "Main St"}],
            "edges": [{"id": 7, "u": 1, "v": "b", "length": 1.5, "capacity": 2}],
            "sources": [1], "sinks": ["b"], "crs": "local"
        }"#;
        let (spec, warnings) = parse_graph_document(text).unwrap();
        assert_eq!(spec.nodes[0].id, "1");
        assert_eq!(spec.edges[0].id, "7");
        assert_eq!(spec.edges[0].capacity, 2);
        assert_eq!(warnings.len(), 2);
        let g = load_graph(text).unwrap();
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn capacity_must_be_integer() {
        let text = r#"{"nodes": [{"id": 1, "x": 0, "y": 0}, {"id": 2, "x": 1, "y": 0}],
            "edges": [{"id": "e", "u": 1, "v": 2, "length": 1, "capacity": 1.5}],
            "sources": [1], "sinks": [2]}"#;
        assert!(matches!(parse_graph_document(text), Err(GraphError::Parse(_))));
        assert!(matches!(parse_graph_document("{"), Err(GraphError::Parse(_))));
    }

    #[test]
    fn graph_document_round_trip() {
        let spec = synth::random_planar_spec(4, 4, 0.7, 3, 9);
        let (back, warnings) = parse_graph_document(&graph_document(&spec)).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(back, spec);
    }

    #[test]
    fn solution_file_round_trip_and_checks() {
        let g = Arc::new(synth::grid(4, 4, 100.0, 1));
        let x = initial_state(&g, AugmentStrategy::BreadthFirst);
        let set: SolutionSet = [Solution::new(x, 5, 1)].into_iter().collect();
        let mut file = SolutionFile::from_set(&g, &set, 2);
        let text = file.to_json();
        let parsed = SolutionFile::parse(&text).unwrap();
        assert_eq!(parsed, file);
        let back = parsed.to_set(&g).unwrap();
        assert_eq!(back.solutions()[0].state.canonical_key(), set.solutions()[0].state.canonical_key());

        let other = Arc::new(synth::grid(4, 4, 50.0, 1));
        assert!(matches!(parsed.to_set(&other), Err(FormatError::Fingerprint { .. })));

        file.solutions[0].usage.insert("1-2".into(), 2);
        assert!(matches!(file.to_set(&g), Err(FormatError::Usage { .. })));
        file.solutions.clear();
        assert_eq!(file.to_set(&g).unwrap_err(), FormatError::Empty);
    }

    #[test]
    fn manifest_round_trip() {
        let m = RunManifest {
            tool_version: "0.1.0".into(),
            graph_path: Some("grid.json".into()),
            graph_fingerprint: Some("abc".into()),
            seed: Some(3),
            params: ManifestParams::Sample { config: SamplerConfig::until(0.99, 170, 1000, 7, 25, 3), runs: 4 },
            outputs: vec!["out/run-0.json".into()],
        };
        assert_eq!(RunManifest::parse(&m.to_json()).unwrap(), m);
        let v = RunManifest {
            params: ManifestParams::Validate { lambda: 0.9, steps: 1_000_000, cap: 100_000, seed: 1 },
            ..m
        };
        assert_eq!(RunManifest::parse(&v.to_json()).unwrap(), v);
    }

    #[test]
    fn loading_exports() {
        let g = Arc::new(synth::grid(3, 3, 10.0, 1));
        let x = initial_state(&g, AugmentStrategy::BreadthFirst);
        let r = edge_loading([&x]).unwrap();
        let table = loading_table(&g, &r);
        assert_eq!(table.lines().filter(|l| !l.starts_with('#')).count(), 1 + g.edge_count());
        let geo: Value = serde_json::from_str(&loading_geojson(&g, &r)).unwrap();
        assert_eq!(geo["features"].as_array().unwrap().len(), g.edge_count());
        let loads: f64 =
            geo["features"].as_array().unwrap().iter().map(|f| f["properties"]["load"].as_f64().unwrap()).sum();
        assert_eq!(loads, x.total_length());
    }
}
