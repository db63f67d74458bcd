//! Plain-text file formats and dataset serialization.
//!
//! Graph file: line 1 is `N E`, followed by E lines `tail head` (0-based,
//! space-separated). Flow file: E lines, one decimal value per line, aligned
//! to the graph's edge order. Edge-set file: one edge index per line.
//!
//! A dataset on disk is a directory holding `manifest.json` (generator name,
//! configuration, seed, graph file name, record count, labels and
//! provenance) plus `flows.csv`, one comma-separated row per record. Floats
//! are written in shortest round-trip form, so byte-identical output is a
//! consequence of value-identical data.
//!
//! Parameter checkpoints are versioned JSON documents wrapping the serde
//! form of the parameter structs.

use crate::agnn::CnnParams;
use crate::datagen::{Dataset, Record, SourceMeta};
use crate::graph::{FlowSignal, Graph, GraphError};
use crate::rnn::RnnParams;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

pub const MANIFEST_VERSION: u32 = 1;
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error at {path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse { path: path.display().to_string(), line, message: message.into() }
}

pub fn write_graph(path: impl AsRef<Path>, g: &Graph) -> Result<(), IoError> {
    let mut out = String::new();
    out.push_str(&format!("{} {}\n", g.num_nodes(), g.num_edges()));
    for &(t, h) in g.edges() {
        out.push_str(&format!("{t} {h}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_graph(path: impl AsRef<Path>) -> Result<Graph, IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty graph file"))?;
    let mut parts = header.split_whitespace();
    let n: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(path, 1, "expected node count"))?;
    let e: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(path, 1, "expected edge count"))?;
    let mut edges = Vec::with_capacity(e);
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let tail: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(path, idx + 1, "expected tail node"))?;
        let head: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(path, idx + 1, "expected head node"))?;
        edges.push((tail, head));
    }
    if edges.len() != e {
        return Err(IoError::Format(format!(
            "graph file {} declares {e} edges but contains {}",
            path.display(),
            edges.len()
        )));
    }
    Ok(Graph::new(n, edges)?)
}

pub fn write_flow(path: impl AsRef<Path>, f: &FlowSignal) -> Result<(), IoError> {
    let mut out = String::new();
    for v in f.values().iter() {
        out.push_str(&format!("{v}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_flow(path: impl AsRef<Path>) -> Result<FlowSignal, IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| parse_err(path, idx + 1, format!("invalid value `{line}`")))?;
        if !v.is_finite() {
            return Err(parse_err(path, idx + 1, "flow values must be finite"));
        }
        values.push(v);
    }
    Ok(FlowSignal::from_vec(values))
}

pub fn write_edge_set(path: impl AsRef<Path>, edges: &[usize]) -> Result<(), IoError> {
    let mut out = String::new();
    for &e in edges {
        out.push_str(&format!("{e}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_edge_set(path: impl AsRef<Path>) -> Result<Vec<usize>, IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let e: usize = line
            .parse()
            .map_err(|_| parse_err(path, idx + 1, format!("invalid edge index `{line}`")))?;
        out.push(e);
    }
    Ok(out)
}

/// On-disk description of a dataset directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    pub generator: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub graph_file: String,
    pub flows_file: String,
    pub record_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Vec<SourceMeta>>,
}

/// Writes `manifest.json`, `graph.txt`, and `flows.csv` under `dir`.
pub fn save_dataset(
    dir: impl AsRef<Path>,
    ds: &Dataset,
    generator: &str,
    config: serde_json::Value,
    seed: u64,
) -> Result<(), IoError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_graph(dir.join("graph.txt"), ds.graph.as_ref())?;

    let mut flows = String::new();
    for r in &ds.records {
        let row: Vec<String> = r.flow.values().iter().map(|v| format!("{v}")).collect();
        flows.push_str(&row.join(","));
        flows.push('\n');
    }
    fs::write(dir.join("flows.csv"), flows)?;

    let labels: Option<Vec<usize>> = ds.records.iter().map(|r| r.label).collect();
    let meta: Option<Vec<SourceMeta>> = ds.records.iter().map(|r| r.meta).collect();
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        generator: generator.to_string(),
        config,
        seed,
        graph_file: "graph.txt".into(),
        flows_file: "flows.csv".into(),
        record_count: ds.records.len(),
        labels,
        meta,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(dir.join("manifest.json"), json + "\n")?;
    Ok(())
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<(Dataset, DatasetManifest), IoError> {
    let dir = dir.as_ref();
    let manifest: DatasetManifest =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    if manifest.version != MANIFEST_VERSION {
        return Err(IoError::Format(format!(
            "unsupported manifest version {}",
            manifest.version
        )));
    }
    let graph = Arc::new(read_graph(dir.join(&manifest.graph_file))?);
    let flows_path = dir.join(&manifest.flows_file);
    let text = fs::read_to_string(&flows_path)?;
    let mut records = Vec::with_capacity(manifest.record_count);
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut values = Vec::with_capacity(graph.num_edges());
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                parse_err(&flows_path, idx + 1, format!("invalid value `{field}`"))
            })?;
            values.push(v);
        }
        if values.len() != graph.num_edges() {
            return Err(parse_err(
                &flows_path,
                idx + 1,
                format!("expected {} values, got {}", graph.num_edges(), values.len()),
            ));
        }
        records.push(Record {
            flow: FlowSignal::from_vec(values),
            label: manifest.labels.as_ref().map(|l| l[records.len()]),
            mask: None,
            meta: manifest.meta.as_ref().map(|m| m[records.len()]),
        });
    }
    if records.len() != manifest.record_count {
        return Err(IoError::Format(format!(
            "manifest declares {} records, found {}",
            manifest.record_count,
            records.len()
        )));
    }
    Ok((Dataset::new(graph, records), manifest))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint<T> {
    version: u32,
    kind: String,
    params: T,
}

fn save_checkpoint<T: Serialize>(
    path: impl AsRef<Path>,
    kind: &str,
    params: &T,
) -> Result<(), IoError> {
    let doc = Checkpoint { version: CHECKPOINT_VERSION, kind: kind.to_string(), params };
    fs::write(path, serde_json::to_string(&doc)? + "\n")?;
    Ok(())
}

fn load_checkpoint<T: for<'de> Deserialize<'de>>(
    path: impl AsRef<Path>,
    kind: &str,
) -> Result<T, IoError> {
    let doc: Checkpoint<T> = serde_json::from_str(&fs::read_to_string(path)?)?;
    if doc.version != CHECKPOINT_VERSION {
        return Err(IoError::Format(format!("unsupported checkpoint version {}", doc.version)));
    }
    if doc.kind != kind {
        return Err(IoError::Format(format!(
            "checkpoint kind `{}` does not match expected `{kind}`",
            doc.kind
        )));
    }
    Ok(doc.params)
}

pub fn save_rnn_checkpoint(path: impl AsRef<Path>, p: &RnnParams) -> Result<(), IoError> {
    save_checkpoint(path, "flow-rnn", p)
}

pub fn load_rnn_checkpoint(path: impl AsRef<Path>) -> Result<RnnParams, IoError> {
    load_checkpoint(path, "flow-rnn")
}

pub fn save_cnn_checkpoint(path: impl AsRef<Path>, p: &CnnParams) -> Result<(), IoError> {
    save_checkpoint(path, "agg-cnn", p)
}

pub fn load_cnn_checkpoint(path: impl AsRef<Path>) -> Result<CnnParams, IoError> {
    load_checkpoint(path, "agg-cnn")
}
