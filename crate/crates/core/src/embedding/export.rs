use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::matrix::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;

pub const FORMAT_VERSION: &str = "1";
pub const TSV_NAME: &str = "embeddings.tsv";
pub const META_NAME: &str = "embeddings.meta.json";

/// Sidecar describing an exported embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    pub format_version: String,
    /// Producing method, e.g. `ranking`, `line-first`.
    pub method: String,
    pub dim: usize,
    /// Highest proximity order, when the method has one.
    pub max_order: Option<usize>,
    pub n_devices: usize,
    pub n_apps: usize,
    /// Content hash of the graph the rows were trained on.
    pub graph_hash: String,
    pub config: serde_json::Value,
}

impl EmbeddingMeta {
    pub fn new(method: &str, phi: &EmbeddingMatrix, graph: &BipartiteGraph, config: serde_json::Value) -> Self {
        EmbeddingMeta {
            format_version: FORMAT_VERSION.into(),
            method: method.into(),
            dim: phi.dim(),
            max_order: config.get("max_order").and_then(|v| v.as_u64()).map(|v| v as usize),
            n_devices: phi.n_devices(),
            n_apps: phi.n_apps(),
            graph_hash: graph.content_hash(),
            config,
        }
    }
}

/// Writes `side \t token \t v1 .. vd` rows, devices first.
pub fn write_embeddings_tsv<W: Write>(sink: W, phi: &EmbeddingMatrix, graph: &BipartiteGraph) -> Result<()> {
    if phi.n_devices() != graph.n_devices() || phi.n_apps() != graph.n_apps() {
        return Err(Error::Contract("embedding rows do not match the graph".into()));
    }
    let mut w = BufWriter::new(sink);
    let rows = graph
        .devices()
        .tokens()
        .iter()
        .map(|t| ("D", t))
        .chain(graph.apps().tokens().iter().map(|t| ("M", t)));
    for (r, (side, token)) in rows.enumerate() {
        write!(w, "{side}\t{token}")?;
        for x in phi.row(r) {
            write!(w, "\t{x}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_embeddings(dir: &Path, phi: &EmbeddingMatrix, graph: &BipartiteGraph, meta: &EmbeddingMeta) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tsv = dir.join(TSV_NAME);
    let f = File::create(&tsv).map_err(|e| Error::io(&tsv, e))?;
    write_embeddings_tsv(f, phi, graph)?;
    let meta_path = dir.join(META_NAME);
    let json = serde_json::to_string_pretty(meta).expect("meta serializes");
    std::fs::write(&meta_path, json).map_err(|e| Error::io(&meta_path, e))?;
    Ok(())
}

/// Reads an embedding written by [`write_embeddings`], checking row tokens
/// against `graph` and the recorded graph hash.
pub fn read_embeddings(dir: &Path, graph: &BipartiteGraph) -> Result<(EmbeddingMatrix, EmbeddingMeta)> {
    let meta_path = dir.join(META_NAME);
    let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: EmbeddingMeta = serde_json::from_str(&text).map_err(|e| Error::format(META_NAME, e.to_string()))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(Error::format(META_NAME, format!("unsupported version {}", meta.format_version)));
    }
    if meta.graph_hash != graph.content_hash() {
        return Err(Error::Contract(
            "embedding was trained on a different graph (hash mismatch)".into(),
        ));
    }
    let tsv = dir.join(TSV_NAME);
    let f = File::open(&tsv).map_err(|e| Error::io(&tsv, e))?;
    let (nd, na) = (graph.n_devices(), graph.n_apps());
    let mut data = Vec::with_capacity((nd + na) * meta.dim);
    let mut row = 0usize;
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(&tsv, e))?;
        if line.is_empty() {
            continue;
        }
        let bad = |reason: String| Error::format(TSV_NAME, format!("row {}: {reason}", row + 1));
        let mut fields = line.split('\t');
        let side = fields.next().unwrap_or_default();
        let token = fields.next().ok_or_else(|| bad("missing token".into()))?;
        let expected = if row < nd {
            ("D", graph.devices().tokens().get(row))
        } else {
            ("M", graph.apps().tokens().get(row - nd))
        };
        if side != expected.0 || expected.1.map(String::as_str) != Some(token) {
            return Err(bad(format!("expected {} {:?}, found {side} {token}", expected.0, expected.1)));
        }
        let before = data.len();
        for f in fields {
            data.push(f.parse::<f32>().map_err(|e| bad(e.to_string()))?);
        }
        if data.len() - before != meta.dim {
            return Err(bad(format!("{} values, expected {}", data.len() - before, meta.dim)));
        }
        row += 1;
    }
    if row != nd + na {
        return Err(Error::format(TSV_NAME, format!("{row} rows, expected {}", nd + na)));
    }
    Ok((EmbeddingMatrix::from_rows(nd, na, meta.dim, data)?, meta))
}
