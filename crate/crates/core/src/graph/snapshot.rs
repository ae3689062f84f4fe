//! On-disk graph snapshot: `devices.tsv`, `apps.tsv`, `edges.bin`, `meta.json`.
//!
//! Token files hold `index<TAB>token` per line in index order. `edges.bin` is
//! a flat sequence of little-endian `u32` pairs, device index then app index.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bipartite::{BipartiteGraph, Vocab};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub format_version: String,
    pub window: [u64; 2],
    pub n_devices: usize,
    pub n_apps: usize,
    pub n_edges: usize,
    pub graph_hash: String,
}

fn write_vocab(path: &Path, vocab: &Vocab) -> Result<()> {
    let mut out = String::new();
    for (i, t) in vocab.tokens().iter().enumerate() {
        if t.contains('\t') || t.contains('\n') {
            return Err(Error::format("snapshot", format!("token `{t}` contains a tab or newline")));
        }
        out.push_str(&format!("{i}\t{t}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn read_vocab(path: &Path) -> Result<Vocab> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut tokens = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let (idx, tok) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(path.display().to_string(), format!("line {} lacks a tab", n + 1)))?;
        if idx.parse::<usize>().ok() != Some(n) {
            return Err(Error::format(
                path.display().to_string(),
                format!("line {} has index `{idx}`, expected {n}", n + 1),
            ));
        }
        tokens.push(tok.to_owned());
    }
    Vocab::from_tokens(tokens)
}

pub fn write_snapshot(graph: &BipartiteGraph, dir: &Path) -> Result<SnapshotMeta> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_vocab(&dir.join("devices.tsv"), graph.devices())?;
    write_vocab(&dir.join("apps.tsv"), graph.apps())?;
    let mut bytes = Vec::with_capacity(graph.n_edges() * 8);
    for (d, m) in graph.edges() {
        bytes.extend_from_slice(&d.to_le_bytes());
        bytes.extend_from_slice(&m.to_le_bytes());
    }
    let edges_path = dir.join("edges.bin");
    fs::write(&edges_path, &bytes).map_err(|e| Error::io(&edges_path, e))?;
    let (a, b) = graph.window();
    let meta = SnapshotMeta {
        format_version: FORMAT_VERSION.into(),
        window: [a, b],
        n_devices: graph.n_devices(),
        n_apps: graph.n_apps(),
        n_edges: graph.n_edges(),
        graph_hash: graph.content_hash(),
    };
    let meta_path = dir.join("meta.json");
    let mut f = fs::File::create(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    serde_json::to_writer_pretty(&mut f, &meta).map_err(|e| Error::format("meta.json", e.to_string()))?;
    f.write_all(b"\n").map_err(|e| Error::io(&meta_path, e))?;
    Ok(meta)
}

/// Loads a snapshot. Edge timestamps are not stored; edges get the window start.
pub fn read_snapshot(dir: &Path) -> Result<BipartiteGraph> {
    let meta_path = dir.join("meta.json");
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: SnapshotMeta =
        serde_json::from_str(&meta_text).map_err(|e| Error::format("meta.json", e.to_string()))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(Error::format(
            "meta.json",
            format!("unsupported format version `{}`", meta.format_version),
        ));
    }
    let devices = read_vocab(&dir.join("devices.tsv"))?;
    let apps = read_vocab(&dir.join("apps.tsv"))?;
    let edges_path = dir.join("edges.bin");
    let bytes = fs::read(&edges_path).map_err(|e| Error::io(&edges_path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::format("edges.bin", "length is not a multiple of 8"));
    }
    let edges: Vec<(u32, u32, u64)> = bytes
        .chunks_exact(8)
        .map(|c| {
            let d = u32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let m = u32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            (d, m, meta.window[0])
        })
        .collect();
    let graph = BipartiteGraph::from_parts(devices, apps, edges, (meta.window[0], meta.window[1]))?;
    if graph.n_edges() != meta.n_edges
        || graph.n_devices() != meta.n_devices
        || graph.n_apps() != meta.n_apps
    {
        return Err(Error::format("snapshot", "counts disagree with meta.json"));
    }
    if graph.content_hash() != meta.graph_hash {
        return Err(Error::format("snapshot", "graph hash mismatch"));
    }
    Ok(graph)
}
