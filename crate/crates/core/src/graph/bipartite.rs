use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::events::InstallEvent;
use crate::error::{Error, Result};
use crate::util::ContentHasher;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Device,
    App,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Device => Side::App,
            Side::App => Side::Device,
        }
    }
}

/// A vertex addressed by side and dense per-side index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Vertex {
    Device(u32),
    App(u32),
}

impl Vertex {
    pub fn side(self) -> Side {
        match self {
            Vertex::Device(_) => Side::Device,
            Vertex::App(_) => Side::App,
        }
    }

    pub fn index(self) -> u32 {
        match self {
            Vertex::Device(i) | Vertex::App(i) => i,
        }
    }
}

/// Bijection between string tokens and dense indices, in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::format("vocabulary", format!("duplicate token `{t}`")));
            }
        }
        Ok(Vocab { tokens, index })
    }

    pub fn intern(&mut self, token: &str) -> u32 {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        let i = self.tokens.len() as u32;
        self.tokens.push(token.to_owned());
        self.index.insert(token.to_owned(), i);
        i
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, i: u32) -> &str {
        &self.tokens[i as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Compressed adjacency for one direction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Csr {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Csr {
    fn from_sorted_pairs(n_rows: usize, pairs: impl Iterator<Item = (u32, u32)>) -> Self {
        let mut offsets = vec![0usize; n_rows + 1];
        let mut targets = Vec::new();
        for (r, c) in pairs {
            offsets[r as usize + 1] += 1;
            targets.push(c);
        }
        for i in 0..n_rows {
            offsets[i + 1] += offsets[i];
        }
        Csr { offsets, targets }
    }

    fn row(&self, i: u32) -> &[u32] {
        let i = i as usize;
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }
}

/// Binary device–app adjacency with CSR neighbour lists in both directions.
///
/// Immutable after construction. Every vertex has degree at least one, and
/// neighbour lists are sorted by index. Edge timestamps (earliest observation)
/// are kept aligned with the device-side lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteGraph {
    devices: Vocab,
    apps: Vocab,
    dev_adj: Csr,
    app_adj: Csr,
    edge_time: Vec<u64>,
    window: (u64, u64),
}

/// Builds the graph from events whose timestamp lies in `window` (inclusive).
///
/// Repeated (device, app) events collapse to one edge carrying the earliest
/// timestamp. Indices follow first appearance among in-window events.
pub fn build_graph(events: &[InstallEvent], window: (u64, u64)) -> Result<BipartiteGraph> {
    if window.0 > window.1 {
        return Err(Error::config(
            "window",
            format!("start {} after end {}", window.0, window.1),
        ));
    }
    let mut devices = Vocab::new();
    let mut apps = Vocab::new();
    let mut first_seen: HashMap<(u32, u32), u64> = HashMap::new();
    for ev in events {
        if ev.timestamp < window.0 || ev.timestamp > window.1 {
            continue;
        }
        let d = devices.intern(&ev.device_id);
        let m = apps.intern(&ev.app_id);
        first_seen
            .entry((d, m))
            .and_modify(|t| *t = (*t).min(ev.timestamp))
            .or_insert(ev.timestamp);
    }
    if first_seen.is_empty() {
        return Err(Error::EmptyGraph(format!(
            "no events in window [{}, {}]",
            window.0, window.1
        )));
    }
    let edges: Vec<(u32, u32, u64)> = first_seen.into_iter().map(|((d, m), t)| (d, m, t)).collect();
    BipartiteGraph::from_parts(devices, apps, edges, window)
}

impl BipartiteGraph {
    /// Assembles a graph from vocabularies and `(device, app, timestamp)` edges.
    ///
    /// Duplicate pairs keep their earliest timestamp. Tokens that end up with
    /// no edge are dropped and the remaining indices are compacted in their
    /// original order.
    pub fn from_parts(
        devices: Vocab,
        apps: Vocab,
        mut edges: Vec<(u32, u32, u64)>,
        window: (u64, u64),
    ) -> Result<Self> {
        for token in devices.tokens() {
            if apps.get(token).is_some() {
                return Err(Error::NamespaceCollision(token.clone()));
            }
        }
        for &(d, m, _) in &edges {
            if d as usize >= devices.len() {
                return Err(Error::Index {
                    what: "device",
                    index: d as usize,
                    size: devices.len(),
                });
            }
            if m as usize >= apps.len() {
                return Err(Error::Index {
                    what: "app",
                    index: m as usize,
                    size: apps.len(),
                });
            }
        }
        edges.sort_unstable();
        edges.dedup_by(|next, kept| next.0 == kept.0 && next.1 == kept.1);
        if edges.is_empty() {
            return Err(Error::EmptyGraph("no edges".into()));
        }

        // compact away isolated tokens
        let mut dev_used = vec![false; devices.len()];
        let mut app_used = vec![false; apps.len()];
        for &(d, m, _) in &edges {
            dev_used[d as usize] = true;
            app_used[m as usize] = true;
        }
        let (devices, dev_map) = compact(devices, &dev_used);
        let (apps, app_map) = compact(apps, &app_used);
        for e in edges.iter_mut() {
            e.0 = dev_map[e.0 as usize];
            e.1 = app_map[e.1 as usize];
        }
        edges.sort_unstable();

        let dev_adj = Csr::from_sorted_pairs(devices.len(), edges.iter().map(|&(d, m, _)| (d, m)));
        let edge_time = edges.iter().map(|e| e.2).collect();
        let mut by_app: Vec<(u32, u32)> = edges.iter().map(|&(d, m, _)| (m, d)).collect();
        by_app.sort_unstable();
        let app_adj = Csr::from_sorted_pairs(apps.len(), by_app.into_iter());
        Ok(BipartiteGraph {
            devices,
            apps,
            dev_adj,
            app_adj,
            edge_time,
            window,
        })
    }

    /// Graph over index pairs with tokens `d{i}` / `m{j}` and timestamp 0.
    pub fn from_index_pairs(edges: &[(u32, u32)]) -> Result<Self> {
        let nd = edges.iter().map(|e| e.0 + 1).max().unwrap_or(0);
        let na = edges.iter().map(|e| e.1 + 1).max().unwrap_or(0);
        let devices = Vocab::from_tokens((0..nd).map(|i| format!("d{i}")).collect())?;
        let apps = Vocab::from_tokens((0..na).map(|i| format!("m{i}")).collect())?;
        Self::from_parts(devices, apps, edges.iter().map(|&(d, m)| (d, m, 0)).collect(), (0, 0))
    }

    /// Same vertex set, restricted edge set. Fails if a vertex would lose all edges.
    pub fn with_edge_subset(&self, keep: &[(u32, u32)]) -> Result<Self> {
        let mut edges = Vec::with_capacity(keep.len());
        for &(d, m) in keep {
            let t = self.edge_timestamp(d, m).ok_or_else(|| {
                Error::Contract(format!("edge ({d}, {m}) is not in the graph"))
            })?;
            edges.push((d, m, t));
        }
        let g = Self::from_parts(self.devices.clone(), self.apps.clone(), edges, self.window)?;
        if g.n_devices() != self.n_devices() || g.n_apps() != self.n_apps() {
            return Err(Error::Contract(
                "edge subset isolates vertices; vertex set must be preserved".into(),
            ));
        }
        Ok(g)
    }

    pub fn n_devices(&self) -> usize {
        self.devices.len()
    }

    pub fn n_apps(&self) -> usize {
        self.apps.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.n_devices() + self.n_apps()
    }

    pub fn n_edges(&self) -> usize {
        self.dev_adj.targets.len()
    }

    pub fn window(&self) -> (u64, u64) {
        self.window
    }

    pub fn devices(&self) -> &Vocab {
        &self.devices
    }

    pub fn apps(&self) -> &Vocab {
        &self.apps
    }

    pub fn device_neighbors(&self, d: u32) -> &[u32] {
        self.dev_adj.row(d)
    }

    pub fn app_neighbors(&self, m: u32) -> &[u32] {
        self.app_adj.row(m)
    }

    pub fn neighbors(&self, v: Vertex) -> &[u32] {
        match v {
            Vertex::Device(d) => self.device_neighbors(d),
            Vertex::App(m) => self.app_neighbors(m),
        }
    }

    pub fn device_degree(&self, d: u32) -> usize {
        self.device_neighbors(d).len()
    }

    pub fn app_degree(&self, m: u32) -> usize {
        self.app_neighbors(m).len()
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.neighbors(v).len()
    }

    pub fn device_degrees(&self) -> Vec<u32> {
        (0..self.n_devices() as u32)
            .map(|d| self.device_degree(d) as u32)
            .collect()
    }

    pub fn app_degrees(&self) -> Vec<u32> {
        (0..self.n_apps() as u32)
            .map(|m| self.app_degree(m) as u32)
            .collect()
    }

    pub fn has_edge(&self, d: u32, m: u32) -> bool {
        (d as usize) < self.n_devices() && self.device_neighbors(d).binary_search(&m).is_ok()
    }

    /// Earliest observation time of the edge, if present.
    pub fn edge_timestamp(&self, d: u32, m: u32) -> Option<u64> {
        if d as usize >= self.n_devices() {
            return None;
        }
        let row = self.device_neighbors(d);
        let pos = row.binary_search(&m).ok()?;
        Some(self.edge_time[self.dev_adj.offsets[d as usize] + pos])
    }

    /// All edges as `(device, app)`, ordered by device then app.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.n_devices() as u32)
            .flat_map(move |d| self.device_neighbors(d).iter().map(move |&m| (d, m)))
    }

    /// Edges with their earliest timestamps.
    pub fn timed_edges(&self) -> impl Iterator<Item = (u32, u32, u64)> + '_ {
        self.edges().zip(self.edge_time.iter()).map(|((d, m), &t)| (d, m, t))
    }

    /// Deterministic content hash over tokens and edge list.
    pub fn content_hash(&self) -> String {
        let mut h = ContentHasher::new();
        for t in self.devices.tokens() {
            h.update(t.as_bytes()).update(b"\n");
        }
        h.update(b"\x00");
        for t in self.apps.tokens() {
            h.update(t.as_bytes()).update(b"\n");
        }
        h.update(b"\x00");
        for (d, m) in self.edges() {
            h.update(&d.to_le_bytes()).update(&m.to_le_bytes());
        }
        h.finish()
    }

    /// One event per edge (earliest timestamp), in edge order.
    pub fn to_events(&self) -> Vec<InstallEvent> {
        self.timed_edges()
            .map(|(d, m, t)| {
                InstallEvent::new(self.devices.token(d), self.apps.token(m), t)
            })
            .collect()
    }
}

fn compact(vocab: Vocab, used: &[bool]) -> (Vocab, Vec<u32>) {
    if used.iter().all(|&u| u) {
        let map = (0..vocab.len() as u32).collect();
        return (vocab, map);
    }
    let mut out = Vocab::new();
    let mut map = vec![u32::MAX; vocab.len()];
    for (i, t) in vocab.tokens().iter().enumerate() {
        if used[i] {
            map[i] = out.intern(t);
        }
    }
    (out, map)
}
