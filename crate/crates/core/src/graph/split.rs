use std::collections::{HashMap, HashSet};

use super::bipartite::{BipartiteGraph, Vocab};
use super::events::InstallEvent;
use crate::error::{Error, Result};

/// A deduplicated edge with its earliest in-window timestamp.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TimedEdge {
    pub device: String,
    pub app: String,
    pub timestamp: u64,
}

/// A test edge, flagged when either endpoint never appears in training.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestEdge {
    pub edge: TimedEdge,
    pub cold_device: bool,
    pub cold_app: bool,
}

impl TestEdge {
    pub fn is_cold(&self) -> bool {
        self.cold_device || self.cold_app
    }
}

/// Train edges observed in `[start, boundary]`, test edges first observed in
/// `(boundary, boundary + horizon]` and absent from training.
#[derive(Debug, Clone)]
pub struct TemporalSplit {
    pub train: Vec<TimedEdge>,
    pub test: Vec<TestEdge>,
    pub start: u64,
    pub boundary: u64,
    pub horizon: u64,
}

impl TemporalSplit {
    pub fn n_cold(&self) -> usize {
        self.test.iter().filter(|e| e.is_cold()).count()
    }

    /// Graph over the training edges only.
    pub fn train_graph(&self) -> Result<BipartiteGraph> {
        let mut devices = Vocab::new();
        let mut apps = Vocab::new();
        let edges = self
            .train
            .iter()
            .map(|e| (devices.intern(&e.device), apps.intern(&e.app), e.timestamp))
            .collect();
        BipartiteGraph::from_parts(devices, apps, edges, (self.start, self.boundary))
    }
}

fn dedup_earliest<'a>(events: impl Iterator<Item = &'a InstallEvent>) -> Vec<TimedEdge> {
    let mut order: Vec<(&str, &str)> = Vec::new();
    let mut first: HashMap<(&str, &str), u64> = HashMap::new();
    for ev in events {
        let key = (ev.device_id.as_str(), ev.app_id.as_str());
        match first.get_mut(&key) {
            Some(t) => *t = (*t).min(ev.timestamp),
            None => {
                first.insert(key, ev.timestamp);
                order.push(key);
            }
        }
    }
    order
        .into_iter()
        .map(|k| TimedEdge {
            device: k.0.to_owned(),
            app: k.1.to_owned(),
            timestamp: first[&k],
        })
        .collect()
}

/// Splits with the training window starting at the earliest event.
pub fn temporal_split(events: &[InstallEvent], boundary: u64, horizon: u64) -> Result<TemporalSplit> {
    let start = events.iter().map(|e| e.timestamp).min().unwrap_or(0);
    temporal_split_window(events, start, boundary, horizon)
}

/// Splits with an explicit training-window start; events before `start` or
/// after `boundary + horizon` are ignored.
pub fn temporal_split_window(
    events: &[InstallEvent],
    start: u64,
    boundary: u64,
    horizon: u64,
) -> Result<TemporalSplit> {
    if start > boundary {
        return Err(Error::Split(format!("window start {start} after boundary {boundary}")));
    }
    let end = boundary.saturating_add(horizon);
    let train = dedup_earliest(
        events
            .iter()
            .filter(|e| e.timestamp >= start && e.timestamp <= boundary),
    );
    if train.is_empty() {
        return Err(Error::Split(format!("no training events in [{start}, {boundary}]")));
    }
    let train_pairs: HashSet<(&str, &str)> = train
        .iter()
        .map(|e| (e.device.as_str(), e.app.as_str()))
        .collect();
    let train_devices: HashSet<&str> = train.iter().map(|e| e.device.as_str()).collect();
    let train_apps: HashSet<&str> = train.iter().map(|e| e.app.as_str()).collect();

    let test: Vec<TestEdge> = dedup_earliest(
        events
            .iter()
            .filter(|e| e.timestamp > boundary && e.timestamp <= end),
    )
    .into_iter()
    .filter(|e| !train_pairs.contains(&(e.device.as_str(), e.app.as_str())))
    .map(|edge| TestEdge {
        cold_device: !train_devices.contains(edge.device.as_str()),
        cold_app: !train_apps.contains(edge.app.as_str()),
        edge,
    })
    .collect();
    if test.is_empty() {
        return Err(Error::Split(format!("no novel test edges in ({boundary}, {end}]")));
    }
    Ok(TemporalSplit {
        train,
        test,
        start,
        boundary,
        horizon,
    })
}
