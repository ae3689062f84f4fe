use std::collections::HashMap;

use serde::Serialize;

use crate::embedding::{Kernel, WalkSampler};
use crate::graph::BipartiteGraph;
use crate::util::rng_for;

/// A distinct walk prefix from the device to the app.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WalkTrace {
    /// Alternating device/app tokens, ending at the target app.
    pub path: Vec<String>,
    /// Occurrence rank of the app in the walk.
    pub order: usize,
    pub hits: usize,
}

/// Samples `walk_budget` walks from `d` and aggregates the prefixes that
/// reach `m` within `max_order` app ranks, most frequent first.
pub fn explain_prediction(
    graph: &BipartiteGraph,
    d: u32,
    m: u32,
    walk_budget: usize,
    max_order: usize,
    kernel: Kernel,
    seed: u64,
) -> Vec<WalkTrace> {
    if d as usize >= graph.n_devices() || m as usize >= graph.n_apps() || max_order == 0 {
        return Vec::new();
    }
    let sampler = WalkSampler::new(graph, kernel);
    let mut rng = rng_for(seed, "explain", 0);
    let mut counts: HashMap<Vec<u32>, usize> = HashMap::new();
    let mut walk = Vec::with_capacity(2 * max_order);
    for _ in 0..walk_budget {
        sampler.walk_into(d, 2 * max_order - 1, &mut rng, &mut walk);
        if let Some(pos) = walk.iter().skip(1).step_by(2).position(|&a| a == m) {
            *counts.entry(walk[..2 * pos + 2].to_vec()).or_default() += 1;
        }
    }
    let mut out: Vec<WalkTrace> = counts
        .into_iter()
        .map(|(path, hits)| WalkTrace {
            order: path.len() / 2,
            path: path
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    if i % 2 == 0 {
                        graph.devices().token(v).to_owned()
                    } else {
                        graph.apps().token(v).to_owned()
                    }
                })
                .collect(),
            hits,
        })
        .collect();
    out.sort_by(|a, b| b.hits.cmp(&a.hits).then(a.order.cmp(&b.order)).then(a.path.cmp(&b.path)));
    out
}
