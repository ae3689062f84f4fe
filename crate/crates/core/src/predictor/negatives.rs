use std::collections::HashSet;

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;
use crate::util::rng_for;

/// Above this forbidden fraction the sampler enumerates free pairs instead
/// of rejecting.
const DENSE_FRACTION: f64 = 0.5;

/// Draws `count` distinct device–app pairs uniformly from the pairs that are
/// neither graph edges nor in `exclusion`.
pub fn sample_negative_edges(
    graph: &BipartiteGraph,
    count: usize,
    exclusion: &HashSet<(u32, u32)>,
    seed: u64,
) -> Result<Vec<(u32, u32)>> {
    let (nd, na) = (graph.n_devices() as u64, graph.n_apps() as u64);
    let universe = nd * na;
    let extra = exclusion
        .iter()
        .filter(|&&(d, m)| (d as u64) < nd && (m as u64) < na && !graph.has_edge(d, m))
        .count() as u64;
    let forbidden = graph.n_edges() as u64 + extra;
    let free = universe - forbidden;
    if count as u64 > free {
        return Err(Error::Sampling(format!(
            "requested {count} non-edges but only {free} exist"
        )));
    }
    let blocked = |d: u32, m: u32| graph.has_edge(d, m) || exclusion.contains(&(d, m));
    let mut rng = rng_for(seed, "negative-edges", 0);
    if forbidden as f64 > DENSE_FRACTION * universe as f64 {
        let pool: Vec<(u32, u32)> = (0..nd as u32)
            .flat_map(|d| (0..na as u32).map(move |m| (d, m)))
            .filter(|&(d, m)| !blocked(d, m))
            .collect();
        return Ok(sample(&mut rng, pool.len(), count)
            .into_iter()
            .map(|i| pool[i])
            .collect());
    }
    let mut chosen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let d = rng.random_range(0..nd as u32);
        let m = rng.random_range(0..na as u32);
        if !blocked(d, m) && chosen.insert((d, m)) {
            out.push((d, m));
        }
    }
    Ok(out)
}
