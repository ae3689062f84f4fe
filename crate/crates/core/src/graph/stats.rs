//! Degree histograms with discrete power-law fits, and k-hop degree correlation.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::bipartite::{BipartiteGraph, Side};
use crate::error::{Error, Result};
use crate::par;
use crate::util::{pearson, rng_for};

/// Fewer distinct degree values than this marks the fit unreliable.
pub const MIN_DISTINCT_DEGREES: usize = 10;
/// Smallest tail size considered when scanning `x_min`.
pub const MIN_TAIL: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub x_min: u32,
    pub ks_distance: f64,
    pub n_tail: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeHistogram {
    pub side: Side,
    /// degree -> number of vertices with that degree
    pub counts: BTreeMap<u32, u64>,
    pub fit: Option<PowerLawFit>,
    pub reliable: bool,
}

impl DegreeHistogram {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

pub fn degree_histogram(graph: &BipartiteGraph, side: Side) -> DegreeHistogram {
    let degrees = match side {
        Side::Device => graph.device_degrees(),
        Side::App => graph.app_degrees(),
    };
    let mut counts = BTreeMap::new();
    for &k in &degrees {
        *counts.entry(k).or_insert(0u64) += 1;
    }
    let reliable = counts.len() >= MIN_DISTINCT_DEGREES;
    let fit = fit_power_law(&degrees);
    DegreeHistogram {
        side,
        counts,
        reliable: reliable && fit.is_some(),
        fit,
    }
}

/// Hurwitz zeta `sum_{k>=0} (q + k)^-s` for `s > 1`, `q > 0`, via
/// Euler–Maclaurin after ten explicit terms.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    const N: usize = 10;
    let mut sum = 0.0;
    for k in 0..N {
        sum += (q + k as f64).powf(-s);
    }
    let a = q + N as f64;
    let a_s = a.powf(-s);
    sum += a * a_s / (s - 1.0);
    sum += 0.5 * a_s;
    let a2 = a * a;
    let mut term = s * a_s / a; // s * a^{-s-1}
    sum += term / 12.0;
    term *= (s + 1.0) * (s + 2.0) / a2;
    sum -= term / 720.0;
    term *= (s + 3.0) * (s + 4.0) / a2;
    sum += term / 30240.0;
    sum
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    (lo + hi) / 2.0
}

/// Discrete MLE exponent for samples `>= x_min`.
pub fn power_law_mle(tail: &[u32], x_min: u32) -> f64 {
    let n = tail.len() as f64;
    let sum_ln: f64 = tail.iter().map(|&x| (x as f64).ln()).sum();
    let q = x_min as f64;
    golden_max(
        |a| -n * hurwitz_zeta(a, q).ln() - a * sum_ln,
        1.0 + 1e-6,
        8.0,
    )
}

/// KS distance between the empirical tail and a discrete power law.
pub fn power_law_ks(sorted_tail: &[u32], alpha: f64, x_min: u32) -> f64 {
    let n = sorted_tail.len() as f64;
    let z = hurwitz_zeta(alpha, x_min as f64);
    let mut ks: f64 = 0.0;
    let mut i = 0;
    while i < sorted_tail.len() {
        let x = sorted_tail[i];
        // empirical CDF just below x and at x
        let below = i as f64 / n;
        while i < sorted_tail.len() && sorted_tail[i] == x {
            i += 1;
        }
        let at = i as f64 / n;
        let model_at = 1.0 - hurwitz_zeta(alpha, x as f64 + 1.0) / z;
        let model_below = 1.0 - hurwitz_zeta(alpha, x as f64) / z;
        ks = ks.max((at - model_at).abs()).max((below - model_below).abs());
    }
    ks
}

/// Fits a discrete power law to the tail, choosing `x_min` by minimal KS distance.
pub fn fit_power_law(values: &[u32]) -> Option<PowerLawFit> {
    let mut sorted: Vec<u32> = values.iter().copied().filter(|&v| v > 0).collect();
    sorted.sort_unstable();
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < 2 {
        return None;
    }
    let mut best: Option<PowerLawFit> = None;
    let mut start = 0;
    for &x_min in &distinct {
        while start < sorted.len() && sorted[start] < x_min {
            start += 1;
        }
        let tail = &sorted[start..];
        if tail.len() < MIN_TAIL && best.is_some() {
            break;
        }
        if tail.iter().all(|&v| v == x_min) {
            break;
        }
        let alpha = power_law_mle(tail, x_min);
        let ks = power_law_ks(tail, alpha, x_min);
        if best.as_ref().is_none_or(|b| ks < b.ks_distance) {
            best = Some(PowerLawFit {
                alpha,
                x_min,
                ks_distance: ks,
                n_tail: tail.len(),
            });
        }
    }
    best
}

/// Pearson correlation between app degree and the mean degree of apps at
/// exactly `hops` hops, over up to `sample_size` sampled apps.
pub fn khop_degree_correlation(
    graph: &BipartiteGraph,
    hops: usize,
    sample_size: usize,
    seed: u64,
) -> Result<f64> {
    if hops == 0 || hops % 2 != 0 {
        return Err(Error::config("hops", "must be a positive even number"));
    }
    if sample_size < 2 {
        return Err(Error::config("sample_size", "must be at least 2"));
    }
    let n_apps = graph.n_apps();
    let starts: Vec<u32> = if sample_size >= n_apps {
        (0..n_apps as u32).collect()
    } else {
        let mut rng = rng_for(seed, "khop", hops as u64);
        let mut s: Vec<u32> = sample(&mut rng, n_apps, sample_size)
            .into_iter()
            .map(|i| i as u32)
            .collect();
        s.sort_unstable();
        s
    };
    let results: Vec<Option<(f64, f64)>> = par::map_slice_init(
        &starts,
        || KhopScratch::new(graph),
        |scratch, &m| {
            let mean = scratch.mean_degree_at(graph, m, hops)?;
            Some((graph.app_degree(m) as f64, mean))
        },
    );
    let (xs, ys): (Vec<f64>, Vec<f64>) = results.into_iter().flatten().unzip();
    if xs.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!(
            "fewer than two apps have a complete {hops}-hop neighbourhood"
        )));
    }
    pearson(&xs, &ys).ok_or_else(|| {
        Error::UndefinedCorrelation("zero variance in degrees or neighbourhood means".into())
    })
}

struct KhopScratch {
    dev_stamp: Vec<u32>,
    app_stamp: Vec<u32>,
    epoch: u32,
    frontier: Vec<u32>,
    next: Vec<u32>,
}

impl KhopScratch {
    fn new(graph: &BipartiteGraph) -> Self {
        KhopScratch {
            dev_stamp: vec![0; graph.n_devices()],
            app_stamp: vec![0; graph.n_apps()],
            epoch: 0,
            frontier: Vec::new(),
            next: Vec::new(),
        }
    }

    /// Breadth-first expansion; returns the mean degree of apps first reached at `hops`.
    fn mean_degree_at(&mut self, graph: &BipartiteGraph, start: u32, hops: usize) -> Option<f64> {
        self.epoch += 1;
        let e = self.epoch;
        self.app_stamp[start as usize] = e;
        self.frontier.clear();
        self.frontier.push(start);
        for step in 1..=hops {
            self.next.clear();
            let to_device = step % 2 == 1;
            for &v in &self.frontier {
                let nbrs = if to_device {
                    graph.app_neighbors(v)
                } else {
                    graph.device_neighbors(v)
                };
                let stamp = if to_device {
                    &mut self.dev_stamp
                } else {
                    &mut self.app_stamp
                };
                for &w in nbrs {
                    if stamp[w as usize] != e {
                        stamp[w as usize] = e;
                        self.next.push(w);
                    }
                }
            }
            std::mem::swap(&mut self.frontier, &mut self.next);
            if self.frontier.is_empty() {
                return None;
            }
        }
        let total: usize = self.frontier.iter().map(|&m| graph.app_degree(m)).sum();
        Some(total as f64 / self.frontier.len() as f64)
    }
}
