use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingMatrix, RowStore, SharedMatrix};
use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;
use crate::par::Workers;
use crate::util::rng_for;

const CHUNKS: usize = 64;

/// Which LINE proximity to optimise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineOrder {
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineConfig {
    pub dim: usize,
    pub neg_samples: usize,
    pub learning_rate: f64,
    /// Passes over the edge list; each pass samples every edge once in each
    /// direction.
    pub epochs: usize,
    pub workers: usize,
    pub seed: u64,
}

impl Default for LineConfig {
    fn default() -> Self {
        LineConfig {
            dim: 128,
            neg_samples: 5,
            learning_rate: 0.025,
            epochs: 20,
            workers: 1,
            seed: 0,
        }
    }
}

impl LineConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dim", self.dim),
            ("neg_samples", self.neg_samples),
            ("epochs", self.epochs),
            ("workers", self.workers),
        ] {
            if v == 0 {
                return Err(Error::config(name, "must be at least 1"));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate", "must be a positive finite number"));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    if x > 6.0 {
        1.0
    } else if x < -6.0 {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

/// Buffers for one source update.
struct Scratch {
    src: Vec<f64>,
    tgt: Vec<f64>,
    acc: Vec<f64>,
}

/// One source vertex, one positive target and `negs` negative targets.
/// `targets` holds context rows for second order, vertex rows for first.
fn update(
    rows: &SharedMatrix,
    targets: &SharedMatrix,
    src: usize,
    pos: usize,
    negs: &[usize],
    lr: f64,
    s: &mut Scratch,
) -> Result<()> {
    rows.load(src, &mut s.src);
    s.acc.iter_mut().for_each(|x| *x = 0.0);
    for (t, label) in std::iter::once((pos, 1.0)).chain(negs.iter().map(|&n| (n, 0.0))) {
        targets.load(t, &mut s.tgt);
        let x: f64 = s.src.iter().zip(&s.tgt).map(|(a, b)| a * b).sum();
        if !x.is_finite() {
            return Err(Error::Diverged(format!("non-finite LINE score {x}")));
        }
        let g = (label - sigmoid(x)) * lr;
        for (a, v) in s.acc.iter_mut().zip(&s.tgt) {
            *a += g * v;
        }
        targets.add(t, g, &s.src);
    }
    rows.add(src, 1.0, &s.acc);
    Ok(())
}

/// Trains LINE vertex vectors by edge sampling with uniform negatives from
/// the opposite side. Second order keeps separate context vectors and
/// returns the vertex vectors.
pub fn train_line(graph: &BipartiteGraph, cfg: &LineConfig, order: LineOrder) -> Result<EmbeddingMatrix> {
    cfg.validate()?;
    if graph.n_edges() == 0 {
        return Err(Error::EmptyGraph("LINE needs at least one edge".into()));
    }
    let (nd, na) = (graph.n_devices(), graph.n_apps());
    let tag = match order {
        LineOrder::First => "line-first",
        LineOrder::Second => "line-second",
    };
    let mut init = EmbeddingMatrix::for_graph(graph, cfg.dim);
    init.randomize(&mut rng_for(cfg.seed, tag, 0), 0.5 / cfg.dim as f32);
    let rows = SharedMatrix::from_matrix(init);
    let context = match order {
        LineOrder::First => None,
        LineOrder::Second => Some(SharedMatrix::from_matrix(EmbeddingMatrix::for_graph(graph, cfg.dim))),
    };
    let targets = context.as_ref().unwrap_or(&rows);
    let edges: Vec<(u32, u32)> = graph.edges().collect();
    let total = edges.len() * cfg.epochs;
    let done = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let workers = Workers::new(cfg.workers);
    for epoch in 0..cfg.epochs {
        let mut order_idx: Vec<u32> = (0..edges.len() as u32).collect();
        order_idx.shuffle(&mut rng_for(cfg.seed, &format!("{tag}-order"), epoch as u64));
        let n = order_idx.len();
        let chunks = CHUNKS.min(n);
        let outs = workers.run(chunks, |c| -> Result<()> {
            let mut rng = rng_for(cfg.seed, &format!("{tag}-chunk"), (epoch * CHUNKS + c) as u64);
            let mut s = Scratch {
                src: vec![0.0; cfg.dim],
                tgt: vec![0.0; cfg.dim],
                acc: vec![0.0; cfg.dim],
            };
            let mut negs = vec![0usize; cfg.neg_samples];
            for &e in &order_idx[c * n / chunks..(c + 1) * n / chunks] {
                if abort.load(Ordering::Relaxed) {
                    break;
                }
                let progress = done.fetch_add(1, Ordering::Relaxed) as f64 / total as f64;
                let lr = cfg.learning_rate * (1.0 - progress).max(1e-4);
                let (d, m) = edges[e as usize];
                let (d, m) = (d as usize, nd + m as usize);
                for n in negs.iter_mut() {
                    *n = nd + rng.random_range(0..na);
                }
                let r = update(&rows, targets, d, m, &negs, lr, &mut s);
                let r = r.and_then(|_| {
                    for n in negs.iter_mut() {
                        *n = rng.random_range(0..nd);
                    }
                    update(&rows, targets, m, d, &negs, lr, &mut s)
                });
                if let Err(e) = r {
                    abort.store(true, Ordering::Relaxed);
                    return Err(e);
                }
            }
            Ok(())
        });
        outs.into_iter().collect::<Result<Vec<()>>>()?;
    }
    let phi = rows.into_matrix();
    if !phi.is_finite() {
        return Err(Error::Diverged("non-finite LINE embedding".into()));
    }
    Ok(phi)
}

pub fn train_first_order(graph: &BipartiteGraph, cfg: &LineConfig) -> Result<EmbeddingMatrix> {
    train_line(graph, cfg, LineOrder::First)
}

pub fn train_second_order(graph: &BipartiteGraph, cfg: &LineConfig) -> Result<EmbeddingMatrix> {
    train_line(graph, cfg, LineOrder::Second)
}
