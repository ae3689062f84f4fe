use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use super::config::TrainerConfig;
use super::matrix::{EmbeddingMatrix, SharedMatrix};
use super::ranking::{step_store, Scratch};
use super::walk::{extract_pairs_into, Pair, WalkSampler};
use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;
use crate::par::Workers;
use crate::util::rng_for;

/// Walk starts are split into this many chunks per epoch regardless of the
/// worker count, so every worker count sees the same walk corpus.
const CHUNKS: usize = 64;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub walks: usize,
    pub pairs: usize,
    /// Pairs with at least one active negative.
    pub active_pairs: usize,
    pub mean_loss: f64,
    pub final_lr: f64,
    pub seconds: f64,
}

/// Stateful trainer: owns the shared matrix across epochs.
pub struct Trainer<'g> {
    graph: &'g BipartiteGraph,
    cfg: TrainerConfig,
    sampler: WalkSampler<'g>,
    phi: SharedMatrix,
    touched: Vec<AtomicBool>,
    workers: Workers,
    epoch: usize,
    history: Vec<EpochStats>,
    warnings: Vec<String>,
}

struct ChunkOut {
    walks: usize,
    pairs: usize,
    active_pairs: usize,
    loss: f64,
}

impl<'g> Trainer<'g> {
    pub fn new(graph: &'g BipartiteGraph, cfg: &TrainerConfig) -> Result<Self> {
        let warnings = cfg.validate()?;
        for w in &warnings {
            log::warn!("{w}");
        }
        if graph.n_devices() == 0 || graph.n_edges() == 0 {
            return Err(Error::EmptyGraph("no devices to start walks from".into()));
        }
        let mut phi = EmbeddingMatrix::for_graph(graph, cfg.dim);
        phi.randomize(&mut rng_for(cfg.seed, "embedding-init", 0), cfg.init_range() as f32);
        let rows = phi.n_rows();
        Ok(Trainer {
            graph,
            sampler: WalkSampler::new(graph, cfg.kernel),
            phi: SharedMatrix::from_matrix(phi),
            touched: (0..rows).map(|_| AtomicBool::new(false)).collect(),
            workers: Workers::new(cfg.workers),
            cfg: cfg.clone(),
            epoch: 0,
            history: Vec::new(),
            warnings,
        })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.cfg
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn history(&self) -> &[EpochStats] {
        &self.history
    }

    pub fn matrix(&self) -> EmbeddingMatrix {
        self.phi.snapshot()
    }

    pub fn into_matrix(self) -> EmbeddingMatrix {
        self.phi.into_matrix()
    }

    fn lr_at(&self, progress: f64) -> f64 {
        let total = self.cfg.epochs.max(1) as f64;
        let t = ((self.epoch as f64 + progress.clamp(0.0, 1.0)) / total).min(1.0);
        self.cfg.learning_rate - (self.cfg.learning_rate - self.cfg.min_learning_rate) * t
    }

    fn mark(&self, pair: &Pair, negatives: &[u32]) {
        let nd = self.graph.n_devices();
        self.touched[pair.device as usize].store(true, Ordering::Relaxed);
        self.touched[nd + pair.app as usize].store(true, Ordering::Relaxed);
        for &m in negatives {
            self.touched[nd + m as usize].store(true, Ordering::Relaxed);
        }
    }

    /// Applies one regularization step to rows no update reached this epoch.
    fn decay_untouched(&self, lr: f64) {
        let factor = 1.0 - 2.0 * lr * self.cfg.reg_lambda;
        for (row, flag) in self.touched.iter().enumerate() {
            if !flag.swap(false, Ordering::Relaxed) {
                self.phi.scale_row(row, factor);
            }
        }
    }

    /// One pass of `walks_per_vertex` walks from every device.
    pub fn run_epoch(&mut self) -> Result<EpochStats> {
        let started = Instant::now();
        let cfg = &self.cfg;
        let nd = self.graph.n_devices();
        let mut starts: Vec<u32> = (0..cfg.walks_per_vertex)
            .flat_map(|_| 0..nd as u32)
            .collect();
        starts.shuffle(&mut rng_for(cfg.seed, "walk-order", self.epoch as u64));
        let total = starts.len();
        let chunks = CHUNKS.min(total.max(1));
        let edges = cfg.walk_edges().min(2 * cfg.max_order - 1);
        let margin = cfg.margin();
        let done = AtomicUsize::new(0);
        let abort = AtomicBool::new(false);
        let this = &*self;

        let outs = this.workers.run(chunks, |c| -> Result<ChunkOut> {
            let lo = c * total / chunks;
            let hi = (c + 1) * total / chunks;
            let mut rng = rng_for(cfg.seed, "walk-chunk", (this.epoch * CHUNKS + c) as u64);
            let mut scratch = Scratch::new(cfg.dim, cfg.neg_samples);
            let mut walk = Vec::with_capacity(edges + 1);
            let mut pairs = Vec::with_capacity(cfg.max_order);
            let mut negs = vec![0u32; cfg.neg_samples];
            let mut out = ChunkOut {
                walks: 0,
                pairs: 0,
                active_pairs: 0,
                loss: 0.0,
            };
            let na = this.graph.n_apps() as u32;
            for &start in &starts[lo..hi] {
                if abort.load(Ordering::Relaxed) {
                    break;
                }
                let progress = done.fetch_add(1, Ordering::Relaxed) as f64 / total as f64;
                let lr = this.lr_at(progress);
                this.sampler.walk_into(start, edges, &mut rng, &mut walk);
                pairs.clear();
                extract_pairs_into(&walk, cfg.max_order, &mut pairs);
                for pair in &pairs {
                    for n in negs.iter_mut() {
                        *n = rng.random_range(0..na);
                    }
                    let step = step_store(&this.phi, nd, pair, &negs, margin, cfg.reg_lambda, lr, &mut scratch);
                    let (loss, active) = match step {
                        Ok(v) => v,
                        Err(e) => {
                            abort.store(true, Ordering::Relaxed);
                            return Err(e);
                        }
                    };
                    this.mark(pair, &negs);
                    out.loss += loss;
                    out.pairs += 1;
                    out.active_pairs += (active > 0) as usize;
                }
                out.walks += 1;
            }
            Ok(out)
        });

        let mut stats = EpochStats {
            epoch: self.epoch,
            ..Default::default()
        };
        for o in outs {
            let o = o?;
            stats.walks += o.walks;
            stats.pairs += o.pairs;
            stats.active_pairs += o.active_pairs;
            stats.mean_loss += o.loss;
        }
        self.finish_epoch(stats, started)
    }

    /// One sequential pass over a fixed pair list with fresh uniform
    /// negatives per pair.
    pub fn run_epoch_on(&mut self, pairs: &[Pair]) -> Result<EpochStats> {
        let started = Instant::now();
        let nd = self.graph.n_devices();
        let na = self.graph.n_apps() as u32;
        let mut rng = rng_for(self.cfg.seed, "fixed-pairs", self.epoch as u64);
        let mut scratch = Scratch::new(self.cfg.dim, self.cfg.neg_samples);
        let mut negs = vec![0u32; self.cfg.neg_samples];
        let mut stats = EpochStats {
            epoch: self.epoch,
            ..Default::default()
        };
        for (i, pair) in pairs.iter().enumerate() {
            let lr = self.lr_at(i as f64 / pairs.len() as f64);
            for n in negs.iter_mut() {
                *n = rng.random_range(0..na);
            }
            let (loss, active) = step_store(
                &self.phi,
                nd,
                pair,
                &negs,
                self.cfg.margin(),
                self.cfg.reg_lambda,
                lr,
                &mut scratch,
            )?;
            self.mark(pair, &negs);
            stats.pairs += 1;
            stats.active_pairs += (active > 0) as usize;
            stats.mean_loss += loss;
        }
        self.finish_epoch(stats, started)
    }

    fn finish_epoch(&mut self, mut stats: EpochStats, started: Instant) -> Result<EpochStats> {
        let lr = self.lr_at(1.0);
        self.decay_untouched(lr);
        if stats.pairs > 0 {
            stats.mean_loss /= stats.pairs as f64;
        }
        stats.final_lr = lr;
        stats.seconds = started.elapsed().as_secs_f64();
        let snapshot_ok = self.phi.snapshot().is_finite();
        if !snapshot_ok {
            return Err(Error::Diverged(format!("non-finite embedding after epoch {}", self.epoch)));
        }
        log::debug!(
            "epoch {}: {} pairs, {} active, mean loss {:.4}, {:.2}s",
            stats.epoch,
            stats.pairs,
            stats.active_pairs,
            stats.mean_loss,
            stats.seconds
        );
        self.epoch += 1;
        self.history.push(stats.clone());
        Ok(stats)
    }

    /// Runs all configured epochs.
    pub fn fit(mut self) -> Result<EmbeddingMatrix> {
        for _ in 0..self.cfg.epochs {
            self.run_epoch()?;
        }
        Ok(self.into_matrix())
    }
}

/// Trains an embedding of `graph` with the ranking objective.
pub fn train(graph: &BipartiteGraph, cfg: &TrainerConfig) -> Result<EmbeddingMatrix> {
    Trainer::new(graph, cfg)?.fit()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::synthetic::{generate, GeneratorConfig};
    use crate::util::mean;

    fn small_cfg(seed: u64) -> TrainerConfig {
        TrainerConfig {
            dim: 16,
            walks_per_vertex: 10,
            neg_samples: 10,
            walk_length: 8,
            seed,
            ..Default::default()
        }
    }

    fn planted() -> crate::synthetic::SyntheticCorpus {
        let mut cfg = GeneratorConfig::new(400, 60, 3000, 5);
        cfg.n_groups = 2;
        cfg.affinity = 20.0;
        cfg.mixing = 0.05;
        generate(&cfg).unwrap()
    }

    #[test]
    fn single_worker_is_bit_reproducible() {
        let c = planted();
        let g = build_graph(&c.events, c.truth.config.time_window.into()).unwrap();
        let a = train(&g, &small_cfg(7)).unwrap();
        let b = train(&g, &small_cfg(7)).unwrap();
        assert_eq!(a, b);
        assert!(a.is_finite());
        assert_ne!(a, train(&g, &small_cfg(8)).unwrap());
    }

    #[test]
    fn planted_groups_separate_in_dot_products() {
        let c = planted();
        let g = build_graph(&c.events, c.truth.config.time_window.into()).unwrap();
        let phi = train(&g, &small_cfg(3)).unwrap();
        let (mut inside, mut outside) = (Vec::new(), Vec::new());
        for d in 0..g.n_devices() as u32 {
            let td = c.truth.device_index(g.devices().token(d)).unwrap();
            for m in 0..g.n_apps() as u32 {
                let tm = c.truth.app_index(g.apps().token(m)).unwrap();
                let s = phi.score(d, m);
                if c.truth.shares_group(td, tm) {
                    inside.push(s);
                } else {
                    outside.push(s);
                }
            }
        }
        assert!(mean(&inside) > mean(&outside), "{} vs {}", mean(&inside), mean(&outside));
    }

    #[test]
    fn empty_corpus_shrinks_norm() {
        let c = planted();
        let g = build_graph(&c.events, c.truth.config.time_window.into()).unwrap();
        let cfg = TrainerConfig {
            reg_lambda: 0.1,
            epochs: 5,
            ..small_cfg(1)
        };
        let mut t = Trainer::new(&g, &cfg).unwrap();
        let mut last = t.matrix().norm();
        for _ in 0..5 {
            t.run_epoch_on(&[]).unwrap();
            let now = t.matrix().norm();
            assert!(now < last);
            last = now;
        }
    }
}
