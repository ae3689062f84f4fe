//! Bipartite installation-graph representation learning and link prediction.
//!
//! The crate is organised along the pipeline it implements:
//!
//! * [`graph`] ingests timestamped device/app events, builds the binary
//!   bipartite graph, produces temporal splits and descriptive statistics.
//! * [`synthetic`] generates event corpora with power-law app degrees and
//!   planted group structure.
//! * [`embedding`] learns vertex vectors from decay-weighted l-order proximity
//!   pairs sampled by truncated random walks, trained with a margin-gated
//!   ranking loss and lock-free parallel SGD.
//! * [`baselines`] holds preferential attachment and first/second-order
//!   proximity embeddings.
//! * [`predictor`] turns vertex vectors into edge features, builds balanced
//!   labelled sets and fits classifiers.
//! * [`eval`] computes ROC/AUC/AP and runs the experiment harnesses.
//!
//! With the default `parallel` feature, data-parallel loops run on rayon;
//! without it every loop falls back to a sequential path that produces the
//! same results for the same seeds.

pub mod baselines;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod graph;
pub mod par;
pub mod predictor;
pub mod synthetic;
pub mod util;

pub use error::{Error, Result};
