//! Decay-weighted l-order proximity embedding.
//!
//! Walks start at devices and step with a degree-weighted kernel. The app
//! at occurrence rank `l` of a walk forms a positive pair with the start
//! device, weighted `1/l`. Each pair is contrasted with uniformly drawn apps
//! by the margin-gated log ranking loss and the rows are updated by
//! lock-free SGD.
//!
//! The margin `epsilon / k` is a configuration choice (`margin_epsilon`,
//! `margin_k`, default `1 / neg_samples`).

mod config;
mod export;
mod matrix;
mod ranking;
mod trainer;
mod walk;

pub use config::{Kernel, TrainerConfig, WalkLengthUnit};
pub use export::{
    read_embeddings, write_embeddings, write_embeddings_tsv, EmbeddingMeta, FORMAT_VERSION, META_NAME, TSV_NAME,
};
pub use matrix::EmbeddingMatrix;
pub use ranking::{ranking_gradient, ranking_step, RankingGradient, DELTA_CAP};
pub use trainer::{train, EpochStats, Trainer};
pub use walk::{
    decay, exact_lorder_distribution, extract_pairs, sample_walk, Pair, Walk, WalkSampler, EXACT_VERTEX_LIMIT,
};

pub(crate) use matrix::{RowStore, SharedMatrix};
