//! Synthetic installation corpora with power-law app degrees and planted
//! group structure.
//!
//! Every vertex belongs to a primary interest group and, with probability
//! `mixing`, to one extra group. A device–app pair sharing any group gets
//! weight `affinity`, otherwise 1. App degrees are drawn from a truncated
//! discrete power law; each app then picks exactly that many distinct devices
//! with probability proportional to `device_propensity * affinity(d, m)`.
//! Device propensities are log-normal.

mod alias;
mod config;
mod generate;
mod holdout;

pub use alias::AliasTable;
pub use config::GeneratorConfig;
pub use generate::{generate, GroundTruth, SyntheticCorpus, FORMAT_VERSION};
pub use holdout::{holdout_future_edges, Holdout, HoldoutConfig};

/// Token for generator device `i`.
pub fn device_token(i: usize) -> String {
    format!("d{i}")
}

/// Token for generator app `i`.
pub fn app_token(i: usize) -> String {
    format!("m{i}")
}
