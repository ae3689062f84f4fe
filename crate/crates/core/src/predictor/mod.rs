//! Edge features, labeled datasets, classifiers and prediction traces.

pub mod classifier;
mod dataset;
mod explain;
mod features;
mod negatives;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use classifier::{Classifier, ClassifierConfig, ClassifierKind, Model};
pub use dataset::{
    build_candidates, build_datasets, featurize_candidates, featurize_set, write_labeled_set, Candidate,
    CandidateSplit, ColdPolicy, LabeledEdgeSet,
};
pub use explain::{explain_prediction, WalkTrace};
pub use features::{featurize_edge, Combiner, Features};
pub use negatives::sample_negative_edges;

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::util::ContentHasher;

pub const MODEL_FILE: &str = "model.bin";
pub const MODEL_META_FILE: &str = "model.meta.json";

/// Fits a classifier on a labeled edge set.
pub fn train_classifier(train: &LabeledEdgeSet, cfg: &ClassifierConfig, seed: u64) -> Result<Classifier> {
    if train.is_empty() {
        return Err(Error::Classifier("empty training set".into()));
    }
    let model = Model::fit(&train.features, &train.labels(), cfg, seed)?;
    Ok(Classifier {
        combiner: train.combiner,
        feature_dim: train.features.dim,
        seed,
        model,
    })
}

/// Scores candidates in input order.
pub fn predict_scores(
    model: &Classifier,
    candidates: &[Candidate],
    phi: &EmbeddingMatrix,
    combiner: Combiner,
) -> Result<Vec<f64>> {
    if combiner != model.combiner {
        return Err(Error::Contract(format!(
            "model was trained with the {} combiner, not {combiner}",
            model.combiner
        )));
    }
    let x = featurize_candidates(phi, candidates, combiner)?;
    if !candidates.is_empty() && x.dim != model.feature_dim {
        return Err(Error::Contract(format!(
            "feature dimension {} differs from the model's {}",
            x.dim, model.feature_dim
        )));
    }
    Ok(model.model.score_all(&x))
}

/// Hash of a labeled set's pairs, labels and features.
pub fn dataset_hash(set: &LabeledEdgeSet) -> String {
    let mut h = ContentHasher::new();
    for c in &set.candidates {
        h.update(c.device.as_bytes())
            .update(b"\t")
            .update(c.app.as_bytes())
            .update(if c.label { b"\t1\n" } else { b"\t0\n" });
    }
    for x in &set.features.data {
        h.update(&x.to_le_bytes());
    }
    h.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub format_version: String,
    pub kind: ClassifierKind,
    pub seed: u64,
    pub combiner: Combiner,
    pub feature_dim: usize,
    pub n_train: usize,
    pub train_hash: String,
    /// Hash of the graph the embedding was trained on.
    pub graph_hash: String,
    pub config: ClassifierConfig,
}

pub fn save_model(dir: &Path, model: &Classifier, meta: &ModelMeta) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    model.save(&dir.join(MODEL_FILE))?;
    let path = dir.join(MODEL_META_FILE);
    let json = serde_json::to_string_pretty(meta).expect("meta serializes");
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))
}

pub fn load_model(dir: &Path) -> Result<(Classifier, ModelMeta)> {
    let model = Classifier::load(&dir.join(MODEL_FILE))?;
    let path = dir.join(MODEL_META_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let meta: ModelMeta =
        serde_json::from_str(&text).map_err(|e| Error::format(MODEL_META_FILE, e.to_string()))?;
    if meta.kind != model.kind() || meta.combiner != model.combiner || meta.feature_dim != model.feature_dim {
        return Err(Error::format(MODEL_META_FILE, "metadata disagrees with the model blob"));
    }
    Ok((model, meta))
}
