use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::{Combiner, Features};
use super::negatives::sample_negative_edges;
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, TemporalSplit};
use crate::par;
use crate::util::derive_seed;

/// Treatment of test edges whose device or app is absent from training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColdPolicy {
    /// Remove them from the test positives and report the count.
    #[default]
    Drop,
    /// Keep them; missing rows are featurized as zero vectors.
    ZeroVector,
}

/// A labeled device–app pair. Indices refer to the training graph and are
/// `None` for cold vertices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Candidate {
    pub device: String,
    pub app: String,
    pub device_index: Option<u32>,
    pub app_index: Option<u32>,
    pub label: bool,
}

impl Candidate {
    fn warm(graph: &BipartiteGraph, d: u32, m: u32, label: bool) -> Self {
        Candidate {
            device: graph.devices().token(d).to_owned(),
            app: graph.apps().token(m).to_owned(),
            device_index: Some(d),
            app_index: Some(m),
            label,
        }
    }

    pub fn indices(&self) -> Option<(u32, u32)> {
        Some((self.device_index?, self.app_index?))
    }
}

/// Balanced train and test candidate lists, built without reference to any
/// embedding so that every method scores the same pairs.
#[derive(Debug, Clone)]
pub struct CandidateSplit {
    pub train: Vec<Candidate>,
    pub test: Vec<Candidate>,
    /// Cold test positives removed under [`ColdPolicy::Drop`].
    pub cold_dropped: usize,
    /// Cold test positives kept under [`ColdPolicy::ZeroVector`].
    pub cold_kept: usize,
    pub policy: ColdPolicy,
}

pub fn build_candidates(
    split: &TemporalSplit,
    graph_train: &BipartiteGraph,
    policy: ColdPolicy,
    seed: u64,
) -> Result<CandidateSplit> {
    let mut train = Vec::with_capacity(2 * split.train.len());
    for e in &split.train {
        let (Some(d), Some(m)) = (graph_train.devices().get(&e.device), graph_train.apps().get(&e.app)) else {
            return Err(Error::Contract(format!(
                "train edge ({}, {}) missing from the training graph",
                e.device, e.app
            )));
        };
        train.push(Candidate::warm(graph_train, d, m, true));
    }
    let mut test = Vec::new();
    let (mut cold_dropped, mut cold_kept) = (0, 0);
    let mut test_pairs = HashSet::new();
    for e in &split.test {
        let d = graph_train.devices().get(&e.edge.device);
        let m = graph_train.apps().get(&e.edge.app);
        if let (Some(d), Some(m)) = (d, m) {
            test_pairs.insert((d, m));
            test.push(Candidate::warm(graph_train, d, m, true));
            continue;
        }
        match policy {
            ColdPolicy::Drop => cold_dropped += 1,
            ColdPolicy::ZeroVector => {
                cold_kept += 1;
                test.push(Candidate {
                    device: e.edge.device.clone(),
                    app: e.edge.app.clone(),
                    device_index: d,
                    app_index: m,
                    label: true,
                });
            }
        }
    }
    if test.is_empty() {
        return Err(Error::Split("no test positives remain after the cold policy".into()));
    }

    let train_neg = sample_negative_edges(graph_train, train.len(), &test_pairs, derive_seed(seed, "train-negatives", 0))?;
    let mut exclusion = test_pairs;
    exclusion.extend(train_neg.iter().copied());
    let test_neg = sample_negative_edges(graph_train, test.len(), &exclusion, derive_seed(seed, "test-negatives", 0))?;
    train.extend(train_neg.into_iter().map(|(d, m)| Candidate::warm(graph_train, d, m, false)));
    test.extend(test_neg.into_iter().map(|(d, m)| Candidate::warm(graph_train, d, m, false)));
    Ok(CandidateSplit {
        train,
        test,
        cold_dropped,
        cold_kept,
        policy,
    })
}

/// Candidates with their edge features.
#[derive(Debug, Clone)]
pub struct LabeledEdgeSet {
    pub candidates: Vec<Candidate>,
    pub features: Features,
    pub combiner: Combiner,
}

impl LabeledEdgeSet {
    pub fn labels(&self) -> Vec<bool> {
        self.candidates.iter().map(|c| c.label).collect()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn n_positive(&self) -> usize {
        self.candidates.iter().filter(|c| c.label).count()
    }
}

/// Features for each candidate; missing rows count as zero vectors.
pub fn featurize_candidates(phi: &EmbeddingMatrix, candidates: &[Candidate], combiner: Combiner) -> Result<Features> {
    let zero = vec![0.0f32; phi.dim()];
    let rows = par::map_slice(candidates, |c| -> Result<Vec<f32>> {
        let a = match c.device_index {
            Some(d) if (d as usize) < phi.n_devices() => phi.device(d),
            Some(d) => {
                return Err(Error::Index {
                    what: "device",
                    index: d as usize,
                    size: phi.n_devices(),
                })
            }
            None => &zero,
        };
        let b = match c.app_index {
            Some(m) if (m as usize) < phi.n_apps() => phi.app(m),
            Some(m) => {
                return Err(Error::Index {
                    what: "app",
                    index: m as usize,
                    size: phi.n_apps(),
                })
            }
            None => &zero,
        };
        combiner.combine(a, b)
    });
    let mut f = Features::new(combiner.output_dim(phi.dim()));
    f.data.reserve(candidates.len() * f.dim);
    for r in rows {
        f.push(&r?)?;
    }
    Ok(f)
}

pub fn featurize_set(phi: &EmbeddingMatrix, candidates: &[Candidate], combiner: Combiner) -> Result<LabeledEdgeSet> {
    Ok(LabeledEdgeSet {
        features: featurize_candidates(phi, candidates, combiner)?,
        candidates: candidates.to_vec(),
        combiner,
    })
}

/// Candidates plus features for both sides of a split.
pub fn build_datasets(
    phi: &EmbeddingMatrix,
    split: &TemporalSplit,
    graph_train: &BipartiteGraph,
    combiner: Combiner,
    policy: ColdPolicy,
    seed: u64,
) -> Result<(LabeledEdgeSet, LabeledEdgeSet, CandidateSplit)> {
    if phi.n_devices() != graph_train.n_devices() || phi.n_apps() != graph_train.n_apps() {
        return Err(Error::Contract("embedding rows do not match the training graph".into()));
    }
    let c = build_candidates(split, graph_train, policy, seed)?;
    let train = featurize_set(phi, &c.train, combiner)?;
    let test = featurize_set(phi, &c.test, combiner)?;
    Ok((train, test, c))
}

/// Writes `edges_{name}.csv` (`device,app,label`) and `features_{name}.tsv`
/// (`device \t app \t v1 .. vk`).
pub fn write_labeled_set(dir: &Path, name: &str, set: &LabeledEdgeSet) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(format!("edges_{name}.csv"));
    let as_fmt = |e: csv::Error| Error::format(csv_path.display().to_string(), e.to_string());
    let mut w = csv::Writer::from_path(&csv_path).map_err(as_fmt)?;
    w.write_record(["device", "app", "label"]).map_err(as_fmt)?;
    for c in &set.candidates {
        w.write_record([c.device.as_str(), c.app.as_str(), if c.label { "1" } else { "0" }])
            .map_err(as_fmt)?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;

    let tsv_path = dir.join(format!("features_{name}.tsv"));
    let f = File::create(&tsv_path).map_err(|e| Error::io(&tsv_path, e))?;
    let mut w = BufWriter::new(f);
    for (i, c) in set.candidates.iter().enumerate() {
        write!(w, "{}\t{}", c.device, c.app)?;
        for x in set.features.row(i) {
            write!(w, "\t{x}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
