//! Edge classifiers: random forest, logistic regression, gradient boosting.

mod boosting;
mod codec;
mod forest;
mod logistic;
mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use boosting::GradientBoosting;
pub use forest::RandomForest;
pub use logistic::Logistic;
pub use tree::{Tree, MAX_BINS};

use self::boosting::BoostingParams;
use self::codec::{Decoder, Encoder};
use self::forest::ForestParams;
use self::logistic::LogisticParams;
use super::features::{Combiner, Features};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 8] = b"PHAGMDL\0";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    #[default]
    RandomForest,
    Logistic,
    GradientBoosting,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [
        ClassifierKind::RandomForest,
        ClassifierKind::Logistic,
        ClassifierKind::GradientBoosting,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::RandomForest => "random_forest",
            ClassifierKind::Logistic => "logistic",
            ClassifierKind::GradientBoosting => "gradient_boosting",
        }
    }

    fn code(self) -> u32 {
        self as u32
    }

    fn from_code(c: u32) -> Result<Self> {
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.code() == c)
            .ok_or_else(|| Error::format("model blob", format!("unknown classifier code {c}")))
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config("classifier", format!("unknown classifier `{s}`")))
    }
}

impl std::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Classifier choice and hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    pub n_trees: usize,
    /// Forest depth limit; `None` grows until leaves are pure.
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub boosting_rounds: usize,
    pub boosting_depth: usize,
    pub boosting_learning_rate: f64,
    pub boosting_lambda: f64,
    pub logistic_l2: f64,
    pub logistic_max_iter: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            kind: ClassifierKind::RandomForest,
            n_trees: 20,
            max_depth: None,
            bootstrap: true,
            boosting_rounds: 100,
            boosting_depth: 3,
            boosting_learning_rate: 0.1,
            boosting_lambda: 1.0,
            logistic_l2: 1e-4,
            logistic_max_iter: 300,
        }
    }
}

impl ClassifierConfig {
    pub fn of_kind(kind: ClassifierKind) -> Self {
        ClassifierConfig {
            kind,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_trees", self.n_trees),
            ("boosting_rounds", self.boosting_rounds),
            ("boosting_depth", self.boosting_depth),
            ("logistic_max_iter", self.logistic_max_iter),
        ] {
            if v == 0 {
                return Err(Error::config(name, "must be at least 1"));
            }
        }
        if self.max_depth == Some(0) {
            return Err(Error::config("max_depth", "must be at least 1"));
        }
        if !(self.boosting_learning_rate > 0.0 && self.boosting_learning_rate.is_finite()) {
            return Err(Error::config("boosting_learning_rate", "must be a positive finite number"));
        }
        if !(self.boosting_lambda >= 0.0 && self.logistic_l2 >= 0.0) {
            return Err(Error::config("logistic_l2", "penalties must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    RandomForest(RandomForest),
    Logistic(Logistic),
    GradientBoosting(GradientBoosting),
}

impl Model {
    /// Fits on raw features. Both classes must be present.
    pub fn fit(x: &Features, y: &[bool], cfg: &ClassifierConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if x.len() != y.len() {
            return Err(Error::Contract(format!("{} feature rows for {} labels", x.len(), y.len())));
        }
        let pos = y.iter().filter(|&&l| l).count();
        if pos == 0 || pos == y.len() {
            return Err(Error::Classifier("training data contains a single class".into()));
        }
        if x.dim == 0 {
            return Err(Error::Classifier("zero-dimensional features".into()));
        }
        Ok(match cfg.kind {
            ClassifierKind::RandomForest => Model::RandomForest(RandomForest::fit(
                x,
                y,
                &ForestParams {
                    n_trees: cfg.n_trees,
                    max_depth: cfg.max_depth,
                    bootstrap: cfg.bootstrap,
                },
                seed,
            )),
            ClassifierKind::Logistic => Model::Logistic(Logistic::fit(
                x,
                y,
                &LogisticParams {
                    l2: cfg.logistic_l2,
                    max_iter: cfg.logistic_max_iter,
                    tol: 1e-10,
                },
            )),
            ClassifierKind::GradientBoosting => Model::GradientBoosting(GradientBoosting::fit(
                x,
                y,
                &BoostingParams {
                    rounds: cfg.boosting_rounds,
                    max_depth: cfg.boosting_depth,
                    learning_rate: cfg.boosting_learning_rate,
                    lambda: cfg.boosting_lambda,
                },
                seed,
            )),
        })
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            Model::RandomForest(_) => ClassifierKind::RandomForest,
            Model::Logistic(_) => ClassifierKind::Logistic,
            Model::GradientBoosting(_) => ClassifierKind::GradientBoosting,
        }
    }

    /// Positive-class score in `[0, 1]`.
    pub fn score(&self, x: &[f32]) -> f64 {
        match self {
            Model::RandomForest(m) => m.predict(x),
            Model::Logistic(m) => m.predict(x),
            Model::GradientBoosting(m) => m.predict(x),
        }
    }

    pub fn score_all(&self, x: &Features) -> Vec<f64> {
        crate::par::map_range(x.len(), |i| self.score(x.row(i)))
    }
}

/// A fitted model bound to the edge representation it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub combiner: Combiner,
    pub feature_dim: usize,
    pub seed: u64,
    pub model: Model,
}

impl Classifier {
    pub fn kind(&self) -> ClassifierKind {
        self.model.kind()
    }

    /// Serialises to the versioned binary blob.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.buf.extend_from_slice(MODEL_MAGIC);
        e.u32(MODEL_VERSION);
        e.u32(self.kind().code());
        e.bytes(self.combiner.name().as_bytes());
        e.u64(self.feature_dim as u64);
        e.u64(self.seed);
        match &self.model {
            Model::RandomForest(f) => {
                e.u64(f.trees.len() as u64);
                f.trees.iter().for_each(|t| e.tree(t));
            }
            Model::Logistic(l) => {
                e.f64s(&l.mean);
                e.f64s(&l.scale);
                e.f64s(&l.weights);
                e.f64(l.bias);
            }
            Model::GradientBoosting(g) => {
                e.f64(g.base);
                e.f64(g.learning_rate);
                e.u64(g.trees.len() as u64);
                g.trees.iter().for_each(|t| e.tree(t));
            }
        }
        e.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..8] != MODEL_MAGIC {
            return Err(Error::format("model blob", "bad magic header"));
        }
        let mut d = Decoder::new(&bytes[8..]);
        let version = d.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::format("model blob", format!("unsupported version {version}")));
        }
        let kind = ClassifierKind::from_code(d.u32()?)?;
        let combiner: Combiner = std::str::from_utf8(d.bytes()?)
            .map_err(|e| Error::format("model blob", e.to_string()))?
            .parse()?;
        let feature_dim = d.u64()? as usize;
        let seed = d.u64()?;
        let trees = |d: &mut Decoder| -> Result<Vec<Tree>> {
            let n = d.u64()?;
            let trees = (0..n).map(|_| d.tree()).collect::<Result<Vec<_>>>()?;
            let bad = trees
                .iter()
                .flat_map(|t| &t.feature)
                .any(|&f| f != u32::MAX && f as usize >= feature_dim);
            if bad {
                return Err(Error::format("model blob", "split feature out of range"));
            }
            Ok(trees)
        };
        let model = match kind {
            ClassifierKind::RandomForest => Model::RandomForest(RandomForest { trees: trees(&mut d)? }),
            ClassifierKind::Logistic => {
                let l = Logistic {
                    mean: d.f64s()?,
                    scale: d.f64s()?,
                    weights: d.f64s()?,
                    bias: d.f64()?,
                };
                if [l.mean.len(), l.scale.len(), l.weights.len()] != [feature_dim; 3] {
                    return Err(Error::format("model blob", "logistic dimension mismatch"));
                }
                Model::Logistic(l)
            }
            ClassifierKind::GradientBoosting => {
                let base = d.f64()?;
                let learning_rate = d.f64()?;
                Model::GradientBoosting(GradientBoosting {
                    base,
                    learning_rate,
                    trees: trees(&mut d)?,
                })
            }
        };
        d.finish()?;
        Ok(Classifier {
            combiner,
            feature_dim,
            seed,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
