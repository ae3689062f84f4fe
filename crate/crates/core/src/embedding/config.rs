use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-step transition rule for walks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// Step to a neighbor with probability proportional to its degree.
    #[default]
    DegreeWeighted,
    /// Step to a uniformly chosen neighbor.
    Uniform,
}

/// What `walk_length` counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkLengthUnit {
    #[default]
    Edges,
    Vertices,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub dim: usize,
    /// Highest proximity order K.
    pub max_order: usize,
    pub walk_length: usize,
    pub walk_length_unit: WalkLengthUnit,
    pub walks_per_vertex: usize,
    pub neg_samples: usize,
    pub margin_epsilon: f64,
    /// Divisor of the margin; defaults to `neg_samples`.
    pub margin_k: Option<usize>,
    pub reg_lambda: f64,
    pub learning_rate: f64,
    pub min_learning_rate: f64,
    pub epochs: usize,
    pub workers: usize,
    pub seed: u64,
    pub kernel: Kernel,
    /// Initial entries are uniform in `±init_scale / dim^(1/4)`.
    pub init_scale: f64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            dim: 128,
            max_order: 4,
            walk_length: 6,
            walk_length_unit: WalkLengthUnit::Edges,
            walks_per_vertex: 40,
            neg_samples: 50,
            margin_epsilon: 1.0,
            margin_k: None,
            reg_lambda: 1e-4,
            learning_rate: 0.025,
            min_learning_rate: 1e-4,
            epochs: 1,
            workers: 1,
            seed: 0,
            kernel: Kernel::DegreeWeighted,
            init_scale: 0.5,
        }
    }
}

impl TrainerConfig {
    /// Walk length in edges.
    pub fn walk_edges(&self) -> usize {
        match self.walk_length_unit {
            WalkLengthUnit::Edges => self.walk_length,
            WalkLengthUnit::Vertices => self.walk_length.saturating_sub(1),
        }
    }

    /// Highest app rank a walk can reach, capped at `max_order`.
    pub fn reachable_order(&self) -> usize {
        self.max_order.min(self.walk_edges().div_ceil(2))
    }

    /// Ranking gate `epsilon / k`.
    pub fn margin(&self) -> f64 {
        self.margin_epsilon / self.margin_k.unwrap_or(self.neg_samples) as f64
    }

    pub fn init_range(&self) -> f64 {
        self.init_scale / (self.dim as f64).powf(0.25)
    }

    /// Checks field ranges; returns advisory warnings for legal but
    /// suspicious settings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let positive = [
            ("dim", self.dim),
            ("max_order", self.max_order),
            ("walk_length", self.walk_length),
            ("neg_samples", self.neg_samples),
            ("workers", self.workers),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::config(name, "must be at least 1"));
            }
        }
        if self.margin_k == Some(0) {
            return Err(Error::config("margin_k", "must be at least 1"));
        }
        let rates = [
            ("margin_epsilon", self.margin_epsilon),
            ("learning_rate", self.learning_rate),
            ("min_learning_rate", self.min_learning_rate),
            ("init_scale", self.init_scale),
        ];
        for (name, v) in rates {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, "must be a positive finite number"));
            }
        }
        if !(self.reg_lambda.is_finite() && self.reg_lambda >= 0.0) {
            return Err(Error::config("reg_lambda", "must be a non-negative finite number"));
        }
        if self.min_learning_rate > self.learning_rate {
            return Err(Error::config("min_learning_rate", "exceeds learning_rate"));
        }
        let mut warnings = Vec::new();
        if self.walk_edges() < 2 * self.max_order - 1 {
            warnings.push(format!(
                "walk_length {} ({:?}) reaches app rank {} only; orders up to {} need {} edges",
                self.walk_length,
                self.walk_length_unit,
                self.reachable_order(),
                self.max_order,
                2 * self.max_order - 1
            ));
        }
        if self.walk_length_unit == WalkLengthUnit::Vertices {
            warnings.push("walk_length counts vertices; a walk of n vertices has n-1 edges".into());
        }
        if self.walks_per_vertex == 0 {
            warnings.push("walks_per_vertex is 0: training only applies regularization".into());
        }
        Ok(warnings)
    }
}
