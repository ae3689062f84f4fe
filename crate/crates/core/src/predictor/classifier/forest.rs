use rand::Rng;

use super::tree::{Binned, Criterion, Tree, TreeParams};
use crate::par;
use crate::predictor::features::Features;
use crate::util::rng_for;

/// Bagged Gini trees with per-node feature subsampling.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    pub trees: Vec<Tree>,
}

pub(crate) struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
}

impl RandomForest {
    pub(crate) fn fit(x: &Features, y: &[bool], params: &ForestParams, seed: u64) -> Self {
        let binned = Binned::new(x);
        let a: Vec<f64> = y.iter().map(|&l| l as u8 as f64).collect();
        let ones = vec![1.0; y.len()];
        let n = y.len();
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            mtry: ((x.dim as f64).sqrt().round() as usize).max(1),
            min_samples_split: 2,
        };
        let trees = par::map_range(params.n_trees, |t| {
            let mut rng = rng_for(seed, "forest-tree", t as u64);
            let idx: Vec<u32> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n as u32)).collect()
            } else {
                (0..n as u32).collect()
            };
            Tree::grow(&binned, &a, &ones, idx, Criterion::Gini, &tree_params, &mut rng)
        });
        RandomForest { trees }
    }

    pub fn predict(&self, x: &[f32]) -> f64 {
        self.trees.iter().map(|t| t.predict(x) as f64).sum::<f64>() / self.trees.len() as f64
    }
}
