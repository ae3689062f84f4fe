use super::tree::{Binned, Criterion, Tree, TreeParams};
use crate::par;
use crate::predictor::features::Features;
use crate::util::rng_for;

/// Gradient-boosted depth-limited trees on the logistic loss.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBoosting {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

pub(crate) struct BoostingParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub lambda: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl GradientBoosting {
    pub(crate) fn fit(x: &Features, y: &[bool], params: &BoostingParams, seed: u64) -> Self {
        let binned = Binned::new(x);
        let n = y.len();
        let pos = y.iter().filter(|&&l| l).count() as f64;
        let base = (pos / (n as f64 - pos)).ln();
        let mut f = vec![base; n];
        let tree_params = TreeParams {
            max_depth: Some(params.max_depth),
            mtry: x.dim,
            min_samples_split: 2,
        };
        let criterion = Criterion::Newton {
            lambda: params.lambda,
            min_hessian: 1e-3,
        };
        let mut trees = Vec::with_capacity(params.rounds);
        let mut rng = rng_for(seed, "boosting", 0);
        for _ in 0..params.rounds {
            let p: Vec<f64> = f.iter().map(|&v| sigmoid(v)).collect();
            let g: Vec<f64> = p.iter().zip(y).map(|(&p, &l)| p - l as u8 as f64).collect();
            let h: Vec<f64> = p.iter().map(|&p| (p * (1.0 - p)).max(1e-12)).collect();
            let tree = Tree::grow(&binned, &g, &h, (0..n as u32).collect(), criterion, &tree_params, &mut rng);
            let step = par::map_range(n, |i| tree.predict(x.row(i)) as f64);
            for (v, s) in f.iter_mut().zip(step) {
                *v += params.learning_rate * s;
            }
            trees.push(tree);
        }
        GradientBoosting {
            base,
            learning_rate: params.learning_rate,
            trees,
        }
    }

    pub fn predict(&self, x: &[f32]) -> f64 {
        let f = self.base + self.learning_rate * self.trees.iter().map(|t| t.predict(x) as f64).sum::<f64>();
        sigmoid(f)
    }
}
