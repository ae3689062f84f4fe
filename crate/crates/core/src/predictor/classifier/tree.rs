use rand::seq::SliceRandom;
use rand::Rng;

use crate::par;
use crate::predictor::features::Features;

/// Upper bound on histogram bins per feature.
pub const MAX_BINS: usize = 64;
const LEAF: u32 = u32::MAX;
/// Rows used to place bin edges.
const BIN_SAMPLE: usize = 50_000;

/// Quantile bin edges per feature and the binned training matrix
/// (feature-major).
pub(crate) struct Binned {
    pub n: usize,
    pub thresholds: Vec<Vec<f32>>,
    pub codes: Vec<u8>,
}

impl Binned {
    pub fn new(x: &Features) -> Self {
        let n = x.len();
        let stride = n.div_ceil(BIN_SAMPLE).max(1);
        let per_feature = par::map_range(x.dim, |f| {
            let mut vals: Vec<f32> = (0..n).step_by(stride).map(|i| x.row(i)[f]).collect();
            vals.sort_by(f32::total_cmp);
            let mut distinct = vals.clone();
            distinct.dedup();
            let mut edges: Vec<f32> = if distinct.len() <= MAX_BINS {
                distinct
            } else {
                (1..MAX_BINS).map(|k| vals[k * vals.len() / MAX_BINS]).collect()
            };
            edges.dedup();
            // the largest value never needs an edge above it
            if edges.last() == vals.last() {
                edges.pop();
            }
            let codes: Vec<u8> = (0..n)
                .map(|i| edges.partition_point(|&t| t < x.row(i)[f]) as u8)
                .collect();
            (edges, codes)
        });
        let mut thresholds = Vec::with_capacity(x.dim);
        let mut codes = Vec::with_capacity(x.dim * n);
        for (t, c) in per_feature {
            thresholds.push(t);
            codes.extend(c);
        }
        Binned { n, thresholds, codes }
    }

    fn code(&self, f: usize, i: u32) -> usize {
        self.codes[f * self.n + i as usize] as usize
    }
}

/// Per-sample split statistics: `(a, b)` summed plus a count.
#[derive(Clone, Copy, Default)]
struct Stat {
    a: f64,
    b: f64,
    n: f64,
}

impl Stat {
    fn add(&mut self, o: Stat) {
        self.a += o.a;
        self.b += o.b;
        self.n += o.n;
    }

    fn sub(self, o: Stat) -> Stat {
        Stat {
            a: self.a - o.a,
            b: self.b - o.b,
            n: self.n - o.n,
        }
    }
}

/// Split criterion over summed sample statistics.
#[derive(Clone, Copy)]
pub(crate) enum Criterion {
    /// `a` = label, `b` = 1; leaf is the positive fraction.
    Gini,
    /// `a` = gradient, `b` = hessian; leaf is the Newton step.
    Newton { lambda: f64, min_hessian: f64 },
}

impl Criterion {
    fn score(self, s: Stat) -> f64 {
        match self {
            Criterion::Gini => (s.a * s.a + (s.n - s.a) * (s.n - s.a)) / s.n,
            Criterion::Newton { lambda, .. } => s.a * s.a / (s.b + lambda),
        }
    }

    fn leaf(self, s: Stat) -> f32 {
        match self {
            Criterion::Gini => (s.a / s.n) as f32,
            Criterion::Newton { lambda, .. } => (-s.a / (s.b + lambda)) as f32,
        }
    }

    fn admissible(self, s: Stat) -> bool {
        match self {
            Criterion::Gini => s.n >= 1.0,
            Criterion::Newton { min_hessian, .. } => s.n >= 1.0 && s.b >= min_hessian,
        }
    }

    fn pure(self, s: Stat) -> bool {
        match self {
            Criterion::Gini => s.a == 0.0 || s.a == s.n,
            Criterion::Newton { .. } => false,
        }
    }
}

pub(crate) struct TreeParams {
    pub max_depth: Option<usize>,
    /// Features inspected per node before accepting the best valid split.
    pub mtry: usize,
    pub min_samples_split: usize,
}

/// Flat binary tree; `feature[i] == u32::MAX` marks a leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub feature: Vec<u32>,
    pub threshold: Vec<f32>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub value: Vec<f32>,
}

impl Tree {
    fn push(&mut self, value: f32) -> usize {
        self.feature.push(LEAF);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(value);
        self.feature.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn predict(&self, x: &[f32]) -> f32 {
        let mut i = 0;
        while self.feature[i] != LEAF {
            i = if x[self.feature[i] as usize] <= self.threshold[i] {
                self.left[i] as usize
            } else {
                self.right[i] as usize
            };
        }
        self.value[i]
    }

    /// Grows a tree over `idx` (sample ids, repeats allowed) with per-sample
    /// statistics `(a[i], b[i])`.
    pub(crate) fn grow<R: Rng + ?Sized>(
        binned: &Binned,
        a: &[f64],
        b: &[f64],
        mut idx: Vec<u32>,
        criterion: Criterion,
        params: &TreeParams,
        rng: &mut R,
    ) -> Tree {
        let mut tree = Tree {
            feature: Vec::new(),
            threshold: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
            value: Vec::new(),
        };
        let dim = binned.thresholds.len();
        let total = |ids: &[u32]| {
            let mut s = Stat::default();
            for &i in ids {
                s.add(Stat {
                    a: a[i as usize],
                    b: b[i as usize],
                    n: 1.0,
                });
            }
            s
        };
        let root_stat = total(&idx);
        let root = tree.push(criterion.leaf(root_stat));
        let mut stack = vec![(root, 0usize, idx.len(), 0usize, root_stat)];
        let mut order: Vec<usize> = (0..dim).collect();
        let mut hist = vec![Stat::default(); MAX_BINS];
        while let Some((node, lo, hi, depth, stat)) = stack.pop() {
            let ids = &idx[lo..hi];
            if hi - lo < params.min_samples_split
                || params.max_depth.is_some_and(|m| depth >= m)
                || criterion.pure(stat)
            {
                continue;
            }
            let parent = criterion.score(stat);
            order.shuffle(rng);
            let mut best: Option<(f64, usize, usize, Stat)> = None;
            for (seen, &f) in order.iter().enumerate() {
                if seen >= params.mtry && best.is_some() {
                    break;
                }
                let bins = binned.thresholds[f].len() + 1;
                if bins < 2 {
                    continue;
                }
                hist[..bins].iter_mut().for_each(|h| *h = Stat::default());
                for &i in ids {
                    hist[binned.code(f, i)].add(Stat {
                        a: a[i as usize],
                        b: b[i as usize],
                        n: 1.0,
                    });
                }
                let mut left = Stat::default();
                for (bin, h) in hist[..bins - 1].iter().enumerate() {
                    left.add(*h);
                    let right = stat.sub(left);
                    if !criterion.admissible(left) || !criterion.admissible(right) {
                        continue;
                    }
                    let gain = criterion.score(left) + criterion.score(right) - parent;
                    if gain > 1e-12 && best.is_none_or(|b| gain > b.0) {
                        best = Some((gain, f, bin, left));
                    }
                }
            }
            let Some((_, f, bin, left_stat)) = best else {
                continue;
            };
            // partition ids so that code <= bin comes first
            let slice = &mut idx[lo..hi];
            let mut mid = 0;
            for j in 0..slice.len() {
                if binned.code(f, slice[j]) <= bin {
                    slice.swap(mid, j);
                    mid += 1;
                }
            }
            let right_stat = stat.sub(left_stat);
            let l = tree.push(criterion.leaf(left_stat));
            let r = tree.push(criterion.leaf(right_stat));
            tree.feature[node] = f as u32;
            tree.threshold[node] = binned.thresholds[f][bin];
            tree.left[node] = l as u32;
            tree.right[node] = r as u32;
            stack.push((l, lo, lo + mid, depth + 1, left_stat));
            stack.push((r, lo + mid, hi, depth + 1, right_stat));
        }
        tree
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::rng_for;

    #[test]
    fn bins_reproduce_threshold_comparisons() {
        let rows: Vec<Vec<f32>> = (0..500).map(|i| vec![(i % 37) as f32 * 0.5, (i * 7 % 11) as f32]).collect();
        let x = Features::from_rows(&rows).unwrap();
        let b = Binned::new(&x);
        for f in 0..2 {
            for i in 0..500u32 {
                let v = x.row(i as usize)[f];
                let c = b.code(f, i);
                for (k, &t) in b.thresholds[f].iter().enumerate() {
                    assert_eq!(c <= k, v <= t);
                }
            }
        }
    }

    #[test]
    fn gini_tree_fits_interval_labels() {
        let rows: Vec<Vec<f32>> = (0..200).map(|i| vec![(i % 60) as f32]).collect();
        let y: Vec<f64> = (0..200).map(|i| ((15..40).contains(&(i % 60))) as u8 as f64).collect();
        let x = Features::from_rows(&rows).unwrap();
        let b = Binned::new(&x);
        let ones = vec![1.0; 200];
        let params = TreeParams {
            max_depth: None,
            mtry: 1,
            min_samples_split: 2,
        };
        let t = Tree::grow(&b, &y, &ones, (0..200).collect(), Criterion::Gini, &params, &mut rng_for(0, "t", 0));
        for i in 0..200 {
            assert_eq!(t.predict(x.row(i)) as f64, y[i]);
        }
    }
}
