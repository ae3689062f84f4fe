use super::matrix::{EmbeddingMatrix, LocalStore, RowStore};
use super::walk::Pair;
use crate::error::{Error, Result};

/// Upper clamp on the score gap before taking its log.
pub const DELTA_CAP: f64 = 1e6;

/// Loss and gradient of one ranking step.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingGradient {
    pub loss: f64,
    pub device: Vec<f64>,
    pub positive: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
    /// Negatives whose gap passed the margin.
    pub active: usize,
}

/// Reusable buffers for the hot loop.
pub(crate) struct Scratch {
    pub d: Vec<f64>,
    pub p: Vec<f64>,
    pub n: Vec<Vec<f64>>,
    pub gd: Vec<f64>,
    pub gp: Vec<f64>,
    pub gn: Vec<Vec<f64>>,
}

impl Scratch {
    pub fn new(dim: usize, negatives: usize) -> Self {
        Scratch {
            d: vec![0.0; dim],
            p: vec![0.0; dim],
            n: vec![vec![0.0; dim]; negatives],
            gd: vec![0.0; dim],
            gp: vec![0.0; dim],
            gn: vec![vec![0.0; dim]; negatives],
        }
    }

    fn ensure(&mut self, negatives: usize) {
        let dim = self.d.len();
        while self.n.len() < negatives {
            self.n.push(vec![0.0; dim]);
            self.gn.push(vec![0.0; dim]);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Fills the gradient buffers from the loaded rows and returns
/// `(loss, active)`. The ranking part is averaged over the `k` negatives.
pub(crate) fn accumulate(s: &mut Scratch, k: usize, weight: f64, margin: f64, lambda: f64) -> Result<(f64, usize)> {
    let pos_score = dot(&s.d, &s.p);
    if !pos_score.is_finite() {
        return Err(Error::Diverged(format!("non-finite positive score {pos_score}")));
    }
    let scale = weight / k as f64;
    let mut loss = lambda * (sq(&s.d) + sq(&s.p));
    let mut active = 0;
    for (x, g) in s.gd.iter_mut().zip(&s.d) {
        *x = 2.0 * lambda * g;
    }
    for (x, g) in s.gp.iter_mut().zip(&s.p) {
        *x = 2.0 * lambda * g;
    }
    for j in 0..k {
        let (n, gn) = (&s.n[j], &mut s.gn[j]);
        let neg_score = dot(&s.d, n);
        if !neg_score.is_finite() {
            return Err(Error::Diverged(format!("non-finite negative score {neg_score}")));
        }
        loss += lambda * sq(n);
        for (x, v) in gn.iter_mut().zip(n) {
            *x = 2.0 * lambda * v;
        }
        let delta = neg_score - pos_score;
        if delta <= margin {
            continue;
        }
        active += 1;
        if delta >= DELTA_CAP {
            loss += scale * DELTA_CAP.ln();
            continue;
        }
        loss += scale * delta.ln();
        let c = scale / delta;
        for i in 0..s.d.len() {
            s.gd[i] += c * (n[i] - s.p[i]);
            gn[i] += c * s.d[i];
            s.gp[i] -= c * s.d[i];
        }
    }
    Ok((loss, active))
}

/// Loss and analytic gradient of one ranking step on explicit vectors:
/// `weight * mean_j 1[delta_j > margin] ln(delta_j)` plus `lambda` times the
/// squared norms of all rows involved.
pub fn ranking_gradient(
    device: &[f64],
    positive: &[f64],
    negatives: &[Vec<f64>],
    weight: f64,
    margin: f64,
    lambda: f64,
) -> Result<RankingGradient> {
    let dim = device.len();
    if positive.len() != dim || negatives.iter().any(|n| n.len() != dim) {
        return Err(Error::Contract("ranking rows differ in dimension".into()));
    }
    if negatives.is_empty() {
        return Err(Error::Contract("ranking step needs at least one negative".into()));
    }
    let mut s = Scratch::new(dim, negatives.len());
    s.d.copy_from_slice(device);
    s.p.copy_from_slice(positive);
    for (dst, src) in s.n.iter_mut().zip(negatives) {
        dst.copy_from_slice(src);
    }
    let (loss, active) = accumulate(&mut s, negatives.len(), weight, margin, lambda)?;
    Ok(RankingGradient {
        loss,
        device: s.gd,
        positive: s.gp,
        negatives: s.gn,
        active,
    })
}

/// Loads rows, computes the gradient and applies `row -= lr * grad`.
pub(crate) fn step_store<S: RowStore>(
    store: &S,
    n_devices: usize,
    pair: &Pair,
    negatives: &[u32],
    margin: f64,
    lambda: f64,
    lr: f64,
    s: &mut Scratch,
) -> Result<(f64, usize)> {
    s.ensure(negatives.len());
    let d_row = pair.device as usize;
    let p_row = n_devices + pair.app as usize;
    store.load(d_row, &mut s.d);
    store.load(p_row, &mut s.p);
    for (j, &m) in negatives.iter().enumerate() {
        store.load(n_devices + m as usize, &mut s.n[j]);
    }
    let out = accumulate(s, negatives.len(), pair.weight, margin, lambda)?;
    store.add(d_row, -lr, &s.gd);
    store.add(p_row, -lr, &s.gp);
    for (j, &m) in negatives.iter().enumerate() {
        store.add(n_devices + m as usize, -lr, &s.gn[j]);
    }
    Ok(out)
}

/// One ranking update on `phi` for `pair` against `negatives` (app
/// indices). Only the rows of the device, the positive app and the negative
/// apps change. Returns the step loss.
pub fn ranking_step(
    phi: &mut EmbeddingMatrix,
    pair: &Pair,
    negatives: &[u32],
    margin: f64,
    lambda: f64,
    lr: f64,
) -> Result<f64> {
    if negatives.is_empty() {
        return Err(Error::Contract("ranking step needs at least one negative".into()));
    }
    let (nd, na, dim) = (phi.n_devices(), phi.n_apps(), phi.dim());
    if pair.device as usize >= nd {
        return Err(Error::Index {
            what: "device",
            index: pair.device as usize,
            size: nd,
        });
    }
    if let Some(&m) = std::iter::once(&pair.app).chain(negatives).find(|&&m| m as usize >= na) {
        return Err(Error::Index {
            what: "app",
            index: m as usize,
            size: na,
        });
    }
    let mut s = Scratch::new(dim, negatives.len());
    let store = LocalStore(std::cell::RefCell::new(phi));
    step_store(&store, nd, pair, negatives, margin, lambda, lr, &mut s).map(|(loss, _)| loss)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inactive_gap_leaves_only_regularization() {
        let g = ranking_gradient(&[1.0, 0.0], &[1.0, 0.0], &[vec![0.0, 1.0]], 1.0, 0.02, 0.0).unwrap();
        assert_eq!(g.active, 0);
        assert_eq!(g.loss, 0.0);
        assert!(g.device.iter().chain(&g.positive).all(|&x| x == 0.0));
    }

    #[test]
    fn decay_weight_halves_ranking_gradient() {
        let (d, p, n) = ([0.3, 0.9], [0.1, 0.2], vec![vec![0.8, 0.7]]);
        let g1 = ranking_gradient(&d, &p, &n, 1.0, 0.02, 0.0).unwrap();
        let g2 = ranking_gradient(&d, &p, &n, 0.5, 0.02, 0.0).unwrap();
        assert_eq!(g1.active, 1);
        for (a, b) in g1.device.iter().zip(&g2.device) {
            assert!((a - 2.0 * b).abs() < 1e-15);
        }
    }

    #[test]
    fn step_touches_only_involved_rows() {
        let mut phi = EmbeddingMatrix::from_rows(2, 3, 2, (0..10).map(|i| i as f32 * 0.1 - 0.4).collect()).unwrap();
        let before = phi.clone();
        let pair = Pair {
            device: 1,
            app: 0,
            order: 1,
            weight: 1.0,
        };
        ranking_step(&mut phi, &pair, &[2], 0.02, 1e-3, 0.1).unwrap();
        assert_eq!(phi.row(0), before.row(0));
        assert_eq!(phi.app(1), before.app(1));
        assert_ne!(phi.device(1), before.device(1));
    }

    #[test]
    fn huge_rows_report_divergence() {
        let mut phi = EmbeddingMatrix::from_rows(1, 2, 1, vec![f32::INFINITY, 1.0, 1.0]).unwrap();
        let pair = Pair {
            device: 0,
            app: 0,
            order: 1,
            weight: 1.0,
        };
        assert!(matches!(
            ranking_step(&mut phi, &pair, &[1], 0.02, 0.0, 0.1),
            Err(Error::Diverged(_))
        ));
    }
}
