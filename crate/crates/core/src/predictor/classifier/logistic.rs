use crate::par;
use crate::predictor::features::Features;

/// L2-regularised logistic regression on standardised features.
#[derive(Debug, Clone, PartialEq)]
pub struct Logistic {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

pub(crate) struct LogisticParams {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Mean log loss and gradient `(w, b)` over standardised rows `z`.
fn loss_grad(z: &[Vec<f64>], y: &[f64], w: &[f64], b: f64, l2: f64) -> (f64, Vec<f64>, f64) {
    const BLOCK: usize = 2048;
    let dim = w.len();
    let parts = par::map_range(z.len().div_ceil(BLOCK), |k| {
        let mut g = vec![0.0; dim];
        let (mut gb, mut loss) = (0.0, 0.0);
        for i in k * BLOCK..((k + 1) * BLOCK).min(z.len()) {
            let s: f64 = b + z[i].iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
            // log(1 + e^s) - y s, stable
            loss += s.max(0.0) + (-s.abs()).exp().ln_1p() - y[i] * s;
            let r = sigmoid(s) - y[i];
            for (gj, zj) in g.iter_mut().zip(&z[i]) {
                *gj += r * zj;
            }
            gb += r;
        }
        (loss, g, gb)
    });
    let n = z.len() as f64;
    let mut g = vec![0.0; dim];
    let (mut loss, mut gb) = (0.0, 0.0);
    for (l, gp, b) in parts {
        loss += l;
        gb += b;
        for (a, c) in g.iter_mut().zip(gp) {
            *a += c;
        }
    }
    let reg: f64 = w.iter().map(|v| v * v).sum::<f64>();
    for (gj, wj) in g.iter_mut().zip(w) {
        *gj = *gj / n + 2.0 * l2 * wj;
    }
    (loss / n + l2 * reg, g, gb / n)
}

impl Logistic {
    pub(crate) fn fit(x: &Features, y: &[bool], params: &LogisticParams) -> Self {
        let (n, dim) = (x.len(), x.dim);
        let mut mean = vec![0.0; dim];
        for i in 0..n {
            for (m, &v) in mean.iter_mut().zip(x.row(i)) {
                *m += v as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; dim];
        for i in 0..n {
            for ((s, &v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                *s += (v as f64 - m).powi(2);
            }
        }
        let scale: Vec<f64> = var
            .iter()
            .map(|v| {
                let sd = (v / n as f64).sqrt();
                if sd > 1e-12 {
                    1.0 / sd
                } else {
                    0.0
                }
            })
            .collect();
        let z: Vec<Vec<f64>> = par::map_range(n, |i| {
            x.row(i)
                .iter()
                .zip(&mean)
                .zip(&scale)
                .map(|((&v, m), s)| (v as f64 - m) * s)
                .collect()
        });
        let yf: Vec<f64> = y.iter().map(|&l| l as u8 as f64).collect();

        // step 1/L with L bounded by the largest eigenvalue of Z'Z/n, from
        // power iteration
        let mut v = vec![1.0 / (dim as f64 + 1.0).sqrt(); dim + 1];
        let mut lambda_max = 1.0;
        for _ in 0..30 {
            let zv: Vec<f64> = z
                .iter()
                .map(|r| v[dim] + r.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            let mut next = vec![0.0; dim + 1];
            for (r, s) in z.iter().zip(&zv) {
                for (nj, rj) in next.iter_mut().zip(r) {
                    *nj += rj * s;
                }
                next[dim] += s;
            }
            next.iter_mut().for_each(|a| *a /= n as f64);
            let norm = next.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            lambda_max = norm;
            v = next.into_iter().map(|a| a / norm).collect();
        }
        let step = 1.0 / (0.25 * lambda_max * 1.05 + 2.0 * params.l2);

        // Nesterov accelerated gradient descent
        let (mut w, mut b) = (vec![0.0; dim], 0.0);
        let (mut yw, mut yb) = (w.clone(), b);
        let mut t = 1.0f64;
        let mut last = f64::INFINITY;
        for _ in 0..params.max_iter {
            let (loss, g, gb) = loss_grad(&z, &yf, &yw, yb, params.l2);
            let nw: Vec<f64> = yw.iter().zip(&g).map(|(a, c)| a - step * c).collect();
            let nb = yb - step * gb;
            let tn = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let mom = (t - 1.0) / tn;
            yw = nw.iter().zip(&w).map(|(a, c)| a + mom * (a - c)).collect();
            yb = nb + mom * (nb - b);
            w = nw;
            b = nb;
            t = tn;
            if (last - loss).abs() < params.tol * last.abs().max(1.0) {
                break;
            }
            last = loss;
        }
        Logistic {
            mean,
            scale,
            weights: w,
            bias: b,
        }
    }

    pub fn predict(&self, x: &[f32]) -> f64 {
        let s: f64 = self.bias
            + x.iter()
                .zip(&self.mean)
                .zip(&self.scale)
                .zip(&self.weights)
                .map(|(((&v, m), s), w)| (v as f64 - m) * s * w)
                .sum::<f64>();
        sigmoid(s)
    }
}
