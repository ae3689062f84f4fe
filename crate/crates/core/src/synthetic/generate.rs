use std::collections::HashSet;

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::alias::AliasTable;
use super::config::GeneratorConfig;
use super::{app_token, device_token};
use crate::error::{Error, Result};
use crate::graph::InstallEvent;
use crate::par;
use crate::util::{rng_for, Rng as StdRng};

pub const FORMAT_VERSION: &str = "1";

/// Pair tables are materialised only up to this many device–app pairs.
pub const MAX_RETAINED_PAIRS: usize = 1_000_000;

/// Latent parameters behind a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub format_version: String,
    pub config: GeneratorConfig,
    /// Group memberships per generator device (primary first).
    pub device_groups: Vec<Vec<u32>>,
    pub app_groups: Vec<Vec<u32>>,
    pub device_propensity: Vec<f64>,
    /// Target degree per app, drawn from the truncated power law.
    pub app_degree: Vec<u32>,
    /// Lower cutoff of the app degree law.
    pub app_k_min: u32,
}

impl GroundTruth {
    pub fn shares_group(&self, d: usize, m: usize) -> bool {
        let a = &self.device_groups[d];
        self.app_groups[m].iter().any(|g| a.contains(g))
    }

    pub fn affinity(&self, d: usize, m: usize) -> f64 {
        if self.shares_group(d, m) {
            self.config.affinity
        } else {
            1.0
        }
    }

    /// Unnormalised planted weight: device propensity x app propensity x affinity.
    pub fn pair_weight(&self, d: usize, m: usize) -> f64 {
        self.device_propensity[d] * self.app_degree[m] as f64 * self.affinity(d, m)
    }

    /// Normalised per-pair sampling probabilities, row-major by device, or
    /// `None` above [`MAX_RETAINED_PAIRS`].
    pub fn pair_probabilities(&self) -> Option<Vec<f64>> {
        let (nd, na) = (self.device_propensity.len(), self.app_degree.len());
        if nd.checked_mul(na)? > MAX_RETAINED_PAIRS {
            return None;
        }
        let mut w: Vec<f64> = (0..nd)
            .flat_map(|d| (0..na).map(move |m| (d, m)))
            .map(|(d, m)| self.pair_weight(d, m))
            .collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        Some(w)
    }

    pub fn device_index(&self, token: &str) -> Option<usize> {
        let i: usize = token.strip_prefix('d')?.parse().ok()?;
        (i < self.device_propensity.len()).then_some(i)
    }

    pub fn app_index(&self, token: &str) -> Option<usize> {
        let i: usize = token.strip_prefix('m')?.parse().ok()?;
        (i < self.app_degree.len()).then_some(i)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    /// Events sorted by (timestamp, device, app).
    pub events: Vec<InstallEvent>,
    pub truth: GroundTruth,
}

fn draw_groups(rng: &mut StdRng, n: usize, n_groups: usize, mixing: f64) -> Vec<Vec<u32>> {
    (0..n)
        .map(|_| {
            let primary = rng.random_range(0..n_groups) as u32;
            let mut g = vec![primary];
            if n_groups > 1 && rng.random::<f64>() < mixing {
                let mut other = rng.random_range(0..n_groups - 1) as u32;
                if other >= primary {
                    other += 1;
                }
                g.push(other);
            }
            g
        })
        .collect()
}

/// Expected value of the power law `k^-alpha` on `[k_min, k_max]`.
fn truncated_mean(alpha: f64, k_min: u32, k_max: u32) -> f64 {
    let (mut z, mut m) = (0.0, 0.0);
    for k in k_min..=k_max {
        let p = (k as f64).powf(-alpha);
        z += p;
        m += k as f64 * p;
    }
    m / z
}

fn cdf(alpha: f64, k_min: u32, k_max: u32) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = (k_min..=k_max)
        .map(|k| {
            acc += (k as f64).powf(-alpha);
            acc
        })
        .collect();
    out.iter_mut().for_each(|c| *c /= acc);
    out
}

/// Draws app degrees whose sum equals `target_edges` exactly.
fn draw_app_degrees(cfg: &GeneratorConfig, rng: &mut StdRng) -> Result<(Vec<u32>, u32)> {
    let k_max = cfg.n_devices as u32;
    let target_mean = cfg.target_edges as f64 / cfg.n_apps as f64;
    let floor_mean = truncated_mean(cfg.app_exponent, 1, k_max);
    if target_mean < floor_mean * 0.5 {
        return Err(Error::Generation(format!(
            "target_edges {} is too small for exponent {}: mean app degree {target_mean:.2} is \
             below half the power-law mean {floor_mean:.2}; raise target_edges to at least {} \
             or raise app_exponent",
            cfg.target_edges,
            cfg.app_exponent,
            (floor_mean * 0.5 * cfg.n_apps as f64).ceil()
        )));
    }
    let mut k_min = 1;
    while k_min < k_max && truncated_mean(cfg.app_exponent, k_min + 1, k_max) <= target_mean {
        k_min += 1;
    }
    let table = cdf(cfg.app_exponent, k_min, k_max);
    let draw = |rng: &mut StdRng| -> Vec<u32> {
        (0..cfg.n_apps)
            .map(|_| {
                let u: f64 = rng.random();
                k_min + table.partition_point(|&c| c < u).min(table.len() - 1) as u32
            })
            .collect()
    };
    let target = cfg.target_edges as i64;
    let tolerance = (target / 50).max(1);
    let mut best = draw(rng);
    let mut best_gap = (best.iter().map(|&k| k as i64).sum::<i64>() - target).abs();
    for _ in 0..2000 {
        if best_gap <= tolerance {
            break;
        }
        let seq = draw(rng);
        let gap = (seq.iter().map(|&k| k as i64).sum::<i64>() - target).abs();
        if gap < best_gap {
            best = seq;
            best_gap = gap;
        }
    }
    let mut residual = target - best.iter().map(|&k| k as i64).sum::<i64>();
    let lower = if residual < 0 { k_min } else { 1 };
    let mut guard = 0usize;
    while residual != 0 {
        let i = rng.random_range(0..best.len());
        if residual > 0 && best[i] < k_max {
            best[i] += 1;
            residual -= 1;
        } else if residual < 0 && best[i] > lower {
            best[i] -= 1;
            residual += 1;
        }
        guard += 1;
        if guard > 100 * cfg.target_edges + 10_000 {
            return Err(Error::Generation(format!(
                "cannot fit {} edges into {} apps of capacity {k_max}; lower target_edges \
                 or raise n_devices",
                cfg.target_edges, cfg.n_apps
            )));
        }
    }
    Ok((best, k_min))
}

/// Picks `k` distinct devices with probability proportional to
/// `propensity[d] * affinity(d)`.
fn sample_devices(
    k: usize,
    propensity: &[f64],
    table: &AliasTable,
    affinity: impl Fn(usize) -> f64,
    max_affinity: f64,
    rng: &mut StdRng,
) -> Vec<u32> {
    let n = propensity.len();
    if k >= n {
        return (0..n as u32).collect();
    }
    if k * 4 <= n {
        let mut chosen = HashSet::with_capacity(k);
        let mut out = Vec::with_capacity(k);
        let mut attempts = 0usize;
        let budget = 64 * k + 1024;
        while out.len() < k && attempts < budget {
            attempts += 1;
            let d = table.sample(rng);
            if rng.random::<f64>() * max_affinity >= affinity(d) {
                continue;
            }
            if chosen.insert(d) {
                out.push(d as u32);
            }
        }
        if out.len() == k {
            return out;
        }
    }
    // Weighted sampling without replacement by exponential keys.
    let mut keys: Vec<(f64, u32)> = (0..n)
        .map(|d| {
            let w = propensity[d] * affinity(d);
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            (u.ln() / w, d as u32)
        })
        .collect();
    keys.select_nth_unstable_by(k - 1, |a, b| b.0.total_cmp(&a.0));
    keys.truncate(k);
    keys.into_iter().map(|(_, d)| d).collect()
}

/// Generates a corpus. Output is a pure function of `cfg`.
pub fn generate(cfg: &GeneratorConfig) -> Result<SyntheticCorpus> {
    cfg.validate()?;
    let mut rng = rng_for(cfg.seed, "generator", 0);
    let lognormal = LogNormal::new(0.0, cfg.device_sigma)
        .map_err(|e| Error::config("device_sigma", e.to_string()))?;
    let device_propensity: Vec<f64> = (0..cfg.n_devices).map(|_| lognormal.sample(&mut rng)).collect();
    let device_groups = draw_groups(&mut rng, cfg.n_devices, cfg.n_groups, cfg.mixing);
    let app_groups = draw_groups(&mut rng, cfg.n_apps, cfg.n_groups, cfg.mixing);
    let (app_degree, app_k_min) = draw_app_degrees(cfg, &mut rng)?;
    let truth = GroundTruth {
        format_version: FORMAT_VERSION.into(),
        config: cfg.clone(),
        device_groups,
        app_groups,
        device_propensity,
        app_degree,
        app_k_min,
    };

    let table = AliasTable::new(&truth.device_propensity);
    let (t0, t1) = (cfg.time_window[0], cfg.time_window[1]);
    let per_app: Vec<Vec<(u64, u32, u32)>> = par::map_range(cfg.n_apps, |m| {
        let mut rng = rng_for(cfg.seed, "app-edges", m as u64);
        let devices = sample_devices(
            truth.app_degree[m] as usize,
            &truth.device_propensity,
            &table,
            |d| truth.affinity(d, m),
            cfg.affinity,
            &mut rng,
        );
        devices
            .into_iter()
            .map(|d| (rng.random_range(t0..=t1), d, m as u32))
            .collect()
    });
    let mut edges: Vec<(u64, u32, u32)> = per_app.into_iter().flatten().collect();
    edges.sort_unstable();
    let events = edges
        .into_iter()
        .map(|(t, d, m)| InstallEvent::new(device_token(d as usize), app_token(m as usize), t))
        .collect();
    Ok(SyntheticCorpus { events, truth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, degree_histogram, khop_degree_correlation, Side};

    fn base() -> GeneratorConfig {
        let mut c = GeneratorConfig::new(400, 60, 1500, 11);
        c.n_groups = 4;
        c.affinity = 6.0;
        c
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = generate(&base()).unwrap();
        let b = generate(&base()).unwrap();
        assert_eq!(a.events, b.events);
        assert_eq!(a.truth, b.truth);
        let mut other = base();
        other.seed = 12;
        assert_ne!(generate(&other).unwrap().events, a.events);
    }

    #[test]
    fn hits_target_edges_without_duplicates() {
        let c = generate(&base()).unwrap();
        assert_eq!(c.events.len(), 1500);
        let pairs: HashSet<_> = c.events.iter().map(|e| (&e.device_id, &e.app_id)).collect();
        assert_eq!(pairs.len(), 1500);
        let w = base().time_window;
        assert!(c.events.iter().all(|e| e.timestamp >= w[0] && e.timestamp <= w[1]));
        assert!(c.events.windows(2).all(|p| p[0].timestamp <= p[1].timestamp));
    }

    #[test]
    fn app_degrees_equal_drawn_sequence() {
        let c = generate(&base()).unwrap();
        let g = build_graph(&c.events, (0, u64::MAX)).unwrap();
        for m in 0..g.n_apps() as u32 {
            let token = g.apps().token(m);
            let i = c.truth.app_index(token).unwrap();
            assert_eq!(g.app_degree(m) as u32, c.truth.app_degree[i]);
        }
    }

    #[test]
    fn no_groups_factorises_into_propensities() {
        let mut cfg = base();
        cfg.n_groups = 1;
        cfg.affinity = 1.0;
        let c = generate(&cfg).unwrap();
        let p = c.truth.pair_probabilities().unwrap();
        let na = cfg.n_apps;
        let sd: f64 = c.truth.device_propensity.iter().sum();
        let sa: f64 = c.truth.app_degree.iter().map(|&k| k as f64).sum();
        for d in (0..cfg.n_devices).step_by(37) {
            for m in 0..na {
                let expect = c.truth.device_propensity[d] / sd * c.truth.app_degree[m] as f64 / sa;
                assert!((p[d * na + m] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn planted_contrast_meets_half_affinity() {
        let mut cfg = base();
        cfg.n_groups = 10;
        cfg.affinity = 8.0;
        let c = generate(&cfg).unwrap();
        let p = c.truth.pair_probabilities().unwrap();
        let (mut s_in, mut n_in, mut s_out, mut n_out) = (0.0, 0, 0.0, 0);
        for d in 0..cfg.n_devices {
            for m in 0..cfg.n_apps {
                if c.truth.shares_group(d, m) {
                    s_in += p[d * cfg.n_apps + m];
                    n_in += 1;
                } else {
                    s_out += p[d * cfg.n_apps + m];
                    n_out += 1;
                }
            }
        }
        let ratio = (s_in / n_in as f64) / (s_out / n_out as f64);
        assert!(ratio >= cfg.affinity / 2.0, "{ratio}");
    }

    #[test]
    fn infeasible_target_reports_adjustment() {
        let mut cfg = GeneratorConfig::new(1000, 500, 100, 1);
        cfg.app_exponent = 1.5;
        let err = generate(&cfg).unwrap_err();
        assert!(err.to_string().contains("raise target_edges"), "{err}");
    }

    #[test]
    fn power_law_exponent_recovered() {
        let mut cfg = GeneratorConfig::new(20_000, 2_000, 40_000, 5);
        cfg.app_exponent = 2.3;
        let c = generate(&cfg).unwrap();
        let g = build_graph(&c.events, (0, u64::MAX)).unwrap();
        let h = degree_histogram(&g, Side::App);
        let fit = h.fit.unwrap();
        assert!((fit.alpha - 2.3).abs() <= 0.3, "{fit:?}");
        assert!(h.reliable);
    }

    #[test]
    fn group_structure_gives_negative_two_hop_correlation() {
        let mut cfg = GeneratorConfig::new(3000, 400, 12_000, 9);
        cfg.n_groups = 20;
        cfg.affinity = 8.0;
        cfg.mixing = 0.3;
        let c = generate(&cfg).unwrap();
        let g = build_graph(&c.events, (0, u64::MAX)).unwrap();
        let r = khop_degree_correlation(&g, 2, 10_000, 1).unwrap();
        assert!(r < 0.0, "{r}");
    }
}
