use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::alias::AliasTable;
use super::generate::SyntheticCorpus;
use super::{app_token, device_token};
use crate::error::{Error, Result};
use crate::graph::InstallEvent;
use crate::util::rng_for;

fn default_span() -> u64 {
    86_400
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoldoutConfig {
    /// Future edge count as a fraction of visible edges, in (0, 1).
    pub fraction: f64,
    /// Future timestamps fall in `(window_end, window_end + span_secs]`.
    #[serde(default = "default_span")]
    pub span_secs: u64,
}

impl HoldoutConfig {
    pub fn new(fraction: f64) -> Self {
        HoldoutConfig {
            fraction,
            span_secs: default_span(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Holdout {
    pub visible: Vec<InstallEvent>,
    pub future: Vec<InstallEvent>,
}

impl Holdout {
    /// Visible followed by future events.
    pub fn all_events(&self) -> Vec<InstallEvent> {
        let mut all = self.visible.clone();
        all.extend(self.future.iter().cloned());
        all
    }
}

/// Draws future installations from the planted model, restricted to pairs
/// absent from the visible corpus.
pub fn holdout_future_edges(corpus: &SyntheticCorpus, cfg: &HoldoutConfig, seed: u64) -> Result<Holdout> {
    if !(cfg.fraction > 0.0 && cfg.fraction < 1.0) {
        return Err(Error::config("fraction", "must lie in (0, 1)"));
    }
    if cfg.span_secs == 0 {
        return Err(Error::config("span_secs", "must be positive"));
    }
    let truth = &corpus.truth;
    let nd = truth.device_propensity.len();
    let na = truth.app_degree.len();
    let mut taken: HashSet<(u32, u32)> = HashSet::with_capacity(corpus.events.len());
    for ev in &corpus.events {
        let d = truth
            .device_index(&ev.device_id)
            .ok_or_else(|| Error::Generation(format!("unknown device `{}`", ev.device_id)))?;
        let m = truth
            .app_index(&ev.app_id)
            .ok_or_else(|| Error::Generation(format!("unknown app `{}`", ev.app_id)))?;
        taken.insert((d as u32, m as u32));
    }
    let visible_pairs = taken.len();
    let count = (cfg.fraction * visible_pairs as f64).round() as usize;
    let candidates = (nd * na).saturating_sub(visible_pairs);
    if count > candidates {
        return Err(Error::Generation(format!(
            "requested {count} future edges but only {candidates} unseen pairs exist"
        )));
    }

    let mut rng = rng_for(seed, "holdout", 0);
    let app_weights: Vec<f64> = truth.app_degree.iter().map(|&k| k as f64).collect();
    let apps = AliasTable::new(&app_weights);
    let devices = AliasTable::new(&truth.device_propensity);
    let max_aff = truth.config.affinity;
    let mut future = Vec::with_capacity(count);
    let budget = 200 * count + 10_000;
    let mut attempts = 0usize;
    while future.len() < count {
        attempts += 1;
        if attempts > budget {
            return Err(Error::Generation(format!(
                "could only place {} of {count} future edges; lower the holdout fraction",
                future.len()
            )));
        }
        let m = apps.sample(&mut rng);
        let d = devices.sample(&mut rng);
        if rng.random::<f64>() * max_aff >= truth.affinity(d, m) {
            continue;
        }
        if taken.insert((d as u32, m as u32)) {
            future.push((d, m));
        }
    }
    let end = truth.config.time_window[1];
    let mut future: Vec<InstallEvent> = future
        .into_iter()
        .map(|(d, m)| {
            let t = end + rng.random_range(1..=cfg.span_secs);
            InstallEvent::new(device_token(d), app_token(m), t)
        })
        .collect();
    future.sort_by(|a, b| {
        (a.timestamp, &a.device_id, &a.app_id).cmp(&(b.timestamp, &b.device_id, &b.app_id))
    });
    Ok(Holdout {
        visible: corpus.events.clone(),
        future,
    })
}
