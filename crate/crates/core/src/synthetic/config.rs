use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_exponent() -> f64 {
    2.3
}
fn default_groups() -> usize {
    1
}
fn default_affinity() -> f64 {
    1.0
}
fn default_mixing() -> f64 {
    0.3
}
fn default_sigma() -> f64 {
    1.0
}
fn default_window() -> [u64; 2] {
    // 2019-03-01T00:00:00Z .. +6 days
    [1_551_398_400, 1_551_398_400 + 6 * 86_400]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_devices: usize,
    pub n_apps: usize,
    pub target_edges: usize,
    #[serde(default = "default_exponent")]
    pub app_exponent: f64,
    #[serde(default = "default_groups")]
    pub n_groups: usize,
    /// In-group pair weight multiplier; 1 disables group structure.
    #[serde(default = "default_affinity")]
    pub affinity: f64,
    /// Probability that a vertex also belongs to a second group.
    #[serde(default = "default_mixing")]
    pub mixing: f64,
    /// Log-normal sigma of device propensities.
    #[serde(default = "default_sigma")]
    pub device_sigma: f64,
    #[serde(default = "default_window")]
    pub time_window: [u64; 2],
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn new(n_devices: usize, n_apps: usize, target_edges: usize, seed: u64) -> Self {
        GeneratorConfig {
            n_devices,
            n_apps,
            target_edges,
            app_exponent: default_exponent(),
            n_groups: default_groups(),
            affinity: default_affinity(),
            mixing: default_mixing(),
            device_sigma: default_sigma(),
            time_window: default_window(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_devices == 0 {
            return Err(Error::config("n_devices", "must be at least 1"));
        }
        if self.n_apps == 0 {
            return Err(Error::config("n_apps", "must be at least 1"));
        }
        if self.n_groups == 0 {
            return Err(Error::config("n_groups", "must be at least 1"));
        }
        if self.target_edges == 0 {
            return Err(Error::config("target_edges", "must be at least 1"));
        }
        let capacity = self.n_devices as u128 * self.n_apps as u128;
        if self.target_edges as u128 > capacity {
            return Err(Error::config(
                "target_edges",
                format!("{} exceeds n_devices * n_apps = {capacity}", self.target_edges),
            ));
        }
        if !(self.app_exponent > 1.0 && self.app_exponent.is_finite()) {
            return Err(Error::config("app_exponent", "must be a finite value > 1"));
        }
        if !(self.affinity >= 1.0 && self.affinity.is_finite()) {
            return Err(Error::config("affinity", "must be a finite value >= 1"));
        }
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            return Err(Error::config("mixing", "must lie in (0, 1]"));
        }
        if !(self.device_sigma >= 0.0 && self.device_sigma.is_finite()) {
            return Err(Error::config("device_sigma", "must be a finite value >= 0"));
        }
        if self.time_window[0] > self.time_window[1] {
            return Err(Error::config("time_window", "start after end"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_seed_is_named() {
        let err = serde_json::from_str::<GeneratorConfig>(
            r#"{"n_devices": 10, "n_apps": 5, "target_edges": 20}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn validation_names_fields() {
        let mut c = GeneratorConfig::new(10, 10, 20, 1);
        c.mixing = 0.0;
        assert!(matches!(c.validate(), Err(Error::Config { field, .. }) if field == "mixing"));
        let c = GeneratorConfig::new(2, 2, 5, 1);
        assert!(matches!(c.validate(), Err(Error::Config { field, .. }) if field == "target_edges"));
    }
}
