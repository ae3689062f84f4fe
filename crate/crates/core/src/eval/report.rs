use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{Metrics, FPR_TARGETS};
use crate::error::{Error, Result};
use crate::predictor::{ClassifierKind, Combiner};
use crate::util::{mean, std_dev};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: String,
    pub method: String,
    pub combiner: Option<Combiner>,
    pub classifier: Option<ClassifierKind>,
    /// Hash of the evaluated candidate lists and method configuration.
    pub config_hash: String,
    pub seed: u64,
    pub auc: f64,
    pub ap: f64,
    pub tpr_at: BTreeMap<String, f64>,
    pub metrics: Metrics,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

pub fn fpr_key(target: f64) -> String {
    format!("{target}")
}

impl EvalReport {
    pub fn new(method: &str, metrics: Metrics, config_hash: String, seed: u64) -> Self {
        let tpr_at = metrics
            .operating_points
            .iter()
            .map(|p| (fpr_key(p.target_fpr), p.tpr))
            .collect();
        EvalReport {
            schema_version: SCHEMA_VERSION.into(),
            method: method.into(),
            combiner: None,
            classifier: None,
            config_hash,
            seed,
            auc: metrics.auc,
            ap: metrics.ap,
            tpr_at,
            metrics,
            timings: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn tpr(&self, target: f64) -> f64 {
        self.metrics.tpr_at(target).unwrap_or(f64::NAN)
    }
}

/// Mean and sample standard deviation of a series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        Summary {
            mean: mean(xs),
            std: if xs.len() > 1 { std_dev(xs) } else { 0.0 },
            n: xs.len(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::format(path.display().to_string(), e.to_string())
}

/// `fpr,tpr` rows.
pub fn write_roc_csv(path: &Path, roc: &[(f64, f64)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["fpr", "tpr"]).map_err(csv_err(path))?;
    for (f, t) in roc {
        w.write_record([f.to_string(), t.to_string()]).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `step,tpr@<target>...,auc,ap` rows, one per completed step.
pub fn write_rolling_csv(path: &Path, steps: &[(usize, &EvalReport)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["step".to_string()];
    header.extend(FPR_TARGETS.iter().map(|t| format!("tpr@{t}")));
    header.extend(["auc".to_string(), "ap".to_string()]);
    w.write_record(&header).map_err(csv_err(path))?;
    for (step, r) in steps {
        let mut row = vec![step.to_string()];
        row.extend(FPR_TARGETS.iter().map(|&t| r.tpr(t).to_string()));
        row.extend([r.auc.to_string(), r.ap.to_string()]);
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
