//! The run configuration document and its resolution against CLI flags.

use std::path::{Path, PathBuf};

use phagraph_core::embedding::Kernel;
use phagraph_core::eval::{Method, PipelineConfig, RollingConfig};
use phagraph_core::graph::EventFormat;
use phagraph_core::predictor::{ClassifierKind, Combiner};
use phagraph_core::synthetic::{GeneratorConfig, HoldoutConfig};
use phagraph_core::util::sha256_hex;
use phagraph_core::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

fn default_method() -> Method {
    Method::Full
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; every stage derives its own stream from it.
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub events: Option<EventsInput>,
    #[serde(default)]
    pub generator: Option<GeneratorConfig>,
    #[serde(default)]
    pub holdout: Option<HoldoutConfig>,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub stats: StatsConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub explain: ExplainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventsInput {
    pub path: PathBuf,
    /// Inferred from the extension when absent.
    #[serde(default)]
    pub format: Option<EventFormat>,
    #[serde(default)]
    pub header: bool,
    #[serde(default)]
    pub strict: bool,
}

pub fn infer_format(path: &Path) -> EventFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("json") => EventFormat::Jsonl,
        _ => EventFormat::Csv,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Training window start; defaults to the earliest event.
    pub start: Option<u64>,
    /// Last training timestamp; defaults to the latest event minus `horizon`.
    pub boundary: Option<u64>,
    /// Test window length in seconds, default one day.
    pub horizon: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub hops: Vec<usize>,
    pub sample_size: usize,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            hops: vec![2, 4],
            sample_size: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    /// Empty means the pipeline combiner only.
    pub combiners: Vec<Combiner>,
    pub classifiers: Vec<ClassifierKind>,
    pub ratios: Vec<f64>,
    pub rolling: RollingConfig,
    pub scales: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            methods: Method::ALL.to_vec(),
            combiners: Vec::new(),
            classifiers: Vec::new(),
            ratios: vec![0.07, 0.16, 0.25],
            rolling: RollingConfig::default(),
            scales: vec![1.0, 2.0, 4.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub walk_budget: usize,
    /// Defaults to the order recorded with the embedding.
    pub max_order: Option<usize>,
    pub kernel: Kernel,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            walk_budget: 10_000,
            max_order: None,
            kernel: Kernel::DegreeWeighted,
        }
    }
}

/// Flags that override config fields.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

/// A loaded config plus the hash of the file it came from.
pub struct Loaded {
    pub config: RunConfig,
    pub source: Option<(String, String)>,
}

/// Reads `path` (or an empty document), applies the overrides and
/// deserializes. Without `seed_required`, a missing seed becomes 0.
pub fn load(path: Option<&Path>, over: Overrides, seed_required: bool) -> Result<Loaded> {
    let name = path.map_or_else(|| "config".to_string(), |p| p.display().to_string());
    let (mut value, source) = match path {
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
            let v: Value = serde_json::from_slice(&bytes).map_err(|e| Error::format(&name, e.to_string()))?;
            (v, Some((name.clone(), sha256_hex(&bytes))))
        }
        None => (Value::Object(Default::default()), None),
    };
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::format(&name, "top level must be a JSON object"))?;
    if let Some(s) = over.seed {
        obj.insert("seed".into(), s.into());
    }
    if !obj.contains_key("seed") {
        if seed_required {
            return Err(Error::config("seed", "missing; set `seed` in the config or pass --seed"));
        }
        obj.insert("seed".into(), 0.into());
    }
    let root = obj["seed"].clone();
    if let Some(g) = obj.get_mut("generator").and_then(Value::as_object_mut) {
        g.entry("seed").or_insert(root);
    }
    if let Some(w) = over.workers {
        obj.insert("workers".into(), w.into());
    }
    let mut config: RunConfig = serde_json::from_value(value).map_err(|e| Error::format(&name, e.to_string()))?;

    if let (Some(ev), Some(dir)) = (config.events.as_mut(), path.and_then(Path::parent)) {
        if ev.path.is_relative() {
            ev.path = dir.join(&ev.path);
        }
    }
    if let Some(w) = config.workers {
        if w == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        config.pipeline = config.pipeline.with_workers(w);
    }
    Ok(Loaded { config, source })
}
