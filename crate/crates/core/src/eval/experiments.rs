use std::collections::{BTreeMap, HashSet};
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::metrics::{roc_and_metrics, FPR_TARGETS};
use super::report::{fpr_key, EvalReport, Summary};
use crate::baselines::{pa_scores, train_line, LineConfig, LineOrder};
use crate::embedding::{train, EmbeddingMatrix, TrainerConfig};
use crate::error::{Error, Result, StageExt};
use crate::graph::{build_graph, temporal_split_window, BipartiteGraph, InstallEvent, TemporalSplit};
use crate::predictor::{
    build_candidates, featurize_set, train_classifier, CandidateSplit, ClassifierConfig, ClassifierKind, ColdPolicy,
    Combiner,
};
use crate::synthetic::{generate, holdout_future_edges, GeneratorConfig, GroundTruth, HoldoutConfig};
use crate::util::{derive_seed, rng_for, ContentHasher};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    PreferentialAttachment,
    FirstOrder,
    SecondOrder,
    /// Decay-weighted l-order ranking embedding.
    Full,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::PreferentialAttachment,
        Method::FirstOrder,
        Method::SecondOrder,
        Method::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::PreferentialAttachment => "preferential_attachment",
            Method::FirstOrder => "first_order",
            Method::SecondOrder => "second_order",
            Method::Full => "full",
        }
    }
}

/// Settings shared by every method run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub trainer: TrainerConfig,
    pub line: LineConfig,
    pub classifier: ClassifierConfig,
    pub combiner: Combiner,
    pub cold_policy: ColdPolicy,
}

impl PipelineConfig {
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.trainer.workers = workers;
        self.line.workers = workers;
        self
    }
}

/// A temporal split with its training graph and method-independent
/// candidate lists.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub split: TemporalSplit,
    pub graph: BipartiteGraph,
    pub candidates: CandidateSplit,
    pub candidate_hash: String,
}

pub fn hash_candidates(c: &CandidateSplit) -> String {
    let mut h = ContentHasher::new();
    for (tag, list) in [(b"train\n", &c.train), (b"test\n\n", &c.test)] {
        h.update(tag);
        for x in list.iter() {
            h.update(x.device.as_bytes())
                .update(b"\t")
                .update(x.app.as_bytes())
                .update(if x.label { b"\t1\n" } else { b"\t0\n" });
        }
    }
    h.finish()
}

/// Splits `events` at `boundary` and draws the shared candidate lists.
pub fn prepare(
    events: &[InstallEvent],
    start: Option<u64>,
    boundary: u64,
    horizon: u64,
    policy: ColdPolicy,
    seed: u64,
) -> Result<Prepared> {
    let start = start.unwrap_or_else(|| events.iter().map(|e| e.timestamp).min().unwrap_or(0));
    let split = temporal_split_window(events, start, boundary, horizon).stage("split")?;
    let graph = split.train_graph().stage("graph")?;
    let candidates = build_candidates(&split, &graph, policy, derive_seed(seed, "candidates", 0)).stage("candidates")?;
    let candidate_hash = hash_candidates(&candidates);
    Ok(Prepared {
        split,
        graph,
        candidates,
        candidate_hash,
    })
}

/// Events of a generated corpus followed by held-out future events.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub events: Vec<InstallEvent>,
    pub boundary: u64,
    pub horizon: u64,
    pub start: u64,
    pub truth: GroundTruth,
}

pub fn synthetic_data(generator: &GeneratorConfig, holdout: &HoldoutConfig) -> Result<SyntheticData> {
    let corpus = generate(generator).stage("generate")?;
    let h = holdout_future_edges(&corpus, holdout, derive_seed(generator.seed, "holdout", 0)).stage("holdout")?;
    Ok(SyntheticData {
        events: h.all_events(),
        start: generator.time_window[0],
        boundary: generator.time_window[1],
        horizon: holdout.span_secs,
        truth: corpus.truth,
    })
}

impl SyntheticData {
    pub fn prepare(&self, policy: ColdPolicy, seed: u64) -> Result<Prepared> {
        prepare(&self.events, Some(self.start), self.boundary, self.horizon, policy, seed)
    }
}

/// Trains the embedding behind an embedding method; `None` for scoring
/// methods without one.
pub fn train_method(method: Method, graph: &BipartiteGraph, cfg: &PipelineConfig, seed: u64) -> Result<Option<EmbeddingMatrix>> {
    let line = |order, tag| {
        let c = LineConfig {
            seed: derive_seed(seed, tag, 0),
            ..cfg.line.clone()
        };
        train_line(graph, &c, order)
    };
    Ok(match method {
        Method::PreferentialAttachment => None,
        Method::FirstOrder => Some(line(LineOrder::First, "line-first")?),
        Method::SecondOrder => Some(line(LineOrder::Second, "line-second")?),
        Method::Full => {
            let c = TrainerConfig {
                seed: derive_seed(seed, "ranking", 0),
                ..cfg.trainer.clone()
            };
            Some(train(graph, &c)?)
        }
    })
}

fn config_hash(candidate_hash: &str, parts: &[&dyn erased::Json]) -> String {
    let mut h = ContentHasher::new();
    h.update(candidate_hash.as_bytes());
    for p in parts {
        h.update(p.json().as_bytes());
    }
    h.finish()
}

mod erased {
    pub trait Json {
        fn json(&self) -> String;
    }

    impl<T: serde::Serialize> Json for T {
        fn json(&self) -> String {
            serde_json::to_string(self).expect("config serializes")
        }
    }
}

/// Classifier on embedding features, scored on the test candidates.
pub fn evaluate_embedding(
    method: &str,
    phi: &EmbeddingMatrix,
    candidates: &CandidateSplit,
    candidate_hash: &str,
    combiner: Combiner,
    classifier: &ClassifierConfig,
    seed: u64,
) -> Result<EvalReport> {
    let t = Instant::now();
    let train_set = featurize_set(phi, &candidates.train, combiner)?;
    let test_set = featurize_set(phi, &candidates.test, combiner)?;
    let t_features = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let model = train_classifier(&train_set, classifier, derive_seed(seed, "classifier", 0)).stage("classifier")?;
    let t_fit = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let scores = model.model.score_all(&test_set.features);
    let metrics = roc_and_metrics(&scores, &test_set.labels())?;
    let t_score = t.elapsed().as_secs_f64();
    let hash = config_hash(candidate_hash, &[&method, &combiner, classifier]);
    let mut r = EvalReport::new(method, metrics, hash, seed);
    r.combiner = Some(combiner);
    r.classifier = Some(classifier.kind);
    r.timings.insert("features".into(), t_features);
    r.timings.insert("classifier".into(), t_fit);
    r.timings.insert("scoring".into(), t_score);
    Ok(r)
}

/// Preferential attachment scores on the test candidates.
pub fn evaluate_pa(prepared: &Prepared, seed: u64) -> Result<EvalReport> {
    let t = Instant::now();
    let pairs: Vec<_> = prepared
        .candidates
        .test
        .iter()
        .map(|c| (c.device_index, c.app_index))
        .collect();
    let table = pa_scores(&prepared.graph, &pairs);
    let labels: Vec<bool> = prepared.candidates.test.iter().map(|c| c.label).collect();
    let metrics = roc_and_metrics(&table.scores, &labels)?;
    let hash = config_hash(&prepared.candidate_hash, &[&Method::PreferentialAttachment.name()]);
    let mut r = EvalReport::new(Method::PreferentialAttachment.name(), metrics, hash, seed);
    r.timings.insert("scoring".into(), t.elapsed().as_secs_f64());
    Ok(r)
}

/// Trains and evaluates one method with the pipeline's combiner and
/// classifier.
pub fn run_method(method: Method, prepared: &Prepared, cfg: &PipelineConfig, seed: u64) -> Result<EvalReport> {
    if method == Method::PreferentialAttachment {
        return evaluate_pa(prepared, seed);
    }
    let t = Instant::now();
    let phi = train_method(method, &prepared.graph, cfg, seed)
        .stage(method.name())?
        .expect("embedding method");
    let secs = t.elapsed().as_secs_f64();
    let mut r = evaluate_embedding(
        method.name(),
        &phi,
        &prepared.candidates,
        &prepared.candidate_hash,
        cfg.combiner,
        &cfg.classifier,
        seed,
    )?;
    r.timings.insert("embedding".into(), secs);
    Ok(r)
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub method: Method,
    pub combiner: Option<Combiner>,
    pub classifier: Option<ClassifierKind>,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
}

fn failed(method: Method, combiner: Option<Combiner>, classifier: Option<ClassifierKind>, e: Error) -> ComparisonRow {
    log::error!("{} failed: {e}", method.name());
    ComparisonRow {
        method,
        combiner,
        classifier,
        report: None,
        error: Some(e.to_string()),
    }
}

/// Every method on the same candidate lists. Embedding methods produce one
/// row per combiner and classifier; failures become annotated rows.
pub fn comparison_experiment(
    prepared: &Prepared,
    cfg: &PipelineConfig,
    methods: &[Method],
    combiners: &[Combiner],
    classifiers: &[ClassifierKind],
    seed: u64,
) -> Vec<ComparisonRow> {
    let combiners = if combiners.is_empty() { vec![cfg.combiner] } else { combiners.to_vec() };
    let classifiers = if classifiers.is_empty() { vec![cfg.classifier.kind] } else { classifiers.to_vec() };
    let mut rows = Vec::new();
    for &method in methods {
        if method == Method::PreferentialAttachment {
            rows.push(match evaluate_pa(prepared, seed) {
                Ok(r) => ComparisonRow {
                    method,
                    combiner: None,
                    classifier: None,
                    report: Some(r),
                    error: None,
                },
                Err(e) => failed(method, None, None, e),
            });
            continue;
        }
        let t = Instant::now();
        let phi = match train_method(method, &prepared.graph, cfg, seed).stage(method.name()) {
            Ok(p) => p.expect("embedding method"),
            Err(e) => {
                rows.push(failed(method, None, None, e));
                continue;
            }
        };
        let secs = t.elapsed().as_secs_f64();
        for &combiner in &combiners {
            for &kind in &classifiers {
                let ccfg = ClassifierConfig {
                    kind,
                    ..cfg.classifier.clone()
                };
                let out = evaluate_embedding(
                    method.name(),
                    &phi,
                    &prepared.candidates,
                    &prepared.candidate_hash,
                    combiner,
                    &ccfg,
                    seed,
                );
                rows.push(match out {
                    Ok(mut r) => {
                        r.timings.insert("embedding".into(), secs);
                        ComparisonRow {
                            method,
                            combiner: Some(combiner),
                            classifier: Some(kind),
                            report: Some(r),
                            error: None,
                        }
                    }
                    Err(e) => failed(method, Some(combiner), Some(kind), e),
                });
            }
        }
    }
    rows
}

/// Order in which training edges are removed: a random permutation with
/// every edge whose removal would isolate a vertex skipped.
pub fn drop_order(graph: &BipartiteGraph, seed: u64) -> Vec<(u32, u32)> {
    let mut edges: Vec<(u32, u32)> = graph.edges().collect();
    edges.shuffle(&mut rng_for(seed, "latency-drop", 0));
    let mut dd = graph.device_degrees();
    let mut md = graph.app_degrees();
    let mut out = Vec::new();
    for (d, m) in edges {
        if dd[d as usize] > 1 && md[m as usize] > 1 {
            dd[d as usize] -= 1;
            md[m as usize] -= 1;
            out.push((d, m));
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct LatencyRow {
    pub ratio: f64,
    pub dropped: usize,
    pub train_edges: usize,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
}

/// Full-model runs on training graphs with a growing fraction of edges
/// removed; drop sets are nested and the test candidates stay fixed.
pub fn latency_experiment(prepared: &Prepared, cfg: &PipelineConfig, ratios: &[f64], seed: u64) -> Result<Vec<LatencyRow>> {
    let mut ratios: Vec<f64> = ratios.to_vec();
    if let Some(r) = ratios.iter().find(|r| !(0.0..1.0).contains(*r)) {
        return Err(Error::config("drop_ratios", format!("{r} is outside [0, 1)")));
    }
    if !ratios.contains(&0.0) {
        ratios.push(0.0);
    }
    ratios.sort_by(f64::total_cmp);
    ratios.dedup();
    let order = drop_order(&prepared.graph, seed);
    let n_edges = prepared.graph.n_edges();
    let positives = prepared.candidates.train.iter().filter(|c| c.label).count();
    let negatives: Vec<_> = prepared.candidates.train.iter().filter(|c| !c.label).cloned().collect();
    let mut rows = Vec::new();
    for ratio in ratios {
        let want = (ratio * n_edges as f64).round() as usize;
        let mut row = LatencyRow {
            ratio,
            dropped: want.min(order.len()),
            train_edges: n_edges - want.min(order.len()),
            report: None,
            error: None,
        };
        if want > order.len() {
            row.error = Some(format!(
                "only {} edges can be removed without isolating vertices",
                order.len()
            ));
            rows.push(row);
            continue;
        }
        let result = (|| -> Result<EvalReport> {
            if want == 0 {
                return run_method(Method::Full, prepared, cfg, seed);
            }
            let removed: HashSet<(u32, u32)> = order[..want].iter().copied().collect();
            let kept: Vec<(u32, u32)> = prepared.graph.edges().filter(|e| !removed.contains(e)).collect();
            let graph = prepared.graph.with_edge_subset(&kept)?;
            let mut train: Vec<_> = prepared
                .candidates
                .train
                .iter()
                .filter(|c| c.label && c.indices().is_some_and(|e| !removed.contains(&e)))
                .cloned()
                .collect();
            debug_assert_eq!(train.len(), positives - want);
            train.extend(negatives[..train.len()].iter().cloned());
            let candidates = CandidateSplit {
                train,
                ..prepared.candidates.clone()
            };
            let reduced = Prepared {
                split: prepared.split.clone(),
                candidate_hash: hash_candidates(&candidates),
                graph,
                candidates,
            };
            let mut r = run_method(Method::Full, &reduced, cfg, seed)?;
            r.notes.push(format!("dropped {want} of {n_edges} training edges"));
            Ok(r)
        })();
        match result {
            Ok(r) => row.report = Some(r),
            Err(e) => row.error = Some(e.to_string()),
        }
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RollingConfig {
    pub train_secs: u64,
    pub test_secs: u64,
    pub step_secs: u64,
    pub steps: usize,
    /// First window start; defaults to the earliest event.
    pub start: Option<u64>,
}

impl Default for RollingConfig {
    fn default() -> Self {
        RollingConfig {
            train_secs: 6 * 86_400,
            test_secs: 86_400,
            step_secs: 86_400,
            steps: 5,
            start: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RollingStep {
    pub step: usize,
    pub start: u64,
    pub boundary: u64,
    pub report: Option<EvalReport>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RollingResult {
    pub steps: Vec<RollingStep>,
    pub tpr: BTreeMap<String, Summary>,
    pub auc: Summary,
    pub ap: Summary,
}

/// Retrains and evaluates the full model on consecutive windows.
pub fn rolling_window_experiment(
    events: &[InstallEvent],
    rolling: &RollingConfig,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<RollingResult> {
    if rolling.steps == 0 || rolling.train_secs == 0 || rolling.test_secs == 0 {
        return Err(Error::config("rolling", "steps and window lengths must be positive"));
    }
    let first = rolling
        .start
        .or_else(|| events.iter().map(|e| e.timestamp).min())
        .ok_or_else(|| Error::EmptyGraph("no events".into()))?;
    let mut steps = Vec::new();
    for s in 0..rolling.steps {
        let start = first + s as u64 * rolling.step_secs;
        let boundary = start + rolling.train_secs;
        let step_seed = derive_seed(seed, "rolling-step", s as u64);
        let out = prepare(events, Some(start), boundary, rolling.test_secs, cfg.cold_policy, step_seed)
            .and_then(|p| run_method(Method::Full, &p, cfg, step_seed));
        let (report, skipped) = match out {
            Ok(r) => (Some(r), None),
            Err(e) => {
                log::warn!("rolling step {s} skipped: {e}");
                (None, Some(e.to_string()))
            }
        };
        steps.push(RollingStep {
            step: s,
            start,
            boundary,
            report,
            skipped,
        });
    }
    let done: Vec<&EvalReport> = steps.iter().filter_map(|s| s.report.as_ref()).collect();
    let tpr = FPR_TARGETS
        .iter()
        .map(|&t| (fpr_key(t), Summary::of(&done.iter().map(|r| r.tpr(t)).collect::<Vec<_>>())))
        .collect();
    Ok(RollingResult {
        auc: Summary::of(&done.iter().map(|r| r.auc).collect::<Vec<_>>()),
        ap: Summary::of(&done.iter().map(|r| r.ap).collect::<Vec<_>>()),
        tpr,
        steps,
    })
}

/// Wall-clock seconds of the pipeline stages at one data scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub scale: f64,
    pub n_edges: usize,
    pub graph_build: f64,
    pub embedding: f64,
    pub classifier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuntimeRow {
    pub timings: StageTimings,
    /// Stage time divided by the previous scale's, when there is one.
    pub graph_build_ratio: Option<f64>,
    pub embedding_ratio: Option<f64>,
    pub classifier_ratio: Option<f64>,
    pub edge_ratio: Option<f64>,
}

/// Adds ratio-to-previous-scale columns to measured timings.
pub fn runtime_report(timings: &[StageTimings]) -> Vec<RuntimeRow> {
    timings
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let prev = i.checked_sub(1).map(|j| timings[j]);
            let ratio = |f: fn(&StageTimings) -> f64| prev.map(|p| f(t) / f(&p));
            RuntimeRow {
                timings: *t,
                graph_build_ratio: ratio(|s| s.graph_build),
                embedding_ratio: ratio(|s| s.embedding),
                classifier_ratio: ratio(|s| s.classifier),
                edge_ratio: prev.map(|p| t.n_edges as f64 / p.n_edges as f64),
            }
        })
        .collect()
}

/// Times graph build, embedding and classifier training on corpora whose
/// vertex and edge counts are multiplied by each scale.
pub fn runtime_experiment(
    base: &GeneratorConfig,
    holdout: &HoldoutConfig,
    scales: &[f64],
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<Vec<RuntimeRow>> {
    if scales.is_empty() || scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::config("scales", "need at least one positive scale"));
    }
    let mut timings = Vec::new();
    for &scale in scales {
        let size = |n: usize| ((n as f64 * scale).round() as usize).max(1);
        let gen = GeneratorConfig {
            n_devices: size(base.n_devices),
            n_apps: size(base.n_apps),
            target_edges: size(base.target_edges),
            ..base.clone()
        };
        let data = synthetic_data(&gen, holdout)?;
        let t = Instant::now();
        let graph = build_graph(&data.events, (data.start, data.boundary))?;
        let graph_build = t.elapsed().as_secs_f64();
        let prepared = data.prepare(cfg.cold_policy, seed)?;
        debug_assert_eq!(prepared.graph.n_edges(), graph.n_edges());
        let t = Instant::now();
        let phi = train_method(Method::Full, &prepared.graph, cfg, seed)?.expect("embedding method");
        let embedding = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let train_set = featurize_set(&phi, &prepared.candidates.train, cfg.combiner)?;
        train_classifier(&train_set, &cfg.classifier, derive_seed(seed, "classifier", 0))?;
        let classifier = t.elapsed().as_secs_f64();
        timings.push(StageTimings {
            scale,
            n_edges: graph.n_edges(),
            graph_build,
            embedding,
            classifier,
        });
    }
    Ok(runtime_report(&timings))
}
