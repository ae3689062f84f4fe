use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use phagraph_core::baselines::{pa_scores, write_pa_scores};
use phagraph_core::embedding::{read_embeddings, write_embeddings, EmbeddingMatrix, EmbeddingMeta, META_NAME, TSV_NAME};
use phagraph_core::error::StageExt;
use phagraph_core::eval::{
    comparison_experiment, fpr_key, latency_experiment, prepare, roc_and_metrics, rolling_window_experiment,
    runtime_experiment, train_method, write_roc_csv, write_rolling_csv, EvalReport, Method, Prepared, FPR_TARGETS,
    SCHEMA_VERSION,
};
use phagraph_core::graph::snapshot::{read_snapshot, write_snapshot};
use phagraph_core::graph::{
    build_graph, degree_histogram, ingest_path, khop_degree_correlation, write_events_path, BipartiteGraph,
    EventFormat, IngestOptions, InstallEvent, Side,
};
use phagraph_core::predictor::{
    explain_prediction, featurize_set, load_model, predict_scores, save_model, train_classifier, write_labeled_set,
    Candidate, Classifier, ModelMeta, WalkTrace, MODEL_FILE, MODEL_META_FILE,
};
use phagraph_core::synthetic::{generate, holdout_future_edges, HoldoutConfig};
use phagraph_core::util::{derive_seed, ContentHasher};
use phagraph_core::{Error, Result};
use serde::Serialize;
use serde_json::json;

use crate::config::{self, EventsInput, Overrides, RunConfig};
use crate::output::{write_run, Inputs, OutDir};
use crate::{Cli, Command, ExperimentKind};

const DAY: u64 = 86_400;

struct Session {
    config: RunConfig,
    inputs: Inputs,
}

fn session(cli: &Cli, seed_required: bool) -> Result<Session> {
    let over = Overrides {
        seed: cli.seed,
        workers: cli.workers,
    };
    let loaded = config::load(cli.config.as_deref(), over, seed_required)?;
    let mut inputs = Inputs::default();
    if let Some((name, hash)) = loaded.source {
        inputs.add_hash(name, hash);
    }
    if let Some(w) = loaded.config.workers {
        std::env::set_var("RAYON_NUM_THREADS", w.to_string());
    }
    Ok(Session {
        config: loaded.config,
        inputs,
    })
}

pub fn run(cli: &Cli) -> Result<()> {
    let out = OutDir::new(cli.out.as_deref().unwrap_or(Path::new(".")), cli.overwrite);
    let format = EventFormat::from(cli.format);
    match &cli.command {
        Command::Generate => cmd_generate(session(cli, true)?, &out, format),
        Command::BuildGraph { events, header } => cmd_build_graph(session(cli, true)?, &out, events.as_deref(), *header),
        Command::Train {
            events,
            header,
            combiner,
            method,
        } => {
            let mut s = session(cli, true)?;
            if let Some(c) = combiner {
                s.config.pipeline.combiner = *c;
            }
            if let Some(m) = method {
                s.config.method = *m;
            }
            cmd_train(s, &out, events.as_deref(), *header)
        }
        Command::Predict { artifacts, pairs } => cmd_predict(session(cli, false)?, &out, artifacts, pairs),
        Command::Experiment { kind, events, header } => {
            cmd_experiment(session(cli, true)?, &out, *kind, events.as_deref(), *header)
        }
        Command::Explain {
            artifacts,
            device,
            app,
            json,
            walks,
        } => {
            let out = cli.out.as_ref().map(|p| OutDir::new(p, cli.overwrite));
            cmd_explain(session(cli, false)?, out.as_ref(), artifacts, device, app, *json, *walks)
        }
        Command::Export { artifacts } => cmd_export(session(cli, false)?, &out, artifacts, format),
    }
}

fn events_name(format: EventFormat) -> &'static str {
    match format {
        EventFormat::Csv => "events.csv",
        EventFormat::Jsonl => "events.jsonl",
    }
}

fn cmd_generate(s: Session, out: &OutDir, format: EventFormat) -> Result<()> {
    let gen = s
        .config
        .generator
        .clone()
        .ok_or_else(|| Error::config("generator", "required by `generate`"))?;
    let name = events_name(format);
    let outputs = [name, "groundtruth.json"];
    out.claim(&outputs)?;
    let corpus = generate(&gen).stage("generate")?;
    let events = match &s.config.holdout {
        Some(h) => holdout_future_edges(&corpus, h, derive_seed(gen.seed, "holdout", 0))
            .stage("holdout")?
            .all_events(),
        None => corpus.events.clone(),
    };
    write_events_path(&out.path(name), &events, format)?;
    out.write_json("groundtruth.json", &corpus.truth)?;
    println!("{} events -> {}", events.len(), out.path(name).display());
    write_run(out, "generate", &json!({ "format": format }), &s.config, &s.inputs, &outputs)
}

/// Events plus the range they cover and, for generated corpora, the
/// natural split.
struct EventData {
    events: Vec<InstallEvent>,
    range: (u64, u64),
    natural: Option<(u64, u64, u64)>,
    malformed: usize,
}

/// Reads the event file named on the command line or in the config, or
/// generates a corpus with held-out future edges. The resolved source is
/// written back into the config.
fn load_events(cfg: &mut RunConfig, positional: Option<&Path>, header: bool, inputs: &mut Inputs) -> Result<EventData> {
    if let Some(p) = positional {
        cfg.events = Some(EventsInput {
            path: p.to_path_buf(),
            format: None,
            header,
            strict: false,
        });
    } else if let Some(ev) = cfg.events.as_mut() {
        ev.header |= header;
    }
    let (events, natural, malformed) = if let Some(src) = cfg.events.as_mut() {
        inputs.add_file(&src.path)?;
        let format = *src.format.get_or_insert(config::infer_format(&src.path));
        let opts = IngestOptions {
            format,
            header: src.header,
            strict: src.strict,
        };
        let rep = ingest_path(&src.path, opts).stage("ingest")?;
        (rep.events, None, rep.malformed.len())
    } else if let Some(gen) = &cfg.generator {
        let holdout = cfg.holdout.get_or_insert_with(|| HoldoutConfig::new(0.1)).clone();
        let data = phagraph_core::eval::synthetic_data(gen, &holdout)?;
        (data.events, Some((data.start, data.boundary, data.horizon)), 0)
    } else {
        return Err(Error::config("events", "no event file given and no generator configured"));
    };
    let lo = events.iter().map(|e| e.timestamp).min();
    let hi = events.iter().map(|e| e.timestamp).max();
    let (Some(lo), Some(hi)) = (lo, hi) else {
        return Err(Error::EmptyGraph("the event source is empty".into()));
    };
    Ok(EventData {
        events,
        range: (lo, hi),
        natural,
        malformed,
    })
}

/// Training start, boundary and test horizon, written back into the config.
fn resolve_split(cfg: &mut RunConfig, data: &EventData) -> (u64, u64, u64) {
    let (lo, hi) = data.range;
    let sp = &mut cfg.split;
    let horizon = *sp.horizon.get_or_insert(data.natural.map_or(DAY, |n| n.2));
    let boundary = *sp.boundary.get_or_insert(data.natural.map_or(hi.saturating_sub(horizon), |n| n.1));
    let start = *sp.start.get_or_insert(data.natural.map_or(lo, |n| n.0));
    (start, boundary, horizon)
}

fn prepared(cfg: &mut RunConfig, data: &EventData) -> Result<Prepared> {
    let (start, boundary, horizon) = resolve_split(cfg, data);
    let p = prepare(&data.events, Some(start), boundary, horizon, cfg.pipeline.cold_policy, cfg.seed).stage("prepare")?;
    log::info!(
        "split: {} train edges, {} test candidates, {} cold dropped",
        p.graph.n_edges(),
        p.candidates.test.len(),
        p.candidates.cold_dropped
    );
    Ok(p)
}

#[derive(Serialize)]
struct GraphStats {
    n_devices: usize,
    n_apps: usize,
    n_edges: usize,
    window: (u64, u64),
    malformed_lines: usize,
    graph_hash: String,
    device_degrees: phagraph_core::graph::DegreeHistogram,
    app_degrees: phagraph_core::graph::DegreeHistogram,
    /// Hop count -> correlation, `null` where undefined.
    khop_correlation: BTreeMap<usize, Option<f64>>,
}

fn cmd_build_graph(mut s: Session, out: &OutDir, events: Option<&Path>, header: bool) -> Result<()> {
    let outputs = ["graph", "stats.json"];
    out.claim(&outputs)?;
    let data = load_events(&mut s.config, events, header, &mut s.inputs)?;
    let start = *s.config.split.start.get_or_insert(data.range.0);
    let end = *s.config.split.boundary.get_or_insert(data.range.1);
    let graph = build_graph(&data.events, (start, end)).stage("build-graph")?;
    let meta = write_snapshot(&graph, &out.path("graph"))?;
    let mut khop = BTreeMap::new();
    for &h in &s.config.stats.hops {
        let seed = derive_seed(s.config.seed, "khop", h as u64);
        let c = match khop_degree_correlation(&graph, h, s.config.stats.sample_size, seed) {
            Ok(c) => Some(c),
            Err(e @ Error::UndefinedCorrelation(_)) => {
                log::warn!("{h}-hop correlation: {e}");
                None
            }
            Err(e) => return Err(e.in_stage("stats")),
        };
        khop.insert(h, c);
    }
    let stats = GraphStats {
        n_devices: graph.n_devices(),
        n_apps: graph.n_apps(),
        n_edges: graph.n_edges(),
        window: graph.window(),
        malformed_lines: data.malformed,
        graph_hash: meta.graph_hash,
        device_degrees: degree_histogram(&graph, Side::Device),
        app_degrees: degree_histogram(&graph, Side::App),
        khop_correlation: khop,
    };
    out.write_json("stats.json", &stats)?;
    println!(
        "{} devices, {} apps, {} edges -> {}",
        stats.n_devices,
        stats.n_apps,
        stats.n_edges,
        out.path("graph").display()
    );
    write_run(out, "build-graph", &json!({}), &s.config, &s.inputs, &outputs)
}

fn cmd_train(mut s: Session, out: &OutDir, events: Option<&Path>, header: bool) -> Result<()> {
    let outputs = [
        "graph",
        TSV_NAME,
        META_NAME,
        "edges_train.csv",
        "features_train.tsv",
        "edges_test.csv",
        "features_test.tsv",
        MODEL_FILE,
        MODEL_META_FILE,
        "report.json",
        "roc.csv",
    ];
    let method = s.config.method;
    if method == Method::PreferentialAttachment {
        return Err(Error::config(
            "method",
            "preferential_attachment has no embedding to train; use `experiment comparison`",
        ));
    }
    out.claim(&outputs)?;
    let data = load_events(&mut s.config, events, header, &mut s.inputs)?;
    let p = prepared(&mut s.config, &data)?;
    let cfg = &s.config;
    let seed = cfg.seed;
    let combiner = cfg.pipeline.combiner;

    let t = Instant::now();
    let phi = train_method(method, &p.graph, &cfg.pipeline, seed)
        .stage("embedding")?
        .expect("embedding method");
    let t_embed = t.elapsed().as_secs_f64();
    let train_set = featurize_set(&phi, &p.candidates.train, combiner).stage("features")?;
    let test_set = featurize_set(&phi, &p.candidates.test, combiner).stage("features")?;
    let t = Instant::now();
    let clf_seed = derive_seed(seed, "classifier", 0);
    let model = train_classifier(&train_set, &cfg.pipeline.classifier, clf_seed).stage("classifier")?;
    let t_fit = t.elapsed().as_secs_f64();
    let scores = model.model.score_all(&test_set.features);
    let metrics = roc_and_metrics(&scores, &test_set.labels()).stage("metrics")?;

    let mut h = ContentHasher::new();
    h.update(p.candidate_hash.as_bytes())
        .update(method.name().as_bytes())
        .update(serde_json::to_string(&cfg.pipeline).expect("config serializes").as_bytes());
    let mut report = EvalReport::new(method.name(), metrics, h.finish(), seed);
    report.combiner = Some(combiner);
    report.classifier = Some(cfg.pipeline.classifier.kind);
    report.timings.insert("embedding".into(), t_embed);
    report.timings.insert("classifier".into(), t_fit);
    if p.candidates.cold_dropped > 0 {
        report
            .notes
            .push(format!("{} cold test positives dropped", p.candidates.cold_dropped));
    }

    let graph_hash = write_snapshot(&p.graph, &out.path("graph"))?.graph_hash;
    let method_config = match method {
        Method::Full => serde_json::to_value(&cfg.pipeline.trainer),
        _ => serde_json::to_value(&cfg.pipeline.line),
    }
    .expect("config serializes");
    let root = out.path("");
    write_embeddings(&root, &phi, &p.graph, &EmbeddingMeta::new(method.name(), &phi, &p.graph, method_config))?;
    write_labeled_set(&root, "train", &train_set)?;
    write_labeled_set(&root, "test", &test_set)?;
    let meta = ModelMeta {
        format_version: "1".into(),
        kind: model.kind(),
        seed: clf_seed,
        combiner,
        feature_dim: model.feature_dim,
        n_train: train_set.len(),
        train_hash: phagraph_core::predictor::dataset_hash(&train_set),
        graph_hash,
        config: cfg.pipeline.classifier.clone(),
    };
    save_model(&root, &model, &meta)?;
    out.write_json("report.json", &report)?;
    write_roc_csv(&out.path("roc.csv"), &report.metrics.roc)?;
    println!(
        "{}: auc {:.4} ap {:.4} on {} test candidates -> {}",
        method.name(),
        report.auc,
        report.ap,
        test_set.len(),
        root.display()
    );
    write_run(out, "train", &json!({}), &s.config, &s.inputs, &outputs)
}

struct Artifacts {
    graph: BipartiteGraph,
    phi: EmbeddingMatrix,
    meta: EmbeddingMeta,
    model: Option<Classifier>,
}

fn load_artifacts(dir: &Path, inputs: &mut Inputs, need_model: bool) -> Result<Artifacts> {
    let gdir = dir.join("graph");
    inputs.add_dir(&gdir)?;
    let graph = read_snapshot(&gdir).stage("artifacts")?;
    inputs.add_file(&dir.join(TSV_NAME))?;
    inputs.add_file(&dir.join(META_NAME))?;
    let (phi, meta) = read_embeddings(dir, &graph).stage("artifacts")?;
    let model = if need_model || dir.join(MODEL_FILE).exists() {
        inputs.add_file(&dir.join(MODEL_FILE))?;
        inputs.add_file(&dir.join(MODEL_META_FILE))?;
        let (model, mmeta) = load_model(dir).stage("artifacts")?;
        if mmeta.graph_hash != graph.content_hash() {
            return Err(Error::Contract("model was trained on a different graph".into()));
        }
        Some(model)
    } else {
        None
    };
    Ok(Artifacts {
        graph,
        phi,
        meta,
        model,
    })
}

fn candidate(graph: &BipartiteGraph, device: &str, app: &str) -> Candidate {
    Candidate {
        device: device.to_owned(),
        app: app.to_owned(),
        device_index: graph.devices().get(device),
        app_index: graph.apps().get(app),
        label: false,
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path.display().to_string(), format!("{other:?}")),
    }
}

/// Reads `device,app[,...]` rows; a leading `device,app` header is skipped.
fn read_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut pairs = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        if rec.len() < 2 {
            return Err(Error::Parse {
                line: i as u64 + 1,
                reason: format!("expected device,app, found {} fields", rec.len()),
            });
        }
        if i == 0 && &rec[0] == "device" && &rec[1] == "app" {
            continue;
        }
        pairs.push((rec[0].trim().to_owned(), rec[1].trim().to_owned()));
    }
    Ok(pairs)
}

fn cmd_predict(mut s: Session, out: &OutDir, artifacts: &Path, pairs_path: &Path) -> Result<()> {
    let outputs = ["predictions.csv"];
    out.claim(&outputs)?;
    let a = load_artifacts(artifacts, &mut s.inputs, true)?;
    let model = a.model.expect("model loaded");
    s.inputs.add_file(pairs_path)?;
    let pairs = read_pairs(pairs_path)?;
    let cands: Vec<Candidate> = pairs.iter().map(|(d, m)| candidate(&a.graph, d, m)).collect();
    let scores = predict_scores(&model, &cands, &a.phi, model.combiner).stage("predict")?;
    let path = out.path("predictions.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
    let mut write = || -> std::result::Result<(), csv::Error> {
        w.write_record(["device", "app", "score", "cold"])?;
        for (c, s) in cands.iter().zip(&scores) {
            let cold = if c.indices().is_some() { "0" } else { "1" };
            w.write_record([c.device.as_str(), c.app.as_str(), &s.to_string(), cold])?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| csv_error(&path, e))?;
    println!("{} pairs scored -> {}", cands.len(), path.display());
    let args = json!({ "artifacts": artifacts, "pairs": pairs_path });
    write_run(out, "predict", &args, &s.config, &s.inputs, &outputs)
}

#[derive(Serialize)]
struct Explanation<'a> {
    schema_version: &'static str,
    device: &'a str,
    app: &'a str,
    score: f64,
    /// Classifier kind, or `dot_product` without a model.
    score_source: String,
    walk_budget: usize,
    max_order: usize,
    traces: Vec<WalkTrace>,
}

fn render(e: &Explanation) -> String {
    let mut s = format!("{} -> {}  score {:.6} ({})\n", e.device, e.app, e.score, e.score_source);
    if e.traces.is_empty() {
        s.push_str(&format!(
            "no connecting walks within budget ({} walks, order <= {})\n",
            e.walk_budget, e.max_order
        ));
    }
    for (i, t) in e.traces.iter().enumerate() {
        s.push_str(&format!(
            "{:>3}. {:>6} hits  order {}  {}\n",
            i + 1,
            t.hits,
            t.order,
            t.path.join(" > ")
        ));
    }
    s
}

fn cmd_explain(
    mut s: Session,
    out: Option<&OutDir>,
    artifacts: &Path,
    device: &str,
    app: &str,
    as_json: bool,
    walks: Option<usize>,
) -> Result<()> {
    let name = if as_json { "explain.json" } else { "explain.txt" };
    if let Some(o) = out {
        o.claim(&[name])?;
    }
    let a = load_artifacts(artifacts, &mut s.inputs, false)?;
    let d = a.graph.devices().get(device).ok_or_else(|| Error::Lookup {
        side: "device",
        token: device.into(),
    })?;
    let m = a.graph.apps().get(app).ok_or_else(|| Error::Lookup {
        side: "app",
        token: app.into(),
    })?;
    let (score, score_source) = match &a.model {
        Some(model) => {
            let c = [candidate(&a.graph, device, app)];
            let s = predict_scores(model, &c, &a.phi, model.combiner).stage("predict")?[0];
            (s, model.kind().name().to_string())
        }
        None => (a.phi.score(d, m), "dot_product".to_string()),
    };
    let cfg = &mut s.config.explain;
    if let Some(w) = walks {
        cfg.walk_budget = w;
    }
    let max_order = *cfg.max_order.get_or_insert(a.meta.max_order.unwrap_or(4));
    let traces = explain_prediction(
        &a.graph,
        d,
        m,
        cfg.walk_budget,
        max_order,
        cfg.kernel,
        derive_seed(s.config.seed, "explain", 0),
    );
    let e = Explanation {
        schema_version: SCHEMA_VERSION,
        device,
        app,
        score,
        score_source,
        walk_budget: cfg.walk_budget,
        max_order,
        traces,
    };
    let text = if as_json {
        serde_json::to_string_pretty(&e).expect("explanation serializes") + "\n"
    } else {
        render(&e)
    };
    print!("{text}");
    if let Some(o) = out {
        let path = o.path(name);
        std::fs::write(&path, &text).map_err(|err| Error::io(&path, err))?;
        let args = json!({ "artifacts": artifacts, "device": device, "app": app });
        write_run(o, "explain", &args, &s.config, &s.inputs, &[name])?;
    }
    Ok(())
}

fn cmd_export(mut s: Session, out: &OutDir, artifacts: &Path, format: EventFormat) -> Result<()> {
    let name = events_name(format);
    let test_path = artifacts.join("edges_test.csv");
    let mut outputs = vec![name, TSV_NAME, META_NAME];
    if test_path.exists() {
        outputs.push("pa_scores.csv");
    }
    out.claim(&outputs)?;
    let a = load_artifacts(artifacts, &mut s.inputs, false)?;
    write_events_path(&out.path(name), &a.graph.to_events(), format)?;
    write_embeddings(&out.path(""), &a.phi, &a.graph, &a.meta)?;
    if test_path.exists() {
        s.inputs.add_file(&test_path)?;
        let pairs = read_pairs(&test_path)?;
        let idx: Vec<_> = pairs
            .iter()
            .map(|(d, m)| (a.graph.devices().get(d), a.graph.apps().get(m)))
            .collect();
        write_pa_scores(&out.path("pa_scores.csv"), &pairs, &pa_scores(&a.graph, &idx))?;
    }
    println!("exported {} -> {}", artifacts.display(), out.path("").display());
    write_run(out, "export", &json!({ "artifacts": artifacts }), &s.config, &s.inputs, &outputs)
}

fn metric_header(first: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = first.iter().map(|s| s.to_string()).collect();
    h.extend(["auc".to_string(), "ap".to_string()]);
    h.extend(FPR_TARGETS.iter().map(|&t| format!("tpr@{}", fpr_key(t))));
    h.push("error".into());
    h
}

fn metric_cells(report: Option<&EvalReport>, error: Option<&str>) -> Vec<String> {
    let mut c = Vec::new();
    match report {
        Some(r) => {
            c.push(r.auc.to_string());
            c.push(r.ap.to_string());
            c.extend(FPR_TARGETS.iter().map(|&t| r.tpr(t).to_string()));
        }
        None => c.extend(std::iter::repeat_n(String::new(), 2 + FPR_TARGETS.len())),
    }
    c.push(error.unwrap_or("").to_string());
    c
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut write = || -> std::result::Result<(), csv::Error> {
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| csv_error(path, e))
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

fn split_summary(p: &Prepared) -> serde_json::Value {
    json!({
        "candidate_hash": p.candidate_hash,
        "train_edges": p.graph.n_edges(),
        "train_candidates": p.candidates.train.len(),
        "test_candidates": p.candidates.test.len(),
        "cold_dropped": p.candidates.cold_dropped,
        "cold_kept": p.candidates.cold_kept,
    })
}

fn cmd_experiment(mut s: Session, out: &OutDir, kind: ExperimentKind, events: Option<&Path>, header: bool) -> Result<()> {
    let outputs: &[&str] = match kind {
        ExperimentKind::Comparison => &["report.json", "comparison.csv", "roc"],
        ExperimentKind::Latency => &["report.json", "latency.csv"],
        ExperimentKind::Rolling => &["report.json", "rolling.csv"],
        ExperimentKind::Runtime => &["report.json", "runtime.csv"],
    };
    out.claim(outputs)?;
    let seed = s.config.seed;
    let (name, report) = match kind {
        ExperimentKind::Comparison => {
            let data = load_events(&mut s.config, events, header, &mut s.inputs)?;
            let p = prepared(&mut s.config, &data)?;
            let e = &s.config.experiment;
            let rows = comparison_experiment(&p, &s.config.pipeline, &e.methods, &e.combiners, &e.classifiers, seed);
            let roc_dir = out.path("roc");
            std::fs::create_dir_all(&roc_dir).map_err(|err| Error::io(&roc_dir, err))?;
            let mut table = Vec::new();
            for r in &rows {
                let combiner = opt(r.combiner);
                let classifier = opt(r.classifier);
                if let Some(rep) = &r.report {
                    let mut file = r.method.name().to_string();
                    for part in [&combiner, &classifier] {
                        if !part.is_empty() {
                            file = format!("{file}_{part}");
                        }
                    }
                    write_roc_csv(&roc_dir.join(format!("{file}.csv")), &rep.metrics.roc)?;
                    println!("{:<24} {:<12} {:<18} auc {:.4}", r.method.name(), combiner, classifier, rep.auc);
                } else {
                    println!("{:<24} failed: {}", r.method.name(), r.error.as_deref().unwrap_or(""));
                }
                let mut row = vec![r.method.name().to_string(), combiner, classifier];
                row.extend(metric_cells(r.report.as_ref(), r.error.as_deref()));
                table.push(row);
            }
            write_csv(&out.path("comparison.csv"), &metric_header(&["method", "combiner", "classifier"]), &table)?;
            ("comparison", json!({ "split": split_summary(&p), "rows": rows }))
        }
        ExperimentKind::Latency => {
            let data = load_events(&mut s.config, events, header, &mut s.inputs)?;
            let p = prepared(&mut s.config, &data)?;
            let rows = latency_experiment(&p, &s.config.pipeline, &s.config.experiment.ratios, seed)?;
            let mut table = Vec::new();
            for r in &rows {
                println!(
                    "ratio {:<5} train edges {:<8} auc {}",
                    r.ratio,
                    r.train_edges,
                    r.report.as_ref().map_or("-".into(), |x| format!("{:.4}", x.auc))
                );
                let mut row = vec![r.ratio.to_string(), r.dropped.to_string(), r.train_edges.to_string()];
                row.extend(metric_cells(r.report.as_ref(), r.error.as_deref()));
                table.push(row);
            }
            write_csv(&out.path("latency.csv"), &metric_header(&["ratio", "dropped", "train_edges"]), &table)?;
            ("latency", json!({ "split": split_summary(&p), "rows": rows }))
        }
        ExperimentKind::Rolling => {
            let data = load_events(&mut s.config, events, header, &mut s.inputs)?;
            let r = rolling_window_experiment(&data.events, &s.config.experiment.rolling, &s.config.pipeline, seed)?;
            let done: Vec<(usize, &EvalReport)> =
                r.steps.iter().filter_map(|st| st.report.as_ref().map(|x| (st.step, x))).collect();
            write_rolling_csv(&out.path("rolling.csv"), &done)?;
            for (k, v) in &r.tpr {
                println!("tpr@{k}: mean {:.4} std {:.4} over {} steps", v.mean, v.std, v.n);
            }
            println!("auc: mean {:.4} std {:.4}", r.auc.mean, r.auc.std);
            ("rolling", json!({ "result": r }))
        }
        ExperimentKind::Runtime => {
            let gen = s
                .config
                .generator
                .clone()
                .ok_or_else(|| Error::config("generator", "required by the runtime experiment"))?;
            let holdout = s.config.holdout.get_or_insert_with(|| HoldoutConfig::new(0.1)).clone();
            let rows = runtime_experiment(&gen, &holdout, &s.config.experiment.scales, &s.config.pipeline, seed)?;
            let header: Vec<String> = [
                "scale",
                "n_edges",
                "graph_build",
                "embedding",
                "classifier",
                "graph_build_ratio",
                "embedding_ratio",
                "classifier_ratio",
                "edge_ratio",
            ]
            .map(String::from)
            .to_vec();
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    let t = &r.timings;
                    println!("scale {:<4} edges {:<8} embedding {:.3}s", t.scale, t.n_edges, t.embedding);
                    vec![
                        t.scale.to_string(),
                        t.n_edges.to_string(),
                        t.graph_build.to_string(),
                        t.embedding.to_string(),
                        t.classifier.to_string(),
                        opt(r.graph_build_ratio),
                        opt(r.embedding_ratio),
                        opt(r.classifier_ratio),
                        opt(r.edge_ratio),
                    ]
                })
                .collect();
            write_csv(&out.path("runtime.csv"), &header, &table)?;
            ("runtime", json!({ "rows": rows }))
        }
    };
    let mut doc = json!({ "schema_version": SCHEMA_VERSION, "experiment": name, "seed": seed });
    if let (Some(d), serde_json::Value::Object(extra)) = (doc.as_object_mut(), report) {
        d.extend(extra);
    }
    out.write_json("report.json", &doc)?;
    write_run(out, &format!("experiment {name}"), &json!({ "kind": name }), &s.config, &s.inputs, outputs)
}
