use phagraph_core::baselines::LineConfig;
use phagraph_core::embedding::TrainerConfig;
use phagraph_core::eval::{
    comparison_experiment, drop_order, latency_experiment, roc_and_metrics, rolling_window_experiment,
    runtime_report, synthetic_data, write_json, write_roc_csv, write_rolling_csv, EvalReport, Method,
    PipelineConfig, Prepared, RollingConfig, StageTimings,
};
use phagraph_core::predictor::{ClassifierKind, Combiner};
use phagraph_core::synthetic::{generate, GeneratorConfig, HoldoutConfig};

fn quick() -> PipelineConfig {
    PipelineConfig {
        trainer: TrainerConfig {
            dim: 16,
            walks_per_vertex: 5,
            neg_samples: 10,
            ..TrainerConfig::default()
        },
        line: LineConfig {
            dim: 16,
            epochs: 5,
            ..LineConfig::default()
        },
        ..PipelineConfig::default()
    }
}

fn corpus(seed: u64) -> GeneratorConfig {
    let mut g = GeneratorConfig::new(600, 60, 2_400, seed);
    g.n_groups = 4;
    g.affinity = 8.0;
    g
}

fn prepared(seed: u64) -> Prepared {
    synthetic_data(&corpus(seed), &HoldoutConfig::new(0.1))
        .unwrap()
        .prepare(Default::default(), seed)
        .unwrap()
}

#[test]
fn comparison_has_one_row_per_method_and_setting() {
    let p = prepared(1);
    let rows = comparison_experiment(&p, &quick(), &Method::ALL, &[], &[], 1);
    assert_eq!(rows.len(), 4);
    for r in &rows {
        let rep = r.report.as_ref().unwrap();
        assert!(rep.auc.is_finite() && (0.0..=1.0).contains(&rep.auc));
        assert_eq!(rep.tpr_at.len(), 3);
    }
    assert!(rows[0].combiner.is_none());

    let rows = comparison_experiment(
        &p,
        &quick(),
        &[Method::Full],
        &[Combiner::Concat, Combiner::Hadamard],
        &[ClassifierKind::Logistic, ClassifierKind::RandomForest],
        1,
    );
    assert_eq!(rows.len(), 4);
    let hashes: std::collections::HashSet<_> =
        rows.iter().map(|r| r.report.as_ref().unwrap().config_hash.clone()).collect();
    assert_eq!(hashes.len(), 4);
}

#[test]
fn comparison_rows_are_reproducible() {
    let p = prepared(2);
    let a = comparison_experiment(&p, &quick(), &Method::ALL, &[], &[], 2);
    let b = comparison_experiment(&p, &quick(), &Method::ALL, &[], &[], 2);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.report.as_ref().unwrap().auc, y.report.as_ref().unwrap().auc);
    }
}

#[test]
fn failing_method_becomes_an_annotated_row() {
    let p = prepared(3);
    let mut cfg = quick();
    cfg.trainer.learning_rate = 1e30;
    cfg.trainer.init_scale = 1e10;
    let rows = comparison_experiment(&p, &cfg, &[Method::PreferentialAttachment, Method::Full], &[], &[], 3);
    assert_eq!(rows.len(), 2);
    assert!(rows[0].report.is_some());
    assert!(rows[1].report.is_none());
    assert!(rows[1].error.as_ref().unwrap().contains("full"));
}

#[test]
fn drop_order_never_isolates_a_vertex() {
    let p = prepared(4);
    let order = drop_order(&p.graph, 4);
    let removed: std::collections::HashSet<_> = order.iter().copied().collect();
    let kept: Vec<(u32, u32)> = p.graph.edges().filter(|e| !removed.contains(e)).collect();
    let g = p.graph.with_edge_subset(&kept).unwrap();
    assert_eq!(g.n_devices(), p.graph.n_devices());
    assert_eq!(g.n_apps(), p.graph.n_apps());
}

#[test]
fn latency_rows_start_at_zero_and_shrink_training() {
    let p = prepared(5);
    let rows = latency_experiment(&p, &quick(), &[0.07, 0.16, 0.25], 5).unwrap();
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    assert_eq!(ratios, vec![0.0, 0.07, 0.16, 0.25]);
    let n = p.graph.n_edges();
    for r in &rows {
        assert_eq!(r.train_edges, n - (r.ratio * n as f64).round() as usize);
        let rep = r.report.as_ref().unwrap();
        assert_eq!(rep.metrics.n_pos + rep.metrics.n_neg, p.candidates.test.len() as u64);
    }
    assert!(latency_experiment(&p, &quick(), &[1.5], 5).is_err());
}

#[test]
fn rolling_windows_summarise_completed_steps() {
    let mut g = corpus(6);
    let t0 = g.time_window[0];
    g.time_window = [t0, t0 + 8 * 86_400];
    let events = generate(&g).unwrap().events;
    let rolling = RollingConfig {
        train_secs: 4 * 86_400,
        steps: 3,
        start: Some(t0),
        ..RollingConfig::default()
    };
    let r = rolling_window_experiment(&events, &rolling, &quick(), 6).unwrap();
    assert_eq!(r.steps.len(), 3);
    assert_eq!(r.steps[1].start, t0 + 86_400);
    assert_eq!(r.auc.n, 3);
    assert!(r.tpr["0.001"].std >= 0.0);

    let dir = tempfile::tempdir().unwrap();
    let steps: Vec<(usize, &EvalReport)> = r.steps.iter().filter_map(|s| s.report.as_ref().map(|x| (s.step, x))).collect();
    let path = dir.path().join("rolling.csv");
    write_rolling_csv(&path, &steps).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("step,tpr@0.0001,tpr@0.001,tpr@0.005,auc,ap\n"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn runtime_ratios_divide_consecutive_scales() {
    let t = |scale: f64, secs: f64| StageTimings {
        scale,
        n_edges: (1000.0 * scale) as usize,
        graph_build: secs / 10.0,
        embedding: secs,
        classifier: secs / 2.0,
    };
    let rows = runtime_report(&[t(1.0, 2.0), t(2.0, 4.5), t(4.0, 8.0)]);
    assert_eq!(rows[0].embedding_ratio, None);
    assert_eq!(rows[1].embedding_ratio, Some(2.25));
    assert!((rows[2].embedding_ratio.unwrap() - 8.0 / 4.5).abs() < 1e-12);
    assert_eq!(rows[2].edge_ratio, Some(2.0));
}

#[test]
fn report_json_carries_schema_and_tpr_keys() {
    let m = roc_and_metrics(&[0.9, 0.8, 0.3, 0.1], &[true, false, true, false]).unwrap();
    let r = EvalReport::new("full", m, "abc".into(), 7);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    write_json(&path, &r).unwrap();
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["schema_version"], "1");
    assert_eq!(v["tpr_at"].as_object().unwrap().len(), 3);
    assert!(v["metrics"].get("roc").is_none());
    assert_eq!(v["metrics"]["operating_points"][0]["fn"], 1);

    let roc = dir.path().join("roc.csv");
    write_roc_csv(&roc, &r.metrics.roc).unwrap();
    let text = std::fs::read_to_string(&roc).unwrap();
    assert_eq!(text.lines().next(), Some("fpr,tpr"));
    assert_eq!(text.lines().count(), r.metrics.roc.len() + 1);
}
