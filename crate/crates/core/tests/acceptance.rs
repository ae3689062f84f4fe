//! End-to-end acceptance checks. Runs every criterion in sequence (timing
//! checks must not share the CPU with other work) and prints one line each.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use phagraph_core::embedding::{
    exact_lorder_distribution, extract_pairs, ranking_gradient, EmbeddingMatrix, Kernel, WalkSampler,
};
use phagraph_core::eval::{
    evaluate_embedding, evaluate_pa, latency_experiment, roc_and_metrics, rolling_window_experiment,
    runtime_experiment, synthetic_data, train_method, Method, PipelineConfig, Prepared, RollingConfig, FPR_TARGETS,
};
use phagraph_core::graph::{build_graph, degree_histogram, khop_degree_correlation, BipartiteGraph, Side, Vertex};
use phagraph_core::predictor::Combiner;
use phagraph_core::synthetic::{generate, GeneratorConfig, HoldoutConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn planted(seed: u64) -> GeneratorConfig {
    let mut g = GeneratorConfig::new(5_000, 500, 20_000, seed);
    g.n_groups = 20;
    g.affinity = 8.0;
    g.mixing = 1.0;
    g.app_exponent = 3.0;
    g.device_sigma = 0.1;
    g
}

fn planted_prepared(seed: u64) -> Prepared {
    let data = synthetic_data(&planted(seed), &HoldoutConfig::new(0.1)).unwrap();
    let p = data.prepare(Default::default(), seed).unwrap();
    assert_eq!(p.graph.n_edges(), 20_000);
    assert_eq!(p.split.test.len(), 2_000);
    p
}

fn random_graph(rng: &mut ChaCha8Rng) -> BipartiteGraph {
    let nd = rng.random_range(3..=20u32);
    let na = rng.random_range(3..=20u32);
    let mut edges: Vec<(u32, u32)> = (0..nd).map(|d| (d, rng.random_range(0..na))).collect();
    edges.extend((0..na).map(|m| (rng.random_range(0..nd), m)));
    let extra = rng.random_range(0..(nd * na / 3).max(1));
    edges.extend((0..extra).map(|_| (rng.random_range(0..nd), rng.random_range(0..na))));
    edges.sort_unstable();
    edges.dedup();
    BipartiteGraph::from_index_pairs(&edges).unwrap()
}

fn proximity_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let g = random_graph(&mut rng);
        assert!(g.n_vertices() <= 50);
        let start = rng.random_range(0..g.n_devices() as u32);
        let sampler = WalkSampler::new(&g, Kernel::DegreeWeighted);
        let walks = 100_000;
        let mut counts = vec![vec![0u64; g.n_apps()]; 3];
        for _ in 0..walks {
            let walk = sampler.sample_walk(start, 5, &mut rng).unwrap();
            for p in extract_pairs(&walk, 3) {
                counts[p.order as usize - 1][p.app as usize] += 1;
            }
        }
        for l in 1..=3 {
            let exact = exact_lorder_distribution(&g, Vertex::Device(start), l, Kernel::DegreeWeighted).unwrap();
            let tv: f64 = exact
                .iter()
                .zip(&counts[l - 1])
                .map(|(p, &c)| (p - c as f64 / walks as f64).abs())
                .sum::<f64>()
                / 2.0;
            worst = worst.max(tv);
        }
    }
    let secs = t.elapsed().as_secs_f64();
    check(
        worst <= 0.05 && secs <= 120.0,
        format!("max TV {worst:.4} over 20 graphs, l=1..3, {secs:.1}s"),
    )
}

fn oracle_loss(d: &[f64], p: &[f64], negs: &[Vec<f64>], weight: f64, margin: f64, lambda: f64) -> f64 {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let sq = |a: &[f64]| dot(a, a);
    let pos = dot(d, p);
    let mut rank = 0.0;
    for n in negs {
        let delta = dot(d, n) - pos;
        if delta > margin {
            rank += delta.ln();
        }
    }
    weight * rank / negs.len() as f64 + lambda * (sq(d) + sq(p) + negs.iter().map(|n| sq(n)).sum::<f64>())
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (dim, k, margin, lambda, h) = (8, 5, 0.02, 1e-4, 1e-5);
    let mut worst = 0.0f64;
    let mut configs = 0;
    let mut tries = 0;
    while configs < 1_000 {
        tries += 1;
        let mut v = || (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let d = v();
        let p = v();
        let negs: Vec<Vec<f64>> = (0..k).map(|_| v()).collect();
        let weight = 1.0 / rng.random_range(1..=4) as f64;
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let deltas: Vec<f64> = negs.iter().map(|n| dot(&d, n) - dot(&d, &p)).collect();
        if deltas.iter().all(|&x| x <= margin) || deltas.iter().any(|&x| (x - margin).abs() < 1e-3) {
            continue;
        }
        configs += 1;
        let g = ranking_gradient(&d, &p, &negs, weight, margin, lambda).unwrap();
        let oracle = oracle_loss(&d, &p, &negs, weight, margin, lambda);
        assert!((g.loss - oracle).abs() <= 1e-12 * oracle.abs().max(1.0), "loss {} vs {oracle}", g.loss);

        let mut analytic: Vec<f64> = g.device.clone();
        analytic.extend(&g.positive);
        for n in &g.negatives {
            analytic.extend(n);
        }
        let mut numeric = Vec::with_capacity(analytic.len());
        for row in 0..k + 2 {
            for c in 0..dim {
                let eval = |shift: f64| {
                    let (mut d2, mut p2, mut n2) = (d.clone(), p.clone(), negs.clone());
                    match row {
                        0 => d2[c] += shift,
                        1 => p2[c] += shift,
                        r => n2[r - 2][c] += shift,
                    }
                    oracle_loss(&d2, &p2, &n2, weight, margin, lambda)
                };
                numeric.push((eval(h) - eval(-h)) / (2.0 * h));
            }
        }
        let diff = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
        let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
        worst = worst.max(diff / scale);
    }
    check(
        worst <= 1e-5,
        format!("max relative error {worst:.2e} over {configs} active configurations ({tries} drawn)"),
    )
}

fn oracle_metrics(scores: &[f64], labels: &[bool]) -> (f64, Vec<f64>) {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|x| *x.1).map(|x| *x.0).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|x| !*x.1).map(|x| *x.0).collect();
    let mut wins = 0.0;
    for a in &pos {
        for b in &neg {
            wins += if a > b {
                1.0
            } else if a == b {
                0.5
            } else {
                0.0
            };
        }
    }
    let auc = wins / (pos.len() * neg.len()) as f64;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.push(f64::INFINITY);
    let tpr = FPR_TARGETS
        .iter()
        .map(|&target| {
            thresholds
                .iter()
                .map(|&t| {
                    let tp = pos.iter().filter(|&&s| s >= t).count() as f64 / pos.len() as f64;
                    let fp = neg.iter().filter(|&&s| s >= t).count() as f64 / neg.len() as f64;
                    (tp, fp)
                })
                .filter(|&(_, fp)| fp <= target)
                .map(|(tp, _)| tp)
                .fold(0.0, f64::max)
        })
        .collect();
    (auc, tpr)
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    let mut tpr_mismatch = 0;
    for i in 0..100 {
        let n = rng.random_range(2..=200);
        let levels = if i % 2 == 0 { 5 } else { 1_000_000 };
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        labels[0] = true;
        labels[1] = false;
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
        let m = roc_and_metrics(&scores, &labels).unwrap();
        let (auc, tpr) = oracle_metrics(&scores, &labels);
        worst = worst.max((m.auc - auc).abs());
        for (t, want) in FPR_TARGETS.iter().zip(&tpr) {
            if m.tpr_at(*t) != Some(*want) {
                tpr_mismatch += 1;
            }
        }
    }
    check(
        worst <= 1e-9 && tpr_mismatch == 0,
        format!("max AUC gap {worst:.1e}, {tpr_mismatch} TPR@FPR mismatches over 100 lists"),
    )
}

struct SeedRun {
    auc: HashMap<String, f64>,
    full_concat_workers1: f64,
}

fn method_runs(seed: u64, cfg: &PipelineConfig) -> SeedRun {
    let p = planted_prepared(seed);
    let mut auc = HashMap::new();
    auc.insert("pa".to_string(), evaluate_pa(&p, seed).unwrap().auc);
    let mut full = 0.0;
    for method in [Method::FirstOrder, Method::SecondOrder, Method::Full] {
        let phi = train_method(method, &p.graph, cfg, seed).unwrap().unwrap();
        let combiners: &[Combiner] = if method == Method::Full { &Combiner::ALL } else { &[Combiner::Concat] };
        for &c in combiners {
            let r = evaluate_embedding(method.name(), &phi, &p.candidates, &p.candidate_hash, c, &cfg.classifier, seed)
                .unwrap();
            auc.insert(format!("{} {}", method.name(), c.name()), r.auc);
            if method == Method::Full && c == Combiner::Concat {
                full = r.auc;
            }
        }
    }
    SeedRun {
        auc,
        full_concat_workers1: full,
    }
}

fn mean_of(runs: &[SeedRun], key: &str) -> f64 {
    runs.iter().map(|r| r.auc[key]).sum::<f64>() / runs.len() as f64
}

fn ordering_trend(runs: &[SeedRun]) -> Outcome {
    let full = mean_of(runs, "full concat");
    let second = mean_of(runs, "second_order concat");
    let first = mean_of(runs, "first_order concat");
    let pa = mean_of(runs, "pa");
    check(
        full >= second && second >= first && first >= pa && full - pa >= 0.05,
        format!("mean AUC full {full:.4}, second {second:.4}, first {first:.4}, PA {pa:.4}, full-PA {:.4}", full - pa),
    )
}

fn combiner_trend(runs: &[SeedRun]) -> Outcome {
    let concat = mean_of(runs, "full concat");
    let others: Vec<(Combiner, f64)> = Combiner::ALL
        .iter()
        .filter(|&&c| c != Combiner::Concat)
        .map(|&c| (c, mean_of(runs, &format!("full {}", c.name()))))
        .collect();
    let detail = others
        .iter()
        .map(|(c, a)| format!("{} {a:.4}", c.name()))
        .collect::<Vec<_>>()
        .join(", ");
    check(
        others.iter().all(|&(_, a)| concat >= a),
        format!("mean AUC concat {concat:.4} vs {detail}"),
    )
}

fn resilience_trend(cfg: &PipelineConfig) -> Outcome {
    let ratios = [0.0, 0.07, 0.16, 0.25];
    let mut sums = [0.0; 4];
    for &seed in &SEEDS {
        let p = planted_prepared(seed);
        let rows = latency_experiment(&p, cfg, &ratios[1..], seed).unwrap();
        assert_eq!(rows.len(), 4);
        for (s, row) in sums.iter_mut().zip(&rows) {
            *s += row.report.as_ref().unwrap_or_else(|| panic!("{:?}", row.error)).auc;
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / SEEDS.len() as f64).collect();
    let monotone = means.windows(2).all(|w| w[1] <= w[0]);
    check(
        monotone && means[3] >= means[0] - 0.05,
        format!(
            "mean AUC by drop ratio {}",
            ratios
                .iter()
                .zip(&means)
                .map(|(r, m)| format!("{r}: {m:.4}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

fn rolling_stability(cfg: &PipelineConfig) -> Outcome {
    let mut g = GeneratorConfig::new(3_000, 300, 30_000, 17);
    g.n_groups = 20;
    g.affinity = 8.0;
    g.mixing = 1.0;
    g.app_exponent = 3.0;
    g.device_sigma = 0.1;
    let t0 = g.time_window[0];
    g.time_window = [t0, t0 + 11 * 86_400];
    let corpus = generate(&g).unwrap();
    let rolling = RollingConfig {
        start: Some(t0),
        ..RollingConfig::default()
    };
    let r = rolling_window_experiment(&corpus.events, &rolling, cfg, 17).unwrap();
    let s = &r.tpr["0.001"];
    let done = r.steps.iter().filter(|s| s.report.is_some()).count();
    check(
        done == 5 && s.std <= 0.02,
        format!("{done}/5 steps, TPR@0.001 mean {:.4} std {:.4}, AUC mean {:.4} std {:.4}", s.mean, s.std, r.auc.mean, r.auc.std),
    )
}

fn runtime_scaling(cfg: &PipelineConfig) -> Outcome {
    let mut base = planted(23);
    base.n_devices = 2_000;
    base.n_apps = 200;
    base.target_edges = 8_000;
    let rows = runtime_experiment(&base, &HoldoutConfig::new(0.1), &[1.0, 2.0, 4.0], cfg, 23).unwrap();
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.embedding_ratio).collect();
    check(
        ratios.len() == 2 && ratios.iter().all(|&r| r <= 2.5),
        format!(
            "embedding seconds {} (ratios {})",
            rows.iter()
                .map(|r| format!("{:.2}", r.timings.embedding))
                .collect::<Vec<_>>()
                .join(", "),
            ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn bits(m: &EmbeddingMatrix) -> Vec<u32> {
    m.as_slice().iter().map(|x| x.to_bits()).collect()
}

fn determinism(cfg: &PipelineConfig, single_worker_auc: f64) -> Outcome {
    let run = || {
        let mut g = planted(31);
        g.n_devices = 1_000;
        g.n_apps = 100;
        g.target_edges = 4_000;
        let data = synthetic_data(&g, &HoldoutConfig::new(0.1)).unwrap();
        let p = data.prepare(Default::default(), 31).unwrap();
        let phi = train_method(Method::Full, &p.graph, cfg, 31).unwrap().unwrap();
        let r = evaluate_embedding("full", &phi, &p.candidates, &p.candidate_hash, Combiner::Concat, &cfg.classifier, 31)
            .unwrap();
        (bits(&phi), p.candidate_hash, r.auc.to_bits(), r.ap.to_bits())
    };
    let identical = run() == run();

    let p = planted_prepared(SEEDS[0]);
    let parallel = cfg.clone().with_workers(4);
    let phi = train_method(Method::Full, &p.graph, &parallel, SEEDS[0]).unwrap().unwrap();
    let r = evaluate_embedding("full", &phi, &p.candidates, &p.candidate_hash, Combiner::Concat, &parallel.classifier, SEEDS[0])
        .unwrap();
    let gap = (r.auc - single_worker_auc).abs();
    check(
        identical && gap <= 0.01,
        format!("repeat run bit-identical: {identical}; AUC 1 worker {single_worker_auc:.4} vs 4 workers {:.4}", r.auc),
    )
}

fn generator_fidelity() -> Outcome {
    let mut cfg = GeneratorConfig::new(20_000, 2_000, 40_000, 5);
    cfg.app_exponent = 2.3;
    let c = generate(&cfg).unwrap();
    let g = build_graph(&c.events, (0, u64::MAX)).unwrap();
    let fit = degree_histogram(&g, Side::App).fit.unwrap();

    let grouped = generate(&planted(7)).unwrap();
    let g = build_graph(&grouped.events, (0, u64::MAX)).unwrap();
    let r = khop_degree_correlation(&g, 2, 10_000, 1).unwrap();
    check(
        (fit.alpha - 2.3).abs() <= 0.3 && r < 0.0,
        format!("fitted exponent {:.3} (target 2.3), 2-hop degree correlation {r:.3}", fit.alpha),
    )
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = t.elapsed().as_secs_f64();
    let (tag, detail) = match &out {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("criterion {id:>2} {tag} {name}: {detail} [{secs:.0}s]");
    out.is_ok()
}

#[test]
fn acceptance_criteria() {
    let cfg = PipelineConfig::default();
    let mut passed = Vec::new();
    passed.push(run(1, "proximity oracle equivalence", proximity_oracle));
    passed.push(run(2, "ranking gradient check", gradient_check));
    passed.push(run(3, "metric oracle", metric_oracle));

    let t = Instant::now();
    let runs: Vec<SeedRun> = SEEDS.iter().map(|&s| method_runs(s, &cfg)).collect();
    println!("  (method runs on planted data: {:.0}s for {} seeds)", t.elapsed().as_secs_f64(), SEEDS.len());
    passed.push(run(4, "method ordering", || ordering_trend(&runs)));
    passed.push(run(5, "combiner ordering", || combiner_trend(&runs)));
    passed.push(run(6, "edge-drop resilience", || resilience_trend(&cfg)));
    passed.push(run(7, "rolling-window stability", || rolling_stability(&cfg)));
    passed.push(run(8, "embedding runtime scaling", || runtime_scaling(&cfg)));
    let single = runs[0].full_concat_workers1;
    passed.push(run(9, "determinism and parallel equivalence", || determinism(&cfg, single)));
    passed.push(run(10, "generator fidelity", generator_fidelity));

    let failed: Vec<usize> = passed
        .iter()
        .enumerate()
        .filter(|(_, ok)| !**ok)
        .map(|(i, _)| i + 1)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
