use std::collections::HashSet;

use phagraph_core::embedding::EmbeddingMatrix;
use phagraph_core::error::Error;
use phagraph_core::eval::roc_and_metrics;
use phagraph_core::graph::{temporal_split, BipartiteGraph, InstallEvent};
use phagraph_core::predictor::{
    build_candidates, featurize_set, load_model, predict_scores, sample_negative_edges, save_model, train_classifier,
    Classifier, ClassifierConfig, ClassifierKind, ColdPolicy, Combiner, Features, Model, ModelMeta,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

const KINDS: [ClassifierKind; 3] = [
    ClassifierKind::RandomForest,
    ClassifierKind::GradientBoosting,
    ClassifierKind::Logistic,
];

fn gaussian(n: usize, dim: usize, shift: f32, seed: u64) -> (Features, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Features::new(dim);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 2 == 0;
        let row: Vec<f32> = (0..dim)
            .map(|j| {
                let z: f32 = StandardNormal.sample(&mut rng);
                if j == 0 && label {
                    z + shift
                } else {
                    z
                }
            })
            .collect();
        x.push(&row).unwrap();
        y.push(label);
    }
    (x, y)
}

fn auc(model: &Model, x: &Features, y: &[bool]) -> f64 {
    roc_and_metrics(&model.score_all(x), y).unwrap().auc
}

#[test]
fn separable_data_is_fit_exactly() {
    let (x, y) = gaussian(400, 4, 12.0, 1);
    for kind in KINDS {
        let m = Model::fit(&x, &y, &ClassifierConfig::of_kind(kind), 3).unwrap();
        let correct = x
            .data
            .chunks(x.dim)
            .zip(&y)
            .filter(|(row, &label)| (m.score(row) > 0.5) == label)
            .count();
        assert_eq!(correct, y.len(), "{kind}");
    }
}

#[test]
fn three_sigma_shift_ranks_well_held_out() {
    let (x, y) = gaussian(2000, 5, 3.0, 2);
    let (xt, yt) = gaussian(2000, 5, 3.0, 3);
    for kind in KINDS {
        let m = Model::fit(&x, &y, &ClassifierConfig::of_kind(kind), 4).unwrap();
        let a = auc(&m, &xt, &yt);
        assert!(a >= 0.95, "{kind}: {a}");
    }
}

#[test]
fn shuffled_labels_give_chance_auc() {
    let (x, mut y) = gaussian(4000, 5, 3.0, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in (1..y.len()).rev() {
        y.swap(i, rng.random_range(0..=i));
    }
    let (xt, yt) = gaussian(4000, 5, 0.0, 7);
    for kind in KINDS {
        let m = Model::fit(&x, &y, &ClassifierConfig::of_kind(kind), 8).unwrap();
        let a = auc(&m, &xt, &yt);
        assert!((a - 0.5).abs() <= 0.05, "{kind}: {a}");
    }
}

#[test]
fn single_class_is_rejected() {
    let (x, _) = gaussian(20, 2, 1.0, 9);
    let y = vec![true; 20];
    for kind in KINDS {
        assert!(matches!(
            Model::fit(&x, &y, &ClassifierConfig::of_kind(kind), 1),
            Err(Error::Classifier(_))
        ));
    }
}

#[test]
fn model_blob_round_trips_and_rejects_damage() {
    let (x, y) = gaussian(300, 3, 2.0, 10);
    for kind in KINDS {
        let model = Model::fit(&x, &y, &ClassifierConfig::of_kind(kind), 11).unwrap();
        let c = Classifier {
            combiner: Combiner::Hadamard,
            feature_dim: 3,
            seed: 11,
            model,
        };
        let bytes = c.to_bytes();
        let back = Classifier::from_bytes(&bytes).unwrap();
        assert_eq!(back.combiner, Combiner::Hadamard);
        assert_eq!(c.model.score_all(&x), back.model.score_all(&x), "{kind}");

        let mut bad = bytes.clone();
        bad[0] ^= 0xff;
        assert!(Classifier::from_bytes(&bad).is_err());
        assert!(Classifier::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }
}

fn small_graph() -> BipartiteGraph {
    BipartiteGraph::from_index_pairs(&[(0, 0), (0, 1), (1, 1), (2, 2), (3, 4), (1, 3)]).unwrap()
}

#[test]
fn negatives_are_uniform_over_free_pairs() {
    let g = small_graph();
    let exclusion: HashSet<(u32, u32)> = [(2, 0), (3, 3)].into_iter().collect();
    let free: Vec<(u32, u32)> = (0..4)
        .flat_map(|d| (0..5).map(move |m| (d, m)))
        .filter(|&(d, m)| !g.has_edge(d, m) && !exclusion.contains(&(d, m)))
        .collect();
    let draws = 24_000;
    let mut counts = std::collections::HashMap::new();
    for seed in 0..draws {
        let pair = sample_negative_edges(&g, 1, &exclusion, seed).unwrap()[0];
        *counts.entry(pair).or_insert(0u64) += 1;
    }
    assert_eq!(counts.len(), free.len());
    let expected = draws as f64 / free.len() as f64;
    let stat: f64 = free
        .iter()
        .map(|p| (counts[p] as f64 - expected).powi(2) / expected)
        .sum();
    let p = 1.0 - ChiSquared::new((free.len() - 1) as f64).unwrap().cdf(stat);
    assert!(p > 1e-3, "chi-square {stat}, p {p}");
}

#[test]
fn negatives_exhaust_the_free_set_then_fail() {
    let g = small_graph();
    let exclusion = HashSet::new();
    let free = 20 - g.n_edges();
    let all = sample_negative_edges(&g, free, &exclusion, 1).unwrap();
    let distinct: HashSet<_> = all.iter().copied().collect();
    assert_eq!(distinct.len(), free);
    assert!(all.iter().all(|&(d, m)| !g.has_edge(d, m)));
    assert!(matches!(
        sample_negative_edges(&g, free + 1, &exclusion, 1),
        Err(Error::Sampling(_))
    ));
}

fn toy_events() -> Vec<InstallEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut ev = Vec::new();
    for i in 0..400 {
        let t = if i < 300 { rng.random_range(0..100) } else { rng.random_range(101..150) };
        let d = rng.random_range(0..60);
        let m = rng.random_range(0..25);
        ev.push(InstallEvent::new(&format!("d{d}"), &format!("m{m}"), t));
    }
    ev.push(InstallEvent::new("d-new", "m0", 120));
    ev
}

#[test]
fn candidates_are_balanced_and_disjoint() {
    let split = temporal_split(&toy_events(), 100, 50).unwrap();
    let g = split.train_graph().unwrap();
    let c = build_candidates(&split, &g, ColdPolicy::Drop, 3).unwrap();
    let count = |v: &[phagraph_core::predictor::Candidate], label| v.iter().filter(|c| c.label == label).count();
    assert_eq!(count(&c.train, true), count(&c.train, false));
    assert_eq!(count(&c.test, true), count(&c.test, false));
    assert!(c.cold_dropped >= 1);

    let key = |x: &phagraph_core::predictor::Candidate| (x.device.clone(), x.app.clone());
    let test_pos: HashSet<_> = c.test.iter().filter(|x| x.label).map(key).collect();
    let train_neg: HashSet<_> = c.train.iter().filter(|x| !x.label).map(key).collect();
    let test_neg: HashSet<_> = c.test.iter().filter(|x| !x.label).map(key).collect();
    assert!(train_neg.is_disjoint(&test_pos));
    assert!(test_neg.is_disjoint(&test_pos));
    assert!(test_neg.is_disjoint(&train_neg));
    for x in c.train.iter().chain(&c.test).filter(|x| !x.label) {
        let (d, m) = x.indices().unwrap();
        assert!(!g.has_edge(d, m));
    }

    let kept = build_candidates(&split, &g, ColdPolicy::ZeroVector, 3).unwrap();
    assert_eq!(kept.cold_kept, c.cold_dropped);
    assert!(kept.test.iter().any(|x| x.label && x.indices().is_none()));
}

#[test]
fn trained_model_saves_loads_and_checks_combiner() {
    let split = temporal_split(&toy_events(), 100, 50).unwrap();
    let g = split.train_graph().unwrap();
    let c = build_candidates(&split, &g, ColdPolicy::ZeroVector, 3).unwrap();
    let mut phi = EmbeddingMatrix::for_graph(&g, 8);
    phi.randomize(&mut ChaCha8Rng::seed_from_u64(1), 0.5);
    let train = featurize_set(&phi, &c.train, Combiner::Concat).unwrap();
    let cfg = ClassifierConfig::default();
    let model = train_classifier(&train, &cfg, 5).unwrap();
    let scores = predict_scores(&model, &c.test, &phi, Combiner::Concat).unwrap();
    assert_eq!(scores.len(), c.test.len());
    assert!(matches!(
        predict_scores(&model, &c.test, &phi, Combiner::Average),
        Err(Error::Contract(_))
    ));

    let dir = tempfile::tempdir().unwrap();
    let meta = ModelMeta {
        format_version: "1".into(),
        kind: model.kind(),
        seed: 5,
        combiner: Combiner::Concat,
        feature_dim: model.feature_dim,
        n_train: train.len(),
        train_hash: phagraph_core::predictor::dataset_hash(&train),
        graph_hash: g.content_hash(),
        config: cfg,
    };
    save_model(dir.path(), &model, &meta).unwrap();
    let (back, meta_back) = load_model(dir.path()).unwrap();
    assert_eq!(meta, meta_back);
    assert_eq!(predict_scores(&back, &c.test, &phi, Combiner::Concat).unwrap(), scores);
}
