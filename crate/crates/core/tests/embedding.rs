use phagraph_core::embedding::{
    exact_lorder_distribution, extract_pairs, ranking_gradient, read_embeddings, train, write_embeddings,
    EmbeddingMeta, Kernel, TrainerConfig, WalkSampler,
};
use phagraph_core::error::Error;
use phagraph_core::graph::{build_graph, BipartiteGraph, Vertex};
use phagraph_core::synthetic::{generate, GeneratorConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_graph(rng: &mut ChaCha8Rng, max_side: u32) -> BipartiteGraph {
    let nd = rng.random_range(2..=max_side);
    let na = rng.random_range(2..=max_side);
    let mut edges: Vec<(u32, u32)> = (0..nd).map(|d| (d, rng.random_range(0..na))).collect();
    edges.extend((0..na).map(|m| (rng.random_range(0..nd), m)));
    edges.extend((0..nd + na).map(|_| (rng.random_range(0..nd), rng.random_range(0..na))));
    edges.sort_unstable();
    edges.dedup();
    BipartiteGraph::from_index_pairs(&edges).unwrap()
}

fn tv(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0
}

#[test]
fn one_step_frequencies_match_the_kernel() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for kernel in [Kernel::DegreeWeighted, Kernel::Uniform] {
        for _ in 0..5 {
            let g = random_graph(&mut rng, 50);
            assert!(g.n_vertices() <= 100);
            let sampler = WalkSampler::new(&g, kernel);
            for v in [Vertex::Device(0), Vertex::App(0)] {
                let row = sampler.kernel_row(v);
                let mut counts = vec![0.0; row.len()];
                let n = 100_000;
                for _ in 0..n {
                    counts[sampler.step(v, &mut rng).unwrap() as usize] += 1.0 / n as f64;
                }
                let d = tv(&row, &counts);
                assert!(d <= 0.02, "{kernel:?} {v:?}: {d}");
            }
        }
    }
}

#[test]
fn uniform_kernel_walks_match_exact_distribution() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let g = random_graph(&mut rng, 20);
        let sampler = WalkSampler::new(&g, Kernel::Uniform);
        let n = 50_000;
        let mut counts = vec![vec![0.0; g.n_apps()]; 3];
        for _ in 0..n {
            let w = sampler.sample_walk(1, 5, &mut rng).unwrap();
            for p in extract_pairs(&w, 3) {
                counts[p.order as usize - 1][p.app as usize] += 1.0 / n as f64;
            }
        }
        for l in 1..=3 {
            let exact = exact_lorder_distribution(&g, Vertex::Device(1), l, Kernel::Uniform).unwrap();
            assert!((exact.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(tv(&exact, &counts[l - 1]) <= 0.05);
        }
    }
}

#[test]
fn decay_weight_scales_the_ranking_gradient() {
    let d = vec![0.3, -0.2, 0.5, 0.1];
    let p = vec![-0.4, 0.1, -0.3, 0.2];
    let negs = vec![vec![0.6, -0.5, 0.4, 0.3], vec![0.1, 0.0, -0.1, 0.2]];
    let g1 = ranking_gradient(&d, &p, &negs, 1.0, 0.02, 0.0).unwrap();
    let g2 = ranking_gradient(&d, &p, &negs, 0.5, 0.02, 0.0).unwrap();
    assert!(g1.active >= 1);
    for (a, b) in g1.device.iter().zip(&g2.device) {
        assert!((a - 2.0 * b).abs() < 1e-15);
    }
    assert!((g1.loss - 2.0 * g2.loss).abs() < 1e-15);
}

#[test]
fn inactive_negatives_leave_only_regularization() {
    let d = vec![1.0, 0.0];
    let p = vec![1.0, 0.0];
    let negs = vec![vec![-1.0, 0.0]];
    let g = ranking_gradient(&d, &p, &negs, 1.0, 0.02, 0.1).unwrap();
    assert_eq!(g.active, 0);
    assert_eq!(g.device, vec![0.2, 0.0]);
    assert_eq!(g.negatives[0], vec![-0.2, 0.0]);
}

fn small_corpus() -> BipartiteGraph {
    let mut cfg = GeneratorConfig::new(300, 40, 1200, 4);
    cfg.n_groups = 4;
    cfg.affinity = 10.0;
    let c = generate(&cfg).unwrap();
    build_graph(&c.events, (0, u64::MAX)).unwrap()
}

#[test]
fn parallel_training_stays_finite_and_differs_only_statistically() {
    let g = small_corpus();
    let cfg = TrainerConfig {
        dim: 16,
        walks_per_vertex: 10,
        neg_samples: 10,
        seed: 3,
        ..TrainerConfig::default()
    };
    let one = train(&g, &cfg).unwrap();
    let four = train(&g, &TrainerConfig { workers: 4, ..cfg }).unwrap();
    assert!(one.is_finite() && four.is_finite());
    let ratio = four.norm() / one.norm();
    assert!((0.8..1.25).contains(&ratio), "{ratio}");
}

#[test]
fn embeddings_round_trip_and_check_the_graph() {
    let g = small_corpus();
    let cfg = TrainerConfig {
        dim: 8,
        walks_per_vertex: 2,
        neg_samples: 5,
        ..TrainerConfig::default()
    };
    let phi = train(&g, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let meta = EmbeddingMeta::new("full", &phi, &g, serde_json::to_value(&cfg).unwrap());
    assert_eq!(meta.max_order, Some(4));
    write_embeddings(dir.path(), &phi, &g, &meta).unwrap();
    let (back, meta_back) = read_embeddings(dir.path(), &g).unwrap();
    assert_eq!(meta_back, meta);
    assert_eq!(back.as_slice(), phi.as_slice());

    let other = BipartiteGraph::from_index_pairs(&[(0, 0)]).unwrap();
    assert!(matches!(read_embeddings(dir.path(), &other), Err(Error::Contract(_))));
}
