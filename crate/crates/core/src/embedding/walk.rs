use rand::Rng;
use serde::Serialize;

use super::config::Kernel;
use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, Side, Vertex};

/// Dense recursion is refused above this many vertices.
pub const EXACT_VERTEX_LIMIT: usize = 5_000;

/// Alternating device/app indices starting at a device: even positions are
/// devices, odd positions apps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Walk {
    pub vertices: Vec<u32>,
}

impl Walk {
    pub fn start(&self) -> u32 {
        self.vertices[0]
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex(&self, i: usize) -> Vertex {
        if i % 2 == 0 {
            Vertex::Device(self.vertices[i])
        } else {
            Vertex::App(self.vertices[i])
        }
    }

    /// App at occurrence rank `l` (1-based).
    pub fn app_at_rank(&self, l: usize) -> Option<u32> {
        self.vertices.get(2 * l - 1).copied()
    }
}

/// A training pair: walk start device, app at rank `order`, decay weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pair {
    pub device: u32,
    pub app: u32,
    pub order: u32,
    pub weight: f64,
}

/// Decay `C(l) = 1/l`.
pub fn decay(order: usize) -> f64 {
    1.0 / order as f64
}

/// Emits `(start, app at rank l, l, 1/l)` for every rank up to `max_order`.
pub fn extract_pairs(walk: &Walk, max_order: usize) -> Vec<Pair> {
    let mut out = Vec::new();
    extract_pairs_into(&walk.vertices, max_order, &mut out);
    out
}

pub(crate) fn extract_pairs_into(vertices: &[u32], max_order: usize, out: &mut Vec<Pair>) {
    let Some(&device) = vertices.first() else {
        return;
    };
    for (i, &app) in vertices.iter().skip(1).step_by(2).take(max_order).enumerate() {
        let order = i + 1;
        out.push(Pair {
            device,
            app,
            order: order as u32,
            weight: decay(order),
        });
    }
}

/// Precomputed transition tables over a graph.
pub struct WalkSampler<'g> {
    graph: &'g BipartiteGraph,
    kernel: Kernel,
    /// Cumulative neighbor weights aligned with each adjacency list.
    dev_cum: Vec<Vec<u64>>,
    app_cum: Vec<Vec<u64>>,
}

fn cumulative(neighbors: &[u32], weight: impl Fn(u32) -> u64) -> Vec<u64> {
    let mut acc = 0;
    neighbors
        .iter()
        .map(|&n| {
            acc += weight(n);
            acc
        })
        .collect()
}

impl<'g> WalkSampler<'g> {
    pub fn new(graph: &'g BipartiteGraph, kernel: Kernel) -> Self {
        let (dev_cum, app_cum) = match kernel {
            Kernel::Uniform => (Vec::new(), Vec::new()),
            Kernel::DegreeWeighted => (
                (0..graph.n_devices() as u32)
                    .map(|d| cumulative(graph.device_neighbors(d), |m| graph.app_degree(m) as u64))
                    .collect(),
                (0..graph.n_apps() as u32)
                    .map(|m| cumulative(graph.app_neighbors(m), |d| graph.device_degree(d) as u64))
                    .collect(),
            ),
        };
        WalkSampler {
            graph,
            kernel,
            dev_cum,
            app_cum,
        }
    }

    pub fn graph(&self) -> &'g BipartiteGraph {
        self.graph
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    /// One transition from `v`; `None` at a dead end.
    pub fn step<R: Rng + ?Sized>(&self, v: Vertex, rng: &mut R) -> Option<u32> {
        let (nbrs, cum) = match v {
            Vertex::Device(d) => (self.graph.device_neighbors(d), self.dev_cum.get(d as usize)),
            Vertex::App(m) => (self.graph.app_neighbors(m), self.app_cum.get(m as usize)),
        };
        if nbrs.is_empty() {
            return None;
        }
        let i = match (self.kernel, cum) {
            (Kernel::DegreeWeighted, Some(cum)) => {
                let u = rng.random_range(0..*cum.last().unwrap());
                cum.partition_point(|&c| c <= u)
            }
            _ => rng.random_range(0..nbrs.len()),
        };
        Some(nbrs[i])
    }

    /// Fills `out` with a walk of up to `edges` steps from device `start`.
    pub(crate) fn walk_into<R: Rng + ?Sized>(&self, start: u32, edges: usize, rng: &mut R, out: &mut Vec<u32>) {
        out.clear();
        out.push(start);
        let mut v = Vertex::Device(start);
        for _ in 0..edges {
            let Some(next) = self.step(v, rng) else {
                break;
            };
            out.push(next);
            v = match v {
                Vertex::Device(_) => Vertex::App(next),
                Vertex::App(_) => Vertex::Device(next),
            };
        }
    }

    pub fn sample_walk<R: Rng + ?Sized>(&self, start: u32, edges: usize, rng: &mut R) -> Result<Walk> {
        let n = self.graph.n_devices();
        if start as usize >= n {
            return Err(Error::Index {
                what: "device",
                index: start as usize,
                size: n,
            });
        }
        let mut vertices = Vec::with_capacity(edges + 1);
        self.walk_into(start, edges, rng, &mut vertices);
        Ok(Walk { vertices })
    }

    /// Exact one-step transition row from `v` over the opposite side.
    pub fn kernel_row(&self, v: Vertex) -> Vec<f64> {
        let size = match v.side() {
            Side::Device => self.graph.n_apps(),
            Side::App => self.graph.n_devices(),
        };
        let mut row = vec![0.0; size];
        let nbrs = self.graph.neighbors(v);
        let weight = |n: u32| -> f64 {
            match (self.kernel, v) {
                (Kernel::Uniform, _) => 1.0,
                (Kernel::DegreeWeighted, Vertex::Device(_)) => self.graph.app_degree(n) as f64,
                (Kernel::DegreeWeighted, Vertex::App(_)) => self.graph.device_degree(n) as f64,
            }
        };
        let total: f64 = nbrs.iter().map(|&n| weight(n)).sum();
        if total > 0.0 {
            for &n in nbrs {
                row[n as usize] += weight(n) / total;
            }
        }
        row
    }
}

/// Samples a walk of `edges` steps from device `start` under the
/// degree-weighted kernel.
pub fn sample_walk<R: Rng + ?Sized>(graph: &BipartiteGraph, start: u32, edges: usize, rng: &mut R) -> Result<Walk> {
    WalkSampler::new(graph, Kernel::DegreeWeighted).sample_walk(start, edges, rng)
}

/// Exact distribution of the vertex at occurrence rank `order` of a walk
/// from `v`, over the opposite side. Obtained by composing the one-step
/// kernel `2*order - 1` times; the zero vector when no such path exists.
pub fn exact_lorder_distribution(
    graph: &BipartiteGraph,
    v: Vertex,
    order: usize,
    kernel: Kernel,
) -> Result<Vec<f64>> {
    if graph.n_vertices() > EXACT_VERTEX_LIMIT {
        return Err(Error::TooLarge {
            vertices: graph.n_vertices(),
            limit: EXACT_VERTEX_LIMIT,
        });
    }
    if order == 0 {
        return Err(Error::config("order", "must be at least 1"));
    }
    let (start_size, what) = match v.side() {
        Side::Device => (graph.n_devices(), "device"),
        Side::App => (graph.n_apps(), "app"),
    };
    if v.index() as usize >= start_size {
        return Err(Error::Index {
            what,
            index: v.index() as usize,
            size: start_size,
        });
    }
    let sampler = WalkSampler::new(graph, kernel);
    let mut side = v.side();
    let mut dist = vec![0.0; start_size];
    dist[v.index() as usize] = 1.0;
    for _ in 0..(2 * order - 1) {
        let next_size = match side {
            Side::Device => graph.n_apps(),
            Side::App => graph.n_devices(),
        };
        let mut next = vec![0.0; next_size];
        for (i, &p) in dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let from = match side {
                Side::Device => Vertex::Device(i as u32),
                Side::App => Vertex::App(i as u32),
            };
            for (j, q) in sampler.kernel_row(from).into_iter().enumerate() {
                next[j] += p * q;
            }
        }
        dist = next;
        side = side.opposite();
    }
    Ok(dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::rng_for;

    fn graph(edges: &[(u32, u32)]) -> BipartiteGraph {
        BipartiteGraph::from_index_pairs(edges).unwrap()
    }

    #[test]
    fn pairs_follow_occurrence_rank() {
        let w = Walk {
            vertices: vec![1, 5, 4, 3],
        };
        let p = extract_pairs(&w, 4);
        assert_eq!(p.len(), 2);
        assert_eq!((p[0].device, p[0].app, p[0].order, p[0].weight), (1, 5, 1, 1.0));
        assert_eq!((p[1].device, p[1].app, p[1].order, p[1].weight), (1, 3, 2, 0.5));

        let w = Walk {
            vertices: vec![3, 5, 4, 3, 2, 2],
        };
        let p = extract_pairs(&w, 4);
        assert_eq!((p[2].device, p[2].app, p[2].order), (3, 2, 3));
        assert!((p[2].weight - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(extract_pairs(&w, 1).len(), 1);
        assert!(extract_pairs(&Walk { vertices: vec![0] }, 4).is_empty());
    }

    #[test]
    fn first_step_prefers_high_degree_app() {
        // d0 adjacent to m0 (degree 1) and m1 (degree 3)
        let g = graph(&[(0, 0), (0, 1), (1, 1), (2, 1)]);
        let row = WalkSampler::new(&g, Kernel::DegreeWeighted).kernel_row(Vertex::Device(0));
        assert_eq!(row, vec![0.25, 0.75]);
    }

    #[test]
    fn single_edge_walk_oscillates() {
        let g = graph(&[(0, 0)]);
        let w = sample_walk(&g, 0, 5, &mut rng_for(1, "t", 0)).unwrap();
        assert_eq!(w.vertices, vec![0, 0, 0, 0, 0, 0]);
        assert!(sample_walk(&g, 3, 5, &mut rng_for(1, "t", 0)).is_err());
    }

    #[test]
    fn path_graph_second_order_by_hand() {
        // d0-m0-d1-m1
        let g = graph(&[(0, 0), (1, 0), (1, 1)]);
        let p1 = exact_lorder_distribution(&g, Vertex::Device(0), 1, Kernel::DegreeWeighted).unwrap();
        assert_eq!(p1, vec![1.0, 0.0]);
        // m0 -> d0 w.p. 1/3, d1 w.p. 2/3; d1 -> m0 w.p. 2/3, m1 w.p. 1/3
        let p2 = exact_lorder_distribution(&g, Vertex::Device(0), 2, Kernel::DegreeWeighted).unwrap();
        assert!((p2[1] - 2.0 / 9.0).abs() < 1e-12);
        assert!((p2[0] - 7.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn order_one_equals_kernel_row() {
        let g = graph(&[(0, 0), (0, 1), (1, 1), (2, 1), (2, 2)]);
        let s = WalkSampler::new(&g, Kernel::DegreeWeighted);
        for d in 0..3 {
            let v = Vertex::Device(d);
            assert_eq!(
                exact_lorder_distribution(&g, v, 1, Kernel::DegreeWeighted).unwrap(),
                s.kernel_row(v)
            );
        }
    }

    #[test]
    fn oversized_graph_is_refused() {
        let edges: Vec<(u32, u32)> = (0..5001).map(|i| (i, 0)).collect();
        let g = graph(&edges);
        assert!(matches!(
            exact_lorder_distribution(&g, Vertex::Device(0), 1, Kernel::Uniform),
            Err(Error::TooLarge { .. })
        ));
    }
}
