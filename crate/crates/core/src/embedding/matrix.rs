use std::sync::atomic::{AtomicU32, Ordering};

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, Vertex};

/// Dense row-major vertex embeddings. Rows are devices first, then apps,
/// in graph index order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    n_devices: usize,
    n_apps: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn zeros(n_devices: usize, n_apps: usize, dim: usize) -> Self {
        EmbeddingMatrix {
            dim,
            n_devices,
            n_apps,
            data: vec![0.0; (n_devices + n_apps) * dim],
        }
    }

    pub fn for_graph(graph: &BipartiteGraph, dim: usize) -> Self {
        Self::zeros(graph.n_devices(), graph.n_apps(), dim)
    }

    pub fn from_rows(n_devices: usize, n_apps: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != (n_devices + n_apps) * dim {
            return Err(Error::Contract(format!(
                "embedding buffer has {} entries, expected {} x {}",
                data.len(),
                n_devices + n_apps,
                dim
            )));
        }
        Ok(EmbeddingMatrix {
            dim,
            n_devices,
            n_apps,
            data,
        })
    }

    /// Fills every entry uniformly from `[-scale, scale]`.
    pub fn randomize<R: Rng + ?Sized>(&mut self, rng: &mut R, scale: f32) {
        for x in &mut self.data {
            *x = rng.random_range(-scale..=scale);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_devices(&self) -> usize {
        self.n_devices
    }

    pub fn n_apps(&self) -> usize {
        self.n_apps
    }

    pub fn n_rows(&self) -> usize {
        self.n_devices + self.n_apps
    }

    /// Row position of a vertex.
    pub fn row_of(&self, v: Vertex) -> usize {
        match v {
            Vertex::Device(d) => d as usize,
            Vertex::App(m) => self.n_devices + m as usize,
        }
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn device(&self, d: u32) -> &[f32] {
        self.row(d as usize)
    }

    pub fn app(&self, m: u32) -> &[f32] {
        self.row(self.n_devices + m as usize)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data
            .iter()
            .map(|&x| (x as f64) * (x as f64))
            .sum::<f64>()
            .sqrt()
    }

    /// Device-app inner product.
    pub fn score(&self, d: u32, m: u32) -> f64 {
        dot(self.device(d), self.app(m))
    }

    /// Cosine similarity between two rows (0 when either is zero).
    pub fn cosine(&self, a: usize, b: usize) -> f64 {
        let (x, y) = (self.row(a), self.row(b));
        let den = dot(x, x).sqrt() * dot(y, y).sqrt();
        if den == 0.0 {
            0.0
        } else {
            dot(x, y) / den
        }
    }
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Row storage that training steps read from and write to.
pub(crate) trait RowStore {
    fn load(&self, row: usize, out: &mut [f64]);
    /// `row += scale * delta`.
    fn add(&self, row: usize, scale: f64, delta: &[f64]);
}

/// Embedding storage shared by lock-free workers. Entries are f32 bit
/// patterns in relaxed atomics; concurrent writers may lose updates.
pub(crate) struct SharedMatrix {
    dim: usize,
    n_devices: usize,
    n_apps: usize,
    data: Vec<AtomicU32>,
}

impl SharedMatrix {
    pub fn from_matrix(m: EmbeddingMatrix) -> Self {
        SharedMatrix {
            dim: m.dim,
            n_devices: m.n_devices,
            n_apps: m.n_apps,
            data: m.data.into_iter().map(|x| AtomicU32::new(x.to_bits())).collect(),
        }
    }

    pub fn snapshot(&self) -> EmbeddingMatrix {
        EmbeddingMatrix {
            dim: self.dim,
            n_devices: self.n_devices,
            n_apps: self.n_apps,
            data: self
                .data
                .iter()
                .map(|x| f32::from_bits(x.load(Ordering::Relaxed)))
                .collect(),
        }
    }

    pub fn into_matrix(self) -> EmbeddingMatrix {
        EmbeddingMatrix {
            dim: self.dim,
            n_devices: self.n_devices,
            n_apps: self.n_apps,
            data: self
                .data
                .into_iter()
                .map(|x| f32::from_bits(x.into_inner()))
                .collect(),
        }
    }

    pub fn scale_row(&self, row: usize, factor: f64) {
        for cell in &self.data[row * self.dim..(row + 1) * self.dim] {
            let v = f32::from_bits(cell.load(Ordering::Relaxed)) as f64 * factor;
            cell.store((v as f32).to_bits(), Ordering::Relaxed);
        }
    }
}

impl RowStore for SharedMatrix {
    fn load(&self, row: usize, out: &mut [f64]) {
        let cells = &self.data[row * self.dim..(row + 1) * self.dim];
        for (o, cell) in out.iter_mut().zip(cells) {
            *o = f32::from_bits(cell.load(Ordering::Relaxed)) as f64;
        }
    }

    fn add(&self, row: usize, scale: f64, delta: &[f64]) {
        let cells = &self.data[row * self.dim..(row + 1) * self.dim];
        for (cell, &g) in cells.iter().zip(delta) {
            let v = f32::from_bits(cell.load(Ordering::Relaxed)) as f64 + scale * g;
            cell.store((v as f32).to_bits(), Ordering::Relaxed);
        }
    }
}

/// Single-owner store for sequential steps.
pub(crate) struct LocalStore<'a>(pub std::cell::RefCell<&'a mut EmbeddingMatrix>);

impl RowStore for LocalStore<'_> {
    fn load(&self, row: usize, out: &mut [f64]) {
        let m = self.0.borrow();
        for (o, &x) in out.iter_mut().zip(m.row(row)) {
            *o = x as f64;
        }
    }

    fn add(&self, row: usize, scale: f64, delta: &[f64]) {
        let mut m = self.0.borrow_mut();
        for (x, &g) in m.row_mut(row).iter_mut().zip(delta) {
            *x = (*x as f64 + scale * g) as f32;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_round_trip_preserves_bits() {
        let m = EmbeddingMatrix::from_rows(1, 1, 2, vec![1.5, -0.25, 3.0, 1e-7]).unwrap();
        let s = SharedMatrix::from_matrix(m.clone());
        s.add(1, 2.0, &[1.0, 0.0]);
        let back = s.into_matrix();
        assert_eq!(back.row(0), m.row(0));
        assert_eq!(back.app(0), &[5.0, 1e-7]);
    }

    #[test]
    fn rows_are_devices_then_apps() {
        let m = EmbeddingMatrix::zeros(3, 2, 4);
        assert_eq!(m.row_of(Vertex::App(1)), 4);
        assert_eq!(m.n_rows(), 5);
    }
}
