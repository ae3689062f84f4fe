use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};

/// How two vertex vectors combine into one edge vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combiner {
    #[default]
    Concat,
    Average,
    Hadamard,
    WeightedL1,
    WeightedL2,
}

impl Combiner {
    pub const ALL: [Combiner; 5] = [
        Combiner::Concat,
        Combiner::Average,
        Combiner::Hadamard,
        Combiner::WeightedL1,
        Combiner::WeightedL2,
    ];

    pub fn output_dim(self, dim: usize) -> usize {
        match self {
            Combiner::Concat => 2 * dim,
            _ => dim,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Combiner::Concat => "concat",
            Combiner::Average => "average",
            Combiner::Hadamard => "hadamard",
            Combiner::WeightedL1 => "weighted_l1",
            Combiner::WeightedL2 => "weighted_l2",
        }
    }

    /// Appends the combined vector of `a` and `b` to `out`.
    pub fn combine_into(self, a: &[f32], b: &[f32], out: &mut Vec<f32>) -> Result<()> {
        if a.len() != b.len() {
            return Err(Error::Contract(format!(
                "vertex vectors differ in dimension ({} vs {})",
                a.len(),
                b.len()
            )));
        }
        let pairs = a.iter().zip(b);
        match self {
            Combiner::Concat => {
                out.extend_from_slice(a);
                out.extend_from_slice(b);
            }
            Combiner::Average => out.extend(pairs.map(|(x, y)| (x + y) / 2.0)),
            Combiner::Hadamard => out.extend(pairs.map(|(x, y)| x * y)),
            Combiner::WeightedL1 => out.extend(pairs.map(|(x, y)| (x - y).abs())),
            Combiner::WeightedL2 => out.extend(pairs.map(|(x, y)| (x - y) * (x - y))),
        }
        Ok(())
    }

    pub fn combine(self, a: &[f32], b: &[f32]) -> Result<Vec<f32>> {
        let mut out = Vec::with_capacity(self.output_dim(a.len()));
        self.combine_into(a, b, &mut out)?;
        Ok(out)
    }
}

impl std::fmt::Display for Combiner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Combiner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Combiner::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::config("combiner", format!("unknown combiner `{s}`")))
    }
}

/// Edge vector for device `d` and app `m`.
pub fn featurize_edge(phi: &EmbeddingMatrix, d: u32, m: u32, combiner: Combiner) -> Result<Vec<f32>> {
    if d as usize >= phi.n_devices() {
        return Err(Error::Index {
            what: "device",
            index: d as usize,
            size: phi.n_devices(),
        });
    }
    if m as usize >= phi.n_apps() {
        return Err(Error::Index {
            what: "app",
            index: m as usize,
            size: phi.n_apps(),
        });
    }
    combiner.combine(phi.device(d), phi.app(m))
}

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub dim: usize,
    pub data: Vec<f32>,
}

impl Features {
    pub fn new(dim: usize) -> Self {
        Features { dim, data: Vec::new() }
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut f = Features::new(dim);
        for r in rows {
            f.push(r)?;
        }
        Ok(f)
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push(&mut self, row: &[f32]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::Contract(format!(
                "feature row has {} entries, expected {}",
                row.len(),
                self.dim
            )));
        }
        self.data.extend_from_slice(row);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combiner_arithmetic() {
        let (a, b) = ([1.0, 2.0], [3.0, 4.0]);
        assert_eq!(Combiner::Concat.combine(&a, &b).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(Combiner::Hadamard.combine(&a, &b).unwrap(), vec![3.0, 8.0]);
        assert_eq!(Combiner::Average.combine(&a, &a).unwrap(), a.to_vec());
        assert_eq!(Combiner::WeightedL1.combine(&a, &b).unwrap(), vec![2.0, 2.0]);
        assert_eq!(Combiner::WeightedL2.combine(&a, &b).unwrap(), vec![4.0, 4.0]);
        assert!(Combiner::Hadamard.combine(&a, &[1.0]).is_err());
    }

    #[test]
    fn names_round_trip() {
        for c in Combiner::ALL {
            assert_eq!(c.name().parse::<Combiner>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{}\"", c.name()));
        }
    }
}
