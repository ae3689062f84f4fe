use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;

/// `deg(d) * deg(m) / (2|E|)`.
pub fn pa_score(graph: &BipartiteGraph, d: u32, m: u32) -> Result<f64> {
    if d as usize >= graph.n_devices() {
        return Err(Error::Index {
            what: "device",
            index: d as usize,
            size: graph.n_devices(),
        });
    }
    if m as usize >= graph.n_apps() {
        return Err(Error::Index {
            what: "app",
            index: m as usize,
            size: graph.n_apps(),
        });
    }
    Ok(pa_raw(graph.device_degree(d), graph.app_degree(m), graph.n_edges()))
}

fn pa_raw(dd: usize, dm: usize, edges: usize) -> f64 {
    dd as f64 * dm as f64 / (2.0 * edges as f64)
}

/// Preferential attachment scores for a candidate list. Candidates use
/// degrees from `graph`; vertices absent from it (`None`) score 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PaScoreTable {
    pub normalizer: f64,
    pub pairs: Vec<(Option<u32>, Option<u32>)>,
    pub scores: Vec<f64>,
}

pub fn pa_scores(graph: &BipartiteGraph, pairs: &[(Option<u32>, Option<u32>)]) -> PaScoreTable {
    let scores = pairs
        .iter()
        .map(|&(d, m)| {
            let dd = d.map_or(0, |d| graph.device_degree(d));
            let dm = m.map_or(0, |m| graph.app_degree(m));
            pa_raw(dd, dm, graph.n_edges())
        })
        .collect();
    PaScoreTable {
        normalizer: 2.0 * graph.n_edges() as f64,
        pairs: pairs.to_vec(),
        scores,
    }
}

/// Writes `device,app,score` rows; `tokens` supplies the pair tokens.
pub fn write_pa_scores(path: &Path, tokens: &[(String, String)], table: &PaScoreTable) -> Result<()> {
    if tokens.len() != table.scores.len() {
        return Err(Error::Contract("token list and score table differ in length".into()));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    let mut write = || -> std::result::Result<(), csv::Error> {
        w.write_record(["device", "app", "score"])?;
        for ((d, m), s) in tokens.iter().zip(&table.scores) {
            w.write_record([d.as_str(), m.as_str(), &s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_on_small_graph() {
        // d0 has degree 2, m0 degree 3, |E| = 4
        let g = BipartiteGraph::from_index_pairs(&[(0, 0), (0, 1), (1, 0), (2, 0)]).unwrap();
        assert_eq!(pa_score(&g, 0, 0).unwrap(), 0.75);
        let one = BipartiteGraph::from_index_pairs(&[(0, 0)]).unwrap();
        assert_eq!(pa_score(&one, 0, 0).unwrap(), 0.5);
        assert!(pa_score(&one, 1, 0).is_err());
    }

    #[test]
    fn unknown_vertices_score_zero() {
        let g = BipartiteGraph::from_index_pairs(&[(0, 0), (1, 0)]).unwrap();
        let t = pa_scores(&g, &[(Some(0), Some(0)), (None, Some(0))]);
        assert_eq!(t.scores, vec![0.5, 0.0]);
        assert_eq!(t.normalizer, 4.0);
    }
}
