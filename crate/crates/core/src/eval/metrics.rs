use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// False-positive rates at which true-positive rates are reported.
pub const FPR_TARGETS: [f64; 3] = [1e-4, 1e-3, 5e-3];

/// Confusion counts and rates at the operating point chosen for a target FPR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub target_fpr: f64,
    pub tpr: f64,
    pub fpr: f64,
    /// Scores `>= threshold` are predicted positive; `inf` predicts nothing.
    pub threshold: f64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `(fpr, tpr)` per distinct score threshold, from `(0, 0)` to `(1, 1)`.
    /// Written separately as `roc.csv`.
    #[serde(skip_serializing, default)]
    pub roc: Vec<(f64, f64)>,
    pub auc: f64,
    pub ap: f64,
    pub operating_points: Vec<OperatingPoint>,
    pub n_pos: u64,
    pub n_neg: u64,
}

impl Metrics {
    pub fn tpr_at(&self, target: f64) -> Option<f64> {
        self.operating_points
            .iter()
            .find(|p| p.target_fpr == target)
            .map(|p| p.tpr)
    }
}

/// ROC curve, trapezoidal AUC, average precision and TPR at each target
/// FPR. Equal scores form one operating point. TPR at a target is the
/// largest TPR whose FPR does not exceed it.
pub fn roc_and_metrics(scores: &[f64], labels: &[bool]) -> Result<Metrics> {
    roc_with_targets(scores, labels, &FPR_TARGETS)
}

pub fn roc_with_targets(scores: &[f64], labels: &[bool], targets: &[f64]) -> Result<Metrics> {
    if scores.len() != labels.len() {
        return Err(Error::Metric(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Metric("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Metric("both classes are required".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    // (threshold, tp, fp) after each tie group
    let mut steps = vec![(f64::INFINITY, 0u64, 0u64)];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        steps.push((s, tp, fp));
    }
    let (pos, neg) = (n_pos as f64, n_neg as f64);
    let roc: Vec<(f64, f64)> = steps.iter().map(|&(_, tp, fp)| (fp as f64 / neg, tp as f64 / pos)).collect();
    let auc = roc
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum();
    let ap = steps
        .windows(2)
        .map(|w| {
            let (_, tp, fp) = w[1];
            let recall_gain = (tp - w[0].1) as f64 / pos;
            recall_gain * tp as f64 / (tp + fp) as f64
        })
        .sum();
    let operating_points = targets
        .iter()
        .map(|&target| {
            let (thr, tp, fp) = steps
                .iter()
                .copied()
                .filter(|&(_, _, fp)| fp as f64 / neg <= target)
                .max_by_key(|&(_, tp, _)| tp)
                .expect("the origin always qualifies");
            OperatingPoint {
                target_fpr: target,
                tpr: tp as f64 / pos,
                fpr: fp as f64 / neg,
                threshold: thr,
                tp,
                fp,
                tn: n_neg - fp,
                fn_: n_pos - tp,
            }
        })
        .collect();
    Ok(Metrics {
        roc,
        auc,
        ap,
        operating_points,
        n_pos,
        n_neg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_scores_are_perfect() {
        let m = roc_and_metrics(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(m.auc, 1.0);
        assert_eq!(m.ap, 1.0);
        assert_eq!(m.tpr_at(1e-4), Some(1.0));
        assert_eq!(m.roc.first(), Some(&(0.0, 0.0)));
        assert_eq!(m.roc.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn all_ties_give_chance() {
        let m = roc_and_metrics(&[0.5; 4], &[true, false, true, false]).unwrap();
        assert_eq!(m.auc, 0.5);
        assert_eq!(m.roc, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(m.tpr_at(5e-3), Some(0.0));
        assert_eq!(m.ap, 0.5);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(roc_and_metrics(&[0.1, 0.2], &[true, true]).is_err());
        assert!(roc_and_metrics(&[f64::NAN, 0.2], &[true, false]).is_err());
    }

    #[test]
    fn hand_computed_six_points() {
        // ranked: 0.9 P, 0.8 N, 0.7 P, 0.7 N, 0.4 P, 0.1 N
        let s = [0.9, 0.8, 0.7, 0.7, 0.4, 0.1];
        let l = [true, false, true, false, true, false];
        let m = roc_and_metrics(&s, &l).unwrap();
        let third = 1.0 / 3.0;
        let expect = [(0.0, 0.0), (0.0, third), (third, third), (2.0 * third, 2.0 * third), (2.0 * third, 1.0), (1.0, 1.0)];
        for (a, b) in m.roc.iter().zip(expect) {
            assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
        }
        // area: 1/3*1/3 + 1/3*(1/3+2/3)/2 + 1/3*1
        assert!((m.auc - (1.0 / 9.0 + 1.0 / 6.0 + 1.0 / 3.0)).abs() < 1e-12);
        // AP: 1/3*1 + 1/3*(2/4) + 1/3*(3/5)
        assert!((m.ap - (1.0 + 0.5 + 0.6) / 3.0).abs() < 1e-12);
        assert_eq!(m.tpr_at(1e-3), Some(third));
    }
}
