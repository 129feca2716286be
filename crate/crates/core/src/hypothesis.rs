//! Likelihood-based classification: partition-free log-likelihood ratios,
//! maximum-likelihood M-ary decisions with tree models, ROC curves and
//! confusion matrices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chow_liu::{tree_ll_raw, TreeModel};
use crate::dataset::PhaseDataset;
use crate::error::{Error, Result};
use crate::model::{energy, GraphModel};

fn check_p(d: &PhaseDataset, p: usize) -> Result<()> {
    if d.p() != p {
        return Err(Error::Dimension { expected: p, got: d.p() });
    }
    if d.n() == 0 {
        return Err(Error::InsufficientData("empty dataset".into()));
    }
    Ok(())
}

/// Mean over samples of `log f̃₁(y) - log f̃₀(y)` with unnormalised
/// densities. Leaving out the partition functions shifts every score by the
/// same constant, which only moves the decision threshold.
pub fn llr_score(d: &PhaseDataset, m1: &GraphModel, m0: &GraphModel) -> Result<f64> {
    check_p(d, m1.p())?;
    check_p(d, m0.p())?;
    Ok(d.rows().map(|y| energy(y, m1) - energy(y, m0)).sum::<f64>() / d.n() as f64)
}

/// Mean per-sample log-likelihood ratio between two normalised tree models.
pub fn tree_llr_score(d: &PhaseDataset, t1: &TreeModel, t0: &TreeModel) -> Result<f64> {
    check_p(d, t1.p())?;
    check_p(d, t0.p())?;
    Ok(d.rows().map(|y| tree_ll_raw(y, t1) - tree_ll_raw(y, t0)).sum::<f64>() / d.n() as f64)
}

/// Summed log-likelihood of the dataset under every model.
pub fn mary_log_likelihoods(d: &PhaseDataset, models: &[TreeModel]) -> Result<Vec<f64>> {
    for m in models {
        check_p(d, m.p())?;
    }
    Ok(models.iter().map(|m| d.rows().map(|y| tree_ll_raw(y, m)).sum()).collect())
}

/// Index of the most likely model; ties go to the lowest index.
pub fn mary_classify(d: &PhaseDataset, models: &[TreeModel]) -> Result<usize> {
    if models.len() < 2 {
        return Err(Error::InvalidParameter(format!("need at least two models, got {}", models.len())));
    }
    Ok(argmax_first(&mary_log_likelihoods(d, models)?))
}

/// Classify many datasets in parallel.
pub fn mary_classify_all(ds: &[PhaseDataset], models: &[TreeModel]) -> Result<Vec<usize>> {
    ds.par_iter().map(|d| mary_classify(d, models)).collect()
}

pub(crate) fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = k;
        }
    }
    best
}

/// One dataset's binary score with its true label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryTestResult {
    pub score: f64,
    pub label: usize,
}

impl BinaryTestResult {
    /// Class 1 is declared when the score reaches the threshold.
    pub fn decision(&self, threshold: f64) -> usize {
        usize::from(self.score >= threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(false-positive rate, true-positive rate)` from `(0, 0)` to `(1, 1)`
    pub points: Vec<(f64, f64)>,
    /// score threshold of each point after the first (`score ≥ τ` ⇒ class 1)
    pub thresholds: Vec<f64>,
    pub auc: f64,
}

/// ROC curve over every distinct score, with trapezoidal area. Tied
/// scores across classes produce a diagonal step, i.e. half credit.
pub fn roc(scores_class1: &[f64], scores_class0: &[f64]) -> Result<RocCurve> {
    if scores_class1.is_empty() || scores_class0.is_empty() {
        return Err(Error::InsufficientData("ROC needs scores from both classes".into()));
    }
    if let Some(&s) = scores_class1.iter().chain(scores_class0).find(|s| !s.is_finite()) {
        return Err(Error::NonFinite(s));
    }
    let mut all: Vec<(f64, bool)> =
        scores_class1.iter().map(|&s| (s, true)).chain(scores_class0.iter().map(|&s| (s, false))).collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (n1, n0) = (scores_class1.len() as f64, scores_class0.len() as f64);
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = Vec::new();
    let mut auc = 0.0;
    let mut k = 0;
    while k < all.len() {
        let tau = all[k].0;
        while k < all.len() && all[k].0 == tau {
            if all[k].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        let next = (fp as f64 / n0, tp as f64 / n1);
        let prev = *points.last().expect("starts at origin");
        auc += (next.0 - prev.0) * (next.1 + prev.1) / 2.0;
        points.push(next);
        thresholds.push(tau);
    }
    Ok(RocCurve { points, thresholds, auc })
}

/// Normalised Mann–Whitney statistic, ties counted half.
pub fn mann_whitney_auc(scores_class1: &[f64], scores_class0: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &a in scores_class1 {
        for &b in scores_class0 {
            wins += if a > b {
                1.0
            } else if a == b {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (scores_class1.len() * scores_class0.len()) as f64
}

/// `min(|a - b|, m - |a - b|)`.
pub fn circular_distance(a: usize, b: usize, m: usize) -> usize {
    let d = a.abs_diff(b) % m;
    d.min(m - d)
}

/// Rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub m: usize,
    pub counts: Vec<Vec<usize>>,
}

/// Off-diagonal counts grouped by circular class distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyReport {
    /// `by_distance[d]`: predictions at circular distance `d` from the truth
    pub by_distance: Vec<usize>,
    pub errors: usize,
    /// share of errors at distance 1 (1.0 when there are no errors)
    pub adjacent_fraction: f64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.m).map(|c| self.counts[c][c]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.correct() as f64 / self.total().max(1) as f64
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn adjacency(&self) -> AdjacencyReport {
        let mut by_distance = vec![0; self.m / 2 + 1];
        for (t, row) in self.counts.iter().enumerate() {
            for (p, &c) in row.iter().enumerate() {
                by_distance[circular_distance(t, p, self.m)] += c;
            }
        }
        let errors = self.total() - self.correct();
        let adjacent = by_distance.get(1).copied().unwrap_or(0);
        AdjacencyReport {
            by_distance,
            errors,
            adjacent_fraction: if errors == 0 { 1.0 } else { adjacent as f64 / errors as f64 },
        }
    }
}

pub fn confusion(preds: &[usize], labels: &[usize], m: usize) -> Result<ConfusionMatrix> {
    if preds.len() != labels.len() {
        return Err(Error::Dimension { expected: labels.len(), got: preds.len() });
    }
    if let Some(&bad) = preds.iter().chain(labels).find(|&&c| c >= m) {
        return Err(Error::InvalidParameter(format!("class {bad} out of range for {m} classes")));
    }
    let mut counts = vec![vec![0; m]; m];
    for (&p, &t) in preds.iter().zip(labels) {
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { m, counts })
}
