//! Rank-order evaluation: ROC curves, AUC, FPR at fixed TPR thresholds, and
//! logit-space score ensembling.
//!
//! The prediction rule at threshold `t` is `score >= t` (ties predicted
//! positive); FPR@TPR is the empirical minimum over achievable operating
//! points, with no interpolation between ROC points.

use std::io::Write;

use crate::error::{invalid, Result};
use crate::Error;

/// One operating point of an ROC curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// Empirical ROC curve: thresholds strictly decreasing from `+inf` to
/// `-inf`, fpr/tpr nondecreasing from (0,0) to (1,1).
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    /// Trapezoidal area under the curve. Serves as an algebraic cross-check
    /// for the pair-counting [`auc`].
    pub fn auc_trapezoid(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
            .sum()
    }

    /// Write the curve as a three-column `threshold fpr tpr` table, one row
    /// per point, suitable for external plotting.
    pub fn write_table(&self, mut w: impl Write) -> Result<()> {
        for p in &self.points {
            writeln!(w, "{} {} {}", p.threshold, p.fpr, p.tpr)?;
        }
        Ok(())
    }
}

/// AUC plus FPR at each requested TPR threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub auc: f64,
    /// `(beta, fpr)` pairs sorted ascending by beta.
    pub fpr_at: Vec<(f64, f64)>,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl MetricsReport {
    /// FPR at the given TPR threshold, if it was requested.
    pub fn fpr(&self, beta: f64) -> Option<f64> {
        self.fpr_at
            .iter()
            .find(|(b, _)| *b == beta)
            .map(|(_, f)| *f)
    }
}

fn check_inputs(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(invalid(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = scores.iter().position(|v| !v.is_finite()) {
        return Err(invalid(format!("non-finite score at index {i}")));
    }
    if let Some(i) = labels.iter().position(|&y| y > 1) {
        return Err(invalid(format!("label {} at index {i}", labels[i])));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateLabels);
    }
    Ok((n_pos, n_neg))
}

/// Empirical ROC curve with one point per distinct score (ties collapse to
/// a single threshold) plus `(+inf, 0, 0)` and `(-inf, 1, 1)` endpoints.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    let (n_pos, n_neg) = check_inputs(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        // Consume the whole tie group before emitting a point.
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: t,
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
    }
    points.push(RocPoint {
        threshold: f64::NEG_INFINITY,
        fpr: 1.0,
        tpr: 1.0,
    });
    Ok(RocCurve { points })
}

/// AUC as the Mann-Whitney statistic:
/// `(#{pos > neg} + 0.5 * #{pos == neg}) / (n_pos * n_neg)`.
///
/// Computed in O(n log n) from the rank-sum form with midranks for ties.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (n_pos, n_neg) = check_inputs(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Midrank sum over positives (ascending ranks, ties share the average).
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            if labels[k] == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    let np = n_pos as f64;
    let u = rank_sum_pos - np * (np + 1.0) / 2.0;
    Ok(u / (np * n_neg as f64))
}

/// Minimum FPR over thresholds whose TPR is at least `beta`, under the
/// `score >= t` prediction rule.
pub fn fpr_at_tpr(scores: &[f64], labels: &[u8], beta: f64) -> Result<f64> {
    if !beta.is_finite() || !(0.0..=1.0).contains(&beta) || beta == 0.0 {
        return Err(invalid(format!("beta must be in (0, 1], got {beta}")));
    }
    let curve = roc_curve(scores, labels)?;
    // fpr and tpr are nondecreasing along the curve, so the first point
    // reaching the target tpr has the smallest achievable fpr.
    for p in &curve.points {
        if p.tpr >= beta {
            return Ok(p.fpr);
        }
    }
    unreachable!("curve ends at tpr = 1.0 >= beta");
}

/// AUC plus FPR at each beta. Betas are deduplicated and reported in
/// ascending order regardless of input order.
pub fn metrics_report(scores: &[f64], labels: &[u8], betas: &[f64]) -> Result<MetricsReport> {
    let (n_pos, n_neg) = check_inputs(scores, labels)?;
    let mut sorted: Vec<f64> = betas.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut fpr_at = Vec::with_capacity(sorted.len());
    for &beta in &sorted {
        fpr_at.push((beta, fpr_at_tpr(scores, labels, beta)?));
    }
    Ok(MetricsReport {
        auc: auc(scores, labels)?,
        fpr_at,
        n_pos,
        n_neg,
    })
}

/// Default TPR thresholds for reporting.
pub const DEFAULT_BETAS: [f64; 4] = [0.90, 0.92, 0.95, 0.98];

/// Elementwise arithmetic mean of raw logits from several models.
pub fn ensemble_scores(score_vectors: &[Vec<f64>]) -> Result<Vec<f64>> {
    let Some(first) = score_vectors.first() else {
        return Err(invalid("ensemble_scores: no score vectors"));
    };
    let n = first.len();
    if let Some(v) = score_vectors.iter().find(|v| v.len() != n) {
        return Err(invalid(format!(
            "ensemble_scores: length mismatch ({} vs {n})",
            v.len()
        )));
    }
    let k = score_vectors.len() as f64;
    Ok((0..n)
        .map(|i| score_vectors.iter().map(|v| v[i]).sum::<f64>() / k)
        .collect())
}
