//! Rank function, ranking regularizer, and its blackbox-interpolation gradient.
//!
//! The rank of a score is one plus the number of strictly greater scores, so
//! rank 1 is the highest score and tied scores share a rank. The regularizer
//! penalizes the ranks of positive samples; squaring the ranks makes the
//! penalty grow with how far down the ordering a positive sits, which is what
//! pushes up the hardest positives. The ranking map is piecewise constant, so
//! its true derivative is zero almost everywhere; gradients come from a
//! continuous interpolation controlled by a step size `gamma`: the input is
//! re-ranked after a perturbation in the direction of the incoming gradient
//! and the (scaled) rank difference is returned.

use crate::error::{config, invalid, Result};

/// Integer ranks of a score vector, 1 = highest score, ties share a rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankVector(Vec<usize>);

impl RankVector {
    pub fn ranks(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Shape of the per-positive rank penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Penalty {
    /// Penalty r: every rank position costs the same extra amount.
    Raw,
    /// Penalty r^2, the default.
    Square,
    /// Penalty r^3.
    Cube,
    /// Penalty e^r, applied after normalization to keep magnitudes bounded.
    Exp,
}

impl Penalty {
    fn apply(self, r: f64) -> f64 {
        match self {
            Penalty::Raw => r,
            Penalty::Square => r * r,
            Penalty::Cube => r * r * r,
            Penalty::Exp => r.exp(),
        }
    }

    fn derivative(self, r: f64) -> f64 {
        match self {
            Penalty::Raw => 1.0,
            Penalty::Square => 2.0 * r,
            Penalty::Cube => 3.0 * r * r,
            Penalty::Exp => r.exp(),
        }
    }

    pub const ALL: [Penalty; 4] = [Penalty::Raw, Penalty::Square, Penalty::Cube, Penalty::Exp];

    pub fn parse(name: &str) -> Result<Penalty> {
        Ok(match name {
            "raw" => Penalty::Raw,
            "square" => Penalty::Square,
            "cube" => Penalty::Cube,
            "exp" => Penalty::Exp,
            _ => return Err(config(format!("unknown penalty: {name}"))),
        })
    }
}

impl std::fmt::Display for Penalty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Penalty::Raw => "raw",
            Penalty::Square => "square",
            Penalty::Cube => "cube",
            Penalty::Exp => "exp",
        };
        f.write_str(s)
    }
}

/// Configuration of the ranking regularizer.
#[derive(Debug, Clone, PartialEq)]
pub struct RegConfig {
    /// Weight of the regularizer in the composite objective.
    pub lambda: f64,
    /// Interpolation step of the blackbox gradient. Larger values let the
    /// perturbed input cross more rank boundaries and yield more informative
    /// (but less local) gradients.
    pub gamma: f64,
    /// Penalty shape applied to each positive's rank.
    pub penalty: Penalty,
    /// Divide ranks by the batch size N before penalizing.
    pub normalize: bool,
}

impl Default for RegConfig {
    fn default() -> Self {
        RegConfig {
            lambda: 1.0,
            gamma: 2000.0,
            penalty: Penalty::Square,
            normalize: true,
        }
    }
}

impl RegConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !self.gamma.is_finite() || self.gamma <= 0.0 {
            return Err(config(format!("gamma must be > 0, got {}", self.gamma)));
        }
        Ok(())
    }
}

fn check_scores(name: &str, scores: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(invalid(format!("{name}: empty input")));
    }
    if let Some(i) = scores.iter().position(|v| !v.is_finite()) {
        return Err(invalid(format!(
            "{name}: non-finite value {} at index {i}",
            scores[i]
        )));
    }
    Ok(())
}

fn check_labels(labels: &[u8]) -> Result<()> {
    if let Some(i) = labels.iter().position(|&y| y > 1) {
        return Err(invalid(format!(
            "labels must be 0 or 1, got {} at index {i}",
            labels[i]
        )));
    }
    Ok(())
}

/// Rank of each element: entry i is `1 + |{j : scores[j] > scores[i]}|`.
///
/// Ties share a rank; for all-distinct scores the ranks are a permutation of
/// `1..=N`.
pub fn rank(scores: &[f64]) -> Result<RankVector> {
    check_scores("rank", scores)?;
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ranks = vec![0usize; n];
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end < n && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Every element of the tie group has exactly `start` strictly
        // greater scores above it.
        for &i in &order[start..end] {
            ranks[i] = start + 1;
        }
        start = end;
    }
    Ok(RankVector(ranks))
}

fn positive_indices(labels: &[u8]) -> Vec<usize> {
    labels
        .iter()
        .enumerate()
        .filter(|(_, &y)| y == 1)
        .map(|(i, _)| i)
        .collect()
}

/// Regularizer value: mean over positives of `penalty(r_i')`, where `r_i'`
/// is the (optionally N-normalized) rank of positive i.
///
/// The weight `lambda` is *not* applied here; [`rankreg_score_grad`] folds it
/// into both the value and the gradient.
pub fn rankreg_value(scores: &[f64], labels: &[u8], cfg: &RegConfig) -> Result<f64> {
    cfg.validate()?;
    check_labels(labels)?;
    if scores.len() != labels.len() {
        return Err(invalid(format!(
            "rankreg_value: {} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let ranks = rank(scores)?;
    let positives = positive_indices(labels);
    if positives.is_empty() {
        return Err(crate::Error::NoPositives);
    }
    let n = scores.len() as f64;
    let sum: f64 = positives
        .iter()
        .map(|&i| {
            let r = ranks.ranks()[i] as f64;
            cfg.penalty.apply(if cfg.normalize { r / n } else { r })
        })
        .sum();
    Ok(sum / positives.len() as f64)
}

/// Analytic derivative of the regularizer with respect to the rank vector;
/// this is the incoming gradient of the blackbox scheme. `lambda` is folded
/// in. Entries at negative samples are zero.
pub fn rankreg_grad_wrt_ranks(ranks: &RankVector, labels: &[u8], cfg: &RegConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    check_labels(labels)?;
    if ranks.len() != labels.len() {
        return Err(invalid(format!(
            "rankreg_grad_wrt_ranks: {} ranks vs {} labels",
            ranks.len(),
            labels.len()
        )));
    }
    let positives = positive_indices(labels);
    if positives.is_empty() {
        return Err(crate::Error::NoPositives);
    }
    let n = ranks.len() as f64;
    let p = positives.len() as f64;
    let mut grad = vec![0.0; ranks.len()];
    for &i in &positives {
        let r = ranks.ranks()[i] as f64;
        // d penalty(r/N) / d r = penalty'(r/N) / N under normalization.
        let d = if cfg.normalize {
            cfg.penalty.derivative(r / n) / n
        } else {
            cfg.penalty.derivative(r)
        };
        grad[i] = cfg.lambda * d / p;
    }
    Ok(grad)
}

/// Gradient of the continuous interpolation of the ranking map:
/// `-(rank(scores) - rank(scores + gamma * incoming_grad)) / gamma`.
///
/// Each output entry is an integer rank difference scaled by `1/gamma`.
pub fn blackbox_rank_grad(scores: &[f64], incoming_grad: &[f64], gamma: f64) -> Result<Vec<f64>> {
    check_scores("blackbox_rank_grad", scores)?;
    check_scores("blackbox_rank_grad (incoming)", incoming_grad)?;
    if scores.len() != incoming_grad.len() {
        return Err(invalid(format!(
            "blackbox_rank_grad: {} scores vs {} gradient entries",
            scores.len(),
            incoming_grad.len()
        )));
    }
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(invalid(format!("gamma must be > 0, got {gamma}")));
    }
    let base = rank(scores)?;
    let perturbed: Vec<f64> = scores
        .iter()
        .zip(incoming_grad)
        .map(|(s, g)| s + gamma * g)
        .collect();
    let shifted = rank(&perturbed)?;
    Ok(base
        .ranks()
        .iter()
        .zip(shifted.ranks())
        .map(|(&r, &rp)| -(r as f64 - rp as f64) / gamma)
        .collect())
}

/// Regularizer value and its gradient with respect to the scores.
///
/// Returns `lambda * rankreg_value(..)` and the blackbox gradient of the
/// lambda-weighted incoming rank gradient; the output has one entry per
/// score, zero wherever the perturbed ranking is unchanged.
pub fn rankreg_score_grad(scores: &[f64], labels: &[u8], cfg: &RegConfig) -> Result<(f64, Vec<f64>)> {
    let value = cfg.lambda * rankreg_value(scores, labels, cfg)?;
    let incoming = rankreg_grad_wrt_ranks(&rank(scores)?, labels, cfg)?;
    let grad = blackbox_rank_grad(scores, &incoming, cfg.gamma)?;
    Ok((value, grad))
}
