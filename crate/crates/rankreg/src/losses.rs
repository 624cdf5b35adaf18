//! Base objective zoo: value and per-sample score gradient for the eight
//! base losses the regularizer is paired with.
//!
//! All losses operate on raw logits with a single-output head; probabilities
//! are `p = logistic(s)`. Gradients are of the *mean* loss, so each entry
//! carries a `1/N` factor.

use crate::error::{config, invalid, Result};

/// Which base loss to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Binary cross-entropy.
    Bce,
    /// Cost-weighted BCE: the positive term is scaled by `pos_weight`.
    Wbce,
    /// Class-balanced BCE with effective-number weights from `cb_beta`.
    CbBce,
    /// Symmetric margin loss: BCE on logits shifted by a single margin.
    SMl,
    /// Symmetric focal loss with one focusing exponent.
    SFl,
    /// Asymmetric margin loss with per-class margins.
    AMl,
    /// Asymmetric focal loss with per-class focusing exponents.
    AFl,
    /// Label-distribution-aware margin: per-class margins scaled by
    /// `ldam_c / n_class^(1/4)`.
    Ldam,
}

impl LossKind {
    pub const ALL: [LossKind; 8] = [
        LossKind::Bce,
        LossKind::Wbce,
        LossKind::CbBce,
        LossKind::SMl,
        LossKind::SFl,
        LossKind::AMl,
        LossKind::AFl,
        LossKind::Ldam,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Bce => "bce",
            LossKind::Wbce => "wbce",
            LossKind::CbBce => "cb-bce",
            LossKind::SMl => "s-ml",
            LossKind::SFl => "s-fl",
            LossKind::AMl => "a-ml",
            LossKind::AFl => "a-fl",
            LossKind::Ldam => "ldam",
        }
    }

    pub fn parse(name: &str) -> Result<LossKind> {
        Ok(match name {
            "bce" => LossKind::Bce,
            "wbce" => LossKind::Wbce,
            "cb-bce" => LossKind::CbBce,
            "s-ml" => LossKind::SMl,
            "s-fl" => LossKind::SFl,
            "a-ml" => LossKind::AMl,
            "a-fl" => LossKind::AFl,
            "ldam" => LossKind::Ldam,
            _ => return Err(config(format!("unknown loss kind: {name}"))),
        })
    }

    fn needs_class_counts(self) -> bool {
        matches!(self, LossKind::Wbce | LossKind::CbBce | LossKind::Ldam)
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Tunable parameters; unset fields fall back to conventional defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossParams {
    /// WBCE positive-term weight; default `n_neg / n_pos`.
    pub pos_weight: Option<f64>,
    /// Class-balanced effective-number beta in `[0, 1)`; default 0.9999.
    pub cb_beta: Option<f64>,
    /// S-ML margin; default 0.5.
    pub margin: Option<f64>,
    /// A-ML positive margin; default 1.0.
    pub margin_pos: Option<f64>,
    /// A-ML negative margin; default 0.0.
    pub margin_neg: Option<f64>,
    /// S-FL focusing exponent; default 2.0.
    pub focal_gamma: Option<f64>,
    /// A-FL positive focusing exponent; default 0.0.
    pub focal_gamma_pos: Option<f64>,
    /// A-FL negative focusing exponent; default 2.0.
    pub focal_gamma_neg: Option<f64>,
    /// LDAM margin scale; default 0.5.
    pub ldam_c: Option<f64>,
}

/// A fully specified base loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSpec {
    pub kind: LossKind,
    pub params: LossParams,
    /// `(n_pos, n_neg)` of the training set; required by WBCE, CB-BCE, LDAM.
    pub class_counts: Option<(usize, usize)>,
}

impl LossSpec {
    pub fn new(kind: LossKind) -> LossSpec {
        LossSpec {
            kind,
            params: LossParams::default(),
            class_counts: None,
        }
    }

    pub fn with_class_counts(mut self, n_pos: usize, n_neg: usize) -> LossSpec {
        self.class_counts = Some((n_pos, n_neg));
        self
    }

    /// Full validation, including the class-count requirement.
    pub fn validate(&self) -> Result<()> {
        self.validate_params()?;
        if self.kind.needs_class_counts() {
            match self.class_counts {
                None => {
                    return Err(config(format!(
                        "{} requires class_counts (n_pos, n_neg)",
                        self.kind
                    )))
                }
                Some((np, nn)) if np == 0 || nn == 0 => {
                    return Err(config(format!(
                        "{} requires nonzero class counts, got ({np}, {nn})",
                        self.kind
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// Parameter-range validation alone; class counts may still be
    /// resolved later from the training split.
    pub fn validate_params(&self) -> Result<()> {
        let p = &self.params;
        for (name, v) in [
            ("pos_weight", p.pos_weight),
            ("margin", p.margin),
            ("margin_pos", p.margin_pos),
            ("margin_neg", p.margin_neg),
            ("focal_gamma", p.focal_gamma),
            ("focal_gamma_pos", p.focal_gamma_pos),
            ("focal_gamma_neg", p.focal_gamma_neg),
            ("ldam_c", p.ldam_c),
        ] {
            if let Some(v) = v {
                if !v.is_finite() || v < 0.0 {
                    return Err(config(format!("{name} must be >= 0, got {v}")));
                }
            }
        }
        if let Some(b) = p.cb_beta {
            if !b.is_finite() || !(0.0..1.0).contains(&b) {
                return Err(config(format!("cb_beta must be in [0, 1), got {b}")));
            }
        }
        Ok(())
    }
}

fn logistic(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Stable BCE on a logit: value and d/ds.
fn bce_logit(s: f64, positive: bool) -> (f64, f64) {
    let y = if positive { 1.0 } else { 0.0 };
    let loss = s.max(0.0) - s * y + (-s.abs()).exp().ln_1p();
    (loss, logistic(s) - y)
}

/// Focal loss for the positive class: `(1-p)^gamma * (-ln p)` and d/ds.
/// The negative class mirrors through `s -> -s`.
fn focal_pos_logit(s: f64, gamma: f64) -> (f64, f64) {
    let p = logistic(s);
    let q = logistic(-s); // 1 - p
    let nlp = softplus(-s); // -ln p
    let loss = q.powf(gamma) * nlp;
    // d/ds [ (1-p)^g * (-ln p) ] = -g*p*(1-p)^g*(-ln p) - (1-p)^(g+1)
    let grad = -gamma * p * q.powf(gamma) * nlp - q.powf(gamma + 1.0);
    (loss, grad)
}

fn focal_logit(s: f64, positive: bool, gamma: f64) -> (f64, f64) {
    if positive {
        focal_pos_logit(s, gamma)
    } else {
        let (loss, grad) = focal_pos_logit(-s, gamma);
        (loss, -grad)
    }
}

/// Mean loss over the batch and the gradient of the mean with respect to
/// each score.
pub fn base_loss(spec: &LossSpec, scores: &[f64], labels: &[u8]) -> Result<(f64, Vec<f64>)> {
    spec.validate()?;
    if scores.is_empty() {
        return Err(invalid("base_loss: empty batch"));
    }
    if scores.len() != labels.len() {
        return Err(invalid(format!(
            "base_loss: {} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = scores.iter().position(|v| !v.is_finite()) {
        return Err(invalid(format!("base_loss: non-finite score at index {i}")));
    }
    if let Some(i) = labels.iter().position(|&y| y > 1) {
        return Err(invalid(format!("base_loss: label {} at index {i}", labels[i])));
    }

    let p = &spec.params;
    let n = scores.len() as f64;

    // Per-class multipliers and logit shifts resolved once per call.
    let per_sample: Box<dyn Fn(f64, bool) -> (f64, f64)> = match spec.kind {
        LossKind::Bce => Box::new(bce_logit),
        LossKind::Wbce => {
            let (np, nn) = spec.class_counts.expect("validated");
            let w = p.pos_weight.unwrap_or(nn as f64 / np as f64);
            Box::new(move |s, pos| {
                let (l, g) = bce_logit(s, pos);
                if pos {
                    (w * l, w * g)
                } else {
                    (l, g)
                }
            })
        }
        LossKind::CbBce => {
            let (np, nn) = spec.class_counts.expect("validated");
            let beta = p.cb_beta.unwrap_or(0.9999);
            // Effective-number weights, renormalized to mean 1 over the two
            // classes so the loss scale stays comparable to plain BCE.
            let raw = |count: usize| (1.0 - beta) / (1.0 - beta.powi(count as i32));
            let (wp, wn) = (raw(np), raw(nn));
            let scale = 2.0 / (wp + wn);
            let (wp, wn) = (wp * scale, wn * scale);
            Box::new(move |s, pos| {
                let (l, g) = bce_logit(s, pos);
                let w = if pos { wp } else { wn };
                (w * l, w * g)
            })
        }
        LossKind::SMl => {
            let m = p.margin.unwrap_or(0.5);
            Box::new(move |s, pos| {
                if pos {
                    bce_logit(s - m, true)
                } else {
                    bce_logit(s + m, false)
                }
            })
        }
        LossKind::AMl => {
            let mp = p.margin_pos.unwrap_or(1.0);
            let mn = p.margin_neg.unwrap_or(0.0);
            Box::new(move |s, pos| {
                if pos {
                    bce_logit(s - mp, true)
                } else {
                    bce_logit(s + mn, false)
                }
            })
        }
        LossKind::SFl => {
            let g = p.focal_gamma.unwrap_or(2.0);
            Box::new(move |s, pos| focal_logit(s, pos, g))
        }
        LossKind::AFl => {
            let gp = p.focal_gamma_pos.unwrap_or(0.0);
            let gn = p.focal_gamma_neg.unwrap_or(2.0);
            Box::new(move |s, pos| focal_logit(s, pos, if pos { gp } else { gn }))
        }
        LossKind::Ldam => {
            let (np, nn) = spec.class_counts.expect("validated");
            let c = p.ldam_c.unwrap_or(0.5);
            let dp = c / (np as f64).powf(0.25);
            let dn = c / (nn as f64).powf(0.25);
            Box::new(move |s, pos| {
                if pos {
                    bce_logit(s - dp, true)
                } else {
                    bce_logit(s + dn, false)
                }
            })
        }
    };

    let mut total = 0.0;
    let mut grad = Vec::with_capacity(scores.len());
    for (&s, &y) in scores.iter().zip(labels) {
        let (l, g) = per_sample(s, y == 1);
        total += l;
        grad.push(g / n);
    }
    Ok((total / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;

    fn spec(kind: LossKind) -> LossSpec {
        LossSpec::new(kind).with_class_counts(10, 1000)
    }

    /// Central finite differences of the mean loss, step 1e-5.
    fn fd_grad(spec: &LossSpec, scores: &[f64], labels: &[u8]) -> Vec<f64> {
        let h = 1e-5;
        (0..scores.len())
            .map(|i| {
                let mut plus = scores.to_vec();
                let mut minus = scores.to_vec();
                plus[i] += h;
                minus[i] -= h;
                let (lp, _) = base_loss(spec, &plus, labels).unwrap();
                let (lm, _) = base_loss(spec, &minus, labels).unwrap();
                (lp - lm) / (2.0 * h)
            })
            .collect()
    }

    fn assert_grads_close(analytic: &[f64], numeric: &[f64]) {
        for (a, n) in analytic.iter().zip(numeric) {
            let denom = a.abs().max(n.abs());
            if denom < 1e-8 {
                assert!((a - n).abs() < 1e-8, "grad {a} vs fd {n}");
            } else {
                assert!((a - n).abs() / denom < 1e-4, "grad {a} vs fd {n}");
            }
        }
    }

    #[test]
    fn bce_at_zero_logit() {
        let (l, g) = base_loss(&spec(LossKind::Bce), &[0.0], &[1]).unwrap();
        assert_relative_eq!(l, std::f64::consts::LN_2, max_relative = 1e-12);
        assert_relative_eq!(g[0], -0.5, max_relative = 1e-12);
    }

    #[test]
    fn focal_gamma_zero_equals_bce() {
        let mut s = spec(LossKind::SFl);
        s.params.focal_gamma = Some(0.0);
        let scores = [-3.0, -0.5, 0.0, 1.2, 4.0];
        let labels = [1, 0, 1, 0, 1];
        let (lf, gf) = base_loss(&s, &scores, &labels).unwrap();
        let (lb, gb) = base_loss(&spec(LossKind::Bce), &scores, &labels).unwrap();
        assert_relative_eq!(lf, lb, max_relative = 1e-12);
        for (a, b) in gf.iter().zip(&gb) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn degenerate_parameters_reduce_to_bce() {
        let scores = [-2.0, -0.3, 0.4, 1.7];
        let labels = [0, 1, 0, 1];
        let (lb, gb) = base_loss(&spec(LossKind::Bce), &scores, &labels).unwrap();

        let mut cases = Vec::new();
        let mut w = spec(LossKind::Wbce);
        w.params.pos_weight = Some(1.0);
        cases.push(w);
        let mut cb = spec(LossKind::CbBce);
        cb.params.cb_beta = Some(0.0);
        cases.push(cb);
        let mut sm = spec(LossKind::SMl);
        sm.params.margin = Some(0.0);
        cases.push(sm);
        let mut am = spec(LossKind::AMl);
        am.params.margin_pos = Some(0.0);
        am.params.margin_neg = Some(0.0);
        cases.push(am);
        let mut af = spec(LossKind::AFl);
        af.params.focal_gamma_pos = Some(0.0);
        af.params.focal_gamma_neg = Some(0.0);
        cases.push(af);
        let mut ld = spec(LossKind::Ldam);
        ld.params.ldam_c = Some(0.0);
        cases.push(ld);

        for c in cases {
            let (l, g) = base_loss(&c, &scores, &labels).unwrap();
            assert_relative_eq!(l, lb, max_relative = 1e-12);
            for (a, b) in g.iter().zip(&gb) {
                assert_relative_eq!(a, b, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn wbce_default_weight_is_count_ratio() {
        let scores = [-1.0, 0.5, 2.0];
        let labels = [1, 0, 1];
        let defaulted = spec(LossKind::Wbce); // counts (10, 1000)
        let mut explicit = spec(LossKind::Wbce);
        explicit.params.pos_weight = Some(100.0);
        let (ld, gd) = base_loss(&defaulted, &scores, &labels).unwrap();
        let (le, ge) = base_loss(&explicit, &scores, &labels).unwrap();
        assert_eq!(ld, le);
        assert_eq!(gd, ge);
    }

    #[test]
    fn cb_bce_equals_bce_for_symmetric_counts() {
        // Equal class counts give equal effective-number weights, which the
        // mean-1 renormalization maps to exactly 1.
        let scores = [-0.7, 0.2, 1.4, 3.0];
        let labels = [0, 1, 1, 0];
        let cb = LossSpec::new(LossKind::CbBce).with_class_counts(500, 500);
        let bce = LossSpec::new(LossKind::Bce);
        let (a, ga) = base_loss(&cb, &scores, &labels).unwrap();
        let (b, gb) = base_loss(&bce, &scores, &labels).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
        for (x, y) in ga.iter().zip(&gb) {
            assert_relative_eq!(x, y, max_relative = 1e-12);
        }
    }

    #[test]
    fn ldam_margin_scales_with_inverse_quartic_root() {
        // counts (16, 10000), C = 0.5: margins 0.5/2 and 0.5/10.
        let mut ldam = LossSpec::new(LossKind::Ldam).with_class_counts(16, 10000);
        ldam.params.ldam_c = Some(0.5);
        let bce = LossSpec::new(LossKind::Bce);
        let s = 0.9;
        let (lp, _) = base_loss(&ldam, &[s], &[1]).unwrap();
        let (lp_ref, _) = base_loss(&bce, &[s - 0.25], &[1]).unwrap();
        assert_relative_eq!(lp, lp_ref, max_relative = 1e-12);
        let (ln_, _) = base_loss(&ldam, &[s], &[0]).unwrap();
        let (ln_ref, _) = base_loss(&bce, &[s + 0.05], &[0]).unwrap();
        assert_relative_eq!(ln_, ln_ref, max_relative = 1e-12);
    }

    #[test]
    fn class_counts_required() {
        for kind in [LossKind::Wbce, LossKind::CbBce, LossKind::Ldam] {
            let s = LossSpec::new(kind);
            assert!(base_loss(&s, &[0.1], &[1]).is_err(), "{kind} must demand counts");
        }
        // BCE works without counts.
        assert!(base_loss(&LossSpec::new(LossKind::Bce), &[0.1], &[1]).is_ok());
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = spec(LossKind::Bce);
        assert!(base_loss(&s, &[f64::NAN], &[1]).is_err());
        assert!(base_loss(&s, &[], &[]).is_err());
        assert!(base_loss(&s, &[0.1, 0.2], &[1]).is_err());
        assert!(base_loss(&s, &[0.1], &[2]).is_err());
        let mut bad = spec(LossKind::CbBce);
        bad.params.cb_beta = Some(1.0);
        assert!(base_loss(&bad, &[0.1], &[1]).is_err());
        let mut neg = spec(LossKind::SMl);
        neg.params.margin = Some(-0.1);
        assert!(base_loss(&neg, &[0.1], &[1]).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for kind in LossKind::ALL {
            for _ in 0..25 {
                let n = rng.random_range(1..=16);
                let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
                let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1) as u8).collect();
                let mut s = spec(kind);
                // Randomize the parameters a little.
                s.params.margin = Some(rng.random_range(0.0..1.0));
                s.params.margin_pos = Some(rng.random_range(0.0..1.5));
                s.params.margin_neg = Some(rng.random_range(0.0..0.5));
                s.params.focal_gamma = Some(rng.random_range(0.0..3.0));
                s.params.focal_gamma_pos = Some(rng.random_range(0.0..2.0));
                s.params.focal_gamma_neg = Some(rng.random_range(0.0..3.0));
                s.params.pos_weight = Some(rng.random_range(0.5..20.0));
                s.params.cb_beta = Some(rng.random_range(0.0..0.9999));
                s.params.ldam_c = Some(rng.random_range(0.0..1.0));
                let (_, g) = base_loss(&s, &scores, &labels).unwrap();
                assert_grads_close(&g, &fd_grad(&s, &scores, &labels));
            }
        }
    }

    #[test]
    fn losses_nonnegative_and_vanish_when_confident() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for kind in LossKind::ALL {
            let s = spec(kind);
            for _ in 0..50 {
                let n = rng.random_range(1..=8);
                let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-6.0..6.0)).collect();
                let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1) as u8).collect();
                let (l, _) = base_loss(&s, &scores, &labels).unwrap();
                assert!(l >= 0.0, "{kind} produced negative loss {l}");
            }
            // Confident correct predictions drive the loss to zero.
            let (l, _) = base_loss(&s, &[40.0, -40.0], &[1, 0]).unwrap();
            assert!(l < 1e-12, "{kind} loss at confident scores was {l}");
        }
    }

    #[test]
    fn positive_sample_loss_nonincreasing_in_score() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for kind in LossKind::ALL {
            let s = spec(kind);
            for _ in 0..50 {
                let lo = rng.random_range(-5.0..4.5);
                let hi = lo + rng.random_range(0.01..3.0);
                let (l_lo, _) = base_loss(&s, &[lo], &[1]).unwrap();
                let (l_hi, _) = base_loss(&s, &[hi], &[1]).unwrap();
                assert!(
                    l_hi <= l_lo + 1e-12,
                    "{kind}: loss increased from {l_lo} to {l_hi} as score rose"
                );
            }
        }
    }
}
