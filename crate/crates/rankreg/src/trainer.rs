//! The training loop: batch sampling, buffer merge, composite loss,
//! backprop, buffer maintenance, and epoch bookkeeping.

use std::io::Write;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::buffer::{merged_batch, EvictionStrategy, Origin, PositiveBuffer};
use crate::data::{stratified_split, Dataset};
use crate::error::{config, invalid, Result};
use crate::losses::{base_loss, LossSpec};
use crate::metrics::{ensemble_scores, metrics_report, MetricsReport, DEFAULT_BETAS};
use crate::mlp::{init_mlp, Mlp, OptimizerState};
use crate::ranking::{rankreg_score_grad, RegConfig};
use crate::Error;

/// Full specification of one training run.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub loss: LossSpec,
    /// Regularizer configuration; `None` trains the base loss alone.
    pub reg: Option<RegConfig>,
    pub batch_size: usize,
    /// Zero disables the buffer entirely.
    pub buffer_capacity: usize,
    pub buffer_strategy: EvictionStrategy,
    /// Compute the base loss over the merged batch (rebalancing effect)
    /// rather than the batch rows only.
    pub buffer_in_base_loss: bool,
    /// Hidden layer widths; input and scalar output are added around them.
    pub hidden_dims: Vec<usize>,
    pub epochs: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub momentum: f64,
    /// TPR thresholds for the per-epoch reports.
    pub betas: Vec<f64>,
}

impl TrainConfig {
    /// Base-loss-only arm: batch 64, no buffer.
    pub fn baseline(loss: LossSpec) -> TrainConfig {
        TrainConfig {
            loss,
            reg: None,
            batch_size: 64,
            buffer_capacity: 0,
            buffer_strategy: EvictionStrategy::DequeueMax,
            buffer_in_base_loss: false,
            hidden_dims: vec![32],
            epochs: 50,
            seed: 0,
            learning_rate: 0.01,
            momentum: 0.9,
            betas: DEFAULT_BETAS.to_vec(),
        }
    }

    /// Regularized arm: batch 32 plus a 32-slot buffer.
    pub fn rankreg(loss: LossSpec) -> TrainConfig {
        TrainConfig {
            reg: Some(RegConfig::default()),
            batch_size: 32,
            buffer_capacity: 32,
            buffer_in_base_loss: true,
            ..TrainConfig::baseline(loss)
        }
    }

    pub fn validate(&self) -> Result<()> {
        // Class counts are resolved from the training split at train time,
        // so only parameter ranges are checked here.
        self.loss.validate_params()?;
        if let Some(reg) = &self.reg {
            reg.validate()?;
        }
        if self.batch_size == 0 {
            return Err(config("batch_size must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(config("epochs must be >= 1"));
        }
        if self.betas.is_empty() {
            return Err(config("betas must be nonempty"));
        }
        for &b in &self.betas {
            if !b.is_finite() || b <= 0.0 || b > 1.0 {
                return Err(config(format!("beta must be in (0, 1], got {b}")));
            }
        }
        OptimizerState::new(self.learning_rate, self.momentum)?;
        Ok(())
    }

    fn layer_dims(&self, input_dim: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(1);
        dims
    }

    /// Loss spec with class counts defaulted from the training set.
    fn resolved_loss(&self, train: &Dataset) -> LossSpec {
        let mut loss = self.loss.clone();
        if loss.class_counts.is_none() {
            loss.class_counts = Some((train.n_pos(), train.n_neg()));
        }
        loss
    }
}

/// Per-epoch bookkeeping.
#[derive(Debug, Clone)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the per-batch mean base losses.
    pub mean_base_loss: f64,
    /// Mean lambda-weighted regularizer value over batches where it ran.
    pub mean_reg_value: f64,
    /// Batches where the regularizer produced a gradient.
    pub reg_batches: usize,
    /// Batches skipped for lack of positives (warned, not fatal).
    pub reg_skipped: usize,
    /// Smallest positive count any regularizer invocation saw this epoch.
    pub min_reg_positives: usize,
    pub train: MetricsReport,
    pub val: MetricsReport,
}

/// One record per completed epoch.
#[derive(Debug, Clone)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub betas: Vec<f64>,
}

impl TrainHistory {
    /// Structured text report: a magic line, optional `# key value` config
    /// echo lines, a column header, and one row per epoch.
    pub fn write_report(&self, mut w: impl Write, config_lines: &[String]) -> Result<()> {
        writeln!(w, "# rankreg-history/v1")?;
        for line in config_lines {
            writeln!(w, "# {line}")?;
        }
        let mut cols = vec![
            "epoch".to_string(),
            "base_loss".to_string(),
            "reg_value".to_string(),
            "reg_batches".to_string(),
            "reg_skipped".to_string(),
            "min_reg_pos".to_string(),
        ];
        for split in ["train", "val"] {
            cols.push(format!("{split}_auc"));
            for b in &self.betas {
                cols.push(format!("{split}_fpr@{b}"));
            }
        }
        writeln!(w, "{}", cols.join(" "))?;
        for r in &self.epochs {
            let mut row = vec![
                r.epoch.to_string(),
                r.mean_base_loss.to_string(),
                r.mean_reg_value.to_string(),
                r.reg_batches.to_string(),
                r.reg_skipped.to_string(),
                r.min_reg_positives.to_string(),
            ];
            for report in [&r.train, &r.val] {
                row.push(report.auc.to_string());
                for &(_, fpr) in &report.fpr_at {
                    row.push(fpr.to_string());
                }
            }
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// Elementwise sum of the base-loss and regularizer score gradients.
fn compose_score_grads(base: &[f64], reg: &[f64]) -> Vec<f64> {
    debug_assert_eq!(base.len(), reg.len());
    base.iter().zip(reg).map(|(b, r)| b + r).collect()
}

/// Train a fresh model on `train_set`, reporting on `train_set` and
/// `val_set` after every epoch. Deterministic per `config.seed`.
pub fn train(config: &TrainConfig, train_set: &Dataset, val_set: &Dataset) -> Result<(Mlp, TrainHistory)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(invalid("train: empty training set"));
    }
    if config.reg.is_some() && train_set.n_pos() == 0 {
        return Err(config_err_no_positives());
    }
    if val_set.dim() != train_set.dim() {
        return Err(invalid("train: train/val dimension mismatch"));
    }

    let loss = config.resolved_loss(train_set);
    let mut model = init_mlp(&config.layer_dims(train_set.dim()), config.seed)?;
    let mut opt = OptimizerState::new(config.learning_rate, config.momentum)?;
    let mut buffer = PositiveBuffer::new(config.buffer_capacity, config.buffer_strategy);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9E3779B97F4A7C15));

    let mut history = TrainHistory {
        epochs: Vec::with_capacity(config.epochs),
        betas: {
            let mut b = config.betas.clone();
            b.sort_by(f64::total_cmp);
            b.dedup();
            b
        },
    };

    let mut indices: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=config.epochs {
        indices.shuffle(&mut shuffle_rng);
        let mut base_sum = 0.0;
        let mut batches = 0usize;
        let mut reg_sum = 0.0;
        let mut reg_batches = 0usize;
        let mut reg_skipped = 0usize;
        let mut min_reg_positives = usize::MAX;

        for chunk in indices.chunks(config.batch_size) {
            let batch: Vec<crate::data::Sample> =
                chunk.iter().map(|&i| train_set.samples()[i].clone()).collect();
            let merged = merged_batch(&batch, &buffer);
            let (scores, cache) = model.forward(&merged.features)?;

            let batch_len = batch.len();
            let (base_value, base_grad) = if config.buffer_in_base_loss {
                base_loss(&loss, &scores, &merged.labels)?
            } else {
                let (v, mut g) = base_loss(&loss, &scores[..batch_len], &merged.labels[..batch_len])?;
                g.resize(merged.len(), 0.0);
                (v, g)
            };
            base_sum += base_value;
            batches += 1;

            let dscore = if let Some(reg) = &config.reg {
                match rankreg_score_grad(&scores, &merged.labels, reg) {
                    Ok((value, reg_grad)) => {
                        reg_sum += value;
                        reg_batches += 1;
                        let positives = merged.labels.iter().filter(|&&y| y == 1).count();
                        min_reg_positives = min_reg_positives.min(positives);
                        compose_score_grads(&base_grad, &reg_grad)
                    }
                    Err(Error::NoPositives) => {
                        reg_skipped += 1;
                        log::warn!(
                            "epoch {epoch}: batch without positives, regularizer skipped"
                        );
                        base_grad
                    }
                    Err(e) => return Err(e),
                }
            } else {
                base_grad
            };

            let grads = model.backward(&cache, &dscore)?;
            model.sgd_step(&grads, &mut opt)?;

            // Batch positives enter the buffer keyed by this batch's scores.
            if config.buffer_capacity > 0 {
                for (i, sample) in batch.into_iter().enumerate() {
                    debug_assert_eq!(merged.origins[i], Origin::Batch);
                    if sample.label == 1 {
                        buffer.push(sample, scores[i])?;
                    }
                }
            }
        }

        // Keys follow the current model once per epoch.
        if config.buffer_capacity > 0 {
            buffer.refresh_scores(|s| {
                model
                    .score_one(&s.features)
                    .expect("buffered sample matches model input dim")
            });
        }

        history.epochs.push(EpochRecord {
            epoch,
            mean_base_loss: base_sum / batches as f64,
            mean_reg_value: if reg_batches > 0 {
                reg_sum / reg_batches as f64
            } else {
                0.0
            },
            reg_batches,
            reg_skipped,
            min_reg_positives: if reg_batches > 0 { min_reg_positives } else { 0 },
            train: evaluate(&model, train_set, &history.betas)?,
            val: evaluate(&model, val_set, &history.betas)?,
        });
    }

    Ok((model, history))
}

fn config_err_no_positives() -> Error {
    config("regularized training requires at least one positive in the training set")
}

/// Score every sample and compute the metrics report.
pub fn evaluate(model: &Mlp, dataset: &Dataset, betas: &[f64]) -> Result<MetricsReport> {
    let (scores, _) = model.forward(&dataset.feature_rows())?;
    metrics_report(&scores, &dataset.labels(), betas)
}

/// Models and reports from one ensemble run.
#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub models: Vec<Mlp>,
    pub member_reports: Vec<MetricsReport>,
    pub ensemble_report: MetricsReport,
    /// Averaged logits on the held-out test set.
    pub ensemble_test_scores: Vec<f64>,
    /// The held-out test split the reports were computed on.
    pub test: Dataset,
}

/// SplitMix64; decorrelates member seeds derived from one run seed.
fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E3779B97F4A7C15))
        .wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Hold out a test split once, then train `k` members on independent
/// stratified resplits of the remainder and ensemble their test logits.
///
/// Overall fractions are 70/10/20: the 80% pool is resplit 87.5/12.5 into
/// train/val per member. Members are reproducible per `(seed, index)`.
pub fn train_ensemble(
    config: &TrainConfig,
    dataset: &Dataset,
    k: usize,
    seed: u64,
) -> Result<EnsembleResult> {
    if k == 0 {
        return Err(crate::error::config("ensemble needs k >= 1"));
    }
    let outer = stratified_split(dataset, &[0.8, 0.2], derive_seed(seed, 0))?;
    let pool = &outer.parts[0];
    let test = outer.parts[1].clone();

    let mut models = Vec::with_capacity(k);
    let mut member_reports = Vec::with_capacity(k);
    let mut member_scores = Vec::with_capacity(k);
    for member in 0..k {
        let member_seed = derive_seed(seed, 1 + member as u64);
        let inner = stratified_split(pool, &[0.875, 0.125], member_seed)?;
        let mut member_config = config.clone();
        member_config.seed = member_seed;
        let (model, _) = train(&member_config, &inner.parts[0], &inner.parts[1])?;
        let (scores, _) = model.forward(&test.feature_rows())?;
        member_reports.push(metrics_report(&scores, &test.labels(), &config.betas)?);
        member_scores.push(scores);
        models.push(model);
    }

    let combined = ensemble_scores(&member_scores)?;
    let ensemble_report = metrics_report(&combined, &test.labels(), &config.betas)?;
    Ok(EnsembleResult {
        models,
        member_reports,
        ensemble_report,
        ensemble_test_scores: combined,
        test,
    })
}
