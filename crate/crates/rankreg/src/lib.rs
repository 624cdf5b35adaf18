//! Ranking-based regularization for binary classifiers that must operate at
//! a high true positive rate.
//!
//! The false positive rate at a high TPR depends only on how the least
//! confident positives are ranked among the negatives. This crate implements
//! a regularizer that penalizes the (squared) ranks of positive samples in
//! the batch score ordering, differentiated through the piecewise-constant
//! ranking map with a blackbox-interpolation gradient, plus everything
//! needed to run it at desk scale:
//!
//! - [`ranking`]: the rank function, regularizer value, and score gradient
//! - [`losses`]: eight base objectives (BCE, WBCE, CB-BCE, margins, focal,
//!   LDAM) with analytic gradients
//! - [`buffer`]: a capacity-bounded store of positive samples appended to
//!   every batch
//! - [`mlp`]: a small feed-forward scorer with explicit backprop and
//!   momentum SGD
//! - [`metrics`]: ROC curves, AUC, FPR at fixed TPR, logit-space ensembling
//! - [`data`]: synthetic imbalanced Gaussians, tabular I/O, stratified
//!   splits, label noise
//! - [`trainer`]: the composite training loop and ensembling protocol

pub mod buffer;
pub mod data;
mod error;
pub mod losses;
pub mod metrics;
pub mod mlp;
pub mod ranking;
pub mod trainer;

pub use buffer::{merged_batch, EvictionStrategy, MergedBatch, Origin, PositiveBuffer};
pub use data::{
    flip_labels, gen_gaussian_imbalanced, load_table, save_table, stratified_split, subsample_to_ratio,
    Dataset, Sample, StratifiedSplit,
};
pub use error::{Error, Result};
pub use losses::{base_loss, LossKind, LossParams, LossSpec};
pub use metrics::{
    auc, ensemble_scores, fpr_at_tpr, metrics_report, roc_curve, MetricsReport, RocCurve, RocPoint,
    DEFAULT_BETAS,
};
pub use mlp::{init_mlp, ForwardCache, Gradients, Mlp, OptimizerState};
pub use ranking::{
    blackbox_rank_grad, rank, rankreg_grad_wrt_ranks, rankreg_score_grad, rankreg_value, Penalty,
    RankVector, RegConfig,
};
pub use trainer::{
    evaluate, train, train_ensemble, EnsembleResult, EpochRecord, TrainConfig, TrainHistory,
};
