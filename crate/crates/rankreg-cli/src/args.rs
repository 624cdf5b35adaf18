//! Flag definitions for the `rankreg` binary.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rankreg::{EvictionStrategy, LossKind, LossParams, LossSpec, Penalty, RegConfig, TrainConfig};

#[derive(Debug, Parser)]
#[command(
    name = "rankreg",
    version,
    about = "Train and evaluate imbalanced binary classifiers with the ranking regularizer"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic imbalanced Gaussian dataset.
    GenData(GenDataArgs),
    /// Train one model and write the model file plus a history report.
    Train(TrainArgs),
    /// Evaluate a saved model on a dataset.
    Eval(EvalArgs),
    /// Baseline vs +RankReg arms for one or more base losses over seeds.
    Compare(CompareArgs),
    /// Sweep one design axis, holding everything else fixed.
    Ablate(AblateArgs),
    /// Train an ensemble and report per-member and ensembled metrics.
    Ensemble(EnsembleArgs),
}

fn parse_losses(s: &str) -> Result<LossKind, rankreg::Error> {
    LossKind::parse(s)
}

fn parse_penalty(s: &str) -> Result<Penalty, rankreg::Error> {
    Penalty::parse(s)
}

fn parse_strategy(s: &str) -> Result<EvictionStrategy, rankreg::Error> {
    EvictionStrategy::parse(s)
}

/// Training knobs shared by train/compare/ablate/ensemble.
#[derive(Debug, Clone, Args)]
pub struct TrainFlags {
    /// Base objective: bce|wbce|cb-bce|s-ml|s-fl|a-ml|a-fl|ldam.
    #[arg(long, default_value = "bce", value_parser = parse_losses)]
    pub base_loss: LossKind,

    /// Add the ranking regularizer (batch 32 + buffer 32 defaults).
    #[arg(long)]
    pub rankreg: bool,

    /// Regularizer weight.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,

    /// Blackbox interpolation step.
    #[arg(long, default_value_t = 2000.0)]
    pub gamma: f64,

    /// Rank penalty shape: raw|square|cube|exp.
    #[arg(long, default_value = "square", value_parser = parse_penalty)]
    pub penalty: Penalty,

    /// Divide ranks by N before penalizing.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub normalize_ranks: bool,

    /// Positive-sample buffer capacity (default: 32 with --rankreg, else 0).
    #[arg(long)]
    pub buffer_size: Option<usize>,

    /// Buffer eviction strategy: dequeue-max|fifo|dequeue-min.
    #[arg(long, default_value = "dequeue-max", value_parser = parse_strategy)]
    pub buffer_strategy: EvictionStrategy,

    /// Include buffered samples in the base loss (rebalancing effect).
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub buffer_in_base_loss: bool,

    /// Batch size (default: 32 with --rankreg, else 64).
    #[arg(long)]
    pub batch_size: Option<usize>,

    #[arg(long, default_value_t = 50)]
    pub epochs: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,

    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,

    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "32")]
    pub hidden: Vec<usize>,

    /// TPR thresholds for reports, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.9,0.92,0.95,0.98")]
    pub tpr: Vec<f64>,

    /// WBCE positive-term weight (default n_neg/n_pos).
    #[arg(long)]
    pub pos_weight: Option<f64>,

    /// CB-BCE effective-number beta.
    #[arg(long)]
    pub cb_beta: Option<f64>,

    /// S-ML margin.
    #[arg(long)]
    pub margin: Option<f64>,

    /// A-ML positive margin.
    #[arg(long)]
    pub margin_pos: Option<f64>,

    /// A-ML negative margin.
    #[arg(long)]
    pub margin_neg: Option<f64>,

    /// S-FL focusing exponent.
    #[arg(long)]
    pub focal_gamma: Option<f64>,

    /// A-FL positive focusing exponent.
    #[arg(long)]
    pub focal_gamma_pos: Option<f64>,

    /// A-FL negative focusing exponent.
    #[arg(long)]
    pub focal_gamma_neg: Option<f64>,

    /// LDAM margin scale.
    #[arg(long)]
    pub ldam_c: Option<f64>,
}

impl TrainFlags {
    pub fn loss_params(&self) -> LossParams {
        LossParams {
            pos_weight: self.pos_weight,
            cb_beta: self.cb_beta,
            margin: self.margin,
            margin_pos: self.margin_pos,
            margin_neg: self.margin_neg,
            focal_gamma: self.focal_gamma,
            focal_gamma_pos: self.focal_gamma_pos,
            focal_gamma_neg: self.focal_gamma_neg,
            ldam_c: self.ldam_c,
        }
    }

    pub fn loss_spec(&self, kind: LossKind) -> LossSpec {
        LossSpec {
            kind,
            params: self.loss_params(),
            class_counts: None, // filled from the training split by the trainer
        }
    }

    pub fn reg_config(&self) -> RegConfig {
        RegConfig {
            lambda: self.lambda,
            gamma: self.gamma,
            penalty: self.penalty,
            normalize: self.normalize_ranks,
        }
    }

    /// Resolve the full training configuration for one arm. `rankreg`
    /// overrides the --rankreg flag so compare can build both arms.
    pub fn to_train_config(&self, kind: LossKind, rankreg: bool) -> TrainConfig {
        TrainConfig {
            loss: self.loss_spec(kind),
            reg: if rankreg { Some(self.reg_config()) } else { None },
            batch_size: self.batch_size.unwrap_or(if rankreg { 32 } else { 64 }),
            buffer_capacity: self.buffer_size.unwrap_or(if rankreg { 32 } else { 0 }),
            buffer_strategy: self.buffer_strategy,
            buffer_in_base_loss: self.buffer_in_base_loss,
            hidden_dims: self.hidden.clone(),
            epochs: self.epochs,
            seed: self.seed,
            learning_rate: self.lr,
            momentum: self.momentum,
            betas: self.tpr.clone(),
        }
    }

    /// Flag-level echo for result files; `auto` marks unresolved optionals
    /// and is skipped when a config is replayed.
    pub fn config_echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let opt = |v: Option<f64>| v.map_or_else(|| "auto".to_string(), |x| x.to_string());
        m.insert("base-loss".into(), self.base_loss.to_string());
        m.insert("rankreg".into(), self.rankreg.to_string());
        m.insert("lambda".into(), self.lambda.to_string());
        m.insert("gamma".into(), self.gamma.to_string());
        m.insert("penalty".into(), self.penalty.to_string());
        m.insert("normalize-ranks".into(), self.normalize_ranks.to_string());
        m.insert(
            "buffer-size".into(),
            self.buffer_size.map_or_else(|| "auto".into(), |v| v.to_string()),
        );
        m.insert("buffer-strategy".into(), self.buffer_strategy.to_string());
        m.insert(
            "buffer-in-base-loss".into(),
            self.buffer_in_base_loss.to_string(),
        );
        m.insert(
            "batch-size".into(),
            self.batch_size.map_or_else(|| "auto".into(), |v| v.to_string()),
        );
        m.insert("epochs".into(), self.epochs.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("lr".into(), self.lr.to_string());
        m.insert("momentum".into(), self.momentum.to_string());
        m.insert(
            "hidden".into(),
            self.hidden
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        m.insert(
            "tpr".into(),
            self.tpr
                .iter()
                .map(|b| b.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        m.insert("pos-weight".into(), opt(self.pos_weight));
        m.insert("cb-beta".into(), opt(self.cb_beta));
        m.insert("margin".into(), opt(self.margin));
        m.insert("margin-pos".into(), opt(self.margin_pos));
        m.insert("margin-neg".into(), opt(self.margin_neg));
        m.insert("focal-gamma".into(), opt(self.focal_gamma));
        m.insert("focal-gamma-pos".into(), opt(self.focal_gamma_pos));
        m.insert("focal-gamma-neg".into(), opt(self.focal_gamma_neg));
        m.insert("ldam-c".into(), opt(self.ldam_c));
        m
    }
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Feature dimension.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,

    /// Number of negative samples.
    #[arg(long, default_value_t = 5000)]
    pub n_neg: usize,

    /// Imbalance ratio (one positive per this many negatives).
    #[arg(long, default_value_t = 100.0)]
    pub ratio: f64,

    /// Displacement of the positive cluster along the first axis.
    #[arg(long, default_value_t = 2.0)]
    pub separation: f64,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub flags: TrainFlags,

    /// Training dataset (CSV).
    #[arg(long)]
    pub data: PathBuf,

    /// Validation dataset; without it a stratified fraction of --data is
    /// held out.
    #[arg(long)]
    pub val_data: Option<PathBuf>,

    /// Fraction of --data held out for validation when --val-data is absent.
    #[arg(long, default_value_t = 0.1)]
    pub val_frac: f64,

    /// Where to write the trained model.
    #[arg(long)]
    pub out_model: PathBuf,

    /// Where to write the per-epoch history report.
    #[arg(long)]
    pub out_history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model file written by `train`.
    #[arg(long)]
    pub model: PathBuf,

    /// Dataset to evaluate on (CSV).
    #[arg(long)]
    pub data: PathBuf,

    /// TPR thresholds, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.9,0.92,0.95,0.98")]
    pub tpr: Vec<f64>,

    /// Optional TOML report path.
    #[arg(long)]
    pub out_report: Option<PathBuf>,

    /// Optional ROC table path (threshold fpr tpr rows).
    #[arg(long)]
    pub out_roc: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub flags: TrainFlags,

    /// Dataset (CSV); each seed gets its own 70/10/20 stratified split.
    #[arg(long)]
    pub data: PathBuf,

    /// Base losses to compare, comma separated (default: all eight).
    #[arg(
        long,
        value_delimiter = ',',
        value_parser = parse_losses,
        default_value = "bce,wbce,cb-bce,s-ml,s-fl,a-ml,a-fl,ldam"
    )]
    pub losses: Vec<LossKind>,

    /// Number of seeds per arm, starting at --seed.
    #[arg(long, default_value_t = 3)]
    pub seeds: usize,

    /// Output directory for result.toml and per-arm ROC tables.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AblationAxis {
    Penalty,
    BufferStrategy,
    BufferSize,
    LabelNoise,
    Imbalance,
}

impl AblationAxis {
    pub fn name(self) -> &'static str {
        match self {
            AblationAxis::Penalty => "penalty",
            AblationAxis::BufferStrategy => "buffer-strategy",
            AblationAxis::BufferSize => "buffer-size",
            AblationAxis::LabelNoise => "label-noise",
            AblationAxis::Imbalance => "imbalance",
        }
    }
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub flags: TrainFlags,

    /// Axis to sweep.
    #[arg(long, value_enum)]
    pub ablation: AblationAxis,

    /// Synthetic dataset: feature dimension.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,

    /// Synthetic dataset: negative count.
    #[arg(long, default_value_t = 5000)]
    pub n_neg: usize,

    /// Synthetic dataset: imbalance ratio (ignored by --ablation imbalance).
    #[arg(long, default_value_t = 100.0)]
    pub ratio: f64,

    /// Synthetic dataset: cluster separation.
    #[arg(long, default_value_t = 2.0)]
    pub separation: f64,

    /// Seed for dataset generation (training seed comes from --seed).
    #[arg(long, default_value_t = 7)]
    pub data_seed: u64,

    /// Output directory for result.toml and per-arm ROC tables.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[command(flatten)]
    pub flags: TrainFlags,

    /// Dataset (CSV); a 20% test split is held out, members resplit the rest.
    #[arg(long)]
    pub data: PathBuf,

    /// Number of ensemble members.
    #[arg(long, default_value_t = 10)]
    pub k: usize,

    /// Output directory for result.toml and the ensemble ROC table.
    #[arg(long)]
    pub out_dir: PathBuf,
}
