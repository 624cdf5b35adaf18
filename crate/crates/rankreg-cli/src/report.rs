//! Result documents: a versioned TOML schema embedding the effective
//! config, per-arm metrics, summary tables, and timing.
//!
//! Everything outside `[timing]` is a deterministic function of the
//! embedded config, so replaying the config reproduces the document
//! byte-for-byte after stripping `[timing]`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use rankreg::MetricsReport;

pub const SCHEMA: &str = "rankreg-result/v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultDoc {
    pub schema: String,
    pub command: String,
    /// Flag-level echo; replaying these flags reproduces the numbers.
    pub config: BTreeMap<String, String>,
    pub arms: Vec<ArmRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<Summary>,
    pub timing: Timing,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArmRecord {
    pub id: String,
    pub seed: u64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub auc: f64,
    /// Keys are `fpr@<beta>`.
    pub fpr: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roc_file: Option<String>,
}

impl ArmRecord {
    pub fn new(id: impl Into<String>, seed: u64, report: &MetricsReport) -> ArmRecord {
        ArmRecord {
            id: id.into(),
            seed,
            n_pos: report.n_pos,
            n_neg: report.n_neg,
            auc: report.auc,
            fpr: report
                .fpr_at
                .iter()
                .map(|&(beta, fpr)| (format!("fpr@{beta}"), fpr))
                .collect(),
            roc_file: None,
        }
    }

    /// Metric map including AUC, for summaries.
    pub fn metrics(&self) -> BTreeMap<String, f64> {
        let mut m = self.fpr.clone();
        m.insert("auc".into(), self.auc);
        m
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Summary {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<GroupSummary>,
    /// Mean over losses of (baseline median - rankreg median), per metric.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub avg_delta_baseline_minus_rankreg: Option<BTreeMap<String, f64>>,
}

/// Median and mean over seeds for one (loss, method) group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupSummary {
    pub id: String,
    pub median: BTreeMap<String, f64>,
    pub mean: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timing {
    pub total_ms: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_arm_ms: BTreeMap<String, u64>,
}

impl ResultDoc {
    pub fn new(command: &str, config: BTreeMap<String, String>) -> ResultDoc {
        ResultDoc {
            schema: SCHEMA.into(),
            command: command.into(),
            config,
            arms: Vec::new(),
            summary: None,
            timing: Timing::default(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).context("serializing result document")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ResultDoc> {
        let text = fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.as_ref().display()))?;
        let doc: ResultDoc = toml::from_str(&text).context("parsing result document")?;
        anyhow::ensure!(
            doc.schema == SCHEMA,
            "unsupported result schema {:?}",
            doc.schema
        );
        Ok(doc)
    }

    /// The document with volatile fields removed, for reproduction checks.
    pub fn stable_value(&self) -> Result<toml::Value> {
        let mut value = toml::Value::try_from(self).context("converting result document")?;
        if let Some(table) = value.as_table_mut() {
            table.remove("timing");
        }
        Ok(value)
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Median/mean per metric over a set of arm records.
pub fn summarize_group(id: &str, arms: &[&ArmRecord]) -> GroupSummary {
    let mut median_map = BTreeMap::new();
    let mut mean_map = BTreeMap::new();
    if let Some(first) = arms.first() {
        for key in first.metrics().keys() {
            let values: Vec<f64> = arms.iter().map(|a| a.metrics()[key]).collect();
            median_map.insert(key.clone(), median(&values));
            mean_map.insert(key.clone(), mean(&values));
        }
    }
    GroupSummary {
        id: id.into(),
        median: median_map,
        mean: mean_map,
    }
}

/// Write a file atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: impl AsRef<Path>, contents: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path)
        .with_context(|| format!("renaming {} -> {}", tmp.display(), path.display()))?;
    Ok(())
}

/// Render a fixed-width table for stdout.
pub fn render_table(headers: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            if i < widths.len() {
                widths[i] = widths[i].max(cell.len());
            }
        }
    }
    let fmt_row = |cells: &[String]| {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{:<w$}", c, w = widths[i]))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = fmt_row(headers);
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in rows {
        out.push_str(&fmt_row(row));
        out.push('\n');
    }
    out
}
