//! Synthetic imbalanced dataset generation, tabular ingestion, imbalance
//! curation, stratified splits, and label-noise injection.
//!
//! Every generator and transform is a deterministic function of its inputs
//! and a seed.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{config, invalid, Error, Result};

/// One labeled feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: u8,
}

/// A binary classification dataset with fixed feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    dim: usize,
    n_pos: usize,
    n_neg: usize,
}

impl Dataset {
    /// Validates dimensions, finiteness, and labels, and caches the class
    /// counts.
    pub fn new(samples: Vec<Sample>, dim: usize) -> Result<Dataset> {
        let mut n_pos = 0;
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != dim {
                return Err(invalid(format!(
                    "sample {i}: {} features, expected {dim}",
                    s.features.len()
                )));
            }
            if s.features.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("sample {i}: non-finite feature")));
            }
            match s.label {
                0 => {}
                1 => n_pos += 1,
                other => return Err(invalid(format!("sample {i}: label {other}"))),
            }
        }
        let n_neg = samples.len() - n_pos;
        Ok(Dataset {
            samples,
            dim,
            n_pos,
            n_neg,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_pos(&self) -> usize {
        self.n_pos
    }

    pub fn n_neg(&self) -> usize {
        self.n_neg
    }

    pub fn labels(&self) -> Vec<u8> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn feature_rows(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.features.clone()).collect()
    }
}

/// Gaussian clusters: negatives at the origin, positives displaced by
/// `separation` along the first axis, `n_pos = max(1, round(n_neg / ratio))`.
pub fn gen_gaussian_imbalanced(
    dim: usize,
    n_neg: usize,
    ratio: f64,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if dim == 0 {
        return Err(config("dim must be >= 1"));
    }
    if n_neg == 0 {
        return Err(config("n_neg must be >= 1"));
    }
    if !ratio.is_finite() || ratio < 1.0 {
        return Err(config(format!("ratio must be >= 1, got {ratio}")));
    }
    if !separation.is_finite() || separation < 0.0 {
        return Err(config(format!("separation must be >= 0, got {separation}")));
    }
    let n_pos = ((n_neg as f64 / ratio).round() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n_neg + n_pos);
    for _ in 0..n_neg {
        let features: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        samples.push(Sample { features, label: 0 });
    }
    for _ in 0..n_pos {
        let mut features: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        features[0] += separation;
        samples.push(Sample { features, label: 1 });
    }
    Dataset::new(samples, dim)
}

/// Keep every negative; subsample positives without replacement down to
/// `max(1, round(n_neg / ratio))`. Sample order is preserved.
pub fn subsample_to_ratio(dataset: &Dataset, ratio: f64, seed: u64) -> Result<Dataset> {
    if !ratio.is_finite() || ratio < 1.0 {
        return Err(config(format!("ratio must be >= 1, got {ratio}")));
    }
    let target = ((dataset.n_neg as f64 / ratio).round() as usize).max(1);
    if target > dataset.n_pos {
        return Err(config(format!(
            "need {target} positives for ratio {ratio} but dataset has {}",
            dataset.n_pos
        )));
    }
    let mut pos_idx: Vec<usize> = (0..dataset.len())
        .filter(|&i| dataset.samples[i].label == 1)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pos_idx.shuffle(&mut rng);
    let mut keep = vec![false; dataset.len()];
    for &i in pos_idx.iter().take(target) {
        keep[i] = true;
    }
    let samples: Vec<Sample> = dataset
        .samples
        .iter()
        .enumerate()
        .filter(|(i, s)| s.label == 0 || keep[*i])
        .map(|(_, s)| s.clone())
        .collect();
    Dataset::new(samples, dataset.dim)
}

/// Result of a stratified split; `zero_positive_parts` flags splits that
/// received no positives even though the dataset has some.
#[derive(Debug, Clone)]
pub struct StratifiedSplit {
    pub parts: Vec<Dataset>,
    pub zero_positive_parts: Vec<usize>,
}

/// Per-class proportional partition. Within each class the base allocation
/// is `floor(fraction * n)`, and the remainder goes to the first split, so
/// the partition is exact.
pub fn stratified_split(dataset: &Dataset, fractions: &[f64], seed: u64) -> Result<StratifiedSplit> {
    if fractions.is_empty() {
        return Err(config("fractions must be nonempty"));
    }
    if fractions.iter().any(|&f| !f.is_finite() || f <= 0.0) {
        return Err(config("fractions must be positive"));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(config(format!("fractions must sum to 1, got {total}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; dataset.len()];
    for class in [0u8, 1u8] {
        let mut idx: Vec<usize> = (0..dataset.len())
            .filter(|&i| dataset.samples[i].label == class)
            .collect();
        idx.shuffle(&mut rng);
        let n = idx.len();
        let mut counts: Vec<usize> = fractions.iter().map(|&f| (f * n as f64).floor() as usize).collect();
        let assigned: usize = counts.iter().sum();
        counts[0] += n - assigned;
        let mut cursor = 0;
        for (part, &count) in counts.iter().enumerate() {
            for &i in &idx[cursor..cursor + count] {
                assignment[i] = part;
            }
            cursor += count;
        }
    }

    let mut parts = Vec::with_capacity(fractions.len());
    let mut zero_positive_parts = Vec::new();
    for part in 0..fractions.len() {
        let samples: Vec<Sample> = dataset
            .samples
            .iter()
            .enumerate()
            .filter(|(i, _)| assignment[*i] == part)
            .map(|(_, s)| s.clone())
            .collect();
        let ds = Dataset::new(samples, dataset.dim)?;
        if ds.n_pos == 0 && dataset.n_pos > 0 {
            zero_positive_parts.push(part);
        }
        parts.push(ds);
    }
    Ok(StratifiedSplit {
        parts,
        zero_positive_parts,
    })
}

/// Invert the labels of exactly `round(eta * n)` samples chosen uniformly
/// without replacement. Flipping twice with the same seed restores the
/// original labels.
pub fn flip_labels(dataset: &Dataset, eta: f64, seed: u64) -> Result<Dataset> {
    if !eta.is_finite() || !(0.0..=0.5).contains(&eta) {
        return Err(config(format!("eta must be in [0, 0.5], got {eta}")));
    }
    let k = (eta * dataset.len() as f64).round() as usize;
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let mut flip = vec![false; dataset.len()];
    for &i in idx.iter().take(k) {
        flip[i] = true;
    }
    let samples: Vec<Sample> = dataset
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| Sample {
            features: s.features.clone(),
            label: if flip[i] { 1 - s.label } else { s.label },
        })
        .collect();
    Dataset::new(samples, dataset.dim)
}

/// Write the dataset as `f0,...,f{d-1},label` CSV. Feature values use the
/// shortest decimal representation that round-trips exactly.
pub fn save_table(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for i in 0..dataset.dim {
        out.push_str(&format!("f{i},"));
    }
    out.push_str("label\n");
    for s in &dataset.samples {
        for v in &s.features {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{}\n", s.label));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Load a dataset written by [`save_table`]. Errors carry 1-based line
/// numbers.
pub fn load_table(path: impl AsRef<Path>) -> Result<Dataset> {
    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();

    let header = match lines.next() {
        Some(h) => h?,
        None => {
            return Err(Error::Parse {
                line: 1,
                msg: "empty file, expected header".into(),
            })
        }
    };
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 || cols[cols.len() - 1] != "label" {
        return Err(Error::Parse {
            line: 1,
            msg: "header must be f0,...,f{d-1},label".into(),
        });
    }
    let dim = cols.len() - 1;

    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 1 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {} columns, found {}", dim + 1, fields.len()),
            });
        }
        let mut features = Vec::with_capacity(dim);
        for f in &fields[..dim] {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad feature value {f:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("non-finite feature value {f:?}"),
                });
            }
            features.push(v);
        }
        let label = match fields[dim] {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("label must be 0 or 1, got {other:?}"),
                })
            }
        };
        samples.push(Sample { features, label });
    }
    if samples.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "no data rows after header".into(),
        });
    }
    Dataset::new(samples, dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n_pos: usize, n_neg: usize) -> Dataset {
        let mut samples = Vec::new();
        for i in 0..n_neg {
            samples.push(Sample {
                features: vec![i as f64, -1.0],
                label: 0,
            });
        }
        for i in 0..n_pos {
            samples.push(Sample {
                features: vec![i as f64, 1.0],
                label: 1,
            });
        }
        Dataset::new(samples, 2).unwrap()
    }

    #[test]
    fn gen_counts_follow_ratio() {
        let d = gen_gaussian_imbalanced(2, 5000, 100.0, 2.0, 1).unwrap();
        assert_eq!((d.n_pos(), d.n_neg()), (50, 5000));
        assert_eq!(d.len(), 5050);
        let d = gen_gaussian_imbalanced(2, 5000, 200.0, 2.0, 1).unwrap();
        assert_eq!((d.n_pos(), d.n_neg()), (25, 5000));
        // Tiny datasets keep at least one positive.
        let d = gen_gaussian_imbalanced(3, 10, 100.0, 2.0, 1).unwrap();
        assert_eq!(d.n_pos(), 1);
    }

    #[test]
    fn gen_is_deterministic_per_seed() {
        let a = gen_gaussian_imbalanced(4, 100, 10.0, 1.5, 9).unwrap();
        let b = gen_gaussian_imbalanced(4, 100, 10.0, 1.5, 9).unwrap();
        assert_eq!(a, b);
        let c = gen_gaussian_imbalanced(4, 100, 10.0, 1.5, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn gen_rejects_bad_params() {
        assert!(gen_gaussian_imbalanced(0, 10, 10.0, 1.0, 0).is_err());
        assert!(gen_gaussian_imbalanced(2, 0, 10.0, 1.0, 0).is_err());
        assert!(gen_gaussian_imbalanced(2, 10, 0.5, 1.0, 0).is_err());
        assert!(gen_gaussian_imbalanced(2, 10, 10.0, -1.0, 0).is_err());
    }

    #[test]
    fn subsample_arithmetic() {
        let d = toy(100, 1000);
        let s = subsample_to_ratio(&d, 100.0, 3).unwrap();
        assert_eq!((s.n_pos(), s.n_neg()), (10, 1000));
        // Already at the ratio: unchanged up to positive-set identity.
        let again = subsample_to_ratio(&s, 100.0, 9).unwrap();
        assert_eq!((again.n_pos(), again.n_neg()), (10, 1000));
        // ratio 1 balances at the negative count when positives suffice.
        let wide = toy(200, 100);
        let balanced = subsample_to_ratio(&wide, 1.0, 3).unwrap();
        assert_eq!((balanced.n_pos(), balanced.n_neg()), (100, 100));
        // Features never change, only membership.
        for smp in s.samples() {
            assert!(d.samples().contains(smp));
        }
        assert!(subsample_to_ratio(&toy(5, 1000), 100.0, 0).is_err());
    }

    #[test]
    fn split_is_exact_partition() {
        let d = toy(100, 10000);
        let split = stratified_split(&d, &[0.7, 0.1, 0.2], 5).unwrap();
        let counts: Vec<(usize, usize)> = split
            .parts
            .iter()
            .map(|p| (p.n_pos(), p.n_neg()))
            .collect();
        assert_eq!(counts, vec![(70, 7000), (10, 1000), (20, 2000)]);
        assert!(split.zero_positive_parts.is_empty());

        // Union as multiset equals the original.
        let mut all: Vec<String> = split
            .parts
            .iter()
            .flat_map(|p| p.samples().iter().map(|s| format!("{:?}", s)))
            .collect();
        let mut orig: Vec<String> = d.samples().iter().map(|s| format!("{:?}", s)).collect();
        all.sort();
        orig.sort();
        assert_eq!(all, orig);
    }

    #[test]
    fn split_identity_and_seed_behavior() {
        let d = toy(10, 100);
        let id = stratified_split(&d, &[1.0], 0).unwrap();
        assert_eq!(id.parts.len(), 1);
        assert_eq!(id.parts[0].len(), d.len());

        let a = stratified_split(&d, &[0.5, 0.5], 1).unwrap();
        let b = stratified_split(&d, &[0.5, 0.5], 2).unwrap();
        for (x, y) in a.parts.iter().zip(&b.parts) {
            assert_eq!((x.n_pos(), x.n_neg()), (y.n_pos(), y.n_neg()));
        }
        assert_ne!(a.parts[0], b.parts[0], "different seeds, different members");
    }

    #[test]
    fn split_flags_zero_positive_parts() {
        let d = toy(1, 50);
        let split = stratified_split(&d, &[0.5, 0.5], 3).unwrap();
        // One positive can land in only one part; the other is flagged.
        assert_eq!(split.zero_positive_parts.len(), 1);
    }

    #[test]
    fn split_rejects_bad_fractions() {
        let d = toy(5, 5);
        assert!(stratified_split(&d, &[], 0).is_err());
        assert!(stratified_split(&d, &[0.5, 0.4], 0).is_err());
        assert!(stratified_split(&d, &[0.5, -0.5, 1.0], 0).is_err());
    }

    #[test]
    fn flip_labels_counts_and_involution() {
        let d = toy(5, 5);
        let unchanged = flip_labels(&d, 0.0, 7).unwrap();
        assert_eq!(d, unchanged);

        let flipped = flip_labels(&d, 0.5, 7).unwrap();
        let differing = d
            .samples()
            .iter()
            .zip(flipped.samples())
            .filter(|(a, b)| a.label != b.label)
            .count();
        assert_eq!(differing, 5);

        let restored = flip_labels(&flipped, 0.5, 7).unwrap();
        assert_eq!(d, restored);

        assert!(flip_labels(&d, 0.6, 0).is_err());
        assert!(flip_labels(&d, -0.1, 0).is_err());
    }

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let d = gen_gaussian_imbalanced(3, 50, 10.0, 2.0, 4).unwrap();
        save_table(&d, &path).unwrap();
        let loaded = load_table(&path).unwrap();
        assert_eq!(d, loaded);
    }

    #[test]
    fn table_parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();

        let p = dir.path().join("empty.csv");
        fs::write(&p, "f0,f1,label\n").unwrap();
        match load_table(&p) {
            Err(Error::Parse { msg, .. }) => assert!(msg.contains("no data rows")),
            other => panic!("expected parse error, got {other:?}"),
        }

        let p = dir.path().join("badlabel.csv");
        fs::write(&p, "f0,f1,label\n0.1,0.2,0\n0.3,0.4,2\n").unwrap();
        match load_table(&p) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("label"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }

        let p = dir.path().join("badcols.csv");
        fs::write(&p, "f0,f1,label\n0.1,0\n").unwrap();
        match load_table(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }

        let p = dir.path().join("badfeat.csv");
        fs::write(&p, "f0,label\nnope,1\n").unwrap();
        assert!(matches!(load_table(&p), Err(Error::Parse { line: 2, .. })));
    }
}
