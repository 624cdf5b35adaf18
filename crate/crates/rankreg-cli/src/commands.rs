//! Implementations of the CLI subcommands.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use rankreg::{
    evaluate, flip_labels, gen_gaussian_imbalanced, load_table, metrics_report, roc_curve,
    save_table, stratified_split, train, train_ensemble, Dataset, EvictionStrategy, Mlp, Penalty,
    RocCurve, TrainConfig,
};

use crate::args::{
    AblateArgs, AblationAxis, CompareArgs, EnsembleArgs, EvalArgs, GenDataArgs, TrainArgs,
};
use crate::report::{
    mean, render_table, summarize_group, write_atomic, ArmRecord, GroupSummary, ResultDoc,
    Summary,
};

pub fn gen_data(args: &GenDataArgs) -> Result<()> {
    let data = gen_gaussian_imbalanced(args.dim, args.n_neg, args.ratio, args.separation, args.seed)?;
    let tmp = args.out.with_extension("tmp");
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    save_table(&data, &tmp)?;
    std::fs::rename(&tmp, &args.out)?;
    println!(
        "wrote {} ({} samples: {} positive, {} negative, dim {})",
        args.out.display(),
        data.len(),
        data.n_pos(),
        data.n_neg(),
        data.dim()
    );
    Ok(())
}

fn load_train_val(args: &TrainArgs) -> Result<(Dataset, Dataset)> {
    let data = load_table(&args.data)?;
    match &args.val_data {
        Some(path) => Ok((data, load_table(path)?)),
        None => {
            if !(args.val_frac > 0.0 && args.val_frac < 1.0) {
                bail!("--val-frac must be in (0, 1), got {}", args.val_frac);
            }
            let split = stratified_split(&data, &[1.0 - args.val_frac, args.val_frac], args.flags.seed)?;
            let mut parts = split.parts.into_iter();
            let train_part = parts.next().expect("two parts");
            let val_part = parts.next().expect("two parts");
            Ok((train_part, val_part))
        }
    }
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let (train_set, val_set) = load_train_val(args)?;
    let config = args.flags.to_train_config(args.flags.base_loss, args.flags.rankreg);
    let started = Instant::now();
    let (model, history) = train(&config, &train_set, &val_set)?;

    let tmp = args.out_model.with_extension("tmp");
    model.save(&tmp)?;
    std::fs::rename(&tmp, &args.out_model)?;

    if let Some(history_path) = &args.out_history {
        let mut echo: Vec<String> = args
            .flags
            .config_echo()
            .into_iter()
            .map(|(k, v)| format!("{k} {v}"))
            .collect();
        echo.push(format!("data {}", args.data.display()));
        let mut buf = Vec::new();
        history.write_report(&mut buf, &echo)?;
        write_atomic(history_path, &String::from_utf8(buf).expect("utf8 report"))?;
    }

    let last = history.epochs.last().expect("at least one epoch");
    println!(
        "trained {} in {:.1}s ({} epochs, batch {}, buffer {})",
        args.out_model.display(),
        started.elapsed().as_secs_f64(),
        config.epochs,
        config.batch_size,
        config.buffer_capacity
    );
    println!("val auc {:.4}", last.val.auc);
    for &(beta, fpr) in &last.val.fpr_at {
        println!("val fpr@{beta} {fpr:.4}");
    }
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let model = Mlp::load(&args.model)?;
    let data = load_table(&args.data)?;
    let (scores, _) = model.forward(&data.feature_rows())?;
    let report = metrics_report(&scores, &data.labels(), &args.tpr)?;
    let curve = roc_curve(&scores, &data.labels())?;

    let mut rows = vec![vec!["auc".to_string(), format!("{:.6}", report.auc)]];
    for &(beta, fpr) in &report.fpr_at {
        rows.push(vec![format!("fpr@{beta}"), format!("{fpr:.6}")]);
    }
    print!(
        "{}",
        render_table(&["metric".to_string(), "value".to_string()], &rows)
    );

    if let Some(path) = &args.out_report {
        let mut config = BTreeMap::new();
        config.insert("model".to_string(), args.model.display().to_string());
        config.insert("data".to_string(), args.data.display().to_string());
        config.insert(
            "tpr".to_string(),
            args.tpr
                .iter()
                .map(|b| b.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        let mut doc = ResultDoc::new("eval", config);
        doc.arms.push(ArmRecord::new("eval", 0, &report));
        write_atomic(path, &doc.to_toml()?)?;
    }
    if let Some(path) = &args.out_roc {
        write_atomic(path, &roc_table(&curve))?;
    }
    Ok(())
}

fn roc_table(curve: &RocCurve) -> String {
    let mut buf = Vec::new();
    curve.write_table(&mut buf).expect("write to vec");
    String::from_utf8(buf).expect("utf8 roc table")
}

/// One training arm: its id, seed, resolved config, and data handling.
struct ArmSpec {
    id: String,
    config: TrainConfig,
    train_set: Dataset,
    val_set: Dataset,
    eval_set: Dataset,
}

struct ArmOutcome {
    record: ArmRecord,
    curve: RocCurve,
    wall_ms: u64,
}

fn run_arm(spec: &ArmSpec) -> Result<ArmOutcome> {
    let started = Instant::now();
    let (model, _) = train(&spec.config, &spec.train_set, &spec.val_set)?;
    let report = evaluate(&model, &spec.eval_set, &spec.config.betas)?;
    let (scores, _) = model.forward(&spec.eval_set.feature_rows())?;
    let curve = roc_curve(&scores, &spec.eval_set.labels())?;
    let mut record = ArmRecord::new(spec.id.clone(), spec.config.seed, &report);
    record.roc_file = Some(format!("roc_{}.txt", spec.id));
    Ok(ArmOutcome {
        record,
        curve,
        wall_ms: started.elapsed().as_millis() as u64,
    })
}

fn run_arms(specs: Vec<ArmSpec>) -> Result<Vec<ArmOutcome>> {
    specs
        .par_iter()
        .map(run_arm)
        .collect::<Result<Vec<_>>>()
}

fn write_experiment(out_dir: &Path, doc: &ResultDoc, outcomes: &[ArmOutcome]) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    for outcome in outcomes {
        let name = outcome.record.roc_file.as_deref().expect("roc file set");
        write_atomic(out_dir.join(name), &roc_table(&outcome.curve))?;
    }
    write_atomic(out_dir.join("result.toml"), &doc.to_toml()?)?;
    Ok(())
}

fn print_groups(groups: &[GroupSummary]) {
    let Some(first) = groups.first() else { return };
    let mut headers = vec!["arm".to_string()];
    headers.extend(first.median.keys().cloned());
    let rows: Vec<Vec<String>> = groups
        .iter()
        .map(|g| {
            let mut row = vec![g.id.clone()];
            row.extend(g.median.values().map(|v| format!("{v:.4}")));
            row
        })
        .collect();
    print!("{}", render_table(&headers, &rows));
}

pub fn cmd_compare(args: &CompareArgs) -> Result<()> {
    if args.seeds == 0 {
        bail!("--seeds must be >= 1");
    }
    if args.losses.is_empty() {
        bail!("--losses must name at least one base loss");
    }
    let started = Instant::now();
    let data = load_table(&args.data)?;

    let mut specs = Vec::new();
    for &loss in &args.losses {
        for s in 0..args.seeds {
            let seed = args.flags.seed + s as u64;
            let split = stratified_split(&data, &[0.7, 0.1, 0.2], seed)?;
            for rankreg in [false, true] {
                let method = if rankreg { "rankreg" } else { "baseline" };
                let mut config = args.flags.to_train_config(loss, rankreg);
                config.seed = seed;
                specs.push(ArmSpec {
                    id: format!("{loss}-{method}-seed{seed}"),
                    config,
                    train_set: split.parts[0].clone(),
                    val_set: split.parts[1].clone(),
                    eval_set: split.parts[2].clone(),
                });
            }
        }
    }
    let outcomes = run_arms(specs)?;

    // Group medians/means per (loss, method), then the averaged improvement
    // row: baseline minus rankreg, median over seeds, mean over losses.
    let mut groups = Vec::new();
    let mut deltas: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for &loss in &args.losses {
        let mut by_method: BTreeMap<&str, GroupSummary> = BTreeMap::new();
        for method in ["baseline", "rankreg"] {
            let arms: Vec<&ArmRecord> = outcomes
                .iter()
                .map(|o| &o.record)
                .filter(|r| r.id.starts_with(&format!("{loss}-{method}-")))
                .collect();
            by_method.insert(method, summarize_group(&format!("{loss}/{method}"), &arms));
        }
        let base = &by_method["baseline"];
        let rr = &by_method["rankreg"];
        for (metric, b) in &base.median {
            deltas
                .entry(metric.clone())
                .or_default()
                .push(b - rr.median[metric]);
        }
        groups.push(by_method.remove("baseline").expect("present"));
        groups.push(by_method.remove("rankreg").expect("present"));
    }
    let avg_delta: BTreeMap<String, f64> = deltas
        .into_iter()
        .map(|(metric, values)| (metric, mean(&values)))
        .collect();

    let mut config = args.flags.config_echo();
    config.insert("data".into(), args.data.display().to_string());
    config.insert(
        "losses".into(),
        args.losses
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    config.insert("seeds".into(), args.seeds.to_string());

    let mut doc = ResultDoc::new("compare", config);
    doc.arms = outcomes.iter().map(|o| o.record.clone()).collect();
    doc.summary = Some(Summary {
        groups: groups.clone(),
        avg_delta_baseline_minus_rankreg: Some(avg_delta.clone()),
    });
    doc.timing.total_ms = started.elapsed().as_millis() as u64;
    for o in &outcomes {
        doc.timing.per_arm_ms.insert(o.record.id.clone(), o.wall_ms);
    }
    write_experiment(&args.out_dir, &doc, &outcomes)?;

    print_groups(&groups);
    println!();
    let headers = vec!["avg delta (baseline - rankreg)".to_string(), "value".to_string()];
    let rows: Vec<Vec<String>> = avg_delta
        .iter()
        .map(|(k, v)| vec![k.clone(), format!("{v:+.4}")])
        .collect();
    print!("{}", render_table(&headers, &rows));
    println!("\nwrote {}", args.out_dir.join("result.toml").display());
    Ok(())
}

pub fn cmd_ablate(args: &AblateArgs) -> Result<()> {
    let started = Instant::now();
    let gen = |ratio: f64| -> Result<Dataset> {
        Ok(gen_gaussian_imbalanced(
            args.dim,
            args.n_neg,
            ratio,
            args.separation,
            args.data_seed,
        )?)
    };
    let split_of = |data: &Dataset| -> Result<Vec<Dataset>> {
        Ok(stratified_split(data, &[0.7, 0.1, 0.2], args.flags.seed)?.parts)
    };

    let mut specs = Vec::new();
    match args.ablation {
        AblationAxis::Penalty => {
            let parts = split_of(&gen(args.ratio)?)?;
            for penalty in Penalty::ALL {
                let mut config = args.flags.to_train_config(args.flags.base_loss, true);
                config.reg.as_mut().expect("rankreg arm").penalty = penalty;
                specs.push(ArmSpec {
                    id: format!("penalty-{penalty}"),
                    config,
                    train_set: parts[0].clone(),
                    val_set: parts[1].clone(),
                    eval_set: parts[2].clone(),
                });
            }
        }
        AblationAxis::BufferStrategy => {
            let parts = split_of(&gen(args.ratio)?)?;
            for strategy in EvictionStrategy::ALL {
                let mut config = args.flags.to_train_config(args.flags.base_loss, true);
                config.buffer_strategy = strategy;
                specs.push(ArmSpec {
                    id: format!("strategy-{strategy}"),
                    config,
                    train_set: parts[0].clone(),
                    val_set: parts[1].clone(),
                    eval_set: parts[2].clone(),
                });
            }
        }
        AblationAxis::BufferSize => {
            let parts = split_of(&gen(args.ratio)?)?;
            for size in [0usize, 8, 16, 32, 64] {
                let mut config = args.flags.to_train_config(args.flags.base_loss, true);
                config.buffer_capacity = size;
                specs.push(ArmSpec {
                    id: format!("size-{size}"),
                    config,
                    train_set: parts[0].clone(),
                    val_set: parts[1].clone(),
                    eval_set: parts[2].clone(),
                });
            }
        }
        AblationAxis::LabelNoise => {
            let parts = split_of(&gen(args.ratio)?)?;
            for tenths in 0..=5u32 {
                let eta = f64::from(tenths) / 10.0;
                let noisy_train = flip_labels(&parts[0], eta, args.data_seed ^ 0x5eed)?;
                let config = args.flags.to_train_config(args.flags.base_loss, true);
                specs.push(ArmSpec {
                    id: format!("eta-{eta}"),
                    config,
                    train_set: noisy_train,
                    val_set: parts[1].clone(),
                    eval_set: parts[2].clone(),
                });
            }
        }
        AblationAxis::Imbalance => {
            for ratio in [100.0, 200.0] {
                let parts = split_of(&gen(ratio)?)?;
                for rankreg in [false, true] {
                    let method = if rankreg { "rankreg" } else { "baseline" };
                    let config = args.flags.to_train_config(args.flags.base_loss, rankreg);
                    specs.push(ArmSpec {
                        id: format!("ratio-{ratio}-{method}"),
                        config,
                        train_set: parts[0].clone(),
                        val_set: parts[1].clone(),
                        eval_set: parts[2].clone(),
                    });
                }
            }
        }
    }

    let outcomes = run_arms(specs)?;

    let mut config = args.flags.config_echo();
    config.insert("ablation".into(), args.ablation.name().to_string());
    config.insert("dim".into(), args.dim.to_string());
    config.insert("n-neg".into(), args.n_neg.to_string());
    config.insert("ratio".into(), args.ratio.to_string());
    config.insert("separation".into(), args.separation.to_string());
    config.insert("data-seed".into(), args.data_seed.to_string());

    let mut doc = ResultDoc::new("ablate", config);
    doc.arms = outcomes.iter().map(|o| o.record.clone()).collect();
    doc.timing.total_ms = started.elapsed().as_millis() as u64;
    for o in &outcomes {
        doc.timing.per_arm_ms.insert(o.record.id.clone(), o.wall_ms);
    }
    write_experiment(&args.out_dir, &doc, &outcomes)?;

    let Some(first) = doc.arms.first() else {
        bail!("no arms produced")
    };
    let mut headers = vec!["arm".to_string()];
    headers.extend(first.metrics().keys().cloned());
    let rows: Vec<Vec<String>> = doc
        .arms
        .iter()
        .map(|a| {
            let mut row = vec![a.id.clone()];
            row.extend(a.metrics().values().map(|v| format!("{v:.4}")));
            row
        })
        .collect();
    print!("{}", render_table(&headers, &rows));
    println!("\nwrote {}", args.out_dir.join("result.toml").display());
    Ok(())
}

pub fn cmd_ensemble(args: &EnsembleArgs) -> Result<()> {
    let started = Instant::now();
    let data = load_table(&args.data)?;
    let config = args.flags.to_train_config(args.flags.base_loss, args.flags.rankreg);
    let result = train_ensemble(&config, &data, args.k, args.flags.seed)?;

    let mut config_echo = args.flags.config_echo();
    config_echo.insert("data".into(), args.data.display().to_string());
    config_echo.insert("k".into(), args.k.to_string());

    let mut doc = ResultDoc::new("ensemble", config_echo);
    for (i, report) in result.member_reports.iter().enumerate() {
        doc.arms
            .push(ArmRecord::new(format!("member{i}"), args.flags.seed, report));
    }
    let mut ensemble_record = ArmRecord::new("ensemble", args.flags.seed, &result.ensemble_report);
    ensemble_record.roc_file = Some("roc_ensemble.txt".into());
    doc.arms.push(ensemble_record);
    doc.timing.total_ms = started.elapsed().as_millis() as u64;

    std::fs::create_dir_all(&args.out_dir)?;
    let curve = roc_curve(&result.ensemble_test_scores, &result.test.labels())?;
    write_atomic(args.out_dir.join("roc_ensemble.txt"), &roc_table(&curve))?;
    write_atomic(args.out_dir.join("result.toml"), &doc.to_toml()?)?;

    let mut headers = vec!["arm".to_string()];
    headers.extend(doc.arms[0].metrics().keys().cloned());
    let rows: Vec<Vec<String>> = doc
        .arms
        .iter()
        .map(|a| {
            let mut row = vec![a.id.clone()];
            row.extend(a.metrics().values().map(|v| format!("{v:.4}")));
            row
        })
        .collect();
    print!("{}", render_table(&headers, &rows));
    println!("\nwrote {}", args.out_dir.join("result.toml").display());
    Ok(())
}
