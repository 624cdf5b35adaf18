use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rankreg::*;
use rankreg_bench::{labels, scores};

fn bench_rank(c: &mut Criterion) {
    let mut group = c.benchmark_group("rank");
    for n in [64usize, 1024, 16384] {
        let s = scores(n, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &s, |b, s| {
            b.iter(|| rank(black_box(s)).unwrap())
        });
    }
    group.finish();
}

fn bench_regularizer(c: &mut Criterion) {
    // The merged-batch size the trainer actually uses.
    let s = scores(64, 2);
    let y = labels(64, 2, 2);
    let cfg = RegConfig::default();
    c.bench_function("rankreg_score_grad/64", |b| {
        b.iter(|| rankreg_score_grad(black_box(&s), black_box(&y), &cfg).unwrap())
    });
}

fn bench_metrics(c: &mut Criterion) {
    let mut group = c.benchmark_group("metrics");
    for n in [1000usize, 10000] {
        let s = scores(n, 3);
        let y = labels(n, 100, 3);
        group.bench_with_input(BenchmarkId::new("auc", n), &n, |b, _| {
            b.iter(|| auc(black_box(&s), black_box(&y)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("roc_curve", n), &n, |b, _| {
            b.iter(|| roc_curve(black_box(&s), black_box(&y)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("fpr_at_tpr", n), &n, |b, _| {
            b.iter(|| fpr_at_tpr(black_box(&s), black_box(&y), 0.95).unwrap())
        });
    }
    group.finish();
}

fn bench_losses(c: &mut Criterion) {
    let s = scores(1024, 4);
    let y = labels(1024, 100, 4);
    let mut group = c.benchmark_group("base_loss/1024");
    for kind in [LossKind::Bce, LossKind::SFl, LossKind::Ldam] {
        let spec = LossSpec::new(kind).with_class_counts(64, 6400);
        group.bench_function(kind.name(), |b| {
            b.iter(|| base_loss(black_box(&spec), black_box(&s), black_box(&y)).unwrap())
        });
    }
    group.finish();
}

fn bench_mlp(c: &mut Criterion) {
    let mlp = init_mlp(&[2, 32, 1], 5).unwrap();
    let rows: Vec<Vec<f64>> = (0..64)
        .map(|i| vec![f64::from(i % 13) * 0.3 - 2.0, f64::from(i % 7) * 0.5 - 1.5])
        .collect();
    c.bench_function("mlp_forward/64x[2,32,1]", |b| {
        b.iter(|| mlp.forward(black_box(&rows)).unwrap())
    });
    let (_, cache) = mlp.forward(&rows).unwrap();
    let dscore: Vec<f64> = (0..64).map(|i| f64::from(i % 5) * 0.1 - 0.2).collect();
    c.bench_function("mlp_backward/64x[2,32,1]", |b| {
        b.iter(|| mlp.backward(black_box(&cache), black_box(&dscore)).unwrap())
    });
}

fn bench_buffer(c: &mut Criterion) {
    let s = scores(1000, 6);
    c.bench_function("buffer_push/cap32", |b| {
        b.iter(|| {
            let mut buffer = PositiveBuffer::new(32, EvictionStrategy::DequeueMax);
            for (i, &score) in s.iter().enumerate() {
                let sample = Sample {
                    features: vec![i as f64],
                    label: 1,
                };
                black_box(buffer.push(sample, score).unwrap());
            }
            buffer.len()
        })
    });
}

criterion_group!(
    benches,
    bench_rank,
    bench_regularizer,
    bench_metrics,
    bench_losses,
    bench_mlp,
    bench_buffer
);
criterion_main!(benches);
