use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use distillab_bench::random_logits;
use distillab_core::losses::{loss_eval, loss_grad, LossKind, LossSpec};
use distillab_core::prob::{power_transform, renyi_entropy, shannon_entropy, softmax};

fn bench_simplex_ops(c: &mut Criterion) {
    let mut group = c.benchmark_group("simplex");
    for k in [10usize, 100, 1000] {
        let logits = random_logits(1, k, 5.0);
        let p = softmax(&logits, 1.0).unwrap();
        group.bench_with_input(BenchmarkId::new("softmax", k), &logits, |b, l| {
            b.iter(|| softmax(black_box(l), 4.0).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("power_transform", k), &p, |b, p| {
            b.iter(|| power_transform(black_box(p), 0.25).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("shannon_entropy", k), &p, |b, p| {
            b.iter(|| shannon_entropy(black_box(p)))
        });
        group.bench_with_input(BenchmarkId::new("renyi_entropy", k), &p, |b, p| {
            b.iter(|| renyi_entropy(black_box(p), 0.25).unwrap())
        });
    }
    group.finish();
}

fn bench_losses(c: &mut Criterion) {
    let mut group = c.benchmark_group("loss");
    let k = 100;
    let student = random_logits(2, k, 4.0);
    let teacher = random_logits(3, k, 4.0);
    let specs = [
        ("ce", LossSpec::new(LossKind::Ce)),
        (
            "kd",
            LossSpec::new(LossKind::Kd).with_gamma(0.25).with_lambda(0.9),
        ),
        (
            "ttm",
            LossSpec::new(LossKind::Ttm).with_gamma(0.25).with_beta(36.0),
        ),
        (
            "wttm",
            LossSpec::new(LossKind::Wttm).with_gamma(0.25).with_beta(2.0),
        ),
        ("cp", LossSpec::new(LossKind::Cp).with_eta(0.5)),
        ("ls", LossSpec::new(LossKind::Ls).with_epsilon(0.1)),
    ];
    for (name, spec) in &specs {
        group.bench_function(BenchmarkId::new("eval", *name), |b| {
            b.iter(|| loss_eval(black_box(spec), 3, black_box(&student), Some(&teacher)).unwrap())
        });
        group.bench_function(BenchmarkId::new("grad", *name), |b| {
            b.iter(|| loss_grad(black_box(spec), 3, black_box(&student), Some(&teacher)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_simplex_ops, bench_losses);
criterion_main!(benches);
