use criterion::{black_box, criterion_group, criterion_main, Criterion};

use distillab_bench::bench_dataset;
use distillab_core::datagen::batch_iter;
use distillab_core::losses::{loss_grad, LossKind, LossSpec};
use distillab_core::netkit::{init_mlp, sgd_step, OptimState, ParamGrads};

fn bench_forward_backward(c: &mut Criterion) {
    let model = init_mlp(&[20, 64, 10], 1).unwrap();
    let data = bench_dataset(10, 20, 20);
    let spec = LossSpec::new(LossKind::Ce);

    c.bench_function("mlp/forward_20x64x10", |b| {
        b.iter(|| model.logits(black_box(data.row(0))).unwrap())
    });
    c.bench_function("mlp/forward_backward_20x64x10", |b| {
        b.iter(|| {
            let (logits, cache) = model.forward_logits(black_box(data.row(0))).unwrap();
            let g = loss_grad(&spec, data.label(0), &logits, None).unwrap();
            model.backward_from_logit_grad(&cache, &g).unwrap()
        })
    });
}

fn bench_epoch(c: &mut Criterion) {
    let data = bench_dataset(10, 20, 20);
    let spec = LossSpec::new(LossKind::Ce);

    c.bench_function("mlp/one_epoch_200_samples", |b| {
        b.iter(|| {
            let mut model = init_mlp(&[20, 32, 10], 1).unwrap();
            let mut opt = OptimState::new(0.01, 0.9, 5e-4, vec![], &model).unwrap();
            for batch in batch_iter(&data, 64, 3).unwrap() {
                let mut grads = ParamGrads::zeros_like(&model);
                for &i in &batch {
                    let (logits, cache) = model.forward_logits(data.row(i)).unwrap();
                    let g = loss_grad(&spec, data.label(i), &logits, None).unwrap();
                    grads
                        .accumulate(&model.backward_from_logit_grad(&cache, &g).unwrap())
                        .unwrap();
                }
                grads.scale(1.0 / batch.len() as f64);
                sgd_step(&mut model, &grads, &mut opt, 1).unwrap();
            }
            model
        })
    });
}

criterion_group!(benches, bench_forward_backward, bench_epoch);
criterion_main!(benches);
