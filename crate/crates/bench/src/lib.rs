//! Shared fixtures for the benchmark targets.

use distillab_core::datagen::{gen_mixture, Dataset, MixtureSpec};
use distillab_core::prob::LogitVec;
use distillab_core::rng::SplitMix64;

pub fn random_logits(seed: u64, k: usize, scale: f64) -> LogitVec {
    let mut rng = SplitMix64::new(seed);
    LogitVec::new((0..k).map(|_| rng.next_range(-scale, scale)).collect()).unwrap()
}

pub fn bench_dataset(k: usize, d: usize, n_per_class: usize) -> Dataset {
    gen_mixture(&MixtureSpec {
        k,
        d,
        n_per_class,
        separation: 6.0,
        within_std: 1.0,
        seed: 7,
    })
    .unwrap()
}
