use rand::Rng;

use crate::dataset::Dataset;
use crate::model::{RbmParams, Spins};

pub(crate) fn random_params(rng: &mut impl Rng, n: usize, m: usize, scale: f64) -> RbmParams {
    let values: Vec<f64> = (0..n + m + n * m)
        .map(|_| rng.random_range(-scale..=scale))
        .collect();
    RbmParams::from_flat(n, m, &values).unwrap()
}

pub(crate) fn random_dataset(rng: &mut impl Rng, n: usize, rows: usize) -> Dataset {
    Dataset::new(
        (0..rows)
            .map(|_| Spins::from_bits(rng.random::<u64>(), n))
            .collect(),
    )
    .unwrap()
}

/// Copy of `params` with flat parameter `idx` shifted by `delta`.
pub(crate) fn perturbed(params: &RbmParams, idx: usize, delta: f64) -> RbmParams {
    let mut flat: Vec<f64> = params.iter().collect();
    flat[idx] += delta;
    RbmParams::from_flat(params.n(), params.m(), &flat).unwrap()
}
