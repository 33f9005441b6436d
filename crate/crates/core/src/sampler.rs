//! Block Gibbs sampling and exact i.i.d. sampling from an RBM's visible marginal.

use rand::Rng;
use serde::Deserialize;

use crate::dataset::Dataset;
use crate::error::{check_len, Error, Result};
use crate::model::{RbmParams, Spins};
use crate::oracle::ExactOracle;
use crate::seed::rng_from_seed;

/// Schedule for a single block Gibbs chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub seed: u64,
    /// Sweeps discarded before the first kept sample.
    pub burn_in: usize,
    /// Sweeps between kept samples.
    pub thinning: usize,
    pub num_samples: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            seed: 0,
            burn_in: 10_000,
            thinning: 100,
            num_samples: 70,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thinning == 0 {
            return Err(Error::InvalidConfig("thinning must be at least 1".into()));
        }
        if self.num_samples == 0 {
            return Err(Error::InvalidConfig("num_samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// `P(unit = +1)` for a +/-1 unit with input `a`: `e^a / (e^a + e^-a)`.
#[inline]
pub fn prob_positive(a: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * a).exp())
}

fn draw_units(activations: &[f64], rng: &mut impl Rng) -> Spins {
    let values = activations
        .iter()
        .map(|&a| if rng.random::<f64>() < prob_positive(a) { 1 } else { -1 })
        .collect();
    Spins::new(values).expect("draws are +/-1")
}

pub fn sample_hidden_given_visible(params: &RbmParams, x: &Spins, rng: &mut impl Rng) -> Result<Spins> {
    Ok(draw_units(&params.hidden_activations(x)?, rng))
}

pub fn sample_visible_given_hidden(params: &RbmParams, h: &Spins, rng: &mut impl Rng) -> Result<Spins> {
    check_len("hidden state", params.m(), h.len())?;
    Ok(draw_units(&params.visible_activations(h)?, rng))
}

/// Runs one alternating chain (h | x, then x | h per sweep) from a uniform start.
pub fn generate_dataset(params: &RbmParams, config: &SamplerConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = rng_from_seed(config.seed);
    let n = params.n();
    let mut x = Spins::new((0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect())?;
    let sweep = |x: &Spins, rng: &mut _| -> Result<Spins> {
        let h = sample_hidden_given_visible(params, x, rng)?;
        sample_visible_given_hidden(params, &h, rng)
    };
    for _ in 0..config.burn_in {
        x = sweep(&x, &mut rng)?;
    }
    let mut rows = Vec::with_capacity(config.num_samples);
    for _ in 0..config.num_samples {
        for _ in 0..config.thinning {
            x = sweep(&x, &mut rng)?;
        }
        rows.push(x.clone());
    }
    Dataset::new(rows)
}

/// Draws i.i.d. rows from the enumerated marginal by inverse CDF.
pub fn generate_exact(params: &RbmParams, num_samples: usize, seed: u64) -> Result<Dataset> {
    generate_exact_with(params, num_samples, seed, &ExactOracle::default())
}

pub fn generate_exact_with(
    params: &RbmParams,
    num_samples: usize,
    seed: u64,
    oracle: &ExactOracle,
) -> Result<Dataset> {
    if num_samples == 0 {
        return Err(Error::InvalidConfig("num_samples must be at least 1".into()));
    }
    let log_p = oracle.marginal_log_probs(params)?;
    let mut cdf = Vec::with_capacity(log_p.len());
    let mut acc = 0.0;
    for lp in &log_p {
        acc += lp.exp();
        cdf.push(acc);
    }
    let total = acc;
    let mut rng = rng_from_seed(seed);
    let rows = (0..num_samples)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            Spins::from_bits(idx as u64, params.n())
        })
        .collect();
    Dataset::new(rows)
}
