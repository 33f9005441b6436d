//! Brute-force ground truth for small visible layers.
//!
//! Everything here enumerates visible states explicitly and uses only the
//! energies from [`crate::model`]; none of it goes through the block kernel
//! used by the objectives and gradients.

use crate::blocks::{Block, BlockFamily};
use crate::dataset::Dataset;
use crate::error::{check_len, Error, Result};
use crate::model::{ln_cosh, log_sum_exp, RbmParams, Spins};

pub const DEFAULT_ENUMERATION_CAP: usize = 20;

#[derive(Clone, Copy, Debug)]
pub struct ExactOracle {
    cap: usize,
}

impl Default for ExactOracle {
    fn default() -> Self {
        ExactOracle {
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl ExactOracle {
    pub fn with_cap(cap: usize) -> Self {
        ExactOracle { cap: cap.min(62) }
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    fn check(&self, n: usize) -> Result<()> {
        if n > self.cap {
            Err(Error::EnumerationCap { n, cap: self.cap })
        } else {
            Ok(())
        }
    }

    /// `-E(x)` for every visible state, indexed by [`Spins::to_bits`].
    ///
    /// States are visited in Gray-code order so each step flips one unit and
    /// updates the activations in `O(m)`.
    pub fn negative_energies(&self, params: &RbmParams) -> Result<Vec<f64>> {
        let (n, m) = (params.n(), params.m());
        self.check(n)?;
        let mut values = vec![0.0; 1 << n];
        let mut x = vec![-1.0f64; n];
        let mut field: f64 = -params.alpha().iter().sum::<f64>();
        let mut act: Vec<f64> = (0..m)
            .map(|j| params.beta()[j] - (0..n).map(|i| params.weight(i, j)).sum::<f64>())
            .collect();
        let mut gray = 0usize;
        values[0] = field + act.iter().map(|&a| ln_cosh(a)).sum::<f64>();
        for t in 1..(1usize << n) {
            let i = t.trailing_zeros() as usize;
            x[i] = -x[i];
            gray ^= 1 << i;
            field += 2.0 * params.alpha()[i] * x[i];
            for (j, a) in act.iter_mut().enumerate() {
                *a += 2.0 * params.weight(i, j) * x[i];
            }
            values[gray] = field + act.iter().map(|&a| ln_cosh(a)).sum::<f64>();
        }
        Ok(values)
    }

    /// `ln Z = ln sum_x exp(-E(x))`.
    pub fn log_partition(&self, params: &RbmParams) -> Result<f64> {
        Ok(log_sum_exp(&self.negative_energies(params)?))
    }

    /// `ln P(x)` for every visible state, indexed by [`Spins::to_bits`].
    pub fn marginal_log_probs(&self, params: &RbmParams) -> Result<Vec<f64>> {
        let mut values = self.negative_energies(params)?;
        let log_z = log_sum_exp(&values);
        values.iter_mut().for_each(|v| *v -= log_z);
        Ok(values)
    }

    /// `L_ML = <-E(x)>_D - ln Z`.
    pub fn log_likelihood_ml(&self, params: &RbmParams, data: &Dataset) -> Result<f64> {
        check_len("dataset width", params.n(), data.width())?;
        let log_z = self.log_partition(params)?;
        let mut total = 0.0;
        for row in data.rows() {
            total -= params.marginal_energy(row)?;
        }
        Ok(total / data.len() as f64 - log_z)
    }

    /// `ln sum_{x_c} exp(-E(x))` over completions of the block.
    fn block_log_sum(&self, params: &RbmParams, x: &Spins, block: &Block) -> Result<f64> {
        block.check_within(params.n())?;
        let mut completion = x.clone();
        let mut terms = Vec::with_capacity(1 << block.len());
        for s in 0..(1u64 << block.len()) {
            for (b, i) in block.iter().enumerate() {
                completion.set(i, s >> b & 1 == 1);
            }
            terms.push(-params.marginal_energy(&completion)?);
        }
        Ok(log_sum_exp(&terms))
    }

    /// `ln P(x_c | x_cbar)` by enumerating the block completions.
    pub fn conditional_log_prob(&self, params: &RbmParams, x: &Spins, block: &Block) -> Result<f64> {
        self.check(params.n())?;
        params.check_visible(x)?;
        Ok(-params.marginal_energy(x)? - self.block_log_sum(params, x, block)?)
    }

    /// `R_F = Lambda_F sum_c <ln sum_{x_c} P(x)>_D`, so that `L_ML = L_F + R_F`.
    pub fn remainder(&self, params: &RbmParams, data: &Dataset, family: &BlockFamily) -> Result<f64> {
        check_len("dataset width", params.n(), data.width())?;
        check_len("block family", params.n(), family.n())?;
        let log_z = self.log_partition(params)?;
        let mut total = 0.0;
        for block in family.blocks() {
            for row in data.rows() {
                total += self.block_log_sum(params, row, block)? - log_z;
            }
        }
        Ok(family.lambda() * total / data.len() as f64)
    }

    /// `D_k = R_{F_{k+1}} - R_{F_k}` for `1 <= k <= n - 1`.
    pub fn remainder_difference(&self, params: &RbmParams, data: &Dataset, k: usize) -> Result<f64> {
        let n = params.n();
        if k == 0 || k >= n {
            return Err(Error::BlockOrder { k, n });
        }
        let upper = self.remainder(params, data, &BlockFamily::order(n, k + 1)?)?;
        let lower = self.remainder(params, data, &BlockFamily::order(n, k)?)?;
        Ok(upper - lower)
    }
}
