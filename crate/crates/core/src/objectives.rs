//! Composite likelihood of a binary RBM and its pseudo-likelihood special case.

use crate::blocks::BlockFamily;
use crate::dataset::Dataset;
use crate::error::{check_len, Result};
use crate::kernel::{map_blocks, BlockScratch, PreparedData};
use crate::model::{ln_cosh, RbmParams, Spins};

pub(crate) fn check_shapes(params: &RbmParams, data: &Dataset, family: Option<&BlockFamily>) -> Result<()> {
    check_len("dataset width", params.n(), data.width())?;
    if let Some(f) = family {
        check_len("block family", params.n(), f.n())?;
    }
    Ok(())
}

/// `L_F(theta) = Lambda_F sum_c <ln P(x_c | x_cbar)>_D`.
///
/// The conditional of each block is normalized over its `2^|c|` completions
/// with the remaining coordinates clamped to the data row.
pub fn composite_likelihood(params: &RbmParams, data: &Dataset, family: &BlockFamily) -> Result<f64> {
    check_shapes(params, data, Some(family))?;
    let empirical = data.empirical();
    let prepared = PreparedData::new(params, &empirical);
    Ok(composite_likelihood_prepared(params, &prepared, family))
}

pub(crate) fn composite_likelihood_prepared(
    params: &RbmParams,
    data: &PreparedData<'_>,
    family: &BlockFamily,
) -> f64 {
    let m = params.m();
    let work = (data.rows.len() * m) << family.max_block_len();
    let partials = map_blocks(family.blocks(), work, |block| {
        let mut scratch = BlockScratch::new(m, block.len());
        data.rows
            .iter()
            .enumerate()
            .map(|(r, (row, q))| q * scratch.log_conditional(params, row, data.row_act(r), block))
            .sum::<f64>()
    });
    family.lambda() * partials.iter().sum::<f64>()
}

/// `L_{F_1}`, computed through single-site flips rather than the block kernel.
pub fn pseudo_likelihood(params: &RbmParams, data: &Dataset) -> Result<f64> {
    check_shapes(params, data, None)?;
    let n = params.n();
    let mut total = 0.0;
    for (row, q) in data.empirical() {
        let mut per_row = 0.0;
        for i in 0..n {
            per_row += site_log_conditional(params, &row, i);
        }
        total += q * per_row;
    }
    Ok(total / n as f64)
}

/// `ln P(x_i | x_{-i}) = -softplus(-delta)` with `delta` the log-weight gain of `x_i` over its flip.
pub(crate) fn site_log_conditional(params: &RbmParams, row: &Spins, i: usize) -> f64 {
    let delta = flip_gain(params, row, i);
    -softplus(-delta)
}

/// `ln w(x) - ln w(x with x_i flipped)`, with `ln w = sum alpha x + sum_j ln cosh a_j`.
pub(crate) fn flip_gain(params: &RbmParams, row: &Spins, i: usize) -> f64 {
    let xi = row.get(i);
    let mut delta = 2.0 * params.alpha()[i] * xi;
    for j in 0..params.m() {
        let a = params.activation_unchecked(row, j);
        let flipped = a - 2.0 * params.weight(i, j) * xi;
        delta += ln_cosh(a) - ln_cosh(flipped);
    }
    delta
}

pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Sample means `<x_i>_D`.
pub fn data_moments(data: &Dataset) -> Vec<f64> {
    data.means()
}
