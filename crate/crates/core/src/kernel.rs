//! Per-block evaluation shared by the composite likelihood and its gradient.
//!
//! For one data row and one block `c`, every one of the `2^|c|` completions of
//! the block is scored once; the objective term and all gradient statistics are
//! read off those scores.

use crate::blocks::Block;
use crate::model::{ln_cosh, ln_cosh_tanh, log_sum_exp, RbmParams, Spins};

/// Scratch buffers for one block size; reused across rows.
pub(crate) struct BlockScratch {
    m: usize,
    base: Vec<f64>,
    /// `2^k x m` activations, then overwritten with tanh values.
    act: Vec<f64>,
    /// `2^k` unnormalized block log-weights, then overwritten with probabilities.
    logw: Vec<f64>,
}

pub(crate) struct BlockResult {
    /// `ln P(x_c | x_cbar)` of the clamped row itself.
    pub log_cond: f64,
}

impl BlockScratch {
    pub(crate) fn new(m: usize, max_block: usize) -> Self {
        let states = 1usize << max_block;
        BlockScratch {
            m,
            base: vec![0.0; m],
            act: vec![0.0; states * m],
            logw: vec![0.0; states],
        }
    }

    #[inline]
    fn fill_activations(&mut self, params: &RbmParams, row: &Spins, row_act: &[f64], block: &Block) {
        let m = self.m;
        let members = block.members();
        let k = members.len();
        self.base.copy_from_slice(row_act);
        // Reset every block unit to -1.
        for &i in members {
            let shift = row.get(i) + 1.0;
            for j in 0..m {
                self.base[j] -= params.weight(i, j) * shift;
            }
        }
        for s in 0..(1usize << k) {
            let out = &mut self.act[s * m..(s + 1) * m];
            out.copy_from_slice(&self.base);
            for (b, &i) in members.iter().enumerate() {
                if s >> b & 1 == 1 {
                    let wrow = &params.weights()[i * m..(i + 1) * m];
                    for (o, &w) in out.iter_mut().zip(wrow) {
                        *o += 2.0 * w;
                    }
                }
            }
        }
    }

    #[inline]
    fn row_state(row: &Spins, block: &Block) -> usize {
        block
            .iter()
            .enumerate()
            .filter(|&(_, i)| row.get(i) > 0.0)
            .fold(0, |acc, (b, _)| acc | 1 << b)
    }

    /// Objective term only.
    pub(crate) fn log_conditional(
        &mut self,
        params: &RbmParams,
        row: &Spins,
        row_act: &[f64],
        block: &Block,
    ) -> f64 {
        self.fill_activations(params, row, row_act, block);
        let m = self.m;
        let members = block.members();
        let states = 1usize << members.len();
        for s in 0..states {
            let mut lw: f64 = members
                .iter()
                .enumerate()
                .map(|(b, &i)| if s >> b & 1 == 1 { params.alpha()[i] } else { -params.alpha()[i] })
                .sum();
            for &a in &self.act[s * m..(s + 1) * m] {
                lw += ln_cosh(a);
            }
            self.logw[s] = lw;
        }
        let lse = log_sum_exp(&self.logw[..states]);
        self.logw[Self::row_state(row, block)] - lse
    }

    /// Scores the block and leaves conditional probabilities in `probs()` and
    /// tanh values of every completion in `tanh(s)`.
    pub(crate) fn evaluate(
        &mut self,
        params: &RbmParams,
        row: &Spins,
        row_act: &[f64],
        block: &Block,
    ) -> BlockResult {
        self.fill_activations(params, row, row_act, block);
        let m = self.m;
        let members = block.members();
        let states = 1usize << members.len();
        for s in 0..states {
            let mut lw: f64 = members
                .iter()
                .enumerate()
                .map(|(b, &i)| if s >> b & 1 == 1 { params.alpha()[i] } else { -params.alpha()[i] })
                .sum();
            for a in &mut self.act[s * m..(s + 1) * m] {
                let (lc, t) = ln_cosh_tanh(*a);
                lw += lc;
                *a = t;
            }
            self.logw[s] = lw;
        }
        let lse = log_sum_exp(&self.logw[..states]);
        let log_cond = self.logw[Self::row_state(row, block)] - lse;
        for lw in &mut self.logw[..states] {
            *lw = (*lw - lse).exp();
        }
        BlockResult { log_cond }
    }

    pub(crate) fn probs(&self, states: usize) -> &[f64] {
        &self.logw[..states]
    }

    pub(crate) fn tanh(&self, s: usize) -> &[f64] {
        &self.act[s * self.m..(s + 1) * self.m]
    }
}

/// Distinct data rows with their probabilities and hidden activations.
pub(crate) struct PreparedData<'a> {
    pub rows: &'a [(Spins, f64)],
    /// Row-major `rows.len() x m`.
    pub act: Vec<f64>,
    m: usize,
}

impl<'a> PreparedData<'a> {
    pub(crate) fn new(params: &RbmParams, empirical: &'a [(Spins, f64)]) -> Self {
        let m = params.m();
        let mut act = vec![0.0; empirical.len() * m];
        for (r, (row, _)) in empirical.iter().enumerate() {
            params.activations_into(row, &mut act[r * m..(r + 1) * m]);
        }
        PreparedData {
            rows: empirical,
            act,
            m,
        }
    }

    pub(crate) fn row_act(&self, r: usize) -> &[f64] {
        &self.act[r * self.m..(r + 1) * self.m]
    }
}

/// Below this many inner evaluations blocks are processed on the calling thread.
const PARALLEL_WORK: usize = 1 << 18;

/// Maps every block to a partial result, in block order.
///
/// Large families are spread over the rayon pool; the output order (and hence
/// any subsequent ordered reduction) is the same either way.
pub(crate) fn map_blocks<T, F>(blocks: &[Block], work_per_block: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&Block) -> T + Sync,
{
    use rayon::prelude::*;
    if blocks.len() > 1 && blocks.len().saturating_mul(work_per_block) >= PARALLEL_WORK {
        blocks.par_iter().map(&f).collect()
    } else {
        blocks.iter().map(f).collect()
    }
}
