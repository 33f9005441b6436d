//! Analytic gradients of the composite likelihood and the exact log-likelihood.
//!
//! `cl_gradient` is the exact derivative of [`composite_likelihood`]:
//!
//! ```text
//! dL/d alpha_i = Lambda sum_{c contains i} (<x_i>_D - <x_i>_c)
//! dL/d beta_j  = <T_j>_D - Lambda sum_c <T_j>_c
//! dL/d w_ij    = <x_i T_j>_D - Lambda sum_c <x_i T_j>_c
//! ```
//!
//! where `<.>_c` is the expectation under the block conditional with the
//! remaining units clamped to each data row. Since `Lambda |F_k(i)| = k / n`,
//! the visible-bias component is `k / n` times the bracket
//! `<x_i>_D - |F_k(i)|^{-1} sum_{c in F_k(i)} <x_i>_c`.
//!
//! [`composite_likelihood`]: crate::objectives::composite_likelihood

use crate::blocks::{Block, BlockFamily};
use crate::dataset::Dataset;
use crate::error::{check_len, Error, Result};
use crate::kernel::{map_blocks, BlockScratch, PreparedData};
use crate::model::{ln_cosh, ln_cosh_tanh, log_sum_exp, RbmParams, Spins};
use crate::objectives::{check_shapes, flip_gain};
use crate::oracle::DEFAULT_ENUMERATION_CAP;

/// Gradient with respect to `(alpha, beta, w)`; `d_w` is row-major `n x m`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientTriple {
    pub d_alpha: Vec<f64>,
    pub d_beta: Vec<f64>,
    pub d_w: Vec<f64>,
}

impl GradientTriple {
    pub fn zeros(n: usize, m: usize) -> Self {
        GradientTriple {
            d_alpha: vec![0.0; n],
            d_beta: vec![0.0; m],
            d_w: vec![0.0; n * m],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.d_alpha
            .iter()
            .chain(&self.d_beta)
            .chain(&self.d_w)
            .copied()
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &GradientTriple) -> f64 {
        self.iter()
            .zip(other.iter())
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    fn add_scaled(&mut self, other: &GradientTriple, scale: f64) {
        for (a, b) in self.d_alpha.iter_mut().zip(&other.d_alpha) {
            *a += scale * b;
        }
        for (a, b) in self.d_beta.iter_mut().zip(&other.d_beta) {
            *a += scale * b;
        }
        for (a, b) in self.d_w.iter_mut().zip(&other.d_w) {
            *a += scale * b;
        }
    }
}

/// Expectation of `f` under the conditional of block `c` given the rest of `row`.
///
/// Direct enumeration of the `2^|c|` completions; meant for checking, not speed.
pub fn block_expectation<F>(params: &RbmParams, row: &Spins, block: &Block, mut f: F) -> Result<f64>
where
    F: FnMut(&Spins) -> f64,
{
    params.check_visible(row)?;
    block.check_within(params.n())?;
    let k = block.len();
    let mut completion = row.clone();
    let mut logw = Vec::with_capacity(1 << k);
    let mut values = Vec::with_capacity(1 << k);
    for s in 0..(1u64 << k) {
        for (b, i) in block.iter().enumerate() {
            completion.set(i, s >> b & 1 == 1);
        }
        logw.push(-params.restricted_energy(&completion, block)?);
        values.push(f(&completion));
    }
    let lse = log_sum_exp(&logw);
    Ok(logw
        .iter()
        .zip(&values)
        .map(|(lw, v)| (lw - lse).exp() * v)
        .sum())
}

/// Exact gradient of the composite likelihood for `family`.
pub fn cl_gradient(params: &RbmParams, data: &Dataset, family: &BlockFamily) -> Result<GradientTriple> {
    cl_objective_and_gradient(params, data, family).map(|(_, g)| g)
}

/// Composite likelihood value together with its gradient, sharing all block work.
pub fn cl_objective_and_gradient(
    params: &RbmParams,
    data: &Dataset,
    family: &BlockFamily,
) -> Result<(f64, GradientTriple)> {
    check_shapes(params, data, Some(family))?;
    let empirical = data.empirical();
    let prepared = PreparedData::new(params, &empirical);
    Ok(cl_prepared(params, &prepared, family))
}

struct BlockPartial {
    objective: f64,
    grad: GradientTriple,
}

pub(crate) fn cl_prepared(
    params: &RbmParams,
    data: &PreparedData<'_>,
    family: &BlockFamily,
) -> (f64, GradientTriple) {
    let (n, m) = (params.n(), params.m());
    let work = (data.rows.len() * m) << family.max_block_len();

    let partials = map_blocks(family.blocks(), work, |block| {
        let k = block.len();
        let states = 1usize << k;
        let mut scratch = BlockScratch::new(m, k);
        let mut part = BlockPartial {
            objective: 0.0,
            grad: GradientTriple::zeros(n, m),
        };
        let mut mean_t = vec![0.0; m];
        let mut mean_x = vec![0.0; k];
        let mut mean_xt = vec![0.0; k * m];
        for (r, (row, q)) in data.rows.iter().enumerate() {
            let res = scratch.evaluate(params, row, data.row_act(r), block);
            part.objective += q * res.log_cond;

            mean_t.fill(0.0);
            mean_x.fill(0.0);
            mean_xt.fill(0.0);
            for (s, &p) in scratch.probs(states).iter().enumerate() {
                let t = scratch.tanh(s);
                for (acc, &tj) in mean_t.iter_mut().zip(t) {
                    *acc += p * tj;
                }
                for b in 0..k {
                    let sign = if s >> b & 1 == 1 { p } else { -p };
                    mean_x[b] += sign;
                    for (acc, &tj) in mean_xt[b * m..(b + 1) * m].iter_mut().zip(t) {
                        *acc += sign * tj;
                    }
                }
            }

            let g = &mut part.grad;
            for (b, i) in block.iter().enumerate() {
                g.d_alpha[i] += q * (row.get(i) - mean_x[b]);
            }
            for (d, &t) in g.d_beta.iter_mut().zip(&mean_t) {
                *d -= q * t;
            }
            let mut members = block.iter().enumerate().peekable();
            for i in 0..n {
                let dw = &mut g.d_w[i * m..(i + 1) * m];
                if members.peek().map(|&(_, c)| c) == Some(i) {
                    let (b, _) = members.next().unwrap();
                    for (d, &xt) in dw.iter_mut().zip(&mean_xt[b * m..(b + 1) * m]) {
                        *d -= q * xt;
                    }
                } else {
                    let xi = q * row.get(i);
                    for (d, &t) in dw.iter_mut().zip(&mean_t) {
                        *d -= xi * t;
                    }
                }
            }
        }
        part
    });

    let lambda = family.lambda();
    let mut grad = data_statistics(params, data);
    let mut objective = 0.0;
    for part in &partials {
        objective += part.objective;
        grad.add_scaled(&part.grad, lambda);
    }
    (lambda * objective, grad)
}

/// `(0, <T_j>_D, <x_i T_j>_D)`; the visible part enters through the blocks.
fn data_statistics(params: &RbmParams, data: &PreparedData<'_>) -> GradientTriple {
    let (n, m) = (params.n(), params.m());
    let mut g = GradientTriple::zeros(n, m);
    let mut t = vec![0.0; m];
    for (r, (row, q)) in data.rows.iter().enumerate() {
        for (tj, &a) in t.iter_mut().zip(data.row_act(r)) {
            *tj = a.tanh();
        }
        for (d, &tj) in g.d_beta.iter_mut().zip(&t) {
            *d += q * tj;
        }
        for i in 0..n {
            let xi = q * row.get(i);
            for (d, &tj) in g.d_w[i * m..(i + 1) * m].iter_mut().zip(&t) {
                *d += xi * tj;
            }
        }
    }
    g
}

/// Exact gradient of the true log-likelihood.
///
/// Equivalent to [`cl_gradient`] with the single block `{0..n}`, whose block
/// expectation does not depend on the row; the model expectation is therefore
/// computed once by enumerating all `2^n` visible states.
pub fn ml_gradient(params: &RbmParams, data: &Dataset) -> Result<GradientTriple> {
    ml_objective_and_gradient(params, data).map(|(_, g)| g)
}

pub fn ml_objective_and_gradient(params: &RbmParams, data: &Dataset) -> Result<(f64, GradientTriple)> {
    check_shapes(params, data, None)?;
    if params.n() > DEFAULT_ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            n: params.n(),
            cap: DEFAULT_ENUMERATION_CAP,
        });
    }
    let empirical = data.empirical();
    let prepared = PreparedData::new(params, &empirical);
    Ok(ml_prepared(params, &prepared))
}

pub(crate) fn ml_prepared(params: &RbmParams, data: &PreparedData<'_>) -> (f64, GradientTriple) {
    let (n, m) = (params.n(), params.m());
    let states = 1u64 << n;
    let mut act = vec![0.0; m];

    let log_weight = |x: &Spins, act: &mut [f64]| -> f64 {
        params.activations_into(x, act);
        let field: f64 = (0..n).map(|i| params.alpha()[i] * x.get(i)).sum();
        field + act.iter().map(|&a| ln_cosh(a)).sum::<f64>()
    };

    let logw: Vec<f64> = (0..states)
        .map(|bits| log_weight(&Spins::from_bits(bits, n), &mut act))
        .collect();
    let log_z = log_sum_exp(&logw);

    // Model expectations, accumulated with a minus sign.
    let mut grad = GradientTriple::zeros(n, m);
    for (bits, lw) in (0..states).zip(&logw) {
        let p = (lw - log_z).exp();
        let x = Spins::from_bits(bits, n);
        params.activations_into(&x, &mut act);
        for a in act.iter_mut() {
            *a = ln_cosh_tanh(*a).1;
        }
        for i in 0..n {
            let px = p * x.get(i);
            grad.d_alpha[i] -= px;
            for (d, &t) in grad.d_w[i * m..(i + 1) * m].iter_mut().zip(&act) {
                *d -= px * t;
            }
        }
        for (d, &t) in grad.d_beta.iter_mut().zip(&act) {
            *d -= p * t;
        }
    }

    let mut objective = 0.0;
    let data_part = data_statistics(params, data);
    for (r, (row, q)) in data.rows.iter().enumerate() {
        let field: f64 = (0..n).map(|i| params.alpha()[i] * row.get(i)).sum();
        objective += q * (field + data.row_act(r).iter().map(|&a| ln_cosh(a)).sum::<f64>());
        for i in 0..n {
            grad.d_alpha[i] += q * row.get(i);
        }
    }
    grad.add_scaled(&data_part, 1.0);
    (objective - log_z, grad)
}

/// Gradient of the pseudo-likelihood, derived site by site.
///
/// With `delta_i(x) = ln w(x) - ln w(x^(i))` for the single flip `x^(i)`,
/// `d ln P(x_i | x_-i) = sigma(-delta_i) d delta_i`. This path shares nothing
/// with the block kernel and serves as a cross-check of `cl_gradient` on `F_1`.
pub fn pl_gradient(params: &RbmParams, data: &Dataset) -> Result<GradientTriple> {
    check_shapes(params, data, None)?;
    let (n, m) = (params.n(), params.m());
    let mut grad = GradientTriple::zeros(n, m);
    for (row, q) in data.empirical() {
        let t_row: Vec<f64> = (0..m)
            .map(|j| params.activation_unchecked(&row, j).tanh())
            .collect();
        for i in 0..n {
            let delta = flip_gain(params, &row, i);
            let weight = q / (1.0 + delta.exp()) / n as f64;
            let mut flipped = row.clone();
            flipped.flip(i);
            let t_flip: Vec<f64> = (0..m)
                .map(|j| params.activation_unchecked(&flipped, j).tanh())
                .collect();
            grad.d_alpha[i] += weight * 2.0 * row.get(i);
            for j in 0..m {
                grad.d_beta[j] += weight * (t_row[j] - t_flip[j]);
                for l in 0..n {
                    grad.d_w[l * m + j] +=
                        weight * (row.get(l) * t_row[j] - flipped.get(l) * t_flip[j]);
                }
            }
        }
    }
    Ok(grad)
}

/// Checks a gradient's shape against `params`.
pub fn check_gradient_shape(params: &RbmParams, grad: &GradientTriple) -> Result<()> {
    check_len("d_alpha", params.n(), grad.d_alpha.len())?;
    check_len("d_beta", params.m(), grad.d_beta.len())?;
    check_len("d_w", params.n() * params.m(), grad.d_w.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::composite_likelihood;
    use crate::oracle::ExactOracle;
    use crate::testutil::{perturbed, random_dataset, random_params};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fd_gradient(params: &RbmParams, h: f64, f: impl Fn(&RbmParams) -> f64) -> Vec<f64> {
        (0..params.num_params())
            .map(|idx| (f(&perturbed(params, idx, h)) - f(&perturbed(params, idx, -h))) / (2.0 * h))
            .collect()
    }

    fn assert_close_rel(analytic: &GradientTriple, numeric: &[f64], tol: f64) {
        let scale = numeric.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-3);
        for (a, b) in analytic.iter().zip(numeric) {
            assert!((a - b).abs() <= tol * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn block_expectation_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let zero = RbmParams::zeros(4, 2).unwrap();
        let row = Spins::from_bits(0b1010, 4);
        let c = Block::new(vec![1, 2]).unwrap();
        let e = block_expectation(&zero, &row, &c, |x| x.get(1)).unwrap();
        assert!(e.abs() < 1e-15);
        let p = random_params(&mut rng, 4, 2, 1.0);
        let e = block_expectation(&p, &row, &c, |x| x.get(3)).unwrap();
        assert!((e - row.get(3)).abs() < 1e-15);
        assert!(block_expectation(&p, &row, &Block::new(vec![7]).unwrap(), |_| 0.0).is_err());
    }

    #[test]
    fn block_expectation_matches_naive_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_params(&mut rng, 4, 2, 0.5);
        let row = Spins::from_bits(rng.random::<u64>(), 4);
        let c = Block::new(vec![0, 2, 3]).unwrap();
        for i in 0..4 {
            for j in 0..2 {
                let stat = |x: &Spins| x.get(i) * p.tanh_term(x, j).unwrap();
                let got = block_expectation(&p, &row, &c, stat).unwrap();
                // Unstabilized ratio of sums.
                let (mut num, mut den) = (0.0, 0.0);
                for s in 0..8u64 {
                    let mut x = row.clone();
                    for (b, idx) in c.iter().enumerate() {
                        x.set(idx, s >> b & 1 == 1);
                    }
                    let mut lw: f64 = c.iter().map(|idx| p.alpha()[idx] * x.get(idx)).sum();
                    for jj in 0..2 {
                        let a: f64 = p.beta()[jj] + (0..4).map(|l| p.weight(l, jj) * x.get(l)).sum::<f64>();
                        lw += a.cosh().ln();
                    }
                    let wgt = lw.exp();
                    num += wgt * stat(&x);
                    den += wgt;
                }
                assert!((got - num / den).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn block_expectation_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p = random_params(&mut rng, 5, 3, 2.0);
            let row = Spins::from_bits(rng.random::<u64>(), 5);
            let c = Block::new(vec![1, 4]).unwrap();
            let stat = |x: &Spins| x.get(1) * 3.0 + x.get(4);
            let e = block_expectation(&p, &row, &c, stat).unwrap();
            assert!((-4.0..=4.0).contains(&e));
        }
    }

    #[test]
    fn zero_params_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = RbmParams::zeros(5, 3).unwrap();
        let d = random_dataset(&mut rng, 5, 9);
        let means = d.means();
        for k in 1..=5 {
            let g = cl_gradient(&p, &d, &BlockFamily::order(5, k).unwrap()).unwrap();
            for (da, mean) in g.d_alpha.iter().zip(&means) {
                assert!((da - k as f64 / 5.0 * mean).abs() < 1e-14);
            }
            assert!(g.d_beta.iter().chain(&g.d_w).all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn cl_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-5;
        for k in 1..=4 {
            let p = random_params(&mut rng, 4, 3, 1.0);
            let d = random_dataset(&mut rng, 4, 6);
            let f = BlockFamily::order(4, k).unwrap();
            let g = cl_gradient(&p, &d, &f).unwrap();
            let fd = fd_gradient(&p, h, |q| composite_likelihood(q, &d, &f).unwrap());
            assert_close_rel(&g, &fd, 1e-6);
        }
    }

    #[test]
    fn objective_from_gradient_path_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = random_params(&mut rng, 5, 4, 1.0);
        let d = random_dataset(&mut rng, 5, 10);
        for k in 1..=5 {
            let f = BlockFamily::order(5, k).unwrap();
            let (v, _) = cl_objective_and_gradient(&p, &d, &f).unwrap();
            assert!((v - composite_likelihood(&p, &d, &f).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn ml_gradient_matches_full_block_and_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let oracle = ExactOracle::default();
        let p = random_params(&mut rng, 5, 3, 1.0);
        let d = random_dataset(&mut rng, 5, 8);
        let (v, g) = ml_objective_and_gradient(&p, &d).unwrap();
        assert!((v - oracle.log_likelihood_ml(&p, &d).unwrap()).abs() < 1e-12);
        let full = cl_gradient(&p, &d, &BlockFamily::order(5, 5).unwrap()).unwrap();
        assert!(g.max_abs_diff(&full) < 1e-12);
        let fd = fd_gradient(&p, 1e-5, |q| oracle.log_likelihood_ml(q, &d).unwrap());
        assert_close_rel(&g, &fd, 1e-6);
    }

    #[test]
    fn ml_gradient_zero_at_symmetric_data() {
        let rows = vec![Spins::from_bits(0b101, 3), Spins::from_bits(0b010, 3)];
        let d = Dataset::new(rows).unwrap();
        let g = ml_gradient(&RbmParams::zeros(3, 2).unwrap(), &d).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn pl_gradient_matches_first_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 1..=6 {
            let p = random_params(&mut rng, n, 3, 1.5);
            let d = random_dataset(&mut rng, n, 7);
            let a = pl_gradient(&p, &d).unwrap();
            let b = cl_gradient(&p, &d, &BlockFamily::order(n, 1).unwrap()).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-12);
        }
    }

    #[test]
    fn gradient_shapes() {
        let p = RbmParams::zeros(3, 2).unwrap();
        let g = GradientTriple::zeros(3, 2);
        assert!(check_gradient_shape(&p, &g).is_ok());
        assert!(check_gradient_shape(&p, &GradientTriple::zeros(2, 3)).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = random_dataset(&mut rng, 4, 2);
        assert!(cl_gradient(&p, &d, &BlockFamily::order(3, 1).unwrap()).is_err());
        assert!(ml_gradient(&p, &d).is_err());
    }
}
