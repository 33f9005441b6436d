//! Binary RBM parameters and energy quantities.
//!
//! All units take values in {-1, +1}. Hidden units are summed out analytically,
//! which turns each of them into a `ln cosh` term of its activation
//! `a_j(x) = beta_j + sum_i w_ij x_i`. Those terms are always carried in the log
//! domain so that large weights cannot overflow.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blocks::Block;
use crate::error::{check_len, Error, Result};

const LN_2: f64 = std::f64::consts::LN_2;

/// `ln cosh(a)` evaluated as `|a| - ln 2 + ln(1 + e^{-2|a|})`.
#[inline]
pub fn ln_cosh(a: f64) -> f64 {
    let abs = a.abs();
    abs - LN_2 + (-2.0 * abs).exp().ln_1p()
}

/// `(ln cosh(a), tanh(a))` sharing a single exponential.
#[inline]
pub fn ln_cosh_tanh(a: f64) -> (f64, f64) {
    let abs = a.abs();
    let e = (-2.0 * abs).exp();
    let t = (1.0 - e) / (1.0 + e);
    (abs - LN_2 + e.ln_1p(), if a < 0.0 { -t } else { t })
}

/// Max-shifted `ln sum_i e^{v_i}`; `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// A configuration of +/-1 units. Used for both visible and hidden layers.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Spins(Vec<i8>);

pub type VisibleState = Spins;
pub type HiddenState = Spins;

impl Spins {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if let Some(&bad) = values.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::InvalidSpin(bad as i64));
        }
        Ok(Spins(values))
    }

    pub fn from_i64(values: &[i64]) -> Result<Self> {
        values
            .iter()
            .map(|&v| match v {
                1 => Ok(1),
                -1 => Ok(-1),
                other => Err(Error::InvalidSpin(other)),
            })
            .collect::<Result<Vec<i8>>>()
            .map(Spins)
    }

    /// All units set to `value`, which must be +1 or -1.
    pub fn filled(len: usize, value: i8) -> Result<Self> {
        Spins::new(vec![value; len])
    }

    /// Decodes the low `len` bits of `bits`; bit `i` set means unit `i` is +1.
    pub fn from_bits(bits: u64, len: usize) -> Self {
        Spins((0..len).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect())
    }

    pub fn to_bits(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .fold(0u64, |acc, (i, _)| acc | 1 << i)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[i8] {
        &self.0
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.0[i] as f64
    }

    pub fn set(&mut self, i: usize, positive: bool) {
        self.0[i] = if positive { 1 } else { -1 };
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = -self.0[i];
    }

    pub fn negated(&self) -> Self {
        Spins(self.0.iter().map(|v| -v).collect())
    }
}

impl fmt::Debug for Spins {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("]")
    }
}

/// Parameters of an RBM with `n` visible and `m` hidden units.
///
/// Weights are stored row-major: `w[i * m + j]` connects visible `i` to hidden `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct RbmParams {
    n: usize,
    m: usize,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    w: Vec<f64>,
}

impl RbmParams {
    pub fn new(n: usize, m: usize, alpha: Vec<f64>, beta: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidParams(format!(
                "need at least one visible and one hidden unit, got n = {n}, m = {m}"
            )));
        }
        check_len("alpha", n, alpha.len())?;
        check_len("beta", m, beta.len())?;
        check_len("w", n * m, w.len())?;
        if alpha.iter().chain(&beta).chain(&w).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        Ok(RbmParams {
            n,
            m,
            alpha,
            beta,
            w,
        })
    }

    pub fn zeros(n: usize, m: usize) -> Result<Self> {
        RbmParams::new(n, m, vec![0.0; n], vec![0.0; m], vec![0.0; n * m])
    }

    /// Every visible bias, hidden bias and weight set to the same value.
    pub fn homogeneous(n: usize, m: usize, alpha: f64, beta: f64, w: f64) -> Result<Self> {
        RbmParams::new(n, m, vec![alpha; n], vec![beta; m], vec![w; n * m])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Row-major `n x m` weights.
    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.m + j]
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut [f64], &mut [f64], &mut [f64]) {
        (&mut self.alpha, &mut self.beta, &mut self.w)
    }

    /// Iterates over every parameter in the order alpha, beta, w.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.alpha.iter().chain(&self.beta).chain(&self.w).copied()
    }

    /// Rebuilds parameters from the flat order used by [`RbmParams::iter`].
    pub fn from_flat(n: usize, m: usize, values: &[f64]) -> Result<Self> {
        check_len("flat parameters", n + m + n * m, values.len())?;
        let (alpha, rest) = values.split_at(n);
        let (beta, w) = rest.split_at(m);
        RbmParams::new(n, m, alpha.to_vec(), beta.to_vec(), w.to_vec())
    }

    pub fn num_params(&self) -> usize {
        self.n + self.m + self.n * self.m
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub(crate) fn check_visible(&self, x: &Spins) -> Result<()> {
        check_len("visible state", self.n, x.len())
    }

    fn check_hidden_index(&self, j: usize) -> Result<()> {
        if j < self.m {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                what: "hidden",
                index: j,
                len: self.m,
            })
        }
    }

    /// `a_j = beta_j + sum_i w_ij x_i`. No shape checks.
    #[inline]
    pub(crate) fn activation_unchecked(&self, x: &Spins, j: usize) -> f64 {
        let mut a = self.beta[j];
        for i in 0..self.n {
            a += self.w[i * self.m + j] * x.get(i);
        }
        a
    }

    /// Writes all hidden activations for `x` into `out` (length `m`).
    pub(crate) fn activations_into(&self, x: &Spins, out: &mut [f64]) {
        out.copy_from_slice(&self.beta);
        for i in 0..self.n {
            let xi = x.get(i);
            let row = &self.w[i * self.m..(i + 1) * self.m];
            for (o, &wij) in out.iter_mut().zip(row) {
                *o += wij * xi;
            }
        }
    }

    pub fn hidden_activations(&self, x: &Spins) -> Result<Vec<f64>> {
        self.check_visible(x)?;
        let mut out = vec![0.0; self.m];
        self.activations_into(x, &mut out);
        Ok(out)
    }

    /// `b_i = alpha_i + sum_j w_ij h_j`.
    pub fn visible_activations(&self, h: &Spins) -> Result<Vec<f64>> {
        check_len("hidden state", self.m, h.len())?;
        Ok((0..self.n)
            .map(|i| {
                let row = &self.w[i * self.m..(i + 1) * self.m];
                self.alpha[i] + row.iter().enumerate().map(|(j, w)| w * h.get(j)).sum::<f64>()
            })
            .collect())
    }

    /// Unnormalized joint log-weight `sum alpha x + sum beta h + sum w x h`.
    pub fn joint_log_weight(&self, x: &Spins, h: &Spins) -> Result<f64> {
        self.check_visible(x)?;
        check_len("hidden state", self.m, h.len())?;
        let mut total = 0.0;
        for i in 0..self.n {
            total += self.alpha[i] * x.get(i);
        }
        for j in 0..self.m {
            total += self.beta[j] * h.get(j);
        }
        for i in 0..self.n {
            let xi = x.get(i);
            for j in 0..self.m {
                total += self.w[i * self.m + j] * xi * h.get(j);
            }
        }
        Ok(total)
    }

    /// `ln C_j(x) = ln cosh(a_j(x))`.
    pub fn cosh_term(&self, x: &Spins, j: usize) -> Result<f64> {
        self.check_visible(x)?;
        self.check_hidden_index(j)?;
        Ok(ln_cosh(self.activation_unchecked(x, j)))
    }

    /// `T_j(x) = tanh(a_j(x))`.
    pub fn tanh_term(&self, x: &Spins, j: usize) -> Result<f64> {
        self.check_visible(x)?;
        self.check_hidden_index(j)?;
        Ok(self.activation_unchecked(x, j).tanh())
    }

    fn hidden_log_weight(&self, x: &Spins) -> f64 {
        (0..self.m)
            .map(|j| ln_cosh(self.activation_unchecked(x, j)))
            .sum()
    }

    /// `E(x) = -sum_i alpha_i x_i - sum_j ln cosh(a_j(x))`.
    pub fn marginal_energy(&self, x: &Spins) -> Result<f64> {
        self.check_visible(x)?;
        let field: f64 = (0..self.n).map(|i| self.alpha[i] * x.get(i)).sum();
        Ok(-field - self.hidden_log_weight(x))
    }

    /// Marginal energy with the visible-bias sum restricted to `block`.
    pub fn restricted_energy(&self, x: &Spins, block: &Block) -> Result<f64> {
        self.check_visible(x)?;
        block.check_within(self.n)?;
        let field: f64 = block.iter().map(|i| self.alpha[i] * x.get(i)).sum();
        Ok(-field - self.hidden_log_weight(x))
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDoc {
            n: self.n,
            m: self.m,
            alpha: self.alpha.clone(),
            beta: self.beta.clone(),
            w: self.w.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("model document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        RbmParams::new(doc.n, doc.m, doc.alpha, doc.beta, doc.w)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        RbmParams::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    n: usize,
    m: usize,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// Row-major `n x m`.
    w: Vec<f64>,
}
