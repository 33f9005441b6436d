//! Full-batch, fixed-rate gradient ascent on the composite or exact log-likelihood.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;

use crate::blocks::BlockFamily;
use crate::dataset::Dataset;
use crate::error::{check_len, Error, Result};
use crate::gradients::{cl_prepared, ml_prepared, GradientTriple};
use crate::kernel::PreparedData;
use crate::model::RbmParams;
use crate::oracle::{ExactOracle, DEFAULT_ENUMERATION_CAP};
use crate::seed::rng_from_seed;

/// Parameter magnitude beyond which a run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// Composite likelihood over all blocks of size `k`.
    Composite { k: usize },
    /// Exact log-likelihood.
    MaxLikelihood,
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Composite { k } => format!("cl{k}"),
            Method::MaxLikelihood => "ml".into(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        if lower == "ml" {
            return Ok(Method::MaxLikelihood);
        }
        lower
            .strip_prefix("cl")
            .and_then(|k| k.parse().ok())
            .map(|k| Method::Composite { k })
            .ok_or_else(|| Error::Parse(format!("unknown method {s:?}; expected ml or cl<k>")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    pub learning_rate: f64,
    pub iterations: usize,
    pub init_seed: u64,
    pub init_scale: f64,
    pub record_every: usize,
    /// Largest `n` for which the true log-likelihood is recorded.
    pub enumeration_cap: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            method: Method::Composite { k: 2 },
            learning_rate: 0.1,
            iterations: 50_000,
            init_seed: 0,
            init_scale: 0.5,
            record_every: 100,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidConfig("record_every must be at least 1".into()));
        }
        match self.method {
            Method::Composite { k } if k == 0 || k > n => Err(Error::BlockOrder { k, n }),
            Method::MaxLikelihood if n > self.enumeration_cap => Err(Error::EnumerationCap {
                n,
                cap: self.enumeration_cap,
            }),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    /// Number of updates applied before this record.
    pub iteration: usize,
    pub objective: f64,
    pub true_log_likelihood: Option<f64>,
    pub grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainTrace {
    pub method: Method,
    pub records: Vec<TraceRecord>,
    pub final_params: RbmParams,
}

impl TrainTrace {
    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("a trace has at least one record")
    }

    /// Columns `iteration,objective,true_log_likelihood,grad_norm`; the
    /// likelihood column is empty when it was not computed.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "iteration,objective,true_log_likelihood,grad_norm")?;
        for r in &self.records {
            let ll = r.true_log_likelihood.map(|v| v.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", r.iteration, r.objective, ll, r.grad_norm)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }
}

/// Entries i.i.d. uniform on `[-scale, scale]`, drawn in the order alpha, beta, w.
pub fn init_params(n: usize, m: usize, seed: u64, scale: f64) -> Result<RbmParams> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidConfig("init scale must be positive".into()));
    }
    let mut rng = rng_from_seed(seed);
    let values: Vec<f64> = (0..n + m + n * m)
        .map(|_| rng.random_range(-scale..=scale))
        .collect();
    RbmParams::from_flat(n, m, &values)
}

pub fn train(data: &Dataset, config: &TrainConfig, n: usize, m: usize) -> Result<TrainTrace> {
    let init = init_params(n, m, config.init_seed, config.init_scale)?;
    train_from(data, config, init)
}

/// Gradient ascent from explicit initial parameters.
///
/// Records are taken after update `t` whenever `t % record_every == 0`, and
/// always after the final update.
pub fn train_from(data: &Dataset, config: &TrainConfig, init: RbmParams) -> Result<TrainTrace> {
    let n = init.n();
    check_len("dataset width", n, data.width())?;
    config.validate(n)?;
    let family = match config.method {
        Method::Composite { k } => Some(BlockFamily::order(n, k)?),
        Method::MaxLikelihood => None,
    };
    let oracle = (n <= config.enumeration_cap).then(|| ExactOracle::with_cap(config.enumeration_cap));
    let empirical = data.empirical();

    let mut params = init;
    let mut records = Vec::new();
    for t in 0..=config.iterations {
        let prepared = PreparedData::new(&params, &empirical);
        let (objective, grad) = match &family {
            Some(f) => cl_prepared(&params, &prepared, f),
            None => ml_prepared(&params, &prepared),
        };
        if !objective.is_finite() {
            return Err(Error::Divergence {
                iteration: t,
                reason: format!("objective is {objective}"),
            });
        }
        if t > 0 && (t % config.record_every == 0 || t == config.iterations) {
            let true_log_likelihood = match &oracle {
                Some(o) => Some(o.log_likelihood_ml(&params, data)?),
                None => None,
            };
            records.push(TraceRecord {
                iteration: t,
                objective,
                true_log_likelihood,
                grad_norm: grad.norm(),
            });
        }
        if t == config.iterations {
            break;
        }
        ascend(&mut params, &grad, config.learning_rate);
        let max = params.max_abs();
        if max.is_nan() || max > DIVERGENCE_LIMIT {
            return Err(Error::Divergence {
                iteration: t + 1,
                reason: format!("parameter magnitude {max:e} exceeds {DIVERGENCE_LIMIT:e}"),
            });
        }
    }
    Ok(TrainTrace {
        method: config.method,
        records,
        final_params: params,
    })
}

fn ascend(params: &mut RbmParams, grad: &GradientTriple, rate: f64) {
    let (alpha, beta, w) = params.parts_mut();
    for (p, g) in alpha.iter_mut().zip(&grad.d_alpha) {
        *p += rate * g;
    }
    for (p, g) in beta.iter_mut().zip(&grad.d_beta) {
        *p += rate * g;
    }
    for (p, g) in w.iter_mut().zip(&grad.d_w) {
        *p += rate * g;
    }
}

/// Per-group mean absolute deviation between two parameter sets.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Mad {
    pub alpha: f64,
    pub beta: f64,
    pub w: f64,
}

pub fn mean_absolute_deviation(a: &RbmParams, b: &RbmParams) -> Result<Mad> {
    check_len("visible units", a.n(), b.n())?;
    check_len("hidden units", a.m(), b.m())?;
    let mad = |x: &[f64], y: &[f64]| {
        x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum::<f64>() / x.len() as f64
    };
    Ok(Mad {
        alpha: mad(a.alpha(), b.alpha()),
        beta: mad(a.beta(), b.beta()),
        w: mad(a.weights(), b.weights()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Spins;
    use crate::objectives::composite_likelihood;
    use crate::testutil::random_dataset;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn init_examples() {
        let a = init_params(5, 10, 3, 0.5).unwrap();
        assert_eq!(a, init_params(5, 10, 3, 0.5).unwrap());
        assert_ne!(a, init_params(5, 10, 4, 0.5).unwrap());
        assert!(a.max_abs() <= 0.5);
        let tiny = init_params(5, 10, 3, 1e-300).unwrap();
        assert!(tiny.max_abs() <= 1e-300);
        assert!(init_params(2, 2, 0, 0.0).is_err());
    }

    #[test]
    fn init_moments() {
        // 315 x 315 weights plus biases: just under 10^5 draws.
        let p = init_params(315, 315, 17, 0.5).unwrap();
        let draws: Vec<f64> = p.iter().collect();
        let count = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / count;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
        let pop_var = 0.25 / 3.0;
        assert!(mean.abs() < 3.0 * (pop_var / count).sqrt());
        // Var of a squared uniform deviate: E[u^4] - E[u^2]^2 = s^4/5 - s^4/9.
        let var_se = ((0.0625 / 5.0 - 0.0625 / 9.0) / count).sqrt();
        assert!((var - pop_var).abs() < 3.0 * var_se);
    }

    #[test]
    fn zero_gradient_start_is_fixed() {
        let rows = vec![Spins::from_bits(0b010, 3), Spins::from_bits(0b101, 3)];
        let d = Dataset::new(rows).unwrap();
        let init = RbmParams::zeros(3, 2).unwrap();
        for method in [Method::Composite { k: 1 }, Method::Composite { k: 2 }, Method::MaxLikelihood] {
            let config = TrainConfig {
                method,
                iterations: 200,
                record_every: 50,
                ..TrainConfig::default()
            };
            let trace = train_from(&d, &config, init.clone()).unwrap();
            // The data moments match the uniform model, so only rounding can move theta.
            assert!(trace.final_params.max_abs() < 1e-12, "{method}");
            assert!(trace.records.iter().all(|r| r.grad_norm < 1e-12));
            assert_eq!(trace.records.len(), 4);
        }
    }

    #[test]
    fn records_and_trajectory_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = random_dataset(&mut rng, 4, 15);
        let config = TrainConfig {
            method: Method::Composite { k: 2 },
            iterations: 250,
            record_every: 100,
            init_seed: 9,
            ..TrainConfig::default()
        };
        let trace = train(&d, &config, 4, 3).unwrap();
        let iters: Vec<usize> = trace.records.iter().map(|r| r.iteration).collect();
        assert_eq!(iters, vec![100, 200, 250]);
        for r in &trace.records {
            assert!(r.objective >= r.true_log_likelihood.unwrap() - 1e-10);
        }
        let family = BlockFamily::order(4, 2).unwrap();
        let final_cl = composite_likelihood(&trace.final_params, &d, &family).unwrap();
        assert_eq!(final_cl, trace.last().objective);
        assert_eq!(trace, train(&d, &config, 4, 3).unwrap());
    }

    #[test]
    fn invalid_configs_and_divergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = random_dataset(&mut rng, 3, 5);
        let base = TrainConfig {
            iterations: 10,
            ..TrainConfig::default()
        };
        let bad = |c: TrainConfig| train(&d, &c, 3, 2).is_err();
        assert!(bad(TrainConfig { method: Method::Composite { k: 4 }, ..base.clone() }));
        assert!(bad(TrainConfig { learning_rate: 0.0, ..base.clone() }));
        assert!(bad(TrainConfig { iterations: 0, ..base.clone() }));
        assert!(bad(TrainConfig { record_every: 0, ..base.clone() }));
        assert!(train(&d, &base, 4, 2).is_err());

        let huge = TrainConfig {
            learning_rate: 1e9,
            ..base
        };
        assert!(matches!(train(&d, &huge, 3, 2), Err(Error::Divergence { .. })));
    }

    #[test]
    fn method_labels_parse() {
        for m in [Method::MaxLikelihood, Method::Composite { k: 3 }] {
            assert_eq!(m.label().parse::<Method>().unwrap(), m);
        }
        assert!("cl".parse::<Method>().is_err());
        assert!("xyz".parse::<Method>().is_err());
    }

    #[test]
    fn mad_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = crate::testutil::random_params(&mut rng, 3, 4, 1.0);
        assert_eq!(mean_absolute_deviation(&a, &a).unwrap(), Mad::default());
        let shifted: Vec<f64> = a.iter().map(|v| v + 0.1).collect();
        let b = RbmParams::from_flat(3, 4, &shifted).unwrap();
        let mad = mean_absolute_deviation(&a, &b).unwrap();
        for v in [mad.alpha, mad.beta, mad.w] {
            assert!((v - 0.1).abs() < 1e-12);
        }
        assert!(mean_absolute_deviation(&a, &RbmParams::zeros(3, 3).unwrap()).is_err());
    }

    #[test]
    fn trace_csv_format() {
        let trace = TrainTrace {
            method: Method::MaxLikelihood,
            records: vec![
                TraceRecord {
                    iteration: 1,
                    objective: -1.5,
                    true_log_likelihood: Some(-1.5),
                    grad_norm: 0.25,
                },
                TraceRecord {
                    iteration: 2,
                    objective: -1.25,
                    true_log_likelihood: None,
                    grad_norm: 0.125,
                },
            ],
            final_params: RbmParams::zeros(1, 1).unwrap(),
        };
        let mut out = Vec::new();
        trace.write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "iteration,objective,true_log_likelihood,grad_norm\n1,-1.5,-1.5,0.25\n2,-1.25,,0.125\n"
        );
    }
}
