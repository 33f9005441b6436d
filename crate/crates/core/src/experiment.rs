//! Multi-trial synthetic experiment: sample data from a fixed generator RBM,
//! fit a learner with each method from a shared initialization, and summarize.
//!
//! Seeds: trial `t` uses `split_seed(master, t)`. Within a trial, the dataset
//! seed is `split_seed(trial, 0)` and the initialization seed is
//! `split_seed(trial, 1)`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::RbmParams;
use crate::sampler::{generate_dataset, generate_exact, SamplerConfig};
use crate::seed::split_seed;
use crate::trainer::{init_params, mean_absolute_deviation, train_from, Mad, Method, TrainConfig, TrainTrace};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataMode {
    /// Thinned block Gibbs chain.
    Mcmc,
    /// I.i.d. draws from the enumerated marginal.
    Exact,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReproduceConfig {
    pub n: usize,
    pub m_learner: usize,
    pub m_generator: usize,
    pub generator_alpha: f64,
    pub generator_beta: f64,
    pub generator_w: f64,
    pub num_samples: usize,
    pub learning_rate: f64,
    pub iterations: usize,
    pub orders: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    pub data_mode: DataMode,
    pub burn_in: usize,
    pub thinning: usize,
    pub record_every: usize,
    pub init_scale: f64,
    /// Reuse the first trial's dataset for every trial.
    pub share_dataset: bool,
    /// Worker threads for trials; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl Default for ReproduceConfig {
    fn default() -> Self {
        ReproduceConfig {
            n: 5,
            m_learner: 10,
            m_generator: 17,
            generator_alpha: 0.1,
            generator_beta: -0.1,
            generator_w: 0.2,
            num_samples: 70,
            learning_rate: 0.1,
            iterations: 50_000,
            orders: vec![1, 2, 3],
            trials: 30,
            master_seed: 1,
            data_mode: DataMode::Mcmc,
            burn_in: 10_000,
            thinning: 100,
            record_every: 100,
            init_scale: 0.5,
            share_dataset: false,
            jobs: None,
        }
    }
}

impl ReproduceConfig {
    pub fn generator(&self) -> Result<RbmParams> {
        RbmParams::homogeneous(
            self.n,
            self.m_generator,
            self.generator_alpha,
            self.generator_beta,
            self.generator_w,
        )
    }

    /// ML first, then the composite orders as configured.
    pub fn methods(&self) -> Vec<Method> {
        std::iter::once(Method::MaxLikelihood)
            .chain(self.orders.iter().map(|&k| Method::Composite { k }))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.num_samples == 0 {
            return Err(Error::InvalidConfig("num_samples must be at least 1".into()));
        }
        if let Some(&k) = self.orders.iter().find(|&&k| k == 0 || k > self.n) {
            return Err(Error::BlockOrder { k, n: self.n });
        }
        if self.jobs == Some(0) {
            return Err(Error::InvalidConfig("jobs must be at least 1".into()));
        }
        Ok(())
    }

    fn train_config(&self, method: Method, init_seed: u64) -> TrainConfig {
        TrainConfig {
            method,
            learning_rate: self.learning_rate,
            iterations: self.iterations,
            init_seed,
            init_scale: self.init_scale,
            record_every: self.record_every,
            ..TrainConfig::default()
        }
    }

    fn dataset(&self, generator: &RbmParams, seed: u64) -> Result<Dataset> {
        match self.data_mode {
            DataMode::Exact => generate_exact(generator, self.num_samples, seed),
            DataMode::Mcmc => generate_dataset(
                generator,
                &SamplerConfig {
                    seed,
                    burn_in: self.burn_in,
                    thinning: self.thinning,
                    num_samples: self.num_samples,
                },
            ),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrialResult {
    pub trial: usize,
    pub data: Dataset,
    /// One trace per method, in [`ReproduceConfig::methods`] order.
    pub traces: Vec<TrainTrace>,
}

/// Runs trial `trial` of the experiment.
pub fn run_trial(config: &ReproduceConfig, trial: usize) -> Result<TrialResult> {
    let generator = config.generator()?;
    let trial_seed = split_seed(config.master_seed, trial as u64);
    let data_seed = if config.share_dataset {
        split_seed(split_seed(config.master_seed, 0), 0)
    } else {
        split_seed(trial_seed, 0)
    };
    let data = config.dataset(&generator, data_seed)?;
    let init_seed = split_seed(trial_seed, 1);
    let init = init_params(config.n, config.m_learner, init_seed, config.init_scale)?;
    let traces = config
        .methods()
        .into_iter()
        .map(|method| train_from(&data, &config.train_config(method, init_seed), init.clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialResult { trial, data, traces })
}

#[derive(Clone, Debug)]
pub struct ReproduceReport {
    pub methods: Vec<Method>,
    pub iterations: Vec<usize>,
    /// `[method][record]` trial-mean of each method's own objective.
    pub mean_objective: Vec<Vec<f64>>,
    /// `[method][record]` trial-mean of the true log-likelihood.
    pub mean_true_log_likelihood: Vec<Vec<f64>>,
    /// `(k, MAD against the ML estimate)` averaged over trials.
    pub mad: Vec<(usize, Mad)>,
    pub trials: Vec<TrialResult>,
}

impl ReproduceReport {
    pub fn final_true_log_likelihood(&self, method: Method) -> Option<f64> {
        let idx = self.methods.iter().position(|&m| m == method)?;
        self.mean_true_log_likelihood[idx].last().copied()
    }

    pub fn final_objective(&self, method: Method) -> Option<f64> {
        let idx = self.methods.iter().position(|&m| m == method)?;
        self.mean_objective[idx].last().copied()
    }

    pub fn mad_for(&self, k: usize) -> Option<Mad> {
        self.mad.iter().find(|(kk, _)| *kk == k).map(|(_, m)| *m)
    }

    fn series_csv(&self, series: &[Vec<f64>]) -> String {
        let mut out = String::from("iteration");
        for m in &self.methods {
            write!(out, ",{}", m.label()).unwrap();
        }
        out.push('\n');
        for (r, it) in self.iterations.iter().enumerate() {
            write!(out, "{it}").unwrap();
            for s in series {
                write!(out, ",{}", s[r]).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Mean composite likelihood (the ML column holds the log-likelihood) per recorded iteration.
    pub fn objective_csv(&self) -> String {
        self.series_csv(&self.mean_objective)
    }

    /// Mean true log-likelihood of each method's parameters per recorded iteration.
    pub fn true_log_likelihood_csv(&self) -> String {
        self.series_csv(&self.mean_true_log_likelihood)
    }

    pub fn mad_csv(&self) -> String {
        let mut out = String::from("k,alpha,beta,w\n");
        for (k, mad) in &self.mad {
            writeln!(out, "{k},{},{},{}", mad.alpha, mad.beta, mad.w).unwrap();
        }
        out
    }

    pub fn final_log_likelihood_csv(&self) -> String {
        let mut out = String::from("method,mean_true_log_likelihood\n");
        for (m, series) in self.methods.iter().zip(&self.mean_true_log_likelihood) {
            writeln!(out, "{},{}", m.label(), series.last().copied().unwrap_or(f64::NAN)).unwrap();
        }
        out
    }

    pub const FILES: [&'static str; 4] = [
        "composite_likelihood.csv",
        "true_log_likelihood.csv",
        "mad.csv",
        "final_log_likelihood.csv",
    ];

    /// Writes the four summary CSVs into `dir`, creating it if needed.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let contents = [
            self.objective_csv(),
            self.true_log_likelihood_csv(),
            self.mad_csv(),
            self.final_log_likelihood_csv(),
        ];
        let mut written = Vec::new();
        for (name, text) in Self::FILES.iter().zip(contents) {
            let path = dir.join(name);
            std::fs::write(&path, text)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Runs every trial and averages. Results do not depend on `jobs`.
pub fn reproduce(config: &ReproduceConfig) -> Result<ReproduceReport> {
    config.validate()?;
    let run_all = || -> Result<Vec<TrialResult>> {
        (0..config.trials)
            .into_par_iter()
            .map(|t| run_trial(config, t))
            .collect()
    };
    let trials = match config.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .install(run_all)?,
        None => run_all()?,
    };
    summarize(config, trials)
}

fn summarize(config: &ReproduceConfig, trials: Vec<TrialResult>) -> Result<ReproduceReport> {
    let methods = config.methods();
    let first = &trials[0].traces[0];
    let iterations: Vec<usize> = first.records.iter().map(|r| r.iteration).collect();
    let count = trials.len() as f64;

    let mut mean_objective = vec![vec![0.0; iterations.len()]; methods.len()];
    let mut mean_true = vec![vec![0.0; iterations.len()]; methods.len()];
    for trial in &trials {
        for (mi, trace) in trial.traces.iter().enumerate() {
            for (r, rec) in trace.records.iter().enumerate() {
                mean_objective[mi][r] += rec.objective / count;
                mean_true[mi][r] += rec.true_log_likelihood.unwrap_or(f64::NAN) / count;
            }
        }
    }

    let mut mad = Vec::new();
    for (mi, method) in methods.iter().enumerate().skip(1) {
        let Method::Composite { k } = *method else { continue };
        let mut acc = Mad::default();
        for trial in &trials {
            let d = mean_absolute_deviation(&trial.traces[mi].final_params, &trial.traces[0].final_params)?;
            acc.alpha += d.alpha / count;
            acc.beta += d.beta / count;
            acc.w += d.w / count;
        }
        mad.push((k, acc));
    }

    Ok(ReproduceReport {
        methods,
        iterations,
        mean_objective,
        mean_true_log_likelihood: mean_true,
        mad,
        trials,
    })
}
