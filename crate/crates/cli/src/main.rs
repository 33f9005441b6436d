use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use rbmcl_core::experiment::{reproduce, DataMode, ReproduceConfig};
use rbmcl_core::{generate_dataset, generate_exact, train, Dataset, Method, RbmParams, SamplerConfig, TrainConfig};

/// Composite likelihood training for binary restricted Boltzmann machines.
#[derive(Parser, Debug)]
#[command(name = "rbmcl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a +/-1 dataset from a homogeneous generator RBM.
    Generate(GenerateArgs),
    /// Fit an RBM to a dataset by composite or exact likelihood ascent.
    Train(TrainArgs),
    /// Run the multi-trial synthetic experiment and write summary CSVs.
    Reproduce(ReproduceArgs),
}

#[derive(Args, Debug)]
struct GeneratorArgs {
    /// Visible units.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..=20))]
    n: u64,
    /// Hidden units of the generator.
    #[arg(long, default_value_t = 17)]
    m_generator: usize,
    /// Generator visible bias, shared by all units.
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    alpha: f64,
    /// Generator hidden bias, shared by all units.
    #[arg(long, default_value_t = -0.1, allow_negative_numbers = true)]
    beta: f64,
    /// Generator coupling, shared by all pairs.
    #[arg(long, default_value_t = 0.2, allow_negative_numbers = true)]
    weight: f64,
}

#[derive(Args, Debug)]
struct ModeArgs {
    /// Draw i.i.d. rows from the enumerated marginal.
    #[arg(long, conflicts_with = "mcmc")]
    exact: bool,
    /// Draw rows from a thinned block Gibbs chain (default).
    #[arg(long)]
    mcmc: bool,
}

impl ModeArgs {
    fn mode(&self) -> DataMode {
        if self.exact {
            DataMode::Exact
        } else {
            DataMode::Mcmc
        }
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    generator: GeneratorArgs,
    /// Rows to draw [default: 70].
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    num_samples: Option<u64>,
    /// Sampler seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    mode: ModeArgs,
    /// Gibbs sweeps before the first kept row [default: 10000].
    #[arg(long)]
    burn_in: Option<usize>,
    /// Gibbs sweeps between kept rows [default: 100].
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    thinning: Option<u64>,
    /// TOML file with sampler settings (seed, burn_in, thinning, num_samples).
    /// Flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Headerless CSV of +/-1 rows.
    #[arg(long)]
    data: PathBuf,
    /// Hidden units of the learner.
    #[arg(long, default_value_t = 10)]
    m_learner: usize,
    /// Composite likelihood block size [default: 2].
    #[arg(long, conflicts_with = "ml")]
    k: Option<usize>,
    /// Train on the exact log-likelihood instead.
    #[arg(long)]
    ml: bool,
    /// Learning rate.
    #[arg(long, default_value_t = 0.1)]
    rate: f64,
    #[arg(long, default_value_t = 50_000)]
    iterations: usize,
    /// Initialization seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial parameters are uniform on [-s, s].
    #[arg(long, default_value_t = 0.5)]
    init_scale: f64,
    #[arg(long, default_value_t = 100)]
    record_every: usize,
    /// Directory for trace.csv and model.json.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    #[command(flatten)]
    generator: GeneratorArgs,
    /// Hidden units of the learner.
    #[arg(long, default_value_t = 10)]
    m_learner: usize,
    /// Rows per dataset.
    #[arg(long, default_value_t = 70, value_parser = clap::value_parser!(u64).range(1..))]
    num_samples: u64,
    #[arg(long, default_value_t = 0.1)]
    rate: f64,
    #[arg(long, default_value_t = 50_000)]
    iterations: usize,
    /// Composite likelihood orders to compare against ML.
    #[arg(long = "k", value_delimiter = ',', default_values_t = [1, 2, 3])]
    orders: Vec<usize>,
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    master_seed: u64,
    #[command(flatten)]
    mode: ModeArgs,
    #[arg(long, default_value_t = 10_000)]
    burn_in: usize,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    thinning: u64,
    #[arg(long, default_value_t = 100)]
    record_every: usize,
    #[arg(long, default_value_t = 0.5)]
    init_scale: f64,
    /// Reuse one dataset for every trial.
    #[arg(long)]
    share_dataset: bool,
    /// Trials run concurrently [default: available cores].
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,
    /// Directory for the summary CSVs.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SamplerFile {
    seed: Option<u64>,
    burn_in: Option<usize>,
    thinning: Option<usize>,
    num_samples: Option<usize>,
}

impl GeneratorArgs {
    fn params(&self) -> Result<RbmParams> {
        Ok(RbmParams::homogeneous(
            self.n as usize,
            self.m_generator,
            self.alpha,
            self.beta,
            self.weight,
        )?)
    }
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => SamplerFile::default(),
    };
    let defaults = SamplerConfig::default();
    let sampler = SamplerConfig {
        seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
        burn_in: args.burn_in.or(file.burn_in).unwrap_or(defaults.burn_in),
        thinning: args.thinning.map(|t| t as usize).or(file.thinning).unwrap_or(defaults.thinning),
        num_samples: args
            .num_samples
            .map(|s| s as usize)
            .or(file.num_samples)
            .unwrap_or(defaults.num_samples),
    };
    sampler.validate()?;
    let params = args.generator.params()?;
    let data = match args.mode.mode() {
        DataMode::Exact => generate_exact(&params, sampler.num_samples, sampler.seed)?,
        DataMode::Mcmc => generate_dataset(&params, &sampler)?,
    };
    data.save(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let data = Dataset::load(&args.data).with_context(|| format!("reading {}", args.data.display()))?;
    let method = if args.ml {
        Method::MaxLikelihood
    } else {
        Method::Composite { k: args.k.unwrap_or(2) }
    };
    let config = TrainConfig {
        method,
        learning_rate: args.rate,
        iterations: args.iterations,
        init_seed: args.seed,
        init_scale: args.init_scale,
        record_every: args.record_every,
        ..TrainConfig::default()
    };
    let trace = train(&data, &config, data.width(), args.m_learner)?;
    create_dir(&args.out_dir)?;
    trace.save_csv(args.out_dir.join("trace.csv"))?;
    trace.final_params.save(args.out_dir.join("model.json"))?;
    let last = trace.last();
    match last.true_log_likelihood {
        Some(ll) => println!("{method}: objective {:.6}, log-likelihood {ll:.6}", last.objective),
        None => println!("{method}: objective {:.6}", last.objective),
    }
    Ok(())
}

fn cmd_reproduce(args: &ReproduceArgs) -> Result<()> {
    let config = ReproduceConfig {
        n: args.generator.n as usize,
        m_learner: args.m_learner,
        m_generator: args.generator.m_generator,
        generator_alpha: args.generator.alpha,
        generator_beta: args.generator.beta,
        generator_w: args.generator.weight,
        num_samples: args.num_samples as usize,
        learning_rate: args.rate,
        iterations: args.iterations,
        orders: args.orders.clone(),
        trials: args.trials as usize,
        master_seed: args.master_seed,
        data_mode: args.mode.mode(),
        burn_in: args.burn_in,
        thinning: args.thinning as usize,
        record_every: args.record_every,
        init_scale: args.init_scale,
        share_dataset: args.share_dataset,
        jobs: args.jobs.map(|j| j as usize),
    };
    let report = reproduce(&config)?;
    create_dir(&args.out_dir)?;
    report.write_to(&args.out_dir)?;
    for method in &report.methods {
        if let Some(ll) = report.final_true_log_likelihood(*method) {
            println!("{method}: mean final log-likelihood {ll:.4}");
        }
    }
    for (k, mad) in &report.mad {
        println!("cl{k} vs ml: MAD alpha {:.3}, beta {:.3}, w {:.3}", mad.alpha, mad.beta, mad.w);
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    if dir.exists() && !dir.is_dir() {
        bail!("{} is not a directory", dir.display());
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Train(args) => cmd_train(args),
        Command::Reproduce(args) => cmd_reproduce(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
