//! The `relsynth` command line.
//!
//! Settings come from an optional JSON run configuration (`--config`) and
//! from flags; flags win. Paths inside the run configuration are relative
//! to the configuration file. Exit status is 0 on success, 1 for invalid
//! data or settings, and 2 for file-system failures.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{debug, info};
use relsynth_core::eval::{train_test_split, DEFAULT_TRAIN_FRACTION};
use relsynth_core::{evaluate, synthesize, train_model, validate, EvalOptions, RelationalDataset, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::error::{Error, Result};
use crate::report::{summary, write_loss_trace, write_report};
use crate::schema::{load_dataset, read_dataset, write_dataset, SchemaConfig, SCHEMA_FILE};

/// Environment variable holding the log filter, e.g. `info` or `debug`.
pub const LOG_ENV: &str = "RELSYNTH_LOG";

/// Optional overrides of the training defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub k1: Option<usize>,
    pub k2: Option<usize>,
    pub latent_dims: Option<Vec<usize>>,
    pub betas: Option<Vec<f64>>,
    pub hidden_dim: Option<usize>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub output_std: Option<f64>,
}

/// Contents of a `--config` file. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub synthetic: Option<PathBuf>,
    pub seed: Option<u64>,
    pub target: Option<String>,
    /// Secondary table joined with its primary for evaluation.
    pub join: Option<String>,
    #[serde(default)]
    pub train: TrainOverrides,
}

#[derive(Debug, Parser)]
#[command(name = "relsynth", version, about = "Synthetic relational data from a graph variational autoencoder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load a dataset and report every integrity violation.
    Validate(Common),
    /// Train a model and write a checkpoint plus a loss trace.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelFlags,
        /// Checkpoint file to write.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Loss trace CSV; defaults to the checkpoint path with `.loss.csv`.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Write a synthetic dataset shaped like the real one.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Output directory for the CSVs and their schema.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a synthetic dataset with the real one.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Synthetic dataset: a directory written by `generate` or a schema file.
        #[arg(long)]
        synthetic: Option<PathBuf>,
        #[command(flatten)]
        eval: EvalFlags,
        /// Report file to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split, train, generate and evaluate in one run.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        eval: EvalFlags,
        /// Output directory for checkpoint, loss trace, synthetic data and report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration file (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Schema file of the real dataset.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct ModelFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    k1: Option<usize>,
    #[arg(long)]
    k2: Option<usize>,
    /// Latent dimension per table, comma separated.
    #[arg(long, value_delimiter = ',')]
    latent: Option<Vec<usize>>,
    /// KL weight per table, comma separated.
    #[arg(long, value_delimiter = ',')]
    beta: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct EvalFlags {
    /// Categorical attribute predicted by the compatibility classifiers.
    #[arg(long)]
    target: Option<String>,
    /// Secondary table joined with its primary; defaults to the first link.
    #[arg(long)]
    join: Option<String>,
}

struct Settings {
    file: RunConfig,
    base: PathBuf,
}

impl Settings {
    fn load(common: &Common) -> Result<Settings> {
        match &common.config {
            None => Ok(Settings { file: RunConfig::default(), base: PathBuf::new() }),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let file = serde_json::from_str(&text).map_err(|e| Error::Parse {
                    file: path.clone(),
                    line: e.line() as u64,
                    column: e.column() as u64,
                    message: e.to_string(),
                })?;
                Ok(Settings { file, base: path.parent().unwrap_or(Path::new("")).to_path_buf() })
            }
        }
    }

    fn path(&self, flag: &Option<PathBuf>, file: &Option<PathBuf>, name: &'static str) -> Result<PathBuf> {
        match (flag, file) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(p)) => Ok(self.base.join(p)),
            (None, None) => Err(Error::MissingSetting(name)),
        }
    }

    fn schema(&self, common: &Common) -> Result<PathBuf> {
        self.path(&common.schema, &self.file.schema, "schema")
    }

    fn seed(&self, common: &Common) -> Result<u64> {
        common.seed.or(self.file.seed).ok_or(Error::MissingSetting("seed"))
    }

    fn train_config(&self, tables: usize, seed: u64, flags: &ModelFlags) -> TrainConfig {
        let mut c = TrainConfig::for_tables(tables, seed);
        let o = &self.file.train;
        c.k1 = flags.k1.or(o.k1).unwrap_or(c.k1);
        c.k2 = flags.k2.or(o.k2).unwrap_or(c.k2);
        c.latent_dims = flags.latent.clone().or_else(|| o.latent_dims.clone()).unwrap_or(c.latent_dims);
        c.betas = flags.beta.clone().or_else(|| o.betas.clone()).unwrap_or(c.betas);
        c.hidden_dim = o.hidden_dim.unwrap_or(c.hidden_dim);
        c.epochs = flags.epochs.or(o.epochs).unwrap_or(c.epochs);
        c.batch_size = o.batch_size.unwrap_or(c.batch_size);
        c.learning_rate = o.learning_rate.unwrap_or(c.learning_rate);
        c.output_std = o.output_std.unwrap_or(c.output_std);
        c
    }

    fn eval_options(&self, flags: &EvalFlags, seed: u64) -> Result<EvalOptions> {
        let target = flags.target.clone().or_else(|| self.file.target.clone()).ok_or(Error::MissingSetting("target"))?;
        let mut options = EvalOptions::new(target, seed);
        options.secondary = flags.join.clone().or_else(|| self.file.join.clone());
        Ok(options)
    }
}

fn train_and_save(
    dataset: &RelationalDataset,
    config: &TrainConfig,
    checkpoint: &Path,
    trace: &Path,
) -> Result<relsynth_core::GraphVaeModel> {
    info!("training on {} rows for {} epochs", dataset.total_rows(), config.epochs);
    let (model, records) = train_model(dataset, config)?;
    for r in &records {
        debug!("epoch {} total {} reconstruction {} kl {}", r.epoch, r.total, r.reconstruction, r.kl);
    }
    save_checkpoint(&model, checkpoint)?;
    write_loss_trace(&records, trace)?;
    match records.last() {
        Some(r) => println!(
            "trained {} epochs, final loss {:.6} (reconstruction {:.6}, kl {:.6})",
            records.len(),
            r.total,
            r.reconstruction,
            r.kl
        ),
        None => println!("no epochs run, wrote initialized model"),
    }
    println!("checkpoint {}", checkpoint.display());
    Ok(model)
}

fn dataset_name(schema: &Path) -> Result<String> {
    Ok(SchemaConfig::from_path(schema)?.name)
}

fn run_command(command: Command) -> Result<()> {
    match command {
        Command::Validate(common) => {
            let settings = Settings::load(&common)?;
            let schema = settings.schema(&common)?;
            let config = SchemaConfig::from_path(&schema)?;
            let dataset = read_dataset(&config, schema.parent().unwrap_or(Path::new("")))?;
            let report = validate(&dataset);
            if !report.is_valid() {
                return Err(Error::ValidationFailed(report));
            }
            println!(
                "valid: {} tables, {} rows, {} links",
                dataset.tables.len(),
                dataset.total_rows(),
                dataset.links.len()
            );
            Ok(())
        }
        Command::Train { common, model, checkpoint, trace } => {
            let settings = Settings::load(&common)?;
            let seed = settings.seed(&common)?;
            let dataset = load_dataset(&settings.schema(&common)?)?;
            let checkpoint = settings.path(&checkpoint, &settings.file.checkpoint, "checkpoint")?;
            let trace = trace.unwrap_or_else(|| checkpoint.with_extension("loss.csv"));
            let config = settings.train_config(dataset.tables.len(), seed, &model);
            train_and_save(&dataset, &config, &checkpoint, &trace)?;
            Ok(())
        }
        Command::Generate { common, checkpoint, out } => {
            let settings = Settings::load(&common)?;
            let seed = settings.seed(&common)?;
            let schema = settings.schema(&common)?;
            let dataset = load_dataset(&schema)?;
            let checkpoint = settings.path(&checkpoint, &settings.file.checkpoint, "checkpoint")?;
            let out = settings.path(&out, &settings.file.out, "out")?;
            let model = load_checkpoint(&checkpoint)?;
            let synthetic = synthesize(&model, &dataset, seed)?;
            write_dataset(&synthetic, &out, &dataset_name(&schema)?)?;
            println!("wrote {} synthetic rows to {}", synthetic.total_rows(), out.display());
            Ok(())
        }
        Command::Evaluate { common, synthetic, eval, out } => {
            let settings = Settings::load(&common)?;
            let seed = settings.seed(&common)?;
            let real = load_dataset(&settings.schema(&common)?)?;
            let mut synthetic = settings.path(&synthetic, &settings.file.synthetic, "synthetic")?;
            if synthetic.is_dir() {
                synthetic.push(SCHEMA_FILE);
            }
            let synthetic = load_dataset(&synthetic)?;
            let out = settings.path(&out, &settings.file.out, "out")?;
            let report = evaluate(&real, &synthetic, &settings.eval_options(&eval, seed)?)?;
            write_report(&report, &out)?;
            print!("{}", summary(&report));
            println!("report {}", out.display());
            Ok(())
        }
        Command::Pipeline { common, model, eval, out } => {
            let settings = Settings::load(&common)?;
            let seed = settings.seed(&common)?;
            let schema = settings.schema(&common)?;
            let real = load_dataset(&schema)?;
            let out = settings.path(&out, &settings.file.out, "out")?;
            let options = settings.eval_options(&eval, seed)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;

            let (train, _) = train_test_split(&real, DEFAULT_TRAIN_FRACTION, seed)?;
            let config = settings.train_config(real.tables.len(), seed, &model);
            let model = train_and_save(&train, &config, &out.join("model.ckpt"), &out.join("loss.csv"))?;
            let synthetic = synthesize(&model, &train, seed)?;
            write_dataset(&synthetic, &out.join("synthetic"), &dataset_name(&schema)?)?;
            let report = evaluate(&real, &synthetic, &options)?;
            write_report(&report, &out.join("report.json"))?;
            print!("{}", summary(&report));
            println!("outputs in {}", out.display());
            Ok(())
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit status. Errors are printed to standard error.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run_command(cli.command) {
        Ok(()) => 0,
        Err(Error::ValidationFailed(report)) => {
            eprintln!("dataset failed validation:");
            for v in &report.violations {
                eprintln!("{v}");
            }
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}
