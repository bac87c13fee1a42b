//! Command-line front end for the `trajloc` experiment pipeline.
//!
//! Every command reads an experiment config (TOML, defaults for anything
//! missing), applies `--set path=value` overrides, and writes its outputs
//! together with the resolved config and a hash manifest into its own
//! directory under the output root:
//!
//! ```text
//! <out>/data        gen        database.csv, track.csv
//! <out>/train       train      fold_<k>/model.json, fold_<k>/curve.csv
//! <out>/eval        eval       comparison.csv, summary.json, points/, cdf/, plot.gp
//! <out>/ambiguity   ambiguity  ambiguous_points.csv, ambiguity.csv
//! <out>/sweep       sweep      speed.csv, history.csv, timeslots.csv
//! ```

pub mod commands;
pub mod error;
pub mod manifest;
pub mod overrides;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use trajloc::config::ExperimentConfig;

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "trajloc", version, about = "Trajectory-based WiFi RSSI indoor localization experiments")]
pub struct Cli {
    /// Experiment config file (TOML). Defaults apply to missing keys.
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,

    /// Override a config value by key path, e.g. `--set model.hidden=32`.
    #[arg(long = "set", value_name = "PATH=VALUE", global = true)]
    pub sets: Vec<String>,

    /// Master seed (same as `--set seed=N`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output root (same as `--set output_dir=DIR`).
    #[arg(short, long, global = true)]
    pub out: Option<PathBuf>,

    /// Per-epoch progress and info logging.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate (or convert) the fingerprint database and test track.
    Gen,
    /// Train the sequence model, one checkpoint per fold.
    Train {
        /// Directory holding database.csv (default `<out>/data`).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Number of independently seeded folds (default `eval.folds`).
        #[arg(long)]
        folds: Option<usize>,
        /// Continue from the checkpoints in `<out>/train`.
        #[arg(long)]
        resume: bool,
    },
    /// Evaluate trained folds and baselines on the test track.
    Eval {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Directory holding fold_<k>/model.json (default `<out>/train`).
        #[arg(long)]
        models: Option<PathBuf>,
        /// Comma-separated baselines: radar,kernel,kalman,srlknn,mlp,mlnn.
        #[arg(long, value_delimiter = ',')]
        baselines: Option<Vec<String>>,
    },
    /// Ambiguous-point and ambiguous-trajectory analysis.
    Ambiguity {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Speed, history-noise and time-slot sweeps.
    Sweep {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Print the resolved config as TOML.
    Config,
}

/// Loads the config file and applies command-line overrides.
pub fn resolve_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let base = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let mut cfg = overrides::apply_overrides(&base, &cli.sets)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.to_string_lossy().into_owned();
    }
    let cfg = cfg.resolved();
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let mut cfg = resolve_config(cli)?;
    let root = PathBuf::from(&cfg.output_dir);
    let data_default = root.join("data");
    let models_default = root.join("train");
    match &cli.command {
        Command::Gen => {
            let m = commands::cmd_gen(&cfg, &data_default)?;
            println!("wrote {} ({} files)", data_default.display(), m.outputs.len());
        }
        Command::Train { data, folds, resume } => {
            let opts = commands::TrainOptions {
                folds: *folds,
                resume: *resume,
                verbose: cli.verbose,
            };
            let data = data.clone().unwrap_or(data_default);
            commands::cmd_train(&cfg, &data, &models_default, &opts)?;
            println!("wrote {}", models_default.display());
        }
        Command::Eval { data, models, baselines } => {
            if let Some(b) = baselines {
                cfg.eval.baselines = b.iter().map(|s| s.trim().to_lowercase()).filter(|s| !s.is_empty()).collect();
                cfg.validate()?;
            }
            let data = data.clone().unwrap_or(data_default);
            let models = models.clone().unwrap_or(models_default);
            let out = root.join("eval");
            let (_, outcome) = commands::cmd_eval(&cfg, &data, &models, &out)?;
            println!("{:<16} {:>8} {:>8} {:>8} {:>8}", "method", "mean", "p50", "p80", "max");
            for s in &outcome.methods {
                println!("{:<16} {:>8.3} {:>8.3} {:>8.3} {:>8.3}", s.method, s.mean, s.p50, s.p80, s.max);
            }
            println!("wrote {}", out.display());
        }
        Command::Ambiguity { data } => {
            let data = data.clone().unwrap_or(data_default);
            let out = root.join("ambiguity");
            commands::cmd_ambiguity(&cfg, &data, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Sweep { data, models } => {
            let data = data.clone().unwrap_or(data_default);
            let models = models.clone().unwrap_or(models_default);
            let out = root.join("sweep");
            commands::cmd_sweep(&cfg, &data, &models, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Config => print!("{}", cfg.to_toml_string()?),
    }
    Ok(())
}
