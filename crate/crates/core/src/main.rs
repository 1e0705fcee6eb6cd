use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use uroevent::cli::{self, RunConfig, Workspace};

#[derive(Parser, Debug)]
#[command(name = "uroevent", version, about = "Event classification for bladder pressure traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Working directory (for `synth`, the corpus directory to create).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// single, two-stage or cascaded.
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Train share such as `60%` or `60/40`, or `manifest:A+B->C`.
    #[arg(long, global = true)]
    split: Option<String>,
    /// Directory of input traces.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic annotated corpus.
    Synth(Common),
    /// Load and resample a corpus into the working directory.
    Ingest(Common),
    /// Extract segment features and events.
    Featurize {
        #[command(flatten)]
        common: Common,
        /// Also write the raw wavelet coefficients of every trace.
        #[arg(long)]
        dump_coefficients: bool,
    },
    /// Split by trace and train the models.
    Train(Common),
    /// Evaluate the trained models on the test split.
    Evaluate(Common),
    /// Permutation feature importance on the test split.
    Pfi(Common),
    /// Propose and classify events on unannotated traces.
    Predict(Common),
}

fn resolve(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &c.out {
        cfg.out = out.clone();
    }
    if let Some(mode) = &c.mode {
        cfg.mode = mode.clone();
    }
    if let Some(split) = &c.split {
        cfg.split = split.clone();
    }
    if let Some(corpus) = &c.corpus {
        cfg.corpus = Some(corpus.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn corpus(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.corpus
        .clone()
        .ok_or_else(|| uroevent::Error::Config("no corpus directory (use --corpus or `corpus` in the config)".into()))
        .map_err(Into::into)
}

fn run(cli: Cli) -> Result<()> {
    let manifest = match &cli.command {
        Command::Synth(c) => {
            let cfg = resolve(c)?;
            cli::synth(&cfg, &cfg.out)?
        }
        Command::Ingest(c) => {
            let cfg = resolve(c)?;
            cli::ingest(&cfg, &corpus(&cfg)?, &Workspace::new(&cfg.out))?
        }
        Command::Featurize {
            common,
            dump_coefficients,
        } => {
            let cfg = resolve(common)?;
            cli::featurize(&cfg, &Workspace::new(&cfg.out), *dump_coefficients)?
        }
        Command::Train(c) => {
            let cfg = resolve(c)?;
            cli::train(&cfg, &Workspace::new(&cfg.out))?
        }
        Command::Evaluate(c) => {
            let cfg = resolve(c)?;
            cli::evaluate(&cfg, &Workspace::new(&cfg.out))?
        }
        Command::Pfi(c) => {
            let cfg = resolve(c)?;
            cli::pfi(&cfg, &Workspace::new(&cfg.out))?
        }
        Command::Predict(c) => {
            let cfg = resolve(c)?;
            cli::predict(&cfg, &corpus(&cfg)?, &Workspace::new(&cfg.out))?
        }
    };
    log::info!(
        "{}: {} outputs written",
        manifest.command,
        manifest.outputs.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("UROEVENT_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli).context("uroevent failed") {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = err
                .chain()
                .find_map(|e| e.downcast_ref::<uroevent::Error>())
                .map_or("Error", uroevent::Error::kind);
            let message = format!("{:#}", err);
            eprintln!("{}", serde_json::json!({ "kind": kind, "message": message }));
            ExitCode::FAILURE
        }
    }
}
