//! Command-line front end. Stages: simulate | train | translate |
//! evaluate | pipeline. Exit codes: 0 success, 2 validation error,
//! 3 numeric runtime failure, 4 I/O or format failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sst::config::PipelineConfig;
use sst::io::{sha256_hex, write_run_manifest, RunManifest};
use sst::pipeline::{cmd_evaluate, cmd_pipeline, cmd_simulate, cmd_train, cmd_translate};
use sst::{Result, SstError};

#[derive(Parser)]
#[command(
    name = "sst",
    version,
    about = "Structural state translation: simulate lattice responses, train a \
             cycle-consistent translation model, apply it to unseen structures, \
             and verify the synthetic signals spectrally and modally"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML pipeline configuration; omitted means built-in defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir` from the configuration.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Random seed; overrides `seed` from the configuration.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Fail instead of proceeding if any setting would make reruns
    /// non-reproducible; recorded in the run manifest.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate lattice structures in every configured state.
    Simulate(Common),
    /// Train the translation model on the source structure's containers.
    Train(Common),
    /// Run every configured scenario through the trained model.
    Translate(Common),
    /// Compare synthetic containers against measured ones.
    Evaluate(Common),
    /// Run simulate, train, translate, and evaluate in order.
    Pipeline(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Train(_) => "train",
            Command::Translate(_) => "translate",
            Command::Evaluate(_) => "evaluate",
            Command::Pipeline(_) => "pipeline",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Simulate(c)
            | Command::Train(c)
            | Command::Translate(c)
            | Command::Evaluate(c)
            | Command::Pipeline(c) => c,
        }
    }
}

/// Exclusive marker preventing two commands from writing one output
/// directory concurrently; removed on drop.
struct DirLock {
    path: PathBuf,
}

impl DirLock {
    fn acquire(out: &Path) -> Result<DirLock> {
        std::fs::create_dir_all(out).map_err(|e| SstError::io(out.display().to_string(), e))?;
        let path = out.join(".sst.lock");
        match std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(DirLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(SstError::InvalidConfig(format!(
                    "output directory '{}' is locked by another run \
                     (remove {} if that run is no longer active)",
                    out.display(),
                    path.display()
                )))
            }
            Err(e) => Err(SstError::io(path.display().to_string(), e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

fn run(cli: &Cli) -> Result<()> {
    let common = cli.command.common();
    let mut config = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
        config.training.config.seed = seed;
        config.simulation.excitation.seed = seed;
    }
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    config.validate()?;
    let out = config.out_dir.clone();
    let _lock = DirLock::acquire(&out)?;

    let artifacts = match &cli.command {
        Command::Simulate(_) => cmd_simulate(&config, &out)?,
        Command::Train(_) => cmd_train(&config, &out)?,
        Command::Translate(_) => cmd_translate(&config, &out)?,
        Command::Evaluate(_) => cmd_evaluate(&config, &out)?,
        Command::Pipeline(_) => cmd_pipeline(&config, &out)?,
    };

    let config_text = config.to_toml_string()?;
    let manifest = RunManifest {
        command: cli.command.name().into(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        seed: config.seed,
        deterministic: common.deterministic,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        artifacts: artifacts
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
    };
    let manifest_path = out.join(format!("run_{}.json", cli.command.name()));
    write_run_manifest(&manifest_path, &manifest)?;

    for a in &artifacts {
        println!("{}", a.display());
    }
    println!("{}", manifest_path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
