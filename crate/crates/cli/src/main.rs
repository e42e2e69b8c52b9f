//! `obslab`: run observability and control experiments from JSON configs.

mod config;
mod experiments;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use obslab::LabError;

use crate::config::{ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(
    name = "obslab",
    version,
    about = "Observability and control experiments for 1D Schrödinger operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Override the output directory from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the available experiment kinds.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Check a config file without running it.
    Validate { config: PathBuf },
}

fn exit_code(err: &LabError) -> u8 {
    match err {
        LabError::Parameter(_)
        | LabError::Structural(_)
        | LabError::ThicknessViolation { .. }
        | LabError::Io(_)
        | LabError::Json(_)
        | LabError::Csv(_) => 1,
        LabError::Numerical(_)
        | LabError::NotObservable { .. }
        | LabError::DegenerateSet(_)
        | LabError::NonConvergence { .. } => 2,
        LabError::IdentityViolation(_) | LabError::LemmaViolation(_) => 3,
    }
}

fn configure_threads() -> Result<(), LabError> {
    let Ok(raw) = std::env::var("OBSLAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| LabError::Parameter(format!("OBSLAB_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| LabError::Parameter(e.to_string()))
}

fn list(as_json: bool) {
    if as_json {
        let kinds: Vec<_> = ExperimentKind::ALL
            .iter()
            .map(|k| json!({ "name": k.name(), "description": k.description(), "anchor": k.anchor() }))
            .collect();
        println!(
            "{}",
            serde_json::to_string_pretty(&kinds).expect("static values serialize")
        );
    } else {
        for k in ExperimentKind::ALL {
            println!("{:<16} {}", k.name(), k.description());
        }
    }
}

fn validate(path: &Path) -> Result<u8, LabError> {
    let (cfg, _) = ExperimentConfig::load(path)?;
    let setup = cfg.build()?;
    println!(
        "ok: {} on {} nodes, thick set with {} intervals (margin {:.3e})",
        cfg.experiment.name.name(),
        setup.grid.n(),
        setup.thickset.intervals.len(),
        setup.thickset.margin
    );
    Ok(0)
}

fn run(path: &Path, out: Option<PathBuf>) -> Result<u8, LabError> {
    configure_threads()?;
    let (mut cfg, bytes) = ExperimentConfig::load(path)?;
    let recorded = serde_json::to_value(&cfg)?;
    if let Some(dir) = out {
        cfg.output.directory = dir;
    }
    let setup = cfg.build()?;
    let outcome = experiments::run(&cfg, &setup)?;
    let dir = cfg.output.directory.clone();
    let manifest = manifest::write_run(&dir, cfg.experiment.name.name(), &bytes, recorded, outcome)?;
    println!("{}", serde_json::to_string(&manifest.summary)?);
    match manifest.verdict {
        Some(false) => {
            eprintln!(
                "error: {} reported failing checks; see {}",
                manifest.experiment,
                dir.join("run.json").display()
            );
            Ok(3)
        }
        _ => Ok(0),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run { config, out } => run(&config, out),
        Command::List { json } => {
            list(json);
            Ok(0)
        }
        Command::Validate { config } => validate(&config),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
