//! `ssf-lab`: runs the spectral shift laboratory from a JSON config.
//!
//! ```text
//! ssf-lab <mode> --config <path> [--threads N] [--out <dir>]
//! ```
//!
//! Exit codes: 0 when every check passes, 1 for invalid input, 2 when a
//! numerical tolerance is missed. Failures print
//! `{"error": {"kind": ..., "message": ...}}` on standard error.

pub mod config;
pub mod experiments;

use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Serialize;
use ssf_core::SsfError;
use thiserror::Error;

pub use config::{ExperimentConfig, Mode};

#[derive(Debug, Parser)]
#[command(name = "ssf-lab", about = "Higher-order spectral shift laboratory")]
pub struct Cli {
    #[arg(value_enum)]
    pub mode: Mode,
    #[arg(long)]
    pub config: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("bad config: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] SsfError),
    #[error("{0}")]
    Tolerance(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Core(e) => e.kind(),
            CliError::Tolerance(_) => "tolerance",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(
                SsfError::Connection { .. } | SsfError::IllConditionedFit(_) | SsfError::Conditioning(_),
            )
            | CliError::Tolerance(_) => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            message: String,
        }
        #[derive(Serialize)]
        struct Wrapper<'a> {
            error: Body<'a>,
        }
        serde_json::to_string(&Wrapper {
            error: Body {
                kind: self.kind(),
                message: self.to_string(),
            },
        })
        .expect("serializable")
    }
}

/// Result of a completed run: the table or summary for standard output and
/// whether every tolerance held.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub stdout: String,
    pub pass: bool,
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", cli.config.display())))?;
    let cfg = ExperimentConfig::from_json(&text)?;
    if let Some(m) = cfg.mode {
        if m != cli.mode {
            return Err(CliError::Config(format!(
                "config is for mode '{}' but '{}' was requested",
                m.name(),
                cli.mode.name()
            )));
        }
    }
    if cli.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", cli.out.display())))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    pool.install(|| experiments::dispatch(cli.mode, &cfg, &cli.out))
}

/// Parses arguments, runs, prints, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let err = CliError::Usage(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match run(&cli) {
        Ok(out) => {
            print!("{}", out.stdout);
            if out.pass {
                0
            } else {
                let err = CliError::Tolerance(format!("{} checks missed their tolerance", cli.mode.name()));
                eprintln!("{}", err.to_json());
                err.exit_code()
            }
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
