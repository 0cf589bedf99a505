//! Driver behind the `breather` binary.
//!
//! Every run writes its artifacts plus `manifest.json` into the output
//! directory. Errors are reported as one JSON line on stderr; exit status 2
//! means the invocation or configuration was rejected, 1 means a computation
//! or check failed after it started.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;
use serde::Serialize;

pub mod config;
mod pipelines;

pub use config::{resolve, Command, RunConfig, Settings};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Check(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "invalid_config",
            CliError::Solver(_) => "solver_failure",
            CliError::Check(_) => "check_failure",
            CliError::Io(_) => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            _ => 1,
        }
    }

    /// `{"error": kind, "message": text}` on a single line.
    pub fn to_line(&self) -> String {
        let msg = config::one_line(&self.to_string());
        serde_json::json!({ "error": self.kind(), "message": msg }).to_string()
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<dnls_breather::BreatherError> for CliError {
    fn from(e: dnls_breather::BreatherError) -> Self {
        match e {
            dnls_breather::BreatherError::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Solver(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "breather", version, about = "Discrete breathers of the DNLS lattice")]
pub struct Cli {
    #[command(subcommand)]
    pub command: config::CommandArgs,
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_entry<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            eprintln!("{}", CliError::Usage(first).to_line());
            return 2;
        }
    };
    let (command, flags) = cli.command.split();
    let out_env = std::env::var_os(config::OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    let result = resolve(command, flags, out_env).and_then(|cfg| run(&cfg));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_line());
            e.exit_code()
        }
    }
}

#[derive(Serialize)]
struct Versions {
    #[serde(rename = "breather-cli")]
    cli: &'static str,
    #[serde(rename = "dnls-breather")]
    core: &'static str,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a RunConfig,
    versions: Versions,
    /// Seconds; the only field that differs between identical runs.
    wall_time: f64,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    artifacts: &'a [String],
}

/// Output directory bookkeeping: every file written is listed in the manifest.
pub(crate) struct Artifacts {
    dir: PathBuf,
    names: Vec<String>,
}

impl Artifacts {
    fn new(dir: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir, names: Vec::new() })
    }

    pub(crate) fn create(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let f = File::create(&path).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.names.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    pub(crate) fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

/// Runs a validated configuration. The manifest is written even when the
/// pipeline fails, with `status` set to `"failed"`.
pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let mut art = Artifacts::new(cfg.out.clone())?;
    let outcome = match cfg.command {
        Command::GroundState => pipelines::ground_state(cfg, &mut art),
        Command::Breather => pipelines::breather(cfg, &mut art),
        Command::Convergence => pipelines::convergence(cfg, &mut art),
        Command::FemCheck => pipelines::fem_check(cfg, &mut art),
        Command::Evolve => pipelines::evolve(cfg, &mut art),
    };
    let names = art.names.clone();
    let manifest = Manifest {
        config: cfg,
        versions: Versions { cli: env!("CARGO_PKG_VERSION"), core: dnls_breather::VERSION },
        wall_time: start.elapsed().as_secs_f64(),
        status: if outcome.is_ok() { "ok" } else { "failed" },
        error: outcome.as_ref().err().map(|e| config::one_line(&e.to_string())),
        artifacts: &names,
    };
    art.json("manifest.json", &manifest)?;
    outcome
}
