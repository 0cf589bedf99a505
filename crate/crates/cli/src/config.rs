//! Run configuration: command-line flags layered over an optional TOML file.

use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use dnls_breather::{validate_exponent, Dim, ModeLabel, ModeSpec, Splitting};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const OUT_ENV: &str = "BREATHER_OUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    GroundState,
    Breather,
    Convergence,
    FemCheck,
    Evolve,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GroundState => "ground-state",
            Command::Breather => "breather",
            Command::Convergence => "convergence",
            Command::FemCheck => "fem-check",
            Command::Evolve => "evolve",
        }
    }

    /// Settings this command reads; anything else given is rejected.
    fn accepts(self, key: &str) -> bool {
        let common = ["config", "out"];
        let specific: &[&str] = match self {
            Command::GroundState => &["dim", "p", "lambda"],
            Command::Breather => &["dim", "p", "mode", "mu", "radius", "tol", "max_iter", "coercivity"],
            Command::Convergence => &["dim", "p", "mode", "mus", "tol", "max_iter"],
            Command::FemCheck => &["dim", "trials", "seed"],
            Command::Evolve => {
                &["dim", "p", "mode", "mu", "radius", "tol", "max_iter", "steps", "periods", "snapshot_every", "splitting"]
            }
        };
        common.contains(&key) || specific.contains(&key)
    }
}

#[derive(Subcommand, Debug)]
pub enum CommandArgs {
    /// Continuum ground state by radial shooting (unit mass unless --lambda is given).
    GroundState(Settings),
    /// Newton solve for one breather mode.
    Breather(Settings),
    /// Mesh-refinement study against the continuum ground state.
    Convergence(Settings),
    /// Randomised check of the finite-element identities.
    FemCheck(Settings),
    /// Solve a breather, then integrate the lattice flow over whole periods.
    Evolve(Settings),
}

impl CommandArgs {
    pub fn split(self) -> (Command, Settings) {
        match self {
            CommandArgs::GroundState(s) => (Command::GroundState, s),
            CommandArgs::Breather(s) => (Command::Breather, s),
            CommandArgs::Convergence(s) => (Command::Convergence, s),
            CommandArgs::FemCheck(s) => (Command::FemCheck, s),
            CommandArgs::Evolve(s) => (Command::Evolve, s),
        }
    }
}

/// Every setting, optional so that flags and file can be merged.
/// File keys use the snake_case field names.
#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// TOML file with settings; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Lattice dimension, 1 or 2.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Nonlinearity exponent, 1/2 <= p < 2/dim.
    #[arg(long)]
    pub p: Option<f64>,
    /// Breather mode: ST, P, H_x or H_y.
    #[arg(long)]
    pub mode: Option<String>,
    /// Lattice spacing.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Comma-separated lattice spacings for a study.
    #[arg(long, value_delimiter = ',')]
    pub mus: Option<Vec<f64>>,
    /// Box radius K, or "auto".
    #[arg(long)]
    pub radius: Option<RadiusSetting>,
    /// Newton tolerance on the sup-norm residual.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Newton iteration cap.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Output directory (the BREATHER_OUT environment variable overrides it).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for randomised checks.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of random fields in a randomised check.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Eigenvalue for the ground state; unit mass when absent.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Time steps per period.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Number of periods to integrate.
    #[arg(long)]
    pub periods: Option<usize>,
    /// Write a snapshot every this many steps (0 writes only the end state).
    #[arg(long)]
    pub snapshot_every: Option<usize>,
    /// Time-step composition: strang or yoshida4.
    #[arg(long)]
    pub splitting: Option<String>,
    /// Whether to compute the coercivity margin.
    #[arg(long)]
    pub coercivity: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RadiusSetting {
    Auto,
    Explicit(usize),
}

impl Serialize for RadiusSetting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            RadiusSetting::Auto => s.serialize_str("auto"),
            RadiusSetting::Explicit(k) => s.serialize_u64(*k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for RadiusSetting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(k) => Ok(RadiusSetting::Explicit(k as usize)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl std::str::FromStr for RadiusSetting {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(RadiusSetting::Auto);
        }
        s.parse().map(RadiusSetting::Explicit).map_err(|_| format!("expected \"auto\" or an integer, got {s:?}"))
    }
}

/// Fully resolved configuration, recorded in the run manifest.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub dim: usize,
    pub p: f64,
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mus: Option<Vec<f64>>,
    pub radius: RadiusSetting,
    pub tol: f64,
    pub max_iter: usize,
    pub out: PathBuf,
    pub seed: u64,
    pub trials: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub steps: usize,
    pub periods: usize,
    pub snapshot_every: usize,
    pub splitting: Splitting,
    pub coercivity: bool,
}

impl RunConfig {
    pub fn dimension(&self) -> Dim {
        Dim::new(self.dim).expect("validated")
    }

    pub fn mode_spec(&self) -> ModeSpec {
        let label: ModeLabel = self.mode.parse().expect("validated");
        ModeSpec::new(self.dimension(), label).expect("validated")
    }
}

fn read_file(path: &Path) -> Result<Settings, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), one_line(&e.to_string()))))
}

pub fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

macro_rules! merge {
    ($flags:ident, $file:ident, $($field:ident),*) => {
        Settings { config: $flags.config.clone(), $($field: $flags.$field.clone().or($file.$field.clone())),* }
    };
}

/// Merges flags over the file, applies defaults and the output override,
/// and validates everything before any computation.
pub fn resolve(command: Command, flags: Settings, out_env: Option<PathBuf>) -> Result<RunConfig, CliError> {
    let file = match &flags.config {
        Some(path) => read_file(path)?,
        None => Settings::default(),
    };
    let s = merge!(
        flags, file, dim, p, mode, mu, mus, radius, tol, max_iter, out, seed, trials, lambda, steps, periods,
        snapshot_every, splitting, coercivity
    );
    let given = [
        ("dim", s.dim.is_some()),
        ("p", s.p.is_some()),
        ("mode", s.mode.is_some()),
        ("mu", s.mu.is_some()),
        ("mus", s.mus.is_some()),
        ("radius", s.radius.is_some()),
        ("tol", s.tol.is_some()),
        ("max_iter", s.max_iter.is_some()),
        ("seed", s.seed.is_some()),
        ("trials", s.trials.is_some()),
        ("lambda", s.lambda.is_some()),
        ("steps", s.steps.is_some()),
        ("periods", s.periods.is_some()),
        ("snapshot_every", s.snapshot_every.is_some()),
        ("splitting", s.splitting.is_some()),
        ("coercivity", s.coercivity.is_some()),
    ];
    for (key, set) in given {
        if set && !command.accepts(key) {
            return Err(CliError::Config(format!("setting {key} does not apply to {}", command.name())));
        }
    }

    let dim_n = s.dim.unwrap_or(1);
    let dim = Dim::new(dim_n).map_err(|_| CliError::Config(format!("dim must be 1 or 2, got {dim_n}")))?;
    let p = s.p.unwrap_or(if dim == Dim::One { 1.0 } else { 0.5 });
    if command != Command::FemCheck {
        validate_exponent(dim, p).map_err(|e| CliError::Config(e.to_string()))?;
    }
    let mode = s.mode.unwrap_or_else(|| "ST".into());
    let label: ModeLabel = mode.parse().map_err(|e: dnls_breather::BreatherError| CliError::Config(e.to_string()))?;
    ModeSpec::new(dim, label).map_err(|e| CliError::Config(e.to_string()))?;

    let positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
        }
    };
    let mu = s.mu.map(|v| positive("mu", v)).transpose()?;
    if matches!(command, Command::Breather | Command::Evolve) && mu.is_none() {
        return Err(CliError::Config(format!("{} needs --mu", command.name())));
    }
    let mus = match s.mus {
        Some(list) => {
            for &v in &list {
                positive("mus entry", v)?;
            }
            Some(list)
        }
        None => None,
    };
    if command == Command::Convergence && mus.as_ref().map_or(true, |m| m.len() < 3) {
        return Err(CliError::Config("convergence needs --mus with at least 3 values".into()));
    }
    let radius = s.radius.unwrap_or(RadiusSetting::Auto);
    if let RadiusSetting::Explicit(k) = radius {
        if k < 2 {
            return Err(CliError::Config(format!("radius must be at least 2, got {k}")));
        }
    }
    let tol = positive("tol", s.tol.unwrap_or(dnls_breather::solver::DEFAULT_TOL))?;
    let max_iter = s.max_iter.unwrap_or(dnls_breather::solver::DEFAULT_MAX_ITER);
    let lambda = s.lambda;
    if let Some(l) = lambda {
        if !(l < 0.0) {
            return Err(CliError::Config(format!("lambda must be negative, got {l}")));
        }
    }
    let steps = s.steps.unwrap_or(4096);
    let periods = s.periods.unwrap_or(1);
    if steps == 0 || periods == 0 || max_iter == 0 {
        return Err(CliError::Config("steps, periods and max_iter must be positive".into()));
    }
    let splitting = match s.splitting.as_deref().unwrap_or("strang") {
        "strang" => Splitting::Strang,
        "yoshida4" => Splitting::Yoshida4,
        other => return Err(CliError::Config(format!("splitting must be strang or yoshida4, got {other:?}"))),
    };
    let trials = s.trials.unwrap_or(200);
    if trials == 0 {
        return Err(CliError::Config("trials must be positive".into()));
    }

    Ok(RunConfig {
        command,
        dim: dim_n,
        p,
        mode: label.to_string(),
        mu,
        mus,
        radius,
        tol,
        max_iter,
        out: out_env.or(s.out).unwrap_or_else(|| PathBuf::from("out")),
        seed: s.seed.unwrap_or(0),
        trials,
        lambda,
        steps,
        periods,
        snapshot_every: s.snapshot_every.unwrap_or(0),
        splitting,
        coercivity: s.coercivity.unwrap_or(true),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags() -> Settings {
        Settings { mu: Some(0.2), ..Settings::default() }
    }

    #[test]
    fn defaults_fill_in() {
        let c = resolve(Command::Breather, flags(), None).unwrap();
        assert_eq!((c.dim, c.p, c.mode.as_str(), c.tol, c.max_iter), (1, 1.0, "ST", 1e-12, 50));
        assert_eq!(c.radius, RadiusSetting::Auto);
        assert_eq!(c.out, PathBuf::from("out"));
    }

    #[test]
    fn environment_overrides_output_directory() {
        let f = Settings { out: Some("a".into()), ..flags() };
        let c = resolve(Command::Breather, f, Some("b".into())).unwrap();
        assert_eq!(c.out, PathBuf::from("b"));
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "dim = 2\np = 0.5\nmode = \"H_x\"\nmu = 0.5\nradius = 40\n").unwrap();
        let f = Settings { config: Some(path), mu: Some(0.35), ..Settings::default() };
        let c = resolve(Command::Breather, f, None).unwrap();
        assert_eq!((c.dim, c.p, c.mode.as_str(), c.mu), (2, 0.5, "H_x", Some(0.35)));
        assert_eq!(c.radius, RadiusSetting::Explicit(40));
    }

    #[test]
    fn invalid_settings_are_rejected() {
        let cases = [
            Settings { p: Some(2.0), ..flags() },
            Settings { dim: Some(3), ..flags() },
            Settings { mode: Some("H_x".into()), ..flags() },
            Settings { mu: Some(-0.1), ..Settings::default() },
            Settings { trials: Some(5), ..flags() },
            Settings { radius: Some(RadiusSetting::Explicit(1)), ..flags() },
            Settings::default(),
        ];
        for s in cases {
            assert!(matches!(resolve(Command::Breather, s.clone(), None), Err(CliError::Config(_))), "{s:?}");
        }
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "mu = 0.2\nfoo = 1\n").unwrap();
        let f = Settings { config: Some(path), ..Settings::default() };
        let err = resolve(Command::Breather, f, None).unwrap_err();
        assert!(err.to_string().contains("foo"), "{err}");
    }
}
