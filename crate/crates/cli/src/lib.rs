//! Batch runner behind the `hlmax` binary.
//!
//! Each subcommand resolves an [`ExperimentConfig`], runs inside a rayon pool
//! sized by `threads`, and writes its artifacts plus `manifest.json` into the
//! output directory. Every CSV ends with a `# config_sha256=<hex>` line and
//! every JSON artifact carries the same hash, so an artifact can always be
//! matched to the config that produced it.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 invalid config or
//! parameters, 3 work budget exceeded, 4 a checked inequality failed (the
//! offending rows land in `violations.csv`).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

mod commands;
pub mod config;

pub use config::{ExperimentConfig, Overrides};

#[derive(Debug, Parser)]
#[command(name = "hlmax", version, about = "Run lattice-ball maximal-operator experiments and write CSV/JSON reports")]
pub struct Cli {
    /// TOML config; missing keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory for artifacts and the manifest.
    #[arg(long, global = true, value_name = "DIR", default_value = "hlmax-out")]
    pub out: PathBuf,
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_name = "K")]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_name = "U64")]
    pub budget_updates: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn flag_overrides(&self) -> Overrides {
        Overrides { seed: self.seed, threads: self.threads, budget_updates: self.budget_updates }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Exact lattice-ball counts and the count/volume table.
    Count,
    /// Sampled checks of the origin, decay or small-scale multiplier bounds.
    MultiplierVerify,
    /// Plancherel, convolution, heat-path and semigroup-law checks on a seeded corpus.
    SemigroupCheck,
    /// Maximal-norm ratios per dimension and radius regime.
    MaximalExperiment,
    /// Monte Carlo check that lattice averages are dominated by continuous ones.
    DominationCheck,
    /// Transference of shift-system maximal functions to lattice balls.
    ErgodicDemo,
    /// Projection search certifying bilateral almost-uniform convergence.
    BauDemo,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Count => "count",
            Command::MultiplierVerify => "multiplier-verify",
            Command::SemigroupCheck => "semigroup-check",
            Command::MaximalExperiment => "maximal-experiment",
            Command::DominationCheck => "domination-check",
            Command::ErgodicDemo => "ergodic-demo",
            Command::BauDemo => "bau-demo",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] hlmax::Error),
    #[error("cannot write artifacts: {0}")]
    Io(#[from] std::io::Error),
    #[error("{count} checked rows fail; see {}", path.display())]
    Violations { count: usize, path: PathBuf },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        use hlmax::Error as E;
        match self {
            RunError::Config(_) => 2,
            RunError::Violations { .. } => 4,
            RunError::Io(_) => 1,
            RunError::Core(e) => match e {
                E::InvalidParameter(_)
                | E::RegimeViolation(_)
                | E::ShapeMismatch(_)
                | E::Embedding { .. }
                | E::CoverageGap(_)
                | E::WindowTooLarge { .. }
                | E::Unsupported(_)
                | E::NonHermitian { .. } => 2,
                E::BudgetExceeded { .. } | E::CapExceeded { .. } | E::McBudget { .. } => 3,
                E::Format(_) | E::Io(_) | E::Json(_) | E::Csv(_) => 1,
            },
        }
    }
}

/// Wall-clock cost of one table row, kept out of the CSV bodies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowRuntime {
    pub row: String,
    pub runtime_ms: u128,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: Command,
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    pub hlmax_version: String,
    pub cli_version: String,
    pub started_unix_ms: u128,
    pub wall_time_ms: u128,
    pub artifacts: Vec<String>,
    pub violations: usize,
    pub summary: String,
    pub row_runtimes: Vec<RowRuntime>,
}

/// What a subcommand hands back to the runner.
pub(crate) struct Outcome {
    pub summary: String,
    pub violations: usize,
    /// CSV of the offending rows, written when `violations > 0`.
    pub violation_rows: Vec<u8>,
    pub row_runtimes: Vec<RowRuntime>,
}

impl Outcome {
    fn clean(summary: String) -> Self {
        Outcome { summary, violations: 0, violation_rows: Vec::new(), row_runtimes: Vec::new() }
    }
}

/// Writes artifacts into the output directory, stamping each with the config hash.
pub(crate) struct Sink {
    dir: PathBuf,
    hash: String,
    written: Vec<String>,
}

impl Sink {
    fn new(dir: &Path, hash: String) -> Result<Self, RunError> {
        fs::create_dir_all(dir)?;
        Ok(Sink { dir: dir.to_path_buf(), hash, written: Vec::new() })
    }

    pub fn csv(&mut self, name: &str, mut body: Vec<u8>) -> Result<(), RunError> {
        if !body.is_empty() && !body.ends_with(b"\n") {
            body.push(b'\n');
        }
        body.extend_from_slice(format!("# config_sha256={}\n", self.hash).as_bytes());
        self.raw(name, &body)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, data: &T) -> Result<(), RunError> {
        #[derive(Serialize)]
        struct Stamped<'a, T> {
            config_sha256: &'a str,
            data: &'a T,
        }
        let text =
            serde_json::to_string_pretty(&Stamped { config_sha256: &self.hash, data }).map_err(hlmax::Error::from)?;
        self.raw(name, format!("{text}\n").as_bytes())
    }

    fn raw(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        fs::write(self.dir.join(name), bytes)?;
        self.written.push(name.to_string());
        Ok(())
    }
}

/// Resolves the config from the flags in `cli` over `env`, then runs.
pub fn run(cli: &Cli, env: &Overrides) -> Result<Manifest, RunError> {
    let cfg = ExperimentConfig::resolve(cli.config.as_deref(), env, &cli.flag_overrides())?;
    execute(cli.command, &cfg, &cli.out)
}

/// Runs `command` with a fully resolved config.
pub fn execute(command: Command, cfg: &ExperimentConfig, out: &Path) -> Result<Manifest, RunError> {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
    let clock = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| RunError::Config(format!("cannot start {} threads: {e}", cfg.threads)))?;

    let mut sink = Sink::new(out, cfg.content_hash())?;
    let toml = format!("{}# config_sha256={}\n", cfg.to_toml(), sink.hash);
    sink.raw("config.toml", toml.as_bytes())?;

    let outcome = pool.install(|| commands::dispatch(command, cfg, &mut sink))?;
    if outcome.violations > 0 {
        sink.csv("violations.csv", outcome.violation_rows)?;
    }

    let mut artifacts = sink.written.clone();
    artifacts.push("manifest.json".into());
    let manifest = Manifest {
        command,
        config_sha256: sink.hash.clone(),
        seed: cfg.seed,
        threads: pool.current_num_threads(),
        hlmax_version: hlmax::VERSION.into(),
        cli_version: env!("CARGO_PKG_VERSION").into(),
        started_unix_ms: started,
        wall_time_ms: clock.elapsed().as_millis(),
        artifacts,
        violations: outcome.violations,
        summary: outcome.summary,
        row_runtimes: outcome.row_runtimes,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(hlmax::Error::from)?;
    fs::write(out.join("manifest.json"), format!("{text}\n"))?;

    if manifest.violations > 0 {
        return Err(RunError::Violations { count: manifest.violations, path: out.join("violations.csv") });
    }
    Ok(manifest)
}
