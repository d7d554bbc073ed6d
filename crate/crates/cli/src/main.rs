//! `irm-lab`: run, plot, calibrate and replay interest rate model simulations.
//!
//! Exit codes: 0 ok, 1 usage, 2 invalid input, 3 runtime failure.

mod plot;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use irm_core::calibrate::{calibrate, CalibrationError, CalibrationFile, SearchSpace};
use irm_core::config::{ConfigError, RunConfig};
use irm_core::engine::{self, compute_metrics, EngineError, SimTrace};
use irm_core::scenario::ScenarioError;
use irm_core::{Backend, Decimal};

#[derive(Parser)]
#[command(name = "irm-lab", version, about = "Deterministic interest rate model simulation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a config and write the trace CSV and metrics JSON.
    Run(RunArgs),
    /// Render a trace CSV as a static SVG chart.
    Plot(PlotArgs),
    /// Grid-search PID shape and gains against rate targets.
    Calibrate(CalibrateArgs),
    /// Re-execute a recorded trace and check every cell.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Trace CSV destination (default: the config's output.trace, else stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Metrics JSON destination (default: the config's output.metrics, else stdout).
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[arg(long)]
    backend: Option<Backend>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the settling band.
    #[arg(long)]
    band: Option<Decimal>,
}

#[derive(Args)]
struct PlotArgs {
    trace: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    targets: PathBuf,
    /// Search space file; defaults to the targets file's `search` block.
    #[arg(long)]
    space: Option<PathBuf>,
    /// Report JSON destination (default: stdout). The miss table goes to stderr.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, default_value = "fixed")]
    backend: Backend,
    /// Rewrite the trace from the config on the fixed backend instead of checking it.
    #[arg(long)]
    regen_golden: bool,
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Failure::Runtime(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Scenario(ScenarioError::Invalid(_))
            | EngineError::Strategy { .. }
            | EngineError::NoStrategies
            | EngineError::DuplicateName(_)
            | EngineError::ClosedLoopArity(_)
            | EngineError::EmptyTrace
            | EngineError::Parse { .. }
            | EngineError::StrategyMismatch { .. } => Failure::Invalid(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<CalibrationError> for Failure {
    fn from(e: CalibrationError) -> Self {
        match e {
            CalibrationError::Config(c) => c.into(),
            CalibrationError::Engine(c) => c.into(),
            CalibrationError::Numeric(_) => Failure::Runtime(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let fail = |e: std::io::Error| Failure::Runtime(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    // Temp files are created 0600; give outputs the usual mode, or keep the target's.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        let perms = std::fs::metadata(path)
            .map(|m| m.permissions())
            .unwrap_or_else(|_| std::fs::Permissions::from_mode(0o644));
        std::fs::set_permissions(tmp.path(), perms).map_err(fail)?;
    }
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => write_atomic(p, bytes),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Failure::Runtime(format!("cannot write to stdout: {e}"))),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<Vec<u8>, Failure> {
    let mut out = serde_json::to_vec_pretty(v).map_err(|e| Failure::Runtime(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

/// Output paths in a config are relative to the config file.
fn beside(config: &Path, p: &Path) -> PathBuf {
    match config.parent() {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.scenario.seed = seed;
    }
    if let Some(band) = args.band {
        cfg.band = band;
    }
    cfg.validate()?;
    let backend = args.backend.unwrap_or(cfg.backend);
    let trace = engine::run(&cfg.strategies, &cfg.scenario, backend)?;
    let metrics = compute_metrics(&trace, cfg.metrics_target(), cfg.band)?;

    let trace_out = args.out.or_else(|| cfg.output.trace.as_ref().map(|p| beside(&args.config, p)));
    let metrics_out = args.metrics.or_else(|| cfg.output.metrics.as_ref().map(|p| beside(&args.config, p)));
    emit(trace_out.as_deref(), trace.to_csv_string().as_bytes())?;
    let metrics_json = to_json(&metrics)?;
    match (metrics_out, &trace_out) {
        (Some(p), _) => write_atomic(&p, &metrics_json),
        // Trace already went to stdout; keep it parseable.
        (None, None) => {
            let _ = std::io::stderr().write_all(&metrics_json);
            Ok(())
        }
        (None, Some(_)) => emit(None, &metrics_json),
    }
}

fn cmd_plot(args: PlotArgs) -> Result<(), Failure> {
    let trace = engine::read_trace_file(&args.trace)?;
    if trace.is_empty() {
        return Err(EngineError::EmptyTrace.into());
    }
    emit(args.out.as_deref(), plot::render(&trace).as_bytes())
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<(), Failure> {
    let file = CalibrationFile::load(&args.targets)?;
    let space = match (&args.space, &file.search) {
        (Some(p), _) => SearchSpace::load(p)?,
        (None, Some(s)) => s.clone(),
        (None, None) => {
            return Err(Failure::Invalid(
                "no search space: pass --space or add a search block to the targets file".into(),
            ))
        }
    };
    let report = calibrate(&file, &space)?;
    eprint!("{}", report.table());
    eprintln!("evaluated {} grid points, max relative miss {}", report.evaluated, report.objective);
    emit(args.out.as_deref(), &to_json(&report)?)?;
    if report.feasible {
        Ok(())
    } else {
        Err(Failure::Runtime("targets infeasible on this grid; best point reported".into()))
    }
}

fn cmd_replay(args: ReplayArgs) -> Result<(), Failure> {
    let cfg = RunConfig::load(&args.config)?;
    if args.regen_golden {
        let trace = engine::run(&cfg.strategies, &cfg.scenario, Backend::Fixed)?;
        write_atomic(&args.trace, trace.to_csv_string().as_bytes())?;
        println!("regenerated {} ({} rows)", args.trace.display(), trace.len());
        return Ok(());
    }
    let recorded: SimTrace = engine::read_trace_file(&args.trace)?;
    let fresh = engine::replay(&recorded, &cfg.strategies, args.backend)?;
    println!("{}: {} rows replay clean", args.trace.display(), fresh.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Replay(a) => cmd_replay(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
