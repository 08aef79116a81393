//! Command-line front end. Every command resolves its flags into a
//! [`RunConfig`], executes it, and (when given an output directory) records a
//! [`RunArtifact`] that `replay` can re-execute.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::Utc;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use tracing_subscriber::EnvFilter;

use crate::artifact::{
    digest_inputs, digest_outputs, schema, BootstrapRunConfig, CalibrateConfig, FilterConfig,
    PriceConfig, ReportConfig, RunArtifact, RunConfig, SurfaceSource, SynthGenConfig,
    ARTIFACT_FILE, SCHEMA_NAMES, TOOL, VERSION,
};
use crate::bootstrap::{run_bootstrap, BootstrapConfig, BootstrapRun, DEFAULT_TRIALS};
use crate::calibration::{calibrate, Objective};
use crate::error::{Error, Result};
use crate::market_data::{write_meta, write_surface, SurfaceMeta};
use crate::mc_filter::{filter_test, write_filter_report};
use crate::models::{ModelKind, ModelParams, ParamBounds, ParamName, DEFAULT_EPSILON};
use crate::pricing::{price_bates, price_fsv, price_heston, McConfig, PriceResult, PricingRequest};
use crate::robustness::{csv_writer, finish, write_json, write_report, UNDEFINED};
use crate::synthetic::{generate_surface, SynthSpec};

pub const LOG_ENV: &str = "SVROBUST_LOG";

#[derive(Debug, Parser)]
#[command(
    name = "svrobust",
    version,
    about = "Calibration robustness workbench for stochastic volatility models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Price one European call.
    Price(PriceArgs),
    /// Calibrate a model to a quote surface.
    Calibrate(CalibrateArgs),
    /// Bootstrap the option structure and recalibrate per resample.
    BootstrapRun(BootstrapArgs),
    /// Dispersion, scatter, correlation, Q-N and bubble exports of a bootstrap run.
    RobustnessReport(ReportArgs),
    /// Monte-Carlo filtering of parameters of a bootstrap run.
    McFilter(FilterArgs),
    /// Generate a synthetic quote surface from known parameters.
    SynthGen(SynthArgs),
    /// Re-run a command from its artifact and compare outputs.
    Replay(ReplayArgs),
    /// Print a published JSON schema.
    Schema(SchemaArgs),
}

#[derive(Debug, Args)]
struct McArgs {
    /// Monte-Carlo paths (FSV only).
    #[arg(long = "mc-paths", default_value_t = McConfig::default().paths)]
    paths: usize,
    /// Monte-Carlo time steps per year (FSV only).
    #[arg(long = "mc-steps", default_value_t = McConfig::default().steps_per_year)]
    steps: usize,
}

impl McArgs {
    fn config(&self, seed: u64) -> McConfig {
        McConfig {
            paths: self.paths,
            steps_per_year: self.steps,
            seed,
            antithetic: true,
        }
    }
}

#[derive(Debug, Args)]
struct SurfaceArgs {
    /// Quote CSV with header strike,maturity,bid,ask.
    #[arg(long)]
    surface: PathBuf,
    /// JSON sidecar with spot, rate and valuation_date.
    #[arg(long)]
    meta: Option<PathBuf>,
    /// Spot price (overrides the sidecar).
    #[arg(long)]
    spot: Option<f64>,
    /// Risk-free rate (overrides the sidecar).
    #[arg(long)]
    rate: Option<f64>,
}

impl SurfaceArgs {
    fn resolve(&self) -> Result<SurfaceSource> {
        let path = absolute(&self.surface)?;
        let meta = match &self.meta {
            Some(m) => Some(SurfaceMeta::load(m)?),
            None => None,
        };
        let spot = self.spot.or(meta.as_ref().map(|m| m.spot));
        let rate = self.rate.or(meta.as_ref().map(|m| m.rate));
        let (Some(spot), Some(rate)) = (spot, rate) else {
            return Err(Error::Validation(
                "spot and rate are required (use --meta or --spot/--rate)".into(),
            ));
        };
        Ok(SurfaceSource {
            path,
            spot,
            rate,
            valuation_date: meta.and_then(|m| m.valuation_date),
        })
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    model: ModelKind,
    /// JSON file overriding parameter bounds, e.g. {"kappa": [0, 20]}.
    #[arg(long)]
    bounds: Option<PathBuf>,
    /// Objective evaluations per calibration (default 400 per parameter).
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// FSV smoothing factor.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[command(flatten)]
    mc: McArgs,
}

impl FitArgs {
    fn bounds(&self) -> Result<ParamBounds> {
        match &self.bounds {
            Some(path) => ParamBounds::from_override_json(&read_json(path)?),
            None => Ok(ParamBounds::default()),
        }
    }

    fn budget(&self) -> usize {
        self.budget.unwrap_or(400 * self.model.dim())
    }

    fn mc(&self) -> Option<McConfig> {
        (self.model == ModelKind::Fsv).then(|| self.mc.config(self.seed))
    }
}

#[derive(Debug, Args)]
struct PriceArgs {
    #[arg(long)]
    model: ModelKind,
    /// Parameter JSON object, inline or as a file path.
    #[arg(long)]
    params: String,
    #[arg(long)]
    spot: f64,
    #[arg(long)]
    strike: f64,
    #[arg(long)]
    maturity: f64,
    #[arg(long, default_value_t = 0.0)]
    rate: f64,
    /// FSV smoothing factor (overrides the parameter JSON).
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    mc: McArgs,
    /// Directory for the result and the run artifact.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[command(flatten)]
    surface: SurfaceArgs,
    #[command(flatten)]
    fit: FitArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BootstrapArgs {
    #[command(flatten)]
    surface: SurfaceArgs,
    #[command(flatten)]
    fit: FitArgs,
    /// Number of bootstrap trials M.
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    /// Parallel trial cap.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// bootstrap_run.json written by bootstrap-run.
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FilterArgs {
    #[arg(long)]
    run: PathBuf,
    /// Parameter to test; may be repeated.
    #[arg(long = "param")]
    params: Vec<String>,
    /// Shortcut for --param lambda.
    #[arg(long)]
    jumps: bool,
    /// Shortcut for --param hurst.
    #[arg(long)]
    hurst: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// SynthSpec JSON file.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    /// artifact.json of the run to repeat.
    artifact: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Thread cap for the replay (bootstrap runs only).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct SchemaArgs {
    /// One of the published schema names; omit to list them.
    name: Option<String>,
}

fn absolute(path: &Path) -> Result<PathBuf> {
    fs::canonicalize(path).map_err(|e| Error::io(path, e))
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

fn parse_params(model: ModelKind, text: &str, epsilon: Option<f64>) -> Result<ModelParams> {
    let value = if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| Error::Validation(format!("--params: {e}")))?
    } else {
        read_json(Path::new(text))?
    };
    let mut params = ModelParams::from_json(model, value)
        .map_err(|e| Error::Validation(format!("--params: {e}")))?;
    if let (ModelParams::Fsv(p), Some(eps)) = (&mut params, epsilon) {
        p.epsilon = eps;
    }
    Ok(params)
}

/// Turns parsed flags into a resolved configuration.
fn resolve(command: &Command) -> Result<(RunConfig, Option<PathBuf>, Option<usize>)> {
    Ok(match command {
        Command::Price(a) => {
            let cfg = PriceConfig {
                params: parse_params(a.model, &a.params, a.epsilon)?,
                request: PricingRequest {
                    spot: a.spot,
                    strike: a.strike,
                    maturity: a.maturity,
                    rate: a.rate,
                },
                mc: a.mc.config(a.seed),
            };
            (RunConfig::Price(cfg), a.out.clone(), None)
        }
        Command::Calibrate(a) => {
            let cfg = CalibrateConfig {
                surface: a.surface.resolve()?,
                model: a.fit.model,
                bounds: a.fit.bounds()?,
                budget: a.fit.budget(),
                seed: a.fit.seed,
                epsilon: a.fit.epsilon,
                mc: a.fit.mc(),
            };
            (RunConfig::Calibrate(cfg), Some(a.out.clone()), None)
        }
        Command::BootstrapRun(a) => {
            let mut bootstrap =
                BootstrapConfig::new(a.fit.model, a.trials, a.fit.budget(), a.fit.seed);
            bootstrap.epsilon = a.fit.epsilon;
            bootstrap.mc = a.fit.mc();
            bootstrap.bounds = a.fit.bounds()?;
            let cfg = BootstrapRunConfig {
                surface: a.surface.resolve()?,
                bootstrap,
                workers: a.workers,
            };
            (RunConfig::BootstrapRun(cfg), Some(a.out.clone()), a.workers)
        }
        Command::RobustnessReport(a) => (
            RunConfig::RobustnessReport(ReportConfig {
                run: absolute(&a.run)?,
            }),
            Some(a.out.clone()),
            None,
        ),
        Command::McFilter(a) => {
            let mut params = a.params.clone();
            if a.jumps {
                params.push(ParamName::Lambda.as_str().to_string());
            }
            if a.hurst {
                params.push(ParamName::Hurst.as_str().to_string());
            }
            if params.is_empty() {
                return Err(Error::Validation(
                    "no parameter given (use --param, --jumps or --hurst)".into(),
                ));
            }
            for p in &params {
                p.parse::<ParamName>()?;
            }
            (
                RunConfig::McFilter(FilterConfig {
                    run: absolute(&a.run)?,
                    params,
                }),
                Some(a.out.clone()),
                None,
            )
        }
        Command::SynthGen(a) => {
            let spec: SynthSpec = serde_json::from_value(read_json(&a.spec)?)
                .map_err(|e| Error::Validation(format!("{}: {e}", a.spec.display())))?;
            (
                RunConfig::SynthGen(SynthGenConfig { spec }),
                Some(a.out.clone()),
                None,
            )
        }
        Command::Replay(_) | Command::Schema(_) => unreachable!("handled before resolution"),
    })
}

/// Files written and text for standard output.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub stdout: String,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load_run(path: &Path) -> Result<BootstrapRun> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

/// Executes a resolved configuration, writing outputs under `out`.
pub fn execute(config: &RunConfig, out: Option<&Path>, workers: Option<usize>) -> Result<Outcome> {
    if let Some(dir) = out {
        create_dir(dir)?;
    }
    let dir = || out.expect("command requires an output directory");
    let mut outcome = Outcome::default();
    match config {
        RunConfig::Price(c) => {
            let value = match &c.params {
                ModelParams::Heston(p) => PriceResult {
                    model: ModelKind::Heston,
                    price: price_heston(&c.request, p)?,
                    std_error: None,
                    floor_hit_fraction: None,
                },
                ModelParams::Bates(p) => PriceResult {
                    model: ModelKind::Bates,
                    price: price_bates(&c.request, p)?,
                    std_error: None,
                    floor_hit_fraction: None,
                },
                ModelParams::Fsv(p) => {
                    let r = price_fsv(&c.request, p, &c.mc)?;
                    if let Some(w) = &r.warning {
                        tracing::warn!("{w}");
                    }
                    PriceResult {
                        model: ModelKind::Fsv,
                        price: r.price,
                        std_error: Some(r.std_error),
                        floor_hit_fraction: Some(r.floor_hit_fraction),
                    }
                }
            };
            if let Some(d) = out {
                let path = d.join("price.json");
                write_json(&path, &value)?;
                outcome.files.push(path);
            }
            outcome.stdout = serde_json::to_string_pretty(&value)?;
        }
        RunConfig::Calibrate(c) => {
            let surface = c.surface.load()?;
            let mut obj = Objective::new(surface, c.model)?.with_epsilon(c.epsilon)?;
            if let Some(mc) = c.mc {
                obj = obj.with_mc(mc)?;
            }
            let result = calibrate(&obj, &c.bounds, c.budget, c.seed)?;
            tracing::info!(
                aare = result.aare,
                objective = result.objective_value,
                converged = result.converged,
                "calibration finished"
            );
            let path = dir().join("calibration.json");
            write_json(&path, &result)?;
            outcome.files.push(path);
            outcome.stdout = serde_json::to_string_pretty(&result)?;
        }
        RunConfig::BootstrapRun(c) => {
            let surface = c.surface.load()?;
            let run = run_bootstrap(&surface, &c.bootstrap, workers)?;
            tracing::info!(
                trials = run.trials.len(),
                failures = run.failures(),
                "bootstrap finished"
            );
            let path = dir().join("bootstrap_run.json");
            write_json(&path, &run)?;
            outcome.files.push(path);
            let path = dir().join("trials.csv");
            write_trials_csv(&run, &path)?;
            outcome.files.push(path);
        }
        RunConfig::RobustnessReport(c) => {
            let run = load_run(&c.run)?;
            outcome.files = write_report(&run, dir())?;
        }
        RunConfig::McFilter(c) => {
            let run = load_run(&c.run)?;
            let mut summary = Vec::new();
            for p in &c.params {
                let report = filter_test(&run, p)?;
                summary.push(json!({
                    "param": report.param,
                    "ks_statistic": report.ks_statistic,
                    "p_value": report.p_value,
                    "reject_at_5pct": report.reject_at_5pct,
                }));
                outcome.files.extend(write_filter_report(&report, dir())?);
            }
            outcome.stdout = serde_json::to_string_pretty(&summary)?;
        }
        RunConfig::SynthGen(c) => {
            let surface = generate_surface(&c.spec)?;
            let path = dir().join("surface.csv");
            write_surface(&surface, &path)?;
            outcome.files.push(path);
            let path = dir().join("surface.json");
            write_meta(&surface.meta(), &path)?;
            outcome.files.push(path);
        }
    }
    if outcome.stdout.is_empty() {
        let files: Vec<String> = outcome
            .files
            .iter()
            .map(|p| p.display().to_string())
            .collect();
        outcome.stdout = serde_json::to_string_pretty(&files)?;
    }
    Ok(outcome)
}

/// `trial,<params>,fval,aare`; failed trials carry the undefined marker.
pub fn write_trials_csv(run: &BootstrapRun, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["trial".to_string()];
    header.extend(
        run.config
            .model
            .params()
            .iter()
            .map(|p| p.as_str().to_string()),
    );
    header.push("fval".into());
    header.push("aare".into());
    w.write_record(&header)?;
    let dim = run.config.model.dim();
    for t in &run.trials {
        let mut rec = vec![t.index.to_string()];
        match (&t.calibration, t.full_aare) {
            (Some(c), Some(aare)) => {
                rec.extend(c.theta_hat.to_vec().iter().map(f64::to_string));
                rec.push(c.objective_value.to_string());
                rec.push(aare.to_string());
            }
            _ => rec.extend(std::iter::repeat_n(UNDEFINED.to_string(), dim + 2)),
        }
        w.write_record(&rec)?;
    }
    finish(w, path)
}

/// Executes and, when an output directory is set, writes `artifact.json`.
pub fn run_recorded(
    config: &RunConfig,
    out: Option<&Path>,
    workers: Option<usize>,
) -> Result<(Outcome, Option<RunArtifact>)> {
    let started_at = Utc::now();
    let inputs = digest_inputs(&config.inputs())?;
    let outcome = execute(config, out, workers)?;
    let Some(dir) = out else {
        return Ok((outcome, None));
    };
    let artifact = RunArtifact {
        tool: TOOL.to_string(),
        version: VERSION.to_string(),
        config: config.clone(),
        inputs,
        outputs: digest_outputs(dir, &outcome.files)?,
        started_at,
        finished_at: Utc::now(),
    };
    artifact.write(dir.join(ARTIFACT_FILE))?;
    Ok((outcome, Some(artifact)))
}

/// Re-runs a recorded configuration and compares output digests.
pub fn replay(artifact_path: &Path, out: &Path, workers: Option<usize>) -> Result<(bool, Value)> {
    let recorded = RunArtifact::load(artifact_path)?;
    let current = digest_inputs(&recorded.config.inputs())?;
    for (was, now) in recorded.inputs.iter().zip(&current) {
        if was.sha256 != now.sha256 {
            return Err(Error::Validation(format!(
                "input {} changed since the recorded run",
                was.path
            )));
        }
    }
    let (_, fresh) = run_recorded(&recorded.config, Some(out), workers)?;
    let fresh = fresh.expect("output directory given");
    let mut identical = recorded.outputs.len() == fresh.outputs.len();
    let mut files = Vec::new();
    for was in &recorded.outputs {
        let now = fresh.outputs.iter().find(|f| f.path == was.path);
        let same = now.is_some_and(|f| f.sha256 == was.sha256);
        identical &= same;
        files.push(json!({
            "path": was.path,
            "recorded": was.sha256,
            "replayed": now.map(|f| f.sha256.clone()),
            "identical": same,
        }));
    }
    Ok((
        identical,
        json!({ "command": recorded.config.name(), "identical": identical, "files": files }),
    ))
}

fn init_logging() {
    let filter = EnvFilter::try_from_env(LOG_ENV).unwrap_or_else(|_| EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        1
    } else {
        2
    }
}

/// Parses `args` (program name first) and runs the command. Returns the exit
/// status: 0 success, 1 usage or validation error, 2 numerical or run error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    init_logging();
    let result = match &cli.command {
        Command::Schema(a) => match &a.name {
            None => {
                emit(&SCHEMA_NAMES.join("\n"));
                Ok(0)
            }
            Some(name) => match schema(name) {
                Some(s) => serde_json::to_string_pretty(&s)
                    .map(|t| {
                        emit(&t);
                        0
                    })
                    .map_err(Error::from),
                None => Err(Error::Validation(format!(
                    "unknown schema {name}; available: {}",
                    SCHEMA_NAMES.join(", ")
                ))),
            },
        },
        Command::Replay(a) => replay(&a.artifact, &a.out, a.workers).map(|(same, report)| {
            emit(&serde_json::to_string_pretty(&report).unwrap_or_default());
            if same {
                0
            } else {
                tracing::error!("replayed outputs differ from the recorded run");
                2
            }
        }),
        command => resolve(command).and_then(|(config, out, workers)| {
            let (outcome, _) = run_recorded(&config, out.as_deref(), workers)?;
            emit(&outcome.stdout);
            Ok(0)
        }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
