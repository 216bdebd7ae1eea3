//! `domepilot` command-line tool: prepare, train, evaluate, simulate, predict.

pub mod config;
mod output;

use std::fs::File;
use std::io::{BufReader, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use domepilot_core::controller::{decide_reading, read_frames, DecisionPolicy, DomeController};
use domepilot_core::dtree::Criterion;
use domepilot_core::knn::Scaling;
use domepilot_core::model::{Classifier, Model, ModelKind, SavedModel};
use domepilot_core::pipeline::{evaluate_on_split, model_label, prepare, train, KChoice};
use domepilot_core::weather_data::{
    read_labeled_csv, write_labeled_csv, ConditionTable, LabeledSample, TemperatureGate,
};
use domepilot_core::DomeState;

pub use config::{CommandKind, RunConfig, Settings};
use output::{sha256_file, write_atomic};

#[derive(Debug, Parser)]
#[command(
    name = "domepilot",
    version,
    about = "Weather-driven dome control pipeline"
)]
pub struct Cli {
    /// Optional key = value settings file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse the raw weather CSV, keep one city and write the labeled dataset.
    Prepare(PrepareArgs),
    /// Train a model on the train side of a seeded split.
    Train(TrainArgs),
    /// Evaluate a saved model on the test side of a seeded split.
    Evaluate(EvaluateArgs),
    /// Replay recorded sensor frames through the dome controller.
    Simulate(SimulateArgs),
    /// Decide the dome state for one reading.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub city: Option<String>,
    /// Condition table override (`condition,flag` CSV).
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Cleaning report (JSON).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Expected SHA-256 of the raw CSV.
    #[arg(long)]
    pub sha256: Option<String>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub test_frac: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled CSV written by `prepare`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_kind)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub max_leaves: Option<usize>,
    #[arg(long)]
    pub min_samples_leaf: Option<usize>,
    #[arg(long, value_parser = parse_criterion)]
    pub criterion: Option<Criterion>,
    /// Neighbour count or `auto`.
    #[arg(long, value_parser = parse_k)]
    pub k: Option<KChoice>,
    #[arg(long, value_parser = parse_scaling)]
    pub scaling: Option<Scaling>,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Evaluation report (JSON).
    #[arg(long)]
    pub report: PathBuf,
    /// Confusion matrix (CSV).
    #[arg(long)]
    pub confusion: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Weather CSV with an extra `rain` column.
    #[arg(long)]
    pub frames: PathBuf,
    /// Decision log (JSON lines).
    #[arg(long)]
    pub log: PathBuf,
    /// Where actuator lines go: a file path or `tcp:host:port`.
    #[arg(long)]
    pub sink: Option<String>,
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub temp: f64,
    #[arg(long)]
    pub wind: f64,
    #[arg(long)]
    pub humidity: f64,
    #[arg(long)]
    pub hour: u8,
    #[arg(long)]
    pub visibility: f64,
    #[arg(long)]
    pub barometer: f64,
    #[arg(long, value_parser = parse_rain, action = clap::ArgAction::Set)]
    pub rain: bool,
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: domepilot_core::Error| e.to_string())
}

fn parse_criterion(s: &str) -> Result<Criterion, String> {
    s.parse().map_err(|e: domepilot_core::Error| e.to_string())
}

fn parse_k(s: &str) -> Result<KChoice, String> {
    s.parse().map_err(|e: domepilot_core::Error| e.to_string())
}

fn parse_scaling(s: &str) -> Result<Scaling, String> {
    s.parse().map_err(|e: domepilot_core::Error| e.to_string())
}

fn parse_rain(s: &str) -> Result<bool, String> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(format!("expected 0 or 1, got `{other}`")),
    }
}

impl SplitArgs {
    fn settings(&self) -> Settings {
        Settings {
            test_frac: self.test_frac,
            seed: self.seed,
            ..Settings::default()
        }
    }
}

fn file_settings(cli: &Cli) -> Result<Settings> {
    match &cli.config {
        Some(path) => Settings::load(path),
        None => Ok(Settings::default()),
    }
}

/// Resolves the settings for `cli.command`. For commands that load a model,
/// the kind and the split recorded in the model file seed the defaults.
pub fn resolve(cli: &Cli, saved: Option<&SavedModel>) -> Result<RunConfig> {
    let file = file_settings(cli)?;
    let (command, flags) = match &cli.command {
        Command::Prepare(a) => (
            CommandKind::Prepare,
            Settings {
                city: a.city.clone(),
                table: a.table.clone(),
                sha256: a.sha256.clone(),
                ..Settings::default()
            },
        ),
        Command::Train(a) => (
            CommandKind::Train,
            Settings {
                model: a.model,
                max_leaves: a.max_leaves,
                min_samples_leaf: a.min_samples_leaf,
                criterion: a.criterion,
                k: a.k,
                scaling: a.scaling,
                ..a.split.settings()
            },
        ),
        Command::Evaluate(a) => (CommandKind::Evaluate, a.split.settings()),
        Command::Simulate(a) => (
            CommandKind::Simulate,
            Settings {
                table: a.table.clone(),
                ..Settings::default()
            },
        ),
        Command::Predict(_) => (CommandKind::Predict, Settings::default()),
    };
    let merged = file.overlay(flags);

    let kind = match (saved, command) {
        (Some(s), _) => s.model.kind(),
        (None, CommandKind::Train) => merged
            .model
            .context("train needs --model dt|knn (or `model` in the config file)")?,
        (None, _) => ModelKind::Dt,
    };
    let mut base = RunConfig::defaults(command, kind);
    if let Some(record) = saved.and_then(|s| s.training) {
        base.split = record.split;
    }
    base.apply(&merged)
}

fn load_table(path: Option<&Path>) -> Result<ConditionTable> {
    match path {
        Some(p) => {
            let file = File::open(p).with_context(|| format!("opening table {}", p.display()))?;
            ConditionTable::from_reader(BufReader::new(file))
                .with_context(|| format!("reading table {}", p.display()))
        }
        None => Ok(ConditionTable::builtin()),
    }
}

fn load_model(path: &Path) -> Result<SavedModel> {
    SavedModel::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn load_labeled(path: &Path) -> Result<Vec<LabeledSample>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_labeled_csv(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn cmd_prepare(args: &PrepareArgs, cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let digest = sha256_file(&args.data)?;
    match &cfg.expected_sha256 {
        Some(expected) if *expected != digest => {
            bail!(
                "{} has SHA-256 {digest}, expected {expected}",
                args.data.display()
            )
        }
        Some(_) => log::info!("content hash verified"),
        None => log::warn!(
            "no expected hash given for {}; proceeding unverified (sha256 {digest})",
            args.data.display()
        ),
    }
    let table = load_table(cfg.condition_table_path.as_deref())?;
    let file =
        File::open(&args.data).with_context(|| format!("opening {}", args.data.display()))?;
    let prepared = prepare(BufReader::new(file), &cfg.city, &table)?;
    if prepared.samples.is_empty() {
        bail!("no labeled rows for city `{}`", cfg.city);
    }
    let mut csv = Vec::new();
    write_labeled_csv(&mut csv, &prepared.samples)?;
    write_atomic(&args.out, &csv)?;
    if let Some(path) = &args.report {
        write_atomic(path, &serde_json::to_vec_pretty(&prepared.report)?)?;
    }
    let r = &prepared.report;
    writeln!(
        out,
        "{}: {} rows read, {} rejected, {} in city, {} unmapped, {} labeled ({} open)",
        cfg.city, r.rows_read, r.rejected, r.city_matches, r.unmapped, r.labeled, r.open
    )?;
    Ok(())
}

fn cmd_train(args: &TrainArgs, cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let samples = load_labeled(&args.data)?;
    let saved = train(&samples, &cfg.train_spec())?;
    write_atomic(&args.out, saved.to_json()?.as_bytes())?;
    let record = saved.training.expect("train records its split");
    let detail = match &saved.model {
        Model::Tree(m) => format!("{} leaves", m.leaf_count()),
        Model::Knn(m) => format!("k = {}, scaling {:?}", m.k(), m.scaling()),
    };
    writeln!(
        out,
        "{}: trained on {} of {} rows (test fraction {}, seed {}), {detail}",
        model_label(cfg.model_kind),
        record.n_train,
        record.n_dataset,
        record.split.test_fraction,
        record.split.seed
    )?;
    Ok(())
}

fn cmd_evaluate(
    args: &EvaluateArgs,
    cfg: &RunConfig,
    saved: &SavedModel,
    out: &mut dyn Write,
) -> Result<()> {
    let samples = load_labeled(&args.data)?;
    if let Some(record) = saved.training {
        if record.split != cfg.split || record.n_dataset != samples.len() {
            log::warn!("evaluation split differs from the training split; test rows may have been seen in training");
        }
    }
    let report = evaluate_on_split(&saved.model, &samples, &cfg.split)?;
    write_atomic(&args.report, &serde_json::to_vec_pretty(&report)?)?;
    if let Some(path) = &args.confusion {
        write_atomic(path, report.matrix.to_csv().as_bytes())?;
    }
    write!(out, "{}", report.to_table())?;
    Ok(())
}

fn open_sink(spec: Option<&str>) -> Result<Box<dyn Write>> {
    Ok(match spec {
        None => Box::new(std::io::sink()),
        Some(s) => match s.strip_prefix("tcp:") {
            Some(addr) => {
                Box::new(TcpStream::connect(addr).with_context(|| format!("connecting to {addr}"))?)
            }
            None => Box::new(File::create(s).with_context(|| format!("creating sink {s}"))?),
        },
    })
}

fn cmd_simulate(
    args: &SimulateArgs,
    cfg: &RunConfig,
    saved: &SavedModel,
    out: &mut dyn Write,
) -> Result<()> {
    let table = load_table(cfg.condition_table_path.as_deref())?;
    let file =
        File::open(&args.frames).with_context(|| format!("opening {}", args.frames.display()))?;
    let (frames, parsed) = read_frames(BufReader::new(file))?;
    if parsed.rejected > 0 {
        log::warn!(
            "{} frame rows rejected: {:?}",
            parsed.rejected,
            parsed.rejected_by_field
        );
    }
    let policy = DecisionPolicy {
        model: &saved.model,
        table: &table,
        gate: TemperatureGate::DEFAULT,
    };
    let mut controller = DomeController::new(policy, open_sink(args.sink.as_deref())?);
    let (tx, rx) = mpsc::channel();
    for frame in frames {
        tx.send(frame).expect("receiver is alive");
    }
    drop(tx);
    let (log, failed) = controller.run_queue(rx)?;
    let mut jsonl = Vec::new();
    log.write_jsonl(&mut jsonl)?;
    write_atomic(&args.log, &jsonl)?;
    let open = log.commands().filter(|c| c.dome().is_open()).count();
    writeln!(
        out,
        "{} frames, {} open, {} closed, {} undelivered",
        log.len(),
        open,
        log.len() - open,
        failed
    )?;
    Ok(())
}

fn cmd_predict(args: &PredictArgs, saved: &SavedModel, out: &mut dyn Write) -> Result<()> {
    let features = [
        args.temp,
        args.wind,
        args.humidity,
        f64::from(args.hour),
        args.visibility,
        args.barometer,
    ];
    if features.iter().any(|v| !v.is_finite()) {
        bail!("readings must be finite numbers");
    }
    let prediction: DomeState = saved.model.predict(&features)?;
    let command = decide_reading(prediction, args.temp, args.rain, &TemperatureGate::DEFAULT);
    write!(out, "{}", command.signal().to_line())?;
    Ok(())
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let model_path = match &cli.command {
        Command::Evaluate(a) => Some(&a.model),
        Command::Simulate(a) => Some(&a.model),
        Command::Predict(a) => Some(&a.model),
        _ => None,
    };
    let saved = model_path.map(|p| load_model(p)).transpose()?;
    let cfg = resolve(cli, saved.as_ref())?;
    log::debug!("resolved config: {cfg:?}");
    match &cli.command {
        Command::Prepare(a) => cmd_prepare(a, &cfg, out),
        Command::Train(a) => cmd_train(a, &cfg, out),
        Command::Evaluate(a) => cmd_evaluate(a, &cfg, saved.as_ref().unwrap(), out),
        Command::Simulate(a) => cmd_simulate(a, &cfg, saved.as_ref().unwrap(), out),
        Command::Predict(a) => cmd_predict(a, saved.as_ref().unwrap(), out),
    }
}

/// Runs one command. Results go to `out`, diagnostics to `err`; the return
/// value is the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            1
        }
    }
}
