//! Command-line front end. [`run`] parses arguments, executes one
//! subcommand and returns the process exit code:
//! 0 success, 1 usage, 2 data, 3 numerical/training.
//!
//! Tunable settings resolve as flag > `--config` file (flat `key=value`) >
//! built-in default. Every run writes a JSON manifest next to its output.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bench::{self, run_benchmark, BenchConfig, Method};
use crate::data::{attach_truth_csv, load_csv, write_csv, write_truth_csv, Dataset, Mode};
use crate::error::{Error, Result};
use crate::io::AnyModel;
use crate::losses::{CrLossParams, LossParams, Objective};
use crate::metrics::evaluate;
use crate::models::{
    mc_dropout_intervals, train_competing, train_single, CrDeepCentConfig, DeepCentConfig, SurvivalModel,
};
use crate::sim::{calibrate_theta, CrSimConfig, Design, SimConfig};
use crate::tuning::{grid_search_cv, write_report, Candidate, Grid};
use crate::weibull::{fit_weibull, CrWeibullModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        Error::Shape(_)
        | Error::Input(_)
        | Error::Parse { .. }
        | Error::Undefined(_)
        | Error::ModeMismatch { .. }
        | Error::Format(_)
        | Error::Io(_) => EXIT_DATA,
        Error::Numerical { .. } | Error::Training(_) | Error::Fit(_) | Error::Calibration { .. } => EXIT_NUMERICAL,
    }
}

#[derive(Parser, Debug)]
#[command(name = "deepcent", version, about = "Censored event-time prediction networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a dataset from the quadratic log-risk design.
    Simulate(SimulateArgs),
    /// Fit a model and save it.
    Train(TrainArgs),
    /// Predict event times, optionally with MC-dropout intervals.
    Predict(PredictArgs),
    /// Per-cause C-index and MSE as JSON.
    Evaluate(EvaluateArgs),
    /// k-fold grid search.
    Tune(TuneArgs),
    /// Replicated simulation study in long CSV format.
    Benchmark(BenchmarkArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Flat `key=value` file supplying defaults for unset flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Manifest path (default: `<out>.manifest.json`).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct NetFlags {
    /// Hidden widths, e.g. `32,32` (trunk widths for competing models).
    #[arg(long)]
    hidden: Option<String>,
    /// Head widths for competing models, e.g. `16` (`none` for linear heads).
    #[arg(long)]
    heads: Option<String>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lambda0: Option<f64>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    lambda3: Option<f64>,
    #[arg(long)]
    lambda4: Option<f64>,
    /// RankDeepSurv MSE weight.
    #[arg(long)]
    alpha: Option<f64>,
    /// RankDeepSurv ranking weight.
    #[arg(long)]
    beta: Option<f64>,
    /// `true` or `false`.
    #[arg(long)]
    standardize: Option<bool>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    n: Option<usize>,
    /// Target censoring proportion in [0, 1).
    #[arg(long)]
    censoring: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Write latent event and censoring times to this sidecar.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// deepcent, rankdeepsurv-loss, weibull, cr-deepcent or cr-weibull.
    #[arg(long)]
    method: Option<String>,
    /// Force the data mode instead of inferring it from the event column.
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    net: NetFlags,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// MC-dropout intervals: number of draws and coverage level.
    #[arg(long, num_args = 2, value_names = ["B", "LEVEL"])]
    interval: Option<Vec<String>>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Latent-time sidecar; enables true-time MSE.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct TuneArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    folds: Option<usize>,
    /// Maximum number of grid points, sampled without replacement.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Alternatives separated by `;`, e.g. `32;32,32`.
    #[arg(long)]
    hidden_grid: Option<String>,
    #[arg(long)]
    heads_grid: Option<String>,
    #[arg(long)]
    dropout_grid: Option<String>,
    #[arg(long)]
    epochs_grid: Option<String>,
    #[arg(long)]
    lr_grid: Option<String>,
    #[arg(long)]
    lambda_grid: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    censoring: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated method names.
    #[arg(long)]
    methods: Option<String>,
    /// Epoch override for every network method.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

/// Flag > config file > default lookup. Keys left unread are rejected.
struct Settings {
    file: HashMap<String, String>,
    used: RefCell<HashSet<String>>,
}

impl Settings {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut file = HashMap::new();
        if let Some(p) = path {
            let text = fs::read_to_string(p)?;
            for (i, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| Error::Config(format!(
                    "config line {}: expected key=value",
                    i + 1
                )))?;
                file.insert(k.trim().replace('_', "-"), v.trim().to_string());
            }
        }
        Ok(Settings {
            file,
            used: RefCell::new(HashSet::new()),
        })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().insert(key.to_string());
        self.file.get(key).map(String::as_str)
    }

    fn get<T: FromStr>(&self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        Ok(self.opt(key, flag)?.unwrap_or(default))
    }

    fn opt<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        let from_file = self.raw(key);
        if flag.is_some() {
            return Ok(flag);
        }
        from_file
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Config(format!("config key `{key}`: cannot parse `{v}`")))
            })
            .transpose()
    }

    fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        let mut unknown: Vec<&String> = self.file.keys().filter(|k| !used.contains(*k)).collect();
        unknown.sort();
        match unknown.first() {
            Some(k) => Err(Error::Config(format!("unknown config key `{k}`"))),
            None => Ok(()),
        }
    }
}

fn parse_widths(s: &str) -> Result<Vec<usize>> {
    let s = s.trim();
    if s.is_empty() || s == "none" {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|w| {
            w.trim()
                .parse::<usize>()
                .ok()
                .filter(|&w| w > 0)
                .ok_or_else(|| Error::Config(format!("bad layer width `{w}`")))
        })
        .collect()
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad {what} value `{v}`")))
        })
        .collect()
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    config: Value,
    seed: u64,
    artifacts: BTreeMap<String, String>,
    started_unix: f64,
    wall_clock_seconds: f64,
    version: &'static str,
}

struct Run {
    command: &'static str,
    started: Instant,
    started_unix: f64,
    artifacts: BTreeMap<String, String>,
}

impl Run {
    fn new(command: &'static str) -> Self {
        Run {
            command,
            started: Instant::now(),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs_f64())
                .unwrap_or(0.0),
            artifacts: BTreeMap::new(),
        }
    }

    fn artifact(&mut self, role: &str, path: &Path) {
        self.artifacts.insert(role.to_string(), path.display().to_string());
    }

    fn finish(self, common: &Common, out: &Path, config: Value, seed: u64) -> Result<()> {
        let path = common.manifest.clone().unwrap_or_else(|| {
            let mut p = out.as_os_str().to_owned();
            p.push(".manifest.json");
            PathBuf::from(p)
        });
        let manifest = RunManifest {
            command: self.command.to_string(),
            config,
            seed,
            artifacts: self.artifacts,
            started_unix: self.started_unix,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            version: crate::VERSION,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(path, text + "\n")?;
        Ok(())
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let mut run = Run::new("simulate");
    let s = Settings::load(a.common.config.as_deref())?;
    let mode = s.get("mode", a.mode, Mode::Noncompeting)?;
    let n = s.get("n", a.n, 500)?;
    let censoring = s.get("censoring", a.censoring, 0.4)?;
    let seed = s.get("seed", a.seed, 0)?;
    s.finish()?;
    if !(0.0..1.0).contains(&censoring) {
        return Err(Error::Config(format!("censoring {censoring} outside [0, 1)")));
    }
    let design = match mode {
        Mode::Noncompeting => Design::Noncompeting(SimConfig::standard(n, f64::INFINITY, seed)),
        Mode::Competing => Design::Competing(CrSimConfig::standard(n, f64::INFINITY, seed)),
    };
    let theta = if censoring == 0.0 {
        f64::INFINITY
    } else {
        calibrate_theta(&design, censoring, 0.005)?
    };
    let ds = design.with_theta(theta).simulate()?;
    write_csv(&ds, &a.out)?;
    run.artifact("data", &a.out);
    if let Some(t) = &a.truth {
        write_truth_csv(&ds, t)?;
        run.artifact("truth", t);
    }
    let config = json!({
        "mode": mode, "n": n, "censoring": censoring,
        "theta": if theta.is_finite() { json!(theta) } else { json!("inf") },
    });
    run.finish(&a.common, &a.out, config, seed)
}

fn load_data(path: &Path, mode: Option<Mode>) -> Result<Dataset> {
    let ds = load_csv(path)?;
    match mode {
        Some(m) => ds.with_mode(m),
        None => Ok(ds),
    }
}

fn resolve_single(s: &Settings, f: &NetFlags, seed: u64, rank: bool) -> Result<DeepCentConfig> {
    let d = DeepCentConfig::default();
    let hidden: Option<String> = s.opt("hidden", f.hidden.clone())?;
    let loss = if rank {
        Objective::Rankdeepsurv {
            alpha: s.get("alpha", f.alpha, 1.0)?,
            beta: s.get("beta", f.beta, 1.0)?,
        }
    } else {
        Objective::Deepcent(LossParams {
            lambda1: s.get("lambda1", f.lambda1, 1.0)?,
            lambda2: s.get("lambda2", f.lambda2, 1.0)?,
        })
    };
    let cfg = DeepCentConfig {
        hidden_widths: hidden.map(|h| parse_widths(&h)).transpose()?.unwrap_or(d.hidden_widths),
        dropout: s.get("dropout", f.dropout, d.dropout)?,
        epochs: s.get("epochs", f.epochs, d.epochs)?,
        learning_rate: s.get("lr", f.lr, d.learning_rate)?,
        loss,
        standardize: s.get("standardize", f.standardize, d.standardize)?,
        seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_competing(s: &Settings, f: &NetFlags, seed: u64) -> Result<CrDeepCentConfig> {
    let d = CrDeepCentConfig::default();
    let hidden: Option<String> = s.opt("hidden", f.hidden.clone())?;
    let heads: Option<String> = s.opt("heads", f.heads.clone())?;
    let cfg = CrDeepCentConfig {
        shared_widths: hidden.map(|h| parse_widths(&h)).transpose()?.unwrap_or(d.shared_widths),
        head_widths: heads.map(|h| parse_widths(&h)).transpose()?.unwrap_or(d.head_widths),
        dropout: s.get("dropout", f.dropout, d.dropout)?,
        epochs: s.get("epochs", f.epochs, d.epochs)?,
        learning_rate: s.get("lr", f.lr, d.learning_rate)?,
        loss: CrLossParams {
            lambda0: s.get("lambda0", f.lambda0, 1.0)?,
            lambda1: s.get("lambda1", f.lambda1, 1.0)?,
            lambda2: s.get("lambda2", f.lambda2, 1.0)?,
            lambda3: s.get("lambda3", f.lambda3, 1.0)?,
            lambda4: s.get("lambda4", f.lambda4, 1.0)?,
        },
        standardize: s.get("standardize", f.standardize, d.standardize)?,
        seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn mode_mismatch(model: Mode, data: Mode) -> Error {
    Error::ModeMismatch {
        model: model.to_string(),
        data: data.to_string(),
    }
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut run = Run::new("train");
    let s = Settings::load(a.common.config.as_deref())?;
    let mode = s.opt("mode", a.mode)?;
    let seed = s.get("seed", a.seed, 0)?;
    let method: Option<String> = s.opt("method", a.method.clone())?;
    let ds = load_data(&a.data, mode)?;
    let method = match method {
        Some(m) => Method::from_str(&m)?,
        None => match ds.mode() {
            Mode::Noncompeting => Method::Deepcent,
            Mode::Competing => Method::CrDeepcent,
        },
    };
    // Noncompeting data has no cause-2 events, so it can feed a competing model.
    let ds = match (method.mode(), ds.mode()) {
        (Mode::Noncompeting, Mode::Competing) => return Err(mode_mismatch(method.mode(), ds.mode())),
        (Mode::Competing, Mode::Noncompeting) => ds.with_mode(Mode::Competing)?,
        _ => ds,
    };
    let names = ds.covariate_names().to_vec();
    let (model, config) = match method {
        Method::Deepcent | Method::RankdeepsurvLoss => {
            let cfg = resolve_single(&s, &a.net, seed, method == Method::RankdeepsurvLoss)?;
            s.finish()?;
            let m = train_single(&ds, &cfg)?;
            (AnyModel::Deepcent(m), to_json(&cfg))
        }
        Method::CrDeepcent => {
            let cfg = resolve_competing(&s, &a.net, seed)?;
            s.finish()?;
            (AnyModel::CrDeepcent(train_competing(&ds, &cfg)?), to_json(&cfg))
        }
        Method::Weibull => {
            s.finish()?;
            let model = fit_weibull(&ds)?;
            (
                AnyModel::Weibull {
                    model,
                    covariate_names: names,
                },
                json!({}),
            )
        }
        Method::CrWeibull => {
            s.finish()?;
            let model = CrWeibullModel::fit(&ds)?;
            (
                AnyModel::CrWeibull {
                    model,
                    covariate_names: names,
                },
                json!({}),
            )
        }
    };
    model.save(&a.out)?;
    run.artifact("data", &a.data);
    run.artifact("model", &a.out);
    let config = json!({ "method": method.name(), "mode": ds.mode(), "model": config });
    run.finish(&a.common, &a.out, config, seed)
}

/// Load data for an existing model, checking mode and covariate columns.
fn data_for_model(model: &AnyModel, path: &Path) -> Result<Dataset> {
    let ds = load_csv(path)?;
    let ds = match (model.mode(), ds.mode()) {
        (Mode::Noncompeting, Mode::Competing) => return Err(mode_mismatch(model.mode(), ds.mode())),
        (Mode::Competing, Mode::Noncompeting) => ds.with_mode(Mode::Competing)?,
        _ => ds,
    };
    if ds.covariate_names() != model.covariate_names() {
        return Err(Error::Input(format!(
            "data covariates [{}] do not match model covariates [{}]",
            ds.covariate_names().join(", "),
            model.covariate_names().join(", ")
        )));
    }
    Ok(ds)
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let mut run = Run::new("predict");
    let s = Settings::load(a.common.config.as_deref())?;
    let seed = s.get("seed", a.seed, 0)?;
    s.finish()?;
    let model = AnyModel::load(&a.model)?;
    let ds = data_for_model(&model, &a.data)?;
    let x = ds.covariates();
    let interval = match &a.interval {
        Some(v) => {
            let b: usize = v[0]
                .parse()
                .map_err(|_| Error::Config(format!("interval draws `{}` is not an integer", v[0])))?;
            let level: f64 = v[1]
                .parse()
                .map_err(|_| Error::Config(format!("interval level `{}` is not a number", v[1])))?;
            if !(level > 0.0 && level < 1.0) {
                return Err(Error::Config(format!("interval level {level} outside (0, 1)")));
            }
            Some((b, level))
        }
        None => None,
    };
    let points = model.predict_all(x.view())?;
    let bands = interval
        .map(|(b, level)| mc_dropout_intervals(&model, x.view(), b, 1.0 - level, seed))
        .transpose()?;

    let mut w = create(&a.out)?;
    let k = points.len();
    let mut header = vec!["id".to_string()];
    if k == 1 {
        header.push("prediction".into());
        if bands.is_some() {
            header.extend(["lower".into(), "upper".into()]);
        }
    } else {
        header.extend((1..=k).map(|c| format!("prediction{c}")));
        if bands.is_some() {
            for c in 1..=k {
                header.extend([format!("lower{c}"), format!("upper{c}")]);
            }
        }
    }
    writeln!(w, "{}", header.join(","))?;
    for i in 0..ds.len() {
        let mut row = vec![i.to_string()];
        row.extend(points.iter().map(|p| p[i].to_string()));
        if let Some(b) = &bands {
            for cause in b {
                row.push(cause[i].lower.to_string());
                row.push(cause[i].upper.to_string());
            }
        }
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    run.artifact("model", &a.model);
    run.artifact("data", &a.data);
    run.artifact("predictions", &a.out);
    let config = json!({
        "interval": interval.map(|(b, level)| json!({ "draws": b, "level": level })),
    });
    run.finish(&a.common, &a.out, config, seed)
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let mut run = Run::new("evaluate");
    let s = Settings::load(a.common.config.as_deref())?;
    s.finish()?;
    let model = AnyModel::load(&a.model)?;
    let mut ds = data_for_model(&model, &a.data)?;
    if let Some(t) = &a.truth {
        ds = attach_truth_csv(ds, t)?;
        run.artifact("truth", t);
    }
    let x = ds.covariates();
    let report = evaluate(&ds, &model.predict_all(x.view())?, model.mode())?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(&a.out, text + "\n")?;
    run.artifact("model", &a.model);
    run.artifact("data", &a.data);
    run.artifact("report", &a.out);
    run.finish(&a.common, &a.out, json!({ "model_kind": model.kind() }), 0)
}

fn cmd_tune(a: TuneArgs) -> Result<()> {
    let mut run = Run::new("tune");
    let s = Settings::load(a.common.config.as_deref())?;
    let mode = s.opt("mode", a.mode)?;
    let folds = s.get("folds", a.folds, 5)?;
    let budget = s.opt("budget", a.budget)?;
    let seed = s.get("seed", a.seed, 0)?;
    let d = Grid::default();
    let grid_of = |key: &str, flag: &Option<String>| s.opt::<String>(key, flag.clone());
    let widths_grid = |v: Option<String>, default: Vec<Vec<usize>>| -> Result<Vec<Vec<usize>>> {
        match v {
            Some(g) => g.split(';').map(parse_widths).collect(),
            None => Ok(default),
        }
    };
    let grid = Grid {
        hidden_widths: widths_grid(grid_of("hidden-grid", &a.hidden_grid)?, d.hidden_widths)?,
        head_widths: widths_grid(grid_of("heads-grid", &a.heads_grid)?, d.head_widths)?,
        dropout: grid_of("dropout-grid", &a.dropout_grid)?
            .map(|g| parse_list(&g, "dropout"))
            .transpose()?
            .unwrap_or(d.dropout),
        epochs: grid_of("epochs-grid", &a.epochs_grid)?
            .map(|g| parse_list(&g, "epochs"))
            .transpose()?
            .unwrap_or(d.epochs),
        learning_rate: grid_of("lr-grid", &a.lr_grid)?
            .map(|g| parse_list(&g, "learning rate"))
            .transpose()?
            .unwrap_or(d.learning_rate),
        lambda: grid_of("lambda-grid", &a.lambda_grid)?
            .map(|g| parse_list(&g, "lambda"))
            .transpose()?
            .unwrap_or(d.lambda),
        budget,
    };
    s.finish()?;
    if folds < 2 {
        return Err(Error::Config("need at least 2 folds".into()));
    }
    let ds = load_data(&a.data, mode)?;
    let result = grid_search_cv(&ds, &grid, folds, seed)?;
    let mut w = create(&a.out)?;
    write_report(&result, &mut w)?;
    w.flush()?;
    run.artifact("data", &a.data);
    run.artifact("report", &a.out);
    let best = match result.best() {
        Candidate::Noncompeting(c) => to_json(c),
        Candidate::Competing(c) => to_json(c),
    };
    let config = json!({ "folds": folds, "grid": to_json(&grid), "best": best });
    run.finish(&a.common, &a.out, config, seed)
}

fn cmd_benchmark(a: BenchmarkArgs) -> Result<()> {
    let mut run = Run::new("benchmark");
    let s = Settings::load(a.common.config.as_deref())?;
    let mode = s.get("mode", a.mode, Mode::Noncompeting)?;
    let n = s.get("n", a.n, 500)?;
    let censoring = s.get("censoring", a.censoring, 0.4)?;
    let reps = s.get("reps", a.reps, 20)?;
    let seed = s.get("seed", a.seed, 0)?;
    let methods: Option<String> = s.opt("methods", a.methods.clone())?;
    let epochs = s.opt("epochs", a.epochs)?;
    s.finish()?;
    let mut cfg = BenchConfig::new(mode, n, censoring, reps, seed);
    if let Some(m) = methods {
        cfg.methods = m.split(',').map(|v| Method::from_str(v.trim())).collect::<Result<_>>()?;
    }
    if let Some(e) = epochs {
        cfg.deepcent.epochs = e;
        cfg.rankdeepsurv.epochs = e;
        cfg.cr_deepcent.epochs = e;
    }
    let result = run_benchmark(&cfg)?;
    let mut w = create(&a.out)?;
    result.write_csv(&mut w)?;
    w.flush()?;
    run.artifact("results", &a.out);
    let config = json!({
        "mode": mode, "n": n, "censoring": censoring, "reps": reps, "theta": result.theta,
        "methods": cfg.methods.iter().map(|m| m.name()).collect::<Vec<_>>(),
        "deepcent": to_json(&cfg.deepcent),
        "rankdeepsurv": to_json(&cfg.rankdeepsurv),
        "cr_deepcent": to_json(&cfg.cr_deepcent),
        "default_deepcent": to_json(&bench::default_deepcent_config()),
    });
    run.finish(&a.common, &a.out, config, seed)
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Benchmark(a) => cmd_benchmark(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths_parse() {
        assert_eq!(parse_widths("32, 16").unwrap(), vec![32, 16]);
        assert!(parse_widths("none").unwrap().is_empty());
        assert!(parse_widths("0").is_err());
        assert!(parse_widths("a").is_err());
    }

    #[test]
    fn settings_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.txt");
        fs::write(&p, "# comment\nepochs = 7\nlr=0.5\n").unwrap();
        let s = Settings::load(Some(&p)).unwrap();
        assert_eq!(s.get("epochs", None, 1usize).unwrap(), 7);
        assert_eq!(s.get("lr", Some(0.1), 1.0).unwrap(), 0.1);
        assert_eq!(s.get("dropout", None, 0.2).unwrap(), 0.2);
        s.finish().unwrap();

        fs::write(&p, "epochs=7\nbogus=1\n").unwrap();
        let s = Settings::load(Some(&p)).unwrap();
        s.get("epochs", None, 1usize).unwrap();
        assert!(matches!(s.finish(), Err(Error::Config(_))));
        fs::write(&p, "epochs=x\n").unwrap();
        let s = Settings::load(Some(&p)).unwrap();
        assert!(s.get("epochs", None, 1usize).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::Parse { line: 1, msg: "x".into() }), EXIT_DATA);
        assert_eq!(exit_code(&Error::Training("x".into())), EXIT_NUMERICAL);
        assert_eq!(run(["deepcent", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["deepcent", "--help"]), EXIT_OK);
    }
}
