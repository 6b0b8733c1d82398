//! `ildvs`: scripted demonstrations, model training, closed-loop trials,
//! the full three-scheme benchmark, and report aggregation.
//!
//! Exit codes: 0 success, 2 usage or input validation, 3 runtime failure.
//! Every subcommand taking `--seed` is bitwise reproducible in its file
//! outputs for a fixed seed.

mod config;

use clap::{Args, Parser, Subcommand};
use config::{pick, FileConfig};
use ildvs_core::geom3d::Vec3;
use ildvs_core::harness::report::{
    format_result_row, mean_series, read_results_csv, write_eta_series,
    eta_series_filename, ResultRow, Summary, RESULTS_HEADER,
};
use ildvs_core::harness::{EvalConfig, HarnessError, Protocol, Scheme, TrialResult};
use ildvs_core::imitator::{
    load_checkpoint, save_checkpoint, train_with, Demonstrations, ImitatorError, Integrator,
    NodeModel, TrainConfig, TrainMeta,
};
use ildvs_core::seeds;
use ildvs_core::simworld::{
    expert_demo, read_demos_csv, write_demos_csv, ExpertTask, PositionId, SimError, TaskId, World,
};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Debug)]
enum AppError {
    /// Bad flags, unparseable config, or invalid input files: exit 2.
    Usage(String),
    /// Failures after validation (IO, numerics): exit 3.
    Runtime(String),
}

impl AppError {
    fn code(&self) -> u8 {
        match self {
            AppError::Usage(_) => 2,
            AppError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Usage(m) | AppError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<SimError> for AppError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::DemoFormat { .. } => AppError::Usage(e.to_string()),
            other => AppError::Runtime(other.to_string()),
        }
    }
}

impl From<ImitatorError> for AppError {
    fn from(e: ImitatorError) -> Self {
        match e {
            ImitatorError::BadDemo(_) | ImitatorError::Checkpoint(_) => {
                AppError::Usage(e.to_string())
            }
            ImitatorError::Blowup { .. } => AppError::Runtime(e.to_string()),
        }
    }
}

impl From<HarnessError> for AppError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::MissingModel(_)
            | HarnessError::Config(_)
            | HarnessError::Servo(_)
            | HarnessError::ResultsFormat { .. } => AppError::Usage(e.to_string()),
            other => AppError::Runtime(other.to_string()),
        }
    }
}

fn usage(msg: impl Into<String>) -> AppError {
    AppError::Usage(msg.into())
}

fn runtime(msg: impl Into<String>) -> AppError {
    AppError::Runtime(msg.into())
}

#[derive(Parser)]
#[command(name = "ildvs", version, about = "Bounding-box visual servoing with an imitated secondary velocity: demo generation, training, trials, benchmark, reports")]
struct Cli {
    /// TOML config file; sections [world] [demo] [gains] [train] [eval].
    /// Flags override file values, file values override defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate scripted expert demonstrations as a CSV file
    Demo(DemoArgs),
    /// Train the imitation model on a demonstration file
    Train(TrainArgs),
    /// Run one closed-loop trial of a single scheme
    Run(RunArgs),
    /// Run the full scheme x position x trial benchmark sweep
    Protocol(ProtocolArgs),
    /// Summarize a results table; optionally aggregate plot data
    Report(ReportArgs),
}

#[derive(Args)]
struct WorldFlags {
    /// Trained object center x in metres [default: 0.45]
    #[arg(long, value_name = "M")]
    center_x: Option<f64>,
    /// Trained object center y in metres [default: 0]
    #[arg(long, value_name = "M")]
    center_y: Option<f64>,
}

#[derive(Args)]
struct DemoArgs {
    /// Task: mouse or cup
    #[arg(long, value_name = "TASK")]
    task: String,
    /// Output demonstrations CSV
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Number of demonstrations [default: 4]
    #[arg(long, value_name = "N")]
    num: Option<usize>,
    /// Frames per demonstration [default: 500]
    #[arg(long, value_name = "N")]
    steps: Option<usize>,
    /// Detector noise amplitude in pixels [default: 1]
    #[arg(long, value_name = "PX")]
    noise_px: Option<f64>,
    /// Master seed [default: 0]
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[command(flatten)]
    world: WorldFlags,
}

#[derive(Args)]
struct TrainArgs {
    /// Input demonstrations CSV
    #[arg(long, value_name = "FILE")]
    demos: PathBuf,
    /// Output checkpoint (JSON)
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Loss-curve CSV [default: <out with extension loss.csv>]
    #[arg(long, value_name = "FILE")]
    loss_out: Option<PathBuf>,
    /// Optimizer iterations [default: 20000]
    #[arg(long, value_name = "N")]
    iters: Option<usize>,
    /// Learning rate [default: 0.0005]
    #[arg(long, value_name = "X")]
    lr: Option<f64>,
    /// Training segment length in frames [default: 20]
    #[arg(long, value_name = "N")]
    segment_len: Option<usize>,
    /// Integrator: euler or rk4 [default: euler]
    #[arg(long, value_name = "NAME")]
    integrator: Option<String>,
    /// Hidden layer sizes, comma separated [default: 256,256]
    #[arg(long, value_name = "N,N,..")]
    hidden: Option<String>,
    /// Master seed [default: 0]
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Print loss every N iterations; 0 silences progress [default: 1000]
    #[arg(long, value_name = "N")]
    progress_every: Option<usize>,
}

#[derive(Args)]
struct EvalFlags {
    /// Interaction-matrix depth estimate in metres [default: 0.43 mouse, 0.3 cup]
    #[arg(long, value_name = "M")]
    z_hat: Option<f64>,
    /// Detector noise amplitude in pixels [default: 1]
    #[arg(long, value_name = "PX")]
    noise_px: Option<f64>,
    /// Control steps per trial [default: 700]
    #[arg(long, value_name = "N")]
    steps: Option<usize>,
    /// Error-decay gain lambda in 1/s [default: 1]
    #[arg(long, value_name = "X")]
    lambda: Option<f64>,
    /// Pseudo-inverse damping [default: 0.01]
    #[arg(long, value_name = "X")]
    mu: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    /// Task: mouse or cup
    #[arg(long, value_name = "TASK")]
    task: String,
    /// Scheme: dvs, iil or ildvs
    #[arg(long, value_name = "SCHEME")]
    scheme: String,
    /// Object position: center, x+, x-, y+ or y- [default: center]
    #[arg(long, value_name = "POS")]
    position: Option<String>,
    /// Trial number, part of the per-trial seed [default: 1]
    #[arg(long, value_name = "N")]
    trial: Option<usize>,
    /// Trained checkpoint; required for iil and ildvs
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Append the result row to this CSV (header written once)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Write the per-step error-norm series into this directory
    #[arg(long, value_name = "DIR")]
    series_dir: Option<PathBuf>,
    /// Master seed [default: 0]
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[command(flatten)]
    eval: EvalFlags,
    #[command(flatten)]
    world: WorldFlags,
}

#[derive(Args)]
struct ProtocolArgs {
    /// Task: mouse or cup
    #[arg(long, value_name = "TASK")]
    task: String,
    /// Trained checkpoint; required unless --schemes is dvs only
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Results CSV, appended one row per finished trial
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Write per-trial error-norm series into this directory
    #[arg(long, value_name = "DIR")]
    series_dir: Option<PathBuf>,
    /// Schemes to sweep, comma separated [default: dvs,iil,ildvs]
    #[arg(long, value_name = "S,S,..")]
    schemes: Option<String>,
    /// Trials per object position [default: 3]
    #[arg(long, value_name = "N")]
    trials: Option<usize>,
    /// Novel-position grid spacing in metres [default: 0.15]
    #[arg(long, value_name = "M")]
    grid_spacing: Option<f64>,
    /// Master seed [default: 0]
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[command(flatten)]
    eval: EvalFlags,
    #[command(flatten)]
    world: WorldFlags,
}

#[derive(Args)]
struct ReportArgs {
    /// Results CSV produced by run/protocol
    #[arg(long, value_name = "FILE")]
    results: PathBuf,
    /// Also write the summary text here
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Directory holding per-trial series files (from --series-dir)
    #[arg(long, value_name = "DIR")]
    series_dir: Option<PathBuf>,
    /// Write per-(scheme, position) mean series here; needs --series-dir
    #[arg(long, value_name = "DIR")]
    plot_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match FileConfig::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.code());
        }
    };
    let result = match cli.command {
        Command::Demo(a) => cmd_demo(a, &cfg),
        Command::Train(a) => cmd_train(a, &cfg),
        Command::Run(a) => cmd_run(a, &cfg),
        Command::Protocol(a) => cmd_protocol(a, &cfg),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn parse_task(s: &str) -> Result<TaskId, AppError> {
    TaskId::from_str(s).map_err(usage)
}

fn object_center(w: &WorldFlags, cfg: &FileConfig) -> Vec3<f64> {
    Vec3::new(
        pick(w.center_x, cfg.world.center_x, 0.45),
        pick(w.center_y, cfg.world.center_y, 0.0),
        0.0,
    )
}

fn build_task(task: TaskId, center: Vec3<f64>) -> ExpertTask<f64> {
    let world = World::desk(task, center);
    match task {
        TaskId::Mouse => ExpertTask::mouse(&world, center),
        TaskId::Cup => ExpertTask::cup(&world, center),
    }
}

fn merged_eval(task: TaskId, e: &EvalFlags, cfg: &FileConfig) -> EvalConfig<f64> {
    let mut c = EvalConfig::for_task(task);
    c.z_hat = pick(e.z_hat, cfg.eval.z_hat, c.z_hat);
    c.noise_px = pick(e.noise_px, cfg.eval.noise_px.or(cfg.world.noise_px), c.noise_px);
    c.horizon = pick(e.steps, cfg.eval.horizon, c.horizon);
    c.gains.lambda = pick(e.lambda, cfg.gains.lambda, c.gains.lambda);
    c.gains.mu = pick(e.mu, cfg.gains.mu, c.gains.mu);
    c.gains.eta0 = cfg.gains.eta0.unwrap_or(c.gains.eta0);
    c.gains.eta1 = cfg.gains.eta1.unwrap_or(c.gains.eta1);
    c.grid_spacing = cfg.eval.grid_spacing.unwrap_or(c.grid_spacing);
    c.start_jitter = cfg.eval.start_jitter.unwrap_or(c.start_jitter);
    if let Some(t) = cfg.eval.trials {
        c.trials_per_position = t;
    }
    c
}

/// Loads a checkpoint and cross-checks it against the requested task.
fn load_model(path: &Path, task: TaskId) -> Result<NodeModel<f64>, AppError> {
    let (model, meta) = load_checkpoint::<f64>(path)?;
    if meta.task != task.to_string() {
        return Err(usage(format!(
            "checkpoint {} was trained for task {:?}, not {task}",
            path.display(),
            meta.task
        )));
    }
    Ok(model)
}

fn create_file(path: &Path) -> Result<BufWriter<File>, AppError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| runtime(format!("creating {}: {e}", path.display())))
}

/// Appends rows, writing the header only when the file is new or empty, so
/// interrupted sweeps can resume into the same table.
fn append_results(path: &Path, rows: &[ResultRow]) -> Result<(), AppError> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| runtime(format!("opening {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    let io = |e: std::io::Error| runtime(format!("writing {}: {e}", path.display()));
    if fresh {
        writeln!(w, "{RESULTS_HEADER}").map_err(io)?;
    }
    for r in rows {
        writeln!(w, "{}", format_result_row(r)).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn write_series_file(dir: &Path, r: &TrialResult) -> Result<(), AppError> {
    fs::create_dir_all(dir).map_err(|e| runtime(format!("creating {}: {e}", dir.display())))?;
    let path = dir.join(eta_series_filename(r.task, r.scheme, r.position, r.trial));
    let mut w = create_file(&path)?;
    write_eta_series(&mut w, &r.eta_series)?;
    w.flush().map_err(|e| runtime(format!("writing {}: {e}", path.display())))
}

fn trial_line(r: &TrialResult) -> String {
    let mut s = format!(
        "{} {} {} trial {}: steps {} eta {:.4} -> {:.4} epsilon {:.4}",
        r.task,
        r.scheme,
        r.position,
        r.trial,
        r.steps,
        r.eta_series.first().copied().unwrap_or(f64::NAN),
        r.eta_final,
        r.epsilon,
    );
    if let Some(d) = r.delta {
        s.push_str(&format!(" delta {d:.4}"));
    }
    if let Some(g) = r.success {
        s.push_str(&format!(" success {g}"));
    }
    s.push_str(&format!(" [{}]", r.termination));
    s
}

fn cmd_demo(a: DemoArgs, cfg: &FileConfig) -> Result<(), AppError> {
    let task_id = parse_task(&a.task)?;
    let num = pick(a.num, cfg.demo.num, 4);
    let steps = pick(a.steps, cfg.demo.steps, 500);
    let noise_px = pick(a.noise_px, cfg.world.noise_px, 1.0);
    let seed = a.seed.unwrap_or(0);
    if num == 0 || steps < 2 {
        return Err(usage("need --num >= 1 and --steps >= 2"));
    }
    if noise_px < 0.0 {
        return Err(usage("--noise-px must be >= 0"));
    }
    let center = object_center(&a.world, cfg);
    let world = World::desk(task_id, center);
    let mut task = build_task(task_id, center);
    task.demo_steps = steps;

    let mut rng = seeds::stream(seed, "demo");
    let mut states = Vec::with_capacity(num);
    for k in 0..num {
        let trace = expert_demo(&world, &task, k, noise_px, &mut rng)?;
        let p = trace.start.position;
        let q = trace.start.orientation.wxyz();
        println!(
            "demo {k} start: p ({:.4}, {:.4}, {:.4}) m, q ({:.4}, {:.4}, {:.4}, {:.4})",
            p.x, p.y, p.z, q[0], q[1], q[2], q[3]
        );
        states.push(trace.states);
    }
    let demos = Demonstrations {
        states,
        dt: task.dt,
        anchor: task.goal.orientation,
        task: task_id.to_string(),
    };
    let mut w = create_file(&a.out)?;
    write_demos_csv(&mut w, &demos)?;
    w.flush().map_err(|e| runtime(format!("writing {}: {e}", a.out.display())))?;
    println!("wrote {num} demos x {steps} frames to {}", a.out.display());
    Ok(())
}

fn parse_hidden(s: &str) -> Result<Vec<usize>, AppError> {
    s.split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| usage(format!("--hidden {p:?}: {e}"))))
        .collect()
}

fn cmd_train(a: TrainArgs, cfg: &FileConfig) -> Result<(), AppError> {
    let file = File::open(&a.demos)
        .map_err(|e| usage(format!("demos {}: {e}", a.demos.display())))?;
    let demos: Demonstrations<f64> = read_demos_csv(BufReader::new(file))?;

    let hidden = match &a.hidden {
        Some(s) => parse_hidden(s)?,
        None => cfg.train.hidden.clone().unwrap_or_else(|| vec![256, 256]),
    };
    let mut sizes = Vec::with_capacity(hidden.len() + 2);
    sizes.push(10);
    sizes.extend(&hidden);
    sizes.push(10);
    let integrator_name = a.integrator.clone().or(cfg.train.integrator.clone());
    let integrator = match integrator_name {
        Some(s) => Integrator::from_str(&s).map_err(usage)?,
        None => Integrator::Euler,
    };
    let train_cfg = TrainConfig {
        sizes,
        iterations: pick(a.iters, cfg.train.iterations, 20000),
        lr: pick(a.lr, cfg.train.lr, 5e-4),
        segment_len: pick(a.segment_len, cfg.train.segment_len, 20),
        integrator,
    };
    let seed = a.seed.unwrap_or(0);
    let every = pick(a.progress_every, None, 1000);
    let total = train_cfg.iterations;

    let result = train_with(&demos, &train_cfg, seed, |it, loss| {
        if every > 0 && (it + 1) % every == 0 {
            println!("iter {}/{} loss {loss:.6}", it + 1, total);
        }
    })?;
    let final_loss = result.loss_curve.last().copied().unwrap_or(f64::NAN);

    let meta = TrainMeta {
        task: demos.task.clone(),
        iterations: train_cfg.iterations,
        lr: train_cfg.lr,
        segment_len: train_cfg.segment_len,
        seed,
        final_loss,
    };
    save_checkpoint(&a.out, &result.model, &meta)?;
    let loss_path = a.loss_out.clone().unwrap_or_else(|| a.out.with_extension("loss.csv"));
    let mut w = create_file(&loss_path)?;
    let io = |e: std::io::Error| runtime(format!("writing {}: {e}", loss_path.display()));
    writeln!(w, "iter,loss").map_err(io)?;
    for (it, loss) in result.loss_curve.iter().enumerate() {
        writeln!(w, "{it},{loss}").map_err(io)?;
    }
    w.flush().map_err(io)?;
    println!(
        "trained {} iterations; final loss {final_loss}; checkpoint {}",
        total,
        a.out.display()
    );
    Ok(())
}

fn build_protocol(
    task_id: TaskId,
    model_path: Option<&Path>,
    needs_model: bool,
    eval: &EvalFlags,
    world: &WorldFlags,
    cfg: &FileConfig,
) -> Result<Protocol<f64>, AppError> {
    let model = match model_path {
        Some(p) => Some(load_model(p, task_id)?),
        None if needs_model => {
            return Err(usage("this scheme needs --model <checkpoint>"));
        }
        None => None,
    };
    let center = object_center(world, cfg);
    let task = build_task(task_id, center);
    let eval_cfg = merged_eval(task_id, eval, cfg);
    Ok(Protocol::new(task, eval_cfg, model)?)
}

fn cmd_run(a: RunArgs, cfg: &FileConfig) -> Result<(), AppError> {
    let task_id = parse_task(&a.task)?;
    let scheme = Scheme::from_str(&a.scheme).map_err(usage)?;
    let position = match &a.position {
        Some(p) => PositionId::from_str(p).map_err(usage)?,
        None => PositionId::Center,
    };
    let trial = a.trial.unwrap_or(1);
    let seed = a.seed.unwrap_or(0);
    let protocol = build_protocol(
        task_id,
        a.model.as_deref(),
        scheme.needs_model(),
        &a.eval,
        &a.world,
        cfg,
    )?;
    let r = protocol.run_trial(scheme, position, trial, seed)?;
    println!("{}", trial_line(&r));
    if let Some(out) = &a.out {
        append_results(out, &[r.to_row()])?;
    }
    if let Some(dir) = &a.series_dir {
        write_series_file(dir, &r)?;
    }
    Ok(())
}

fn parse_schemes(s: &str) -> Result<Vec<Scheme>, AppError> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let scheme = Scheme::from_str(part.trim()).map_err(usage)?;
        if !out.contains(&scheme) {
            out.push(scheme);
        }
    }
    if out.is_empty() {
        return Err(usage("--schemes must name at least one scheme"));
    }
    Ok(out)
}

fn cmd_protocol(a: ProtocolArgs, cfg: &FileConfig) -> Result<(), AppError> {
    let task_id = parse_task(&a.task)?;
    let schemes = match &a.schemes {
        Some(s) => parse_schemes(s)?,
        None => Scheme::ALL.to_vec(),
    };
    let needs_model = schemes.iter().any(Scheme::needs_model);
    let seed = a.seed.unwrap_or(0);
    let model = match a.model.as_deref() {
        Some(p) => Some(load_model(p, task_id)?),
        None if needs_model => return Err(usage("these schemes need --model <checkpoint>")),
        None => None,
    };
    let center = object_center(&a.world, cfg);
    let mut eval_cfg = merged_eval(task_id, &a.eval, cfg);
    if let Some(t) = a.trials {
        eval_cfg.trials_per_position = t;
    }
    if let Some(g) = a.grid_spacing {
        eval_cfg.grid_spacing = g;
    }
    let protocol = Protocol::new(build_task(task_id, center), eval_cfg, model)?;

    let total =
        schemes.len() * protocol.grid().len() * protocol.cfg.trials_per_position;
    let mut rows = Vec::with_capacity(total);
    let mut done = 0usize;
    let positions: Vec<PositionId> = protocol.grid().iter().map(|(id, _)| *id).collect();
    for scheme in &schemes {
        for position in &positions {
            for trial in 1..=protocol.cfg.trials_per_position {
                let r = protocol.run_trial(*scheme, *position, trial, seed)?;
                done += 1;
                println!("[{done}/{total}] {}", trial_line(&r));
                append_results(&a.out, &[r.to_row()])?;
                if let Some(dir) = &a.series_dir {
                    write_series_file(dir, &r)?;
                }
                rows.push(r.to_row());
            }
        }
    }
    let summary = Summary::from_rows(&rows)?;
    print!("{summary}");
    println!("results appended to {}", a.out.display());
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<(), AppError> {
    let file = File::open(&a.results)
        .map_err(|e| usage(format!("results {}: {e}", a.results.display())))?;
    let rows = read_results_csv(BufReader::new(file))?;
    let summary = Summary::from_rows(&rows)?;
    print!("{summary}");
    if let Some(out) = &a.out {
        let mut w = create_file(out)?;
        write!(w, "{summary}")
            .and_then(|_| w.flush())
            .map_err(|e| runtime(format!("writing {}: {e}", out.display())))?;
    }
    if let Some(plot_dir) = &a.plot_dir {
        let series_dir = a
            .series_dir
            .as_ref()
            .ok_or_else(|| usage("--plot-dir needs --series-dir to read trials from"))?;
        write_plot_data(&rows, series_dir, plot_dir)?;
    }
    Ok(())
}

/// Averages the per-trial series of each (scheme, position) group into one
/// `step,eta_mean` file per group.
fn write_plot_data(rows: &[ResultRow], series_dir: &Path, plot_dir: &Path) -> Result<(), AppError> {
    fs::create_dir_all(plot_dir)
        .map_err(|e| runtime(format!("creating {}: {e}", plot_dir.display())))?;
    let mut groups: Vec<(TaskId, Scheme, PositionId)> = Vec::new();
    for r in rows {
        let key = (r.task, r.scheme, r.position);
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    for (task, scheme, position) in groups {
        let mut series = Vec::new();
        for r in rows.iter().filter(|r| (r.task, r.scheme, r.position) == (task, scheme, position))
        {
            let path = series_dir.join(eta_series_filename(task, scheme, position, r.trial));
            match read_series(&path) {
                Ok(s) => series.push(s),
                Err(e) => eprintln!("warning: skipping {}: {e}", path.display()),
            }
        }
        if series.is_empty() {
            continue;
        }
        let mean = mean_series(&series);
        let out = plot_dir.join(format!("plot_{task}_{scheme}_{position}.csv"));
        let mut w = create_file(&out)?;
        let io = |e: std::io::Error| runtime(format!("writing {}: {e}", out.display()));
        writeln!(w, "step,eta_mean").map_err(io)?;
        for (k, v) in mean.iter().enumerate() {
            writeln!(w, "{k},{v}").map_err(io)?;
        }
        w.flush().map_err(io)?;
        println!("plot data: {}", out.display());
    }
    Ok(())
}

fn read_series(path: &Path) -> Result<Vec<f64>, AppError> {
    let text = fs::read_to_string(path).map_err(|e| runtime(e.to_string()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != "step,eta" {
                return Err(usage(format!("line 1: expected header step,eta, got {line:?}")));
            }
            continue;
        }
        let (_, eta) = line
            .split_once(',')
            .ok_or_else(|| usage(format!("line {}: expected step,eta", i + 1)))?;
        out.push(
            eta.parse::<f64>()
                .map_err(|e| usage(format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_list_parses_dedups_and_rejects() {
        assert_eq!(parse_schemes("dvs,iil,ildvs").unwrap(), Scheme::ALL.to_vec());
        assert_eq!(parse_schemes("dvs, dvs").unwrap(), vec![Scheme::Dvs]);
        assert!(parse_schemes("dsv").is_err());
    }

    #[test]
    fn hidden_sizes_parse() {
        assert_eq!(parse_hidden("256,256").unwrap(), vec![256, 256]);
        assert_eq!(parse_hidden("8").unwrap(), vec![8]);
        assert!(parse_hidden("8,x").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
