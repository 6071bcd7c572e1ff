//! `usc-transfer`: single runs, optimal-control searches and parameter sweeps
//! for cavity-mediated two-qubit state transfer.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use usc_transfer::metrics::trajectory_csv;
use usc_transfer::qoc::{gradient_check, GradCheckReport};
use usc_transfer::sweep::{heatmap_csv, run_point_trajectory, run_sweep, simulate, SweepGrid};
use usc_transfer::{
    optimize, superposition_initial, superposition_target, InitStrategy, ModelParams, OptimizationConfig,
    OptimizationResult, PiecewiseConstantSchedule, PointSettings, PulseSchedule, RunRecord,
};

use config::{usage, Knobs, Resolved, UsageError};
use output::{emit, sibling, Staged};

const GRADCHECK_TOL: f64 = 1e-5;

#[derive(Parser)]
#[command(name = "usc-transfer", version, about = "Two-qubit state transfer through a lossy cavity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One run; writes a RunRecord as JSON.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Replay a schedule (bare schedule JSON or `optimize` output) instead of the Gaussian pair
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Also write the population history as CSV
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Optimize a piecewise-constant schedule; writes the result as JSON and the schedule as CSV.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Schedule CSV path (defaults to `<out stem>.schedule.csv`)
        #[arg(long)]
        schedule_out: Option<PathBuf>,
    },
    /// Gaussian-protocol heatmap over the t_inv x g0 grid, as CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Exact gradient against central differences on a random schedule; exit 1 on mismatch.
    Gradcheck {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[command(flatten)]
    knobs: Knobs,
    /// Flat TOML file with the same keys as the flags; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<(Resolved, Option<usize>)> {
        let base = match &self.config {
            Some(path) => Knobs::load(path)?,
            None => Knobs::default(),
        };
        let knobs = self.knobs.clone().over(base);
        let jobs = knobs.jobs;
        Ok((knobs.resolve()?, jobs))
    }
}

fn settings(r: &Resolved) -> anyhow::Result<PointSettings> {
    let mut s = PointSettings::default().with_model(r.model);
    s.params = ModelParams::resonant(r.kappa, r.nmax)?;
    s.tau_ratio = r.tau_ratio;
    s.alpha = r.alpha;
    s.beta = r.beta;
    Ok(s)
}

/// Output envelope: resolved settings next to the payload.
#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    config: &'a Resolved,
    #[serde(flatten)]
    body: T,
}

fn to_json<T: Serialize>(config: &Resolved, body: T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(&Report { config, body })?;
    s.push('\n');
    Ok(s)
}

#[derive(Deserialize)]
struct BestSchedule {
    best_schedule: PiecewiseConstantSchedule,
}

/// Accepted `--schedule` inputs: `optimize` output, a bare
/// `OptimizationResult`, a tagged `PulseSchedule` or a bare schedule.
#[derive(Deserialize)]
#[serde(untagged)]
enum ScheduleFile {
    Report { result: BestSchedule },
    Optimized(BestSchedule),
    Tagged(PulseSchedule),
    Bare(PiecewiseConstantSchedule),
}

fn load_schedule(path: &Path) -> anyhow::Result<PiecewiseConstantSchedule> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    match serde_json::from_str(&text) {
        Ok(ScheduleFile::Report { result: BestSchedule { best_schedule } })
        | Ok(ScheduleFile::Optimized(BestSchedule { best_schedule }) | ScheduleFile::Bare(best_schedule))
        | Ok(ScheduleFile::Tagged(PulseSchedule::Piecewise(best_schedule))) => Ok(best_schedule),
        Ok(ScheduleFile::Tagged(PulseSchedule::Gaussian(_))) => {
            usage(format!("{}: Gaussian schedules are set with --g0/--t-inv/--tau-ratio", path.display()))
        }
        Err(e) => usage(format!("{}: not a schedule: {e}", path.display())),
    }
}

fn run_simulate(common: &Common, schedule: Option<&Path>, trajectory: Option<&Path>) -> anyhow::Result<ExitCode> {
    let (r, _) = common.resolve()?;
    let s = settings(&r)?;
    let (record, traj) = match schedule {
        Some(path) => {
            let sched = load_schedule(path)?;
            let window = (sched.t_start(), sched.t_end());
            simulate(&PulseSchedule::Piecewise(sched), window, &s)?
        }
        None => run_point_trajectory(r.t_inv, r.g0, &s)?,
    };
    eprintln!("fidelity {:.6}, wall time {:.3}s", record.fidelity, record.wall_time);
    #[derive(Serialize)]
    struct Body {
        record: RunRecord,
    }
    let mut staged = Staged::default();
    if let Some(path) = trajectory {
        staged.add(path, trajectory_csv(&traj).as_bytes())?;
    }
    emit(&mut staged, common.out.as_deref(), &to_json(&r, Body { record })?)?;
    staged.commit()?;
    Ok(ExitCode::SUCCESS)
}

fn run_optimize(common: &Common, schedule_out: Option<&Path>) -> anyhow::Result<ExitCode> {
    let (r, _) = common.resolve()?;
    let s = settings(&r)?;
    let cfg = OptimizationConfig {
        bins: r.bins,
        duration: r.duration,
        bounds: (0.0, r.g0),
        max_iters: r.max_iters,
        seed: r.seed,
        init: InitStrategy::GaussianSampled { tau_ratio: r.tau_ratio },
        restarts: r.restarts,
        model: r.model,
        ..Default::default()
    };
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    let initial = superposition_initial(r.alpha, r.beta, &s.params)?;
    let target = superposition_target(r.alpha, r.beta, &s.params)?;
    let started = Instant::now();
    let result = optimize(&cfg, &s.params, &initial, &target)?;
    eprintln!("fidelity {:.6}, wall time {:.3}s", result.best_fidelity, started.elapsed().as_secs_f64());
    let sched = result.best_schedule.clone();
    let window = (sched.t_start(), sched.t_end());
    let (record, _) = simulate(&PulseSchedule::Piecewise(sched), window, &s)?;

    #[derive(Serialize)]
    struct Body {
        result: OptimizationResult,
        record: RunRecord,
    }
    let csv = result.best_schedule.to_csv();
    let mut staged = Staged::default();
    let csv_path = schedule_out.map(Path::to_path_buf).or_else(|| common.out.as_deref().map(|p| sibling(p, "schedule.csv")));
    if let Some(path) = &csv_path {
        staged.add(path, csv.as_bytes())?;
    }
    emit(&mut staged, common.out.as_deref(), &to_json(&r, Body { result, record })?)?;
    staged.commit()?;
    Ok(ExitCode::SUCCESS)
}

fn run_sweep_cmd(common: &Common) -> anyhow::Result<ExitCode> {
    let (r, _) = common.resolve()?;
    let grid = SweepGrid { t_inv_values: r.t_inv_values.clone(), g0_values: r.g0_values.clone(), settings: settings(&r)? };
    grid.validate().map_err(|e| UsageError(e.to_string()))?;
    let started = Instant::now();
    let points = run_sweep(&grid)?;
    eprintln!("{} points, wall time {:.3}s", points.len(), started.elapsed().as_secs_f64());
    let failed = points.iter().filter(|p| p.record.is_err()).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} points failed; see NaN rows", points.len());
    }
    let csv = heatmap_csv(&points, r.model);
    let mut staged = Staged::default();
    if let Some(out) = &common.out {
        staged.add(&sibling(out, "meta.json"), to_json(&r, serde_json::json!({}))?.as_bytes())?;
    }
    emit(&mut staged, common.out.as_deref(), &csv)?;
    staged.commit()?;
    Ok(ExitCode::SUCCESS)
}

fn run_gradcheck(common: &Common) -> anyhow::Result<ExitCode> {
    let (r, _) = common.resolve()?;
    let s = settings(&r)?;
    let initial = superposition_initial(r.alpha, r.beta, &s.params)?;
    let target = superposition_target(r.alpha, r.beta, &s.params)?;
    let report = gradient_check(&s.params, r.model, &initial, &target, r.bins, r.duration, (0.0, r.g0), r.seed)?;
    let passed = report.relative_error < GRADCHECK_TOL;

    #[derive(Serialize)]
    struct Body {
        report: GradCheckReport,
        tolerance: f64,
        passed: bool,
    }
    let mut staged = Staged::default();
    emit(&mut staged, common.out.as_deref(), &to_json(&r, Body { report, tolerance: GRADCHECK_TOL, passed })?)?;
    staged.commit()?;
    Ok(if passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn dispatch(cli: &Cli) -> anyhow::Result<ExitCode> {
    let common = match &cli.command {
        Command::Simulate { common, .. }
        | Command::Optimize { common, .. }
        | Command::Sweep { common }
        | Command::Gradcheck { common } => common,
    };
    let (_, jobs) = common.resolve()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    pool.install(|| match &cli.command {
        Command::Simulate { common, schedule, trajectory } => {
            run_simulate(common, schedule.as_deref(), trajectory.as_deref())
        }
        Command::Optimize { common, schedule_out } => run_optimize(common, schedule_out.as_deref()),
        Command::Sweep { common } => run_sweep_cmd(common),
        Command::Gradcheck { common } => run_gradcheck(common),
    })
}

/// 1 for bad input, 2 for everything that went wrong while computing.
fn exit_code(err: &anyhow::Error) -> u8 {
    use usc_transfer::Error as E;
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<E>() {
        Some(E::Domain(_) | E::Parse(_)) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
