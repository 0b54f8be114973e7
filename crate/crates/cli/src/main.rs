//! `irsuav`: solve a scenario, sweep a parameter, or run the Monte-Carlo oracle.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 infeasible, 3 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use irsuav_conic::{export_problem, Backend, ConicProgram, SolverSettings};
use irsuav_core::experiments::{
    emit_plot_data, run_baseline_observed, sweep, write_atomic, Baseline, BaselineOptions, FixedSpeed, Manifest,
    PlotKind, PlotSource, RunError, SweepAxis,
};
use irsuav_core::oracle::{mc_harvest, mc_rate, OracleRecord, DEFAULT_SAMPLES};
use irsuav_core::orchestrator::{AoObserver, DecisionState, RunReport, Stage};
use irsuav_core::scenario::{Corridor, EhMode, Kinematics, Scenario};
use irsuav_core::scenario_file::load_scenario;

#[derive(Parser)]
#[command(name = "irsuav", version, about = "Min-max user energy for a UAV-carried IRS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EhModeArg {
    BsLink,
    UserLink,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Clarabel,
    Barrier,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario JSON; the diagonal reference instance when absent.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Harvest expression; overrides the scenario file.
    #[arg(long, value_enum)]
    eh_mode: Option<EhModeArg>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "clarabel")]
    backend: BackendArg,
    /// Fixed-velocity baseline flies exactly the straight-line speed.
    #[arg(long)]
    straight_speed: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one baseline and write the report, state and plot data.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "proposed")]
        baseline: Baseline,
        /// Write every stage's first subproblem of each outer iteration under `problems/`.
        #[arg(long)]
        debug_dump: bool,
        /// Write the trajectory after each outer iteration under `trajectories/`.
        #[arg(long)]
        dump_trajectories: bool,
    },
    /// Run baselines over a list of axis values.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated axis values; an empty list gives an empty table.
        #[arg(long, num_args = 0..=1, default_value = "", default_missing_value = "")]
        values: String,
        /// Comma-separated baselines; all when absent.
        #[arg(long, value_delimiter = ',')]
        baselines: Vec<Baseline>,
    },
    /// Solve, then check the rate bound and the average harvest by Monte Carlo.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "proposed")]
        baseline: Baseline,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
    },
}

fn load(common: &Common) -> Result<Scenario> {
    let mut s = match &common.scenario {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let loaded = load_scenario(&text).with_context(|| format!("loading {}", path.display()))?;
            for c in &loaded.conversions {
                eprintln!("note: {c}");
            }
            loaded.scenario
        }
        None => Scenario::reference(Corridor::Diagonal),
    };
    match common.eh_mode {
        Some(EhModeArg::BsLink) => s.eh_mode = EhMode::BsLink,
        Some(EhModeArg::UserLink) => s.eh_mode = EhMode::UserLink,
        None => {}
    }
    Ok(s)
}

fn options(common: &Common) -> BaselineOptions {
    let backend = match common.backend {
        BackendArg::Clarabel => Backend::Clarabel,
        BackendArg::Barrier => Backend::Barrier,
    };
    let mut o = BaselineOptions { solver: SolverSettings::with_backend(backend), ..BaselineOptions::default() };
    if common.straight_speed {
        o.fixed_speed = FixedSpeed::StraightLine;
    }
    o
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn write_manifest(common: &Common, s: &Scenario, settings: serde_json::Value) -> Result<()> {
    let manifest = Manifest::new(std::env::args().collect(), s, common.seed, settings);
    write_json(&common.out.join("manifest.json"), &manifest)
}

/// Writes subproblems and per-iteration trajectories as the run progresses.
struct Dumper {
    dir: PathBuf,
    programs: bool,
    trajectories: bool,
    error: Option<std::io::Error>,
}

impl Dumper {
    fn keep(&mut self, r: std::io::Result<()>) {
        if let Err(e) = r {
            self.error.get_or_insert(e);
        }
    }
}

impl AoObserver for Dumper {
    fn wants_programs(&self) -> bool {
        self.programs
    }

    fn subproblem(&mut self, stage: Stage, iteration: usize, program: &ConicProgram) {
        let name = format!("{stage:?}").to_lowercase();
        let path = self.dir.join("problems").join(format!("{name}-{iteration:02}.txt"));
        let r = write_atomic(&path, export_problem(program).as_bytes());
        self.keep(r);
    }

    fn trajectory(&mut self, iteration: usize, k: &Kinematics) {
        if !self.trajectories {
            return;
        }
        let mut csv = String::from("index,x,y,z\n");
        for (i, p) in k.positions.iter().enumerate() {
            csv.push_str(&format!("{i},{:.6},{:.6},{:.6}\n", p.x, p.y, p.z));
        }
        let path = self.dir.join("trajectories").join(format!("iter-{iteration:02}.csv"));
        let r = write_atomic(&path, csv.as_bytes());
        self.keep(r);
    }
}

enum Outcome {
    Done,
    Failed(RunError),
}

fn solve_and_write(
    common: &Common,
    baseline: Baseline,
    dumper: &mut Dumper,
) -> Result<std::result::Result<(Scenario, DecisionState, RunReport), RunError>> {
    let s = load(common)?;
    let opts = options(common);
    write_manifest(common, &s, serde_json::json!({ "baseline": baseline, "options": opts }))?;
    let run = run_baseline_observed(baseline, &s, &opts, dumper);
    if let Some(e) = dumper.error.take() {
        return Err(e).context("writing debug output");
    }
    let (state, report, timings) = match run {
        Ok(r) => r,
        Err(e) => return Ok(Err(e)),
    };
    let out = &common.out;
    write_json(&out.join("report.json"), &report)?;
    write_json(&out.join("state.json"), &state)?;
    write_json(&out.join("timings.json"), &timings)?;
    let source = PlotSource::Run { report: &report, state: &state };
    for kind in [PlotKind::Convergence, PlotKind::Trajectory3d, PlotKind::Trajectory2d, PlotKind::VelocityProfile] {
        emit_plot_data(&source, kind, out, kind.name())?;
    }
    Ok(Ok((s, state, report)))
}

fn print_summary(report: &RunReport) {
    println!(
        "{}: kappa {:.6e} J (rounded {:.6e} J), {} outer iterations, converged {}, max audit residual {:.2e}",
        report.label,
        report.kappa_relaxed,
        report.kappa_rounded,
        report.outer.len(),
        report.converged,
        report.audit_relaxed.max_residual()
    );
}

fn parse_values(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().with_context(|| format!("bad axis value `{t}`")))
        .collect()
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Solve { common, baseline, debug_dump, dump_trajectories } => {
            let mut dumper = Dumper { dir: common.out.clone(), programs: debug_dump, trajectories: dump_trajectories, error: None };
            match solve_and_write(&common, baseline, &mut dumper)? {
                Ok((_, _, report)) => {
                    print_summary(&report);
                    Ok(Outcome::Done)
                }
                Err(e) => Ok(Outcome::Failed(e)),
            }
        }
        Command::Sweep { common, axis, values, baselines } => {
            let values = parse_values(&values)?;
            let s = load(&common)?;
            let opts = options(&common);
            let baselines = if baselines.is_empty() { Baseline::ALL.to_vec() } else { baselines };
            write_manifest(
                &common,
                &s,
                serde_json::json!({ "axis": axis, "values": values, "baselines": baselines, "options": opts }),
            )?;
            let table = sweep(axis, &values, &s, &baselines, &opts);
            let out = &common.out;
            write_atomic(&out.join("sweep.csv"), table.to_csv().as_bytes())?;
            write_json(&out.join("sweep.json"), &table)?;
            emit_plot_data(&PlotSource::Sweep(&table), PlotKind::Sweep, out, "sweep-plot")?;
            for r in &table.rows {
                match (&r.kappa, &r.error) {
                    (Some(k), _) => println!("{} = {}: {} kappa {k:.6e} J", axis.name(), r.value, r.baseline),
                    (None, Some(e)) => println!("{} = {}: {} failed: {e}", axis.name(), r.value, r.baseline),
                    (None, None) => {}
                }
            }
            Ok(Outcome::Done)
        }
        Command::Oracle { common, baseline, samples } => {
            let mut dumper = Dumper { dir: common.out.clone(), programs: false, trajectories: false, error: None };
            let (s, state, mut report) = match solve_and_write(&common, baseline, &mut dumper)? {
                Ok(r) => r,
                Err(e) => return Ok(Outcome::Failed(e)),
            };
            let mut records: Vec<OracleRecord> = mc_rate(&state, &s, samples, common.seed)?;
            records.extend(mc_harvest(&state, &s, samples, common.seed)?);
            for r in &records {
                let verdict = match r.kind.as_str() {
                    "rate" if r.below_bound() => "below bound",
                    "rate" => "ABOVE BOUND",
                    _ if r.agrees() => "agrees",
                    _ => "DISAGREES",
                };
                println!(
                    "{} user {}: Monte Carlo {:.6e} ± {:.1e}, analytic {:.6e}: {verdict}",
                    r.kind, r.user, r.estimate.mean, r.estimate.std_err, r.analytic
                );
            }
            report.oracle = records;
            write_json(&common.out.join("report.json"), &report)?;
            Ok(Outcome::Done)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Failed(e)) => {
            eprintln!("error: {e}");
            let code = match &e {
                e if e.is_infeasible() => 2,
                RunError::Scenario(_) => 1,
                RunError::Ao(_) => 3,
            };
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
