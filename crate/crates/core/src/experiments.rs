//! Baselines, parameter sweeps, plot data and run manifests.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use irsuav_conic::SolverSettings;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelSwitches;
use crate::orchestrator::{
    alternating_optimize_observed, scenario_hash, AoConfig, AoError, AoObserver, DecisionState, InitialTrajectory,
    RunReport, Silent, StageTimings,
};
use crate::scenario::{Scenario, ScenarioError};
use crate::trajectory::SpeedBand;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    Proposed,
    FixedVelocity,
    StraightTrajectory,
    NoIrs,
    NoEh,
}

impl Baseline {
    pub const ALL: [Baseline; 5] =
        [Baseline::Proposed, Baseline::FixedVelocity, Baseline::StraightTrajectory, Baseline::NoIrs, Baseline::NoEh];

    pub fn name(self) -> &'static str {
        match self {
            Self::Proposed => "proposed",
            Self::FixedVelocity => "fixed-velocity",
            Self::StraightTrajectory => "straight-trajectory",
            Self::NoIrs => "no-irs",
            Self::NoEh => "no-eh",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("unknown baseline `{0}`")]
pub struct UnknownBaseline(pub String);

impl FromStr for Baseline {
    type Err = UnknownBaseline;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|b| b.name() == s).ok_or_else(|| UnknownBaseline(s.to_string()))
    }
}

/// How the fixed-velocity baseline picks its speed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedSpeed {
    /// `factor` times the straight-line speed, with the heading optimized.
    Detour { factor: f64 },
    /// Exactly the straight-line speed.
    StraightLine,
}

/// Width of the speed band below the fixed speed.
pub const SPEED_BAND_WIDTH: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineOptions {
    pub fixed_speed: FixedSpeed,
    pub solver: SolverSettings,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self { fixed_speed: FixedSpeed::Detour { factor: 1.01 }, solver: SolverSettings::default() }
    }
}

/// Stage switches that define a baseline.
pub fn baseline_config(b: Baseline, s: &Scenario, opts: &BaselineOptions) -> AoConfig {
    let mut c = AoConfig { solver: opts.solver, ..AoConfig::default() };
    match b {
        Baseline::Proposed => {}
        Baseline::FixedVelocity => {
            let straight = (s.end_position - s.start_position).norm() / s.horizon();
            let speed = match opts.fixed_speed {
                FixedSpeed::Detour { factor } => (straight * factor).min(s.v_max),
                FixedSpeed::StraightLine => straight,
            };
            c.trajectory.speed_band = Some(SpeedBand { low: speed * (1.0 - SPEED_BAND_WIDTH), high: speed });
            c.initial = InitialTrajectory::Wave { speed };
        }
        Baseline::StraightTrajectory => c.optimize_trajectory = false,
        Baseline::NoIrs => {
            c.switches = ModelSwitches { use_irs: false, enforce_harvest: false };
            c.optimize_trajectory = false;
            c.optimize_reflection = false;
        }
        Baseline::NoEh => {
            c.switches = ModelSwitches { use_irs: true, enforce_harvest: false };
            c.optimize_reflection = false;
            c.fixed_rho = Some(1.0);
        }
    }
    c
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Ao(#[from] AoError),
}

impl RunError {
    pub fn is_infeasible(&self) -> bool {
        match self {
            Self::Scenario(e) => e.is_infeasible_instance(),
            Self::Ao(e) => e.is_infeasible(),
        }
    }
}

/// Runs one baseline end to end.
pub fn run_baseline(
    b: Baseline,
    s: &Scenario,
    opts: &BaselineOptions,
) -> Result<(DecisionState, RunReport, StageTimings), RunError> {
    run_baseline_observed(b, s, opts, &mut Silent)
}

/// [`run_baseline`] reporting intermediate artifacts to `observer`.
pub fn run_baseline_observed(
    b: Baseline,
    s: &Scenario,
    opts: &BaselineOptions,
    observer: &mut dyn AoObserver,
) -> Result<(DecisionState, RunReport, StageTimings), RunError> {
    let v = s.clone().validate()?;
    Ok(alternating_optimize_observed(&v, &baseline_config(b, s, opts), b.name(), observer)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// Per-user rate demand in bits/Hz.
    MinRate,
    /// Number of elements; the panel takes the most square factorization.
    NumElements,
    /// Horizon in seconds; the slot count is `round(T/δ)`.
    Horizon,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::MinRate => "min-rate",
            Self::NumElements => "num-elements",
            Self::Horizon => "horizon",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Self::MinRate => "bits/Hz",
            Self::NumElements => "elements",
            Self::Horizon => "s",
        }
    }

    pub fn apply(self, s: &Scenario, value: f64) -> Scenario {
        let mut out = s.clone();
        match self {
            Self::MinRate => out.min_rate = vec![value; s.num_users()],
            Self::NumElements => out.set_num_elements(value.round().max(1.0) as usize),
            Self::Horizon => out.num_slots = (value / s.slot_duration).round().max(1.0) as usize,
        }
        out
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("unknown sweep axis `{0}`")]
pub struct UnknownAxis(pub String);

impl FromStr for SweepAxis {
    type Err = UnknownAxis;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Self::MinRate, Self::NumElements, Self::Horizon]
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| UnknownAxis(s.to_string()))
    }
}

/// One cell of a sweep; failed cells carry the error text and no `κ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub baseline: Baseline,
    pub kappa: Option<f64>,
    pub kappa_rounded: Option<f64>,
    pub iterations: usize,
    pub wall_clock: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub scenario_hash: String,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// `κ` of one baseline in axis order, `None` for failed cells.
    pub fn series(&self, b: Baseline) -> Vec<(f64, Option<f64>)> {
        self.rows.iter().filter(|r| r.baseline == b).map(|r| (r.value, r.kappa)).collect()
    }

    /// CSV with columns `(value, baseline, kappa, iterations, wall_clock)`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},baseline,kappa,iterations,wall_clock\n", self.axis.name());
        for r in &self.rows {
            let kappa = r.kappa.map_or(String::new(), |k| format!("{k:e}"));
            out.push_str(&format!("{},{},{},{},{:.3}\n", r.value, r.baseline, kappa, r.iterations, r.wall_clock));
        }
        out
    }
}

/// Runs every baseline at every axis value; cells run in parallel and are
/// reported in `(value, baseline)` input order.
pub fn sweep(axis: SweepAxis, values: &[f64], s: &Scenario, baselines: &[Baseline], opts: &BaselineOptions) -> SweepTable {
    let cells: Vec<(f64, Baseline)> = values.iter().flat_map(|&v| baselines.iter().map(move |&b| (v, b))).collect();
    let rows = cells
        .par_iter()
        .map(|&(value, baseline)| {
            let clock = Instant::now();
            let result = run_baseline(baseline, &axis.apply(s, value), opts);
            let wall_clock = clock.elapsed().as_secs_f64();
            match result {
                Ok((_, report, _)) => SweepRow {
                    value,
                    baseline,
                    kappa: Some(report.kappa_relaxed),
                    kappa_rounded: Some(report.kappa_rounded),
                    iterations: report.outer.len(),
                    wall_clock,
                    error: None,
                },
                Err(e) => SweepRow {
                    value,
                    baseline,
                    kappa: None,
                    kappa_rounded: None,
                    iterations: 0,
                    wall_clock,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    SweepTable { axis, scenario_hash: scenario_hash(s), rows }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    Convergence,
    Trajectory3d,
    Trajectory2d,
    VelocityProfile,
    Sweep,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Convergence => "convergence",
            Self::Trajectory3d => "trajectory-3d",
            Self::Trajectory2d => "trajectory-2d",
            Self::VelocityProfile => "velocity-profile",
            Self::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("unknown plot kind `{0}`")]
    UnknownKind(String),
    #[error("plot kind `{0}` needs {1}")]
    WrongSource(&'static str, &'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FromStr for PlotKind {
    type Err = PlotError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Self::Convergence, Self::Trajectory3d, Self::Trajectory2d, Self::VelocityProfile, Self::Sweep]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| PlotError::UnknownKind(s.to_string()))
    }
}

/// What a plot is drawn from.
pub enum PlotSource<'a> {
    Run { report: &'a RunReport, state: &'a DecisionState },
    Sweep(&'a SweepTable),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

/// JSON sidecar describing a plot-data CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotMeta {
    pub kind: PlotKind,
    pub columns: Vec<Column>,
    pub rows: usize,
    pub scenario_hash: String,
    pub label: String,
}

/// CSV text and sidecar for a plot.
pub fn plot_data(source: &PlotSource, kind: PlotKind) -> Result<(String, PlotMeta), PlotError> {
    let col = |n: &str, u: &str| Column { name: n.into(), unit: u.into() };
    let (columns, rows, hash, label): (Vec<Column>, Vec<Vec<String>>, String, String) = match (kind, source) {
        (PlotKind::Sweep, PlotSource::Sweep(t)) => (
            vec![col(t.axis.name(), t.axis.unit()), col("baseline", ""), col("kappa", "J")],
            t.rows
                .iter()
                .map(|r| vec![r.value.to_string(), r.baseline.to_string(), r.kappa.map_or(String::new(), |k| format!("{k:e}"))])
                .collect(),
            t.scenario_hash.clone(),
            t.axis.name().to_string(),
        ),
        (PlotKind::Sweep, _) => return Err(PlotError::WrongSource("sweep", "a sweep table")),
        (_, PlotSource::Sweep(_)) => return Err(PlotError::WrongSource(kind.name(), "a run")),
        (_, PlotSource::Run { report, state }) => {
            let k = &state.kinematics;
            let (columns, rows) = match kind {
                PlotKind::Convergence => (
                    vec![col("iteration", ""), col("kappa", "J")],
                    report.outer.iter().map(|o| vec![o.iteration.to_string(), format!("{:e}", o.kappa)]).collect(),
                ),
                PlotKind::Trajectory3d => (
                    vec![col("index", ""), col("x", "m"), col("y", "m"), col("z", "m")],
                    k.positions
                        .iter()
                        .enumerate()
                        .map(|(i, p)| vec![i.to_string(), format!("{:.6}", p.x), format!("{:.6}", p.y), format!("{:.6}", p.z)])
                        .collect(),
                ),
                PlotKind::Trajectory2d => (
                    vec![col("index", ""), col("x", "m"), col("y", "m")],
                    k.positions
                        .iter()
                        .enumerate()
                        .map(|(i, p)| vec![i.to_string(), format!("{:.6}", p.x), format!("{:.6}", p.y)])
                        .collect(),
                ),
                PlotKind::VelocityProfile => (
                    vec![col("slot", ""), col("vx", "m/s"), col("vy", "m/s"), col("vz", "m/s"), col("speed", "m/s")],
                    k.velocities
                        .iter()
                        .enumerate()
                        .map(|(i, v)| {
                            vec![
                                i.to_string(),
                                format!("{:.6}", v.x),
                                format!("{:.6}", v.y),
                                format!("{:.6}", v.z),
                                format!("{:.6}", v.norm()),
                            ]
                        })
                        .collect(),
                ),
                PlotKind::Sweep => unreachable!(),
            };
            (columns, rows, report.scenario_hash.clone(), report.label.clone())
        }
    };
    let mut csv = columns.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join(",");
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.join(","));
        csv.push('\n');
    }
    Ok((csv, PlotMeta { kind, columns, rows: rows.len(), scenario_hash: hash, label }))
}

/// Writes `<dir>/<stem>.csv` and `<dir>/<stem>.json` atomically; returns both paths.
pub fn emit_plot_data(source: &PlotSource, kind: PlotKind, dir: &Path, stem: &str) -> Result<[PathBuf; 2], PlotError> {
    let (csv, meta) = plot_data(source, kind)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    write_atomic(&csv_path, csv.as_bytes())?;
    write_atomic(&json_path, serde_json::to_string_pretty(&meta).expect("meta serializes").as_bytes())?;
    Ok([csv_path, json_path])
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Everything needed to repeat a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: Vec<String>,
    pub scenario_hash: String,
    pub scenario: Scenario,
    pub seed: u64,
    pub settings: serde_json::Value,
    pub versions: Versions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub irsuav_core: String,
    pub solver: String,
}

impl Versions {
    pub fn current() -> Self {
        Self { irsuav_core: env!("CARGO_PKG_VERSION").to_string(), solver: irsuav_conic::BACKEND_VERSION.to_string() }
    }
}

impl Manifest {
    pub fn new(command: Vec<String>, s: &Scenario, seed: u64, settings: serde_json::Value) -> Self {
        Self { command, scenario_hash: scenario_hash(s), scenario: s.clone(), seed, settings, versions: Versions::current() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for b in Baseline::ALL {
            assert_eq!(b.name().parse::<Baseline>().unwrap(), b);
        }
        assert!("none".parse::<Baseline>().is_err());
        assert!(matches!("pie".parse::<PlotKind>(), Err(PlotError::UnknownKind(_))));
        assert_eq!("num-elements".parse::<SweepAxis>().unwrap(), SweepAxis::NumElements);
    }

    #[test]
    fn empty_sweep_is_empty() {
        let s = Scenario::reference(crate::scenario::Corridor::Diagonal);
        let t = sweep(SweepAxis::MinRate, &[], &s, &Baseline::ALL, &BaselineOptions::default());
        assert!(t.rows.is_empty());
        assert_eq!(t.to_csv().lines().count(), 1);
    }

    #[test]
    fn axis_application() {
        let s = Scenario::reference(crate::scenario::Corridor::Diagonal);
        assert_eq!(SweepAxis::NumElements.apply(&s, 50.0).num_elements(), 50);
        assert_eq!(SweepAxis::Horizon.apply(&s, 20.0).num_slots, 40);
        assert_eq!(SweepAxis::MinRate.apply(&s, 5.0).min_rate, vec![5.0; 3]);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
