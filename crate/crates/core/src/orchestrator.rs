//! Alternating optimization over scheduling, trajectory and reflection, and
//! the first-principles audit of the full problem.

use std::time::Instant;

use irsuav_conic::{ConicProgram, SolveStatus, SolverSettings};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::channel::{compute_large_scale, ChannelError, LargeScaleState, LinkModel};
use crate::energy::EnergyError;
use crate::model::{Model, ModelSwitches};
use crate::phase::{optimal_phases, PhaseConfig};
use crate::rate::rate_bound;
use crate::reflection::{build_reflection_subproblem, concavity_preflight, pi_exact, sca_reflection};
use crate::scenario::{check_kinematics, straight_line_kinematics, KinematicConstraint, Kinematics, Scenario, ValidatedScenario};
use crate::scheduling::{build_scheduling_program, round_with_repair, solve_scheduling, RoundingReport, Schedule, SchedulingError};
use crate::trajectory::{build_trajectory_subproblem, sca_trajectory, wave_kinematics, ScaError, TrajectoryOptions};

/// Which stage of an outer iteration failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Setup,
    Scheduling,
    Trajectory,
    Reflection,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum AoError {
    #[error("{stage:?} stage failed at outer iteration {iteration}: {message}")]
    Stage { stage: Stage, iteration: usize, status: SolveStatus, message: String },
    #[error("kappa rose from {previous} to {current} at outer iteration {iteration}")]
    MonotonicityViolation { iteration: usize, previous: f64, current: f64 },
}

impl AoError {
    /// True when the failure is an infeasibility rather than a numerical problem.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Self::Stage { status: SolveStatus::Infeasible, .. })
    }

    fn stage(stage: Stage, iteration: usize, status: SolveStatus, message: impl ToString) -> Self {
        Self::Stage { stage, iteration, status, message: message.to_string() }
    }
}

impl From<EnergyError> for AoError {
    fn from(e: EnergyError) -> Self {
        Self::stage(Stage::Setup, 0, SolveStatus::Infeasible, e)
    }
}

impl From<ChannelError> for AoError {
    fn from(e: ChannelError) -> Self {
        Self::stage(Stage::Setup, 0, SolveStatus::NumericalFailure, e)
    }
}

/// Starting trajectory of the AO loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialTrajectory {
    StraightLine,
    /// Constant-speed wave around the chord flown at the given speed.
    Wave { speed: f64 },
}

/// Stage switches of one AO run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AoConfig {
    pub switches: ModelSwitches,
    pub optimize_trajectory: bool,
    pub optimize_reflection: bool,
    /// Reflection coefficient held in every slot when not optimized.
    pub fixed_rho: Option<f64>,
    pub trajectory: TrajectoryOptions,
    pub initial: InitialTrajectory,
    pub solver: SolverSettings,
}

impl Default for AoConfig {
    fn default() -> Self {
        Self {
            switches: ModelSwitches::default(),
            optimize_trajectory: true,
            optimize_reflection: true,
            fixed_rho: None,
            trajectory: TrajectoryOptions::default(),
            initial: InitialTrajectory::StraightLine,
            solver: SolverSettings::default(),
        }
    }
}

/// Current values of every decision block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionState {
    pub schedule: Schedule,
    pub kinematics: Kinematics,
    pub rho: Vec<f64>,
    pub phases: PhaseConfig,
    /// Relaxed LP value of the last outer iteration.
    pub kappa: f64,
}

impl DecisionState {
    pub fn large_scale(&self, s: &Scenario) -> Result<LargeScaleState, ChannelError> {
        compute_large_scale(&self.kinematics, s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub iteration: usize,
    pub kappa: f64,
    pub chi: Vec<f64>,
    pub chi_true: f64,
    pub pi: Vec<f64>,
    pub trajectory_iterations: usize,
    pub reflection_iterations: usize,
    pub scheduling_status: SolveStatus,
    pub trajectory_status: Option<SolveStatus>,
    pub reflection_status: Option<SolveStatus>,
    /// Pairs whose rate is not concave in the reflection coefficient.
    pub concavity_failures: usize,
}

/// Largest relative violation of one constraint family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub constraint: String,
    /// User, slot or zone index of the worst violation.
    pub index: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    pub kappa: f64,
    pub residuals: Vec<Residual>,
}

impl Audit {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.value))
    }

    pub fn residual(&self, constraint: &str) -> f64 {
        self.residuals.iter().find(|r| r.constraint == constraint).map_or(0.0, |r| r.value)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub scenario_hash: String,
    pub config: AoConfig,
    pub outer: Vec<OuterRecord>,
    pub converged: bool,
    pub kappa_relaxed: f64,
    pub kappa_rounded: f64,
    pub rounding: RoundingReport,
    pub audit_relaxed: Audit,
    pub audit_rounded: Audit,
    /// Monte-Carlo checks appended by the oracle, when run.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub oracle: Vec<crate::oracle::OracleRecord>,
}

impl RunReport {
    pub fn kappa_trace(&self) -> Vec<f64> {
        self.outer.iter().map(|o| o.kappa).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Wall-clock seconds per stage, kept out of [`RunReport`] so reports stay byte-stable.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub scheduling: f64,
    pub trajectory: f64,
    pub reflection: f64,
    pub total: f64,
}

/// SHA-256 of the scenario's canonical JSON.
pub fn scenario_hash(s: &Scenario) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(s).expect("scenario serializes")))
}

/// Slack allowed when checking that `κ` does not increase.
pub fn kappa_slack(s: &Scenario, settings: &SolverSettings, previous: f64) -> f64 {
    let e_max = (0..s.num_users()).map(|k| s.slot_energy(k)).fold(0.0, f64::max);
    10.0 * settings.tol_feas.max(settings.tol_gap) * previous.max(e_max)
}

/// Receives intermediate artifacts of an AO run.
pub trait AoObserver {
    /// Whether [`AoObserver::subproblem`] should be called; building the programs costs time.
    fn wants_programs(&self) -> bool {
        false
    }

    /// The first subproblem of a stage in outer iteration `iteration`.
    fn subproblem(&mut self, _stage: Stage, _iteration: usize, _program: &ConicProgram) {}

    /// The trajectory at the end of outer iteration `iteration` (0 is the initial one).
    fn trajectory(&mut self, _iteration: usize, _kinematics: &Kinematics) {}
}

/// Observer that ignores everything.
pub struct Silent;

impl AoObserver for Silent {}

/// Runs the alternating optimization and audits the result.
pub fn alternating_optimize(
    scenario: &ValidatedScenario,
    config: &AoConfig,
    label: &str,
) -> Result<(DecisionState, RunReport, StageTimings), AoError> {
    alternating_optimize_observed(scenario, config, label, &mut Silent)
}

/// [`alternating_optimize`] reporting to `observer`.
pub fn alternating_optimize_observed(
    scenario: &ValidatedScenario,
    config: &AoConfig,
    label: &str,
    observer: &mut dyn AoObserver,
) -> Result<(DecisionState, RunReport, StageTimings), AoError> {
    let clock = Instant::now();
    let s: &Scenario = scenario;
    let model = Model::new(s, config.switches)?;
    let settings = &config.solver;
    let nn = s.num_slots;
    let mut kin = match config.initial {
        InitialTrajectory::StraightLine => straight_line_kinematics(s).map_err(|e| AoError::stage(Stage::Setup, 0, SolveStatus::Infeasible, e))?,
        InitialTrajectory::Wave { speed } => wave_kinematics(s, speed),
    };
    let mut rho = vec![config.fixed_rho.unwrap_or(s.init_reflection); nn];
    let mut timings = StageTimings::default();
    let mut outer: Vec<OuterRecord> = Vec::new();
    let mut schedule = None;
    let mut converged = false;
    let mut kappa = f64::NAN;
    observer.trajectory(0, &kin);

    for it in 1..=s.ao.max_iterations {
        let ls = compute_large_scale(&kin, s)?;
        if observer.wants_programs() {
            observer.subproblem(Stage::Scheduling, it, &build_scheduling_program(&model, &ls, &rho, None).0);
        }
        let t0 = Instant::now();
        let lp = solve_scheduling(&model, &ls, &rho, None, settings)
            .map_err(|e: SchedulingError| AoError::stage(Stage::Scheduling, it, e.status(), e))?;
        timings.scheduling += t0.elapsed().as_secs_f64();
        if let Some(prev) = outer.last() {
            if lp.kappa > prev.kappa + kappa_slack(s, settings, prev.kappa) {
                return Err(AoError::MonotonicityViolation { iteration: it, previous: prev.kappa, current: lp.kappa });
            }
        }
        kappa = lp.kappa;
        let share = lp.schedule.relaxed.clone();
        let mut record = OuterRecord {
            iteration: it,
            kappa,
            chi: Vec::new(),
            chi_true: f64::NAN,
            pi: Vec::new(),
            trajectory_iterations: 0,
            reflection_iterations: 0,
            scheduling_status: SolveStatus::Optimal,
            trajectory_status: None,
            reflection_status: None,
            concavity_failures: 0,
        };

        if config.optimize_trajectory && model.switches.use_irs {
            if observer.wants_programs() {
                if let Ok((p, _)) = build_trajectory_subproblem(&model, &kin, &share, &rho, &config.trajectory) {
                    observer.subproblem(Stage::Trajectory, it, &p);
                }
            }
            let t0 = Instant::now();
            let (iterate, trace) = sca_trajectory(&model, &kin, &share, &rho, &config.trajectory, settings)
                .map_err(|e: ScaError| AoError::stage(Stage::Trajectory, it, e.status(), e))?;
            timings.trajectory += t0.elapsed().as_secs_f64();
            kin = iterate.kinematics;
            record.chi = trace.objective;
            record.chi_true = iterate.chi_true;
            record.trajectory_iterations = trace.iterations;
            record.trajectory_status = Some(SolveStatus::Optimal);
        }

        if config.optimize_reflection && model.switches.use_irs {
            let ls = compute_large_scale(&kin, s)?;
            let t0 = Instant::now();
            if model.harvest_active() {
                if observer.wants_programs() {
                    observer.subproblem(Stage::Reflection, it, &build_reflection_subproblem(&model, &ls, &share, &rho).0);
                }
                record.concavity_failures = concavity_preflight(&model, &ls, &share);
                let (iterate, trace) = sca_reflection(&model, &ls, &share, &rho, settings)
                    .map_err(|e: ScaError| AoError::stage(Stage::Reflection, it, e.status(), e))?;
                rho = iterate.rho;
                record.pi = trace.objective;
                record.reflection_iterations = trace.iterations;
            } else {
                rho = vec![1.0; nn];
                record.pi = vec![pi_exact(&model, &ls, &rho, &share)];
            }
            record.reflection_status = Some(SolveStatus::Optimal);
            timings.reflection += t0.elapsed().as_secs_f64();
        }

        schedule = Some(lp.schedule);
        observer.trajectory(it, &kin);
        let previous = outer.last().map(|o| o.kappa);
        outer.push(record);
        if kappa == 0.0 {
            converged = true;
            break;
        }
        if let Some(prev) = previous {
            if (kappa - prev).abs() <= s.ao.tolerance * prev.abs() {
                converged = true;
                break;
            }
        }
    }

    let schedule = schedule.expect("at least one outer iteration");
    let ls = compute_large_scale(&kin, s)?;
    let relaxed_state = DecisionState {
        phases: PhaseConfig::for_schedule(&ls, s, &schedule.relaxed),
        schedule: schedule.clone(),
        kinematics: kin.clone(),
        rho: rho.clone(),
        kappa,
    };
    let audit_relaxed = evaluate_p1(&relaxed_state, &model);
    let (rounded, rounding) = round_with_repair(&model, &ls, &rho, &schedule, kappa, settings);
    let state = DecisionState {
        phases: PhaseConfig::for_schedule(&ls, s, &rounded.effective()),
        schedule: rounded,
        kinematics: kin,
        rho,
        kappa,
    };
    let audit_rounded = evaluate_p1(&state, &model);
    timings.total = clock.elapsed().as_secs_f64();
    let report = RunReport {
        label: label.to_string(),
        scenario_hash: scenario_hash(s),
        config: config.clone(),
        outer,
        converged,
        kappa_relaxed: kappa,
        kappa_rounded: rounding.kappa_rounded,
        rounding,
        audit_relaxed,
        audit_rounded,
        oracle: Vec::new(),
    };
    Ok((state, report, timings))
}

fn worst(name: &str, values: impl IntoIterator<Item = f64>) -> Residual {
    let mut best = Residual { constraint: name.to_string(), index: 0, value: 0.0 };
    for (i, v) in values.into_iter().enumerate() {
        if v > best.value || v.is_nan() {
            best.index = i;
            best.value = if v.is_nan() { f64::INFINITY } else { v };
        }
    }
    best
}

/// Recomputes every constraint of the full problem from the channel, energy and rate models.
///
/// Residuals are relative and positive when violated; C3 uses the rate
/// bound evaluated with the stored phases.
pub fn evaluate_p1(state: &DecisionState, model: &Model) -> Audit {
    let s = model.scenario;
    let (kk, nn) = (s.num_users(), s.num_slots);
    let share = state.schedule.effective();
    let kappa = model.max_energy(&share);
    let mut residuals = Vec::new();
    residuals.push(worst(
        "C1",
        (0..kk).map(|k| (share[k].iter().sum::<f64>() * s.slot_energy(k) - kappa) / kappa.max(f64::MIN_POSITIVE)),
    ));
    let Ok(ls) = compute_large_scale(&state.kinematics, s) else {
        residuals.push(Residual { constraint: "geometry".into(), index: 0, value: f64::INFINITY });
        return Audit { kappa, residuals };
    };
    let rho_eff: Vec<f64> = if model.switches.use_irs { state.rho.clone() } else { vec![0.0; nn] };
    if model.harvest_active() {
        let harvest = model.total_harvest(&ls, &rho_eff, &share);
        residuals.push(worst("C2", harvest.iter().map(|h| (model.threshold - h) / model.threshold)));
    }
    let rates: Vec<f64> = (0..kk)
        .map(|k| {
            (0..nn)
                .filter(|&n| share[k][n] > 0.0)
                .map(|n| {
                    let link = LinkModel::new(&ls, s, k, n);
                    let owned;
                    let phases = match state.phases.get(k, n) {
                        Some(p) => p,
                        None => {
                            owned = optimal_phases(&ls, s, k, n);
                            &owned
                        }
                    };
                    rate_bound(&link, rho_eff[n], phases, share[k][n], s.transmit_power[k], s.noise_power)
                })
                .sum()
        })
        .collect();
    residuals.push(worst(
        "C3",
        (0..kk).map(|k| if s.min_rate[k] > 0.0 { (s.min_rate[k] - rates[k]) / s.min_rate[k] } else { 0.0 }),
    ));
    residuals.push(worst("C4", (0..nn).map(|n| (0..kk).map(|k| share[k][n]).sum::<f64>() - 1.0)));
    residuals.push(worst(
        "C5",
        share.iter().flatten().map(|&x| if (0.0..=1.0).contains(&x) { 0.0 } else { x.abs().max((x - 1.0).abs()) }),
    ));
    residuals.push(worst(
        "C6",
        state.phases.slots.iter().flatten().flat_map(|p| p.phases.iter()).map(|&b| {
            if (0.0..std::f64::consts::TAU).contains(&b) {
                0.0
            } else {
                1.0
            }
        }),
    ));
    residuals.push(worst("C7", state.rho.iter().map(|&r| (r - 1.0).max(-r))));
    let mut families: Vec<(&str, Vec<(usize, f64)>)> =
        ["C8", "C9", "C10", "C11", "altitude", "C13-C14", "clearance"].iter().map(|n| (*n, Vec::new())).collect();
    let step = (s.v_max * s.slot_duration).max(1.0);
    for v in check_kinematics(&state.kinematics, s) {
        let (family, scale, index) = match v.constraint {
            KinematicConstraint::Start | KinematicConstraint::End => (0, step, v.slot),
            KinematicConstraint::Dynamics | KinematicConstraint::Dimensions => (1, step, v.slot),
            KinematicConstraint::Acceleration => (2, s.a_max * s.slot_duration, v.slot),
            KinematicConstraint::Speed => (3, s.v_max, v.slot),
            KinematicConstraint::AltitudeMin | KinematicConstraint::AltitudeMax => (4, s.h_max, v.slot),
            KinematicConstraint::NoFly(z) => (5, s.nofly_zones[z].radius, z),
            KinematicConstraint::Clearance(j) => (6, s.node_clearance, j),
        };
        families[family].1.push((index, v.magnitude / scale));
    }
    for (name, list) in families {
        let mut r = Residual { constraint: name.to_string(), index: 0, value: 0.0 };
        for (i, v) in list {
            if v > r.value {
                r.index = i;
                r.value = v;
            }
        }
        residuals.push(r);
    }
    for r in &mut residuals {
        r.value = r.value.max(0.0);
    }
    Audit { kappa, residuals }
}
