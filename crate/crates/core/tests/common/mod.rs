#![allow(dead_code)]

use irsuav_conic::ConicProgram;
use irsuav_core::experiments::{run_baseline, run_baseline_observed, Baseline, BaselineOptions};
use irsuav_core::orchestrator::{AoObserver, DecisionState, RunReport, Stage};
use irsuav_core::phase::PhaseConfig;
use irsuav_core::scenario::{Corridor, Kinematics, Scenario, Vec3};
use irsuav_core::scheduling::Schedule;
use irsuav_core::channel::compute_large_scale;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn reference() -> Scenario {
    Scenario::reference(Corridor::Diagonal)
}

pub fn run(b: Baseline, s: &Scenario) -> (DecisionState, RunReport) {
    let (state, report, _) = run_baseline(b, s, &BaselineOptions::default()).unwrap_or_else(|e| panic!("{}: {e}", b.name()));
    (state, report)
}

/// Keeps every subproblem the run hands out.
#[derive(Default)]
pub struct Capture {
    pub programs: Vec<(Stage, usize, ConicProgram)>,
}

impl AoObserver for Capture {
    fn wants_programs(&self) -> bool {
        true
    }

    fn subproblem(&mut self, stage: Stage, iteration: usize, program: &ConicProgram) {
        self.programs.push((stage, iteration, program.clone()));
    }
}

pub fn run_captured(b: Baseline, s: &Scenario) -> (DecisionState, RunReport, Capture) {
    let mut cap = Capture::default();
    let (state, report, _) = run_baseline_observed(b, s, &BaselineOptions::default(), &mut cap).unwrap();
    (state, report, cap)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_point<R: Rng>(rng: &mut R, z: (f64, f64)) -> Vec3 {
    Vec3::new(rng.random_range(0.0..300.0), rng.random_range(20.0..80.0), rng.random_range(z.0..=z.1))
}

/// Three users, ten slots, random positions, one scheduled user per slot
/// with a random share, random reflection and the closed-form phases.
pub fn random_instance(seed: u64, m: usize) -> (Scenario, DecisionState) {
    let mut rng = rng(seed);
    let mut s = reference();
    s.num_slots = 10;
    s.set_num_elements(m);
    s.user_positions = (0..3).map(|_| random_point(&mut rng, (1.0, 1.0))).collect();
    let positions: Vec<Vec3> = (0..=s.num_slots).map(|_| random_point(&mut rng, (5.0, 20.0))).collect();
    let velocities = positions.windows(2).map(|w| (w[1] - w[0]) * (1.0 / s.slot_duration)).collect();
    let kinematics = Kinematics { positions, velocities };
    let mut relaxed = vec![vec![0.0; s.num_slots]; 3];
    for n in 0..s.num_slots {
        relaxed[rng.random_range(0..3)][n] = rng.random_range(0.2..=1.0);
    }
    let rho = (0..s.num_slots).map(|_| rng.random_range(0.0..=1.0)).collect();
    let ls = compute_large_scale(&kinematics, &s).unwrap();
    let phases = PhaseConfig::for_schedule(&ls, &s, &relaxed);
    let state = DecisionState { schedule: Schedule::relaxed(relaxed, s.fading_blocks), kinematics, rho, phases, kappa: 0.0 };
    (s, state)
}

/// `|a − b| ≤ tol·max(|a|, |b|, floor)`.
pub fn close(a: f64, b: f64, tol: f64, floor: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(floor)
}
