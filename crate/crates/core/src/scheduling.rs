//! Relaxed scheduling LP and fading-block rounding.

use irsuav_conic::{solve, Affine, ConicProgram, SolveStatus, SolverSettings};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::LargeScaleState;
use crate::model::Model;

/// Relative slack granted to `κ` when the second stage picks a tie-breaking solution.
pub const KAPPA_SLACK: f64 = 1e-8;

/// Shares at or below this value are removed by the support polish.
pub const POLISH_SHARE: f64 = 1e-7;

/// Maximum number of support-polish rounds.
pub const POLISH_ROUNDS: usize = 3;

/// Largest relative increase of `κ` accepted from the support polish.
pub const POLISH_TOLERANCE: f64 = 1e-6;

/// Rounded C2/C3 shortfall that triggers the repair pass.
pub const REPAIR_THRESHOLD: f64 = 0.01;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SchedulingError {
    #[error("scheduling LP infeasible; implicated: {}", summarize(.implicated))]
    Infeasible { implicated: Vec<String> },
    #[error("scheduling LP ended with status {status:?}: {detail}")]
    Solver { status: SolveStatus, detail: String },
}

impl SchedulingError {
    pub fn status(&self) -> SolveStatus {
        match self {
            Self::Infeasible { .. } => SolveStatus::Infeasible,
            Self::Solver { status, .. } => *status,
        }
    }
}

/// Scheduling shares indexed `[k][n]`, with optional rounded block counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub relaxed: Vec<Vec<f64>>,
    pub blocks: Option<Vec<Vec<u32>>>,
    pub fading_blocks: usize,
}

impl Schedule {
    pub fn relaxed(relaxed: Vec<Vec<f64>>, fading_blocks: usize) -> Self {
        Self { relaxed, blocks: None, fading_blocks }
    }

    /// Shares actually used: `N/L` once rounded, the relaxed values otherwise.
    pub fn effective(&self) -> Vec<Vec<f64>> {
        match &self.blocks {
            Some(b) => blocks_to_shares(b, self.fading_blocks),
            None => self.relaxed.clone(),
        }
    }

    /// 0/1 indicators, available for a rounded schedule with `L = 1`.
    pub fn binary(&self) -> Option<Vec<Vec<u8>>> {
        match (&self.blocks, self.fading_blocks) {
            (Some(b), 1) => Some(b.iter().map(|row| row.iter().map(|&x| x.min(1) as u8).collect()).collect()),
            _ => None,
        }
    }
}

pub fn blocks_to_shares(blocks: &[Vec<u32>], fading_blocks: usize) -> Vec<Vec<f64>> {
    blocks.iter().map(|row| row.iter().map(|&b| b as f64 / fading_blocks as f64).collect()).collect()
}

/// Variable layout of the scheduling program.
#[derive(Clone, Debug)]
pub struct SchedulingVars {
    pub kappa: usize,
    /// `share[k][n]` variable indices.
    pub share: Vec<Vec<usize>>,
}

/// Builds the relaxed LP: minimize `κ` subject to C1–C4 and `floor ≤ s ≤ 1`.
pub fn build_scheduling_program(
    model: &Model,
    ls: &LargeScaleState,
    rho: &[f64],
    floors: Option<&[Vec<f64>]>,
) -> (ConicProgram, SchedulingVars) {
    build_restricted(model, ls, rho, floors, None)
}

/// As [`build_scheduling_program`], with shares outside `support` fixed to zero.
fn build_restricted(
    model: &Model,
    ls: &LargeScaleState,
    rho: &[f64],
    floors: Option<&[Vec<f64>]>,
    support: Option<&[Vec<bool>]>,
) -> (ConicProgram, SchedulingVars) {
    let s = model.scenario;
    let (kk, nn) = (model.num_users(), model.num_slots());
    let mut p = ConicProgram::minimize();
    let kappa = p.add_var("kappa", 0.0, f64::INFINITY);
    let share: Vec<Vec<usize>> = (0..kk)
        .map(|k| {
            (0..nn)
                .map(|n| {
                    let lo = floors.map_or(0.0, |f| f[k][n].clamp(0.0, 1.0));
                    let hi = if support.is_none_or(|m| m[k][n]) { 1.0 } else { lo };
                    p.add_var(&format!("s_{k}_{n}"), lo, hi)
                })
                .collect()
        })
        .collect();
    for k in 0..kk {
        let e = s.slot_energy(k);
        let mut row = Affine::zero().term(kappa, -1.0);
        for n in 0..nn {
            row.push(share[k][n], e);
        }
        p.add_le(&format!("C1_{k}"), row);
    }
    if model.harvest_active() {
        for k in 0..kk {
            let mut row = Affine::constant(1.0);
            for n in 0..nn {
                let h = model.unit_harvest(ls, rho, k, n) / model.threshold;
                if h != 0.0 {
                    row.push(share[k][n], -h);
                }
            }
            p.add_le(&format!("C2_{k}"), row);
        }
    }
    for k in 0..kk {
        if !model.rate_active(k) {
            continue;
        }
        let mut row = Affine::constant(1.0);
        for n in 0..nn {
            row.push(share[k][n], -model.unit_rate(ls, rho, k, n) / s.min_rate[k]);
        }
        p.add_le(&format!("C3_{k}"), row);
    }
    for n in 0..nn {
        let mut row = Affine::constant(-1.0);
        for sh in &share {
            row.push(sh[n], 1.0);
        }
        p.add_le(&format!("C4_{n}"), row);
    }
    p.set_objective(Affine::var(kappa));
    (p, SchedulingVars { kappa, share })
}

fn check(res: &irsuav_conic::SolveResult) -> Result<(), SchedulingError> {
    match res.status {
        SolveStatus::Optimal => Ok(()),
        SolveStatus::Infeasible => Err(SchedulingError::Infeasible { implicated: res.implicated.clone() }),
        status => Err(SchedulingError::Solver { status, detail: res.detail.clone() }),
    }
}

/// Result of the two-stage scheduling solve.
#[derive(Clone, Debug, PartialEq)]
pub struct SchedulingSolution {
    pub schedule: Schedule,
    /// Optimal value of the relaxed LP.
    pub kappa: f64,
    pub program: ConicProgram,
}

fn two_stage(
    model: &Model,
    program: &ConicProgram,
    vars: &SchedulingVars,
    settings: &SolverSettings,
) -> Result<(f64, Vec<f64>), SchedulingError> {
    let first = solve(program, None, settings).expect("scheduling program is well formed");
    check(&first)?;
    let kappa = first.value(vars.kappa).max(0.0);
    let nn = model.num_slots();
    let mut second = program.clone();
    second.add_le("kappa-fixed", Affine::var(vars.kappa).plus(-(kappa * (1.0 + KAPPA_SLACK) + 1e-15)));
    let mut obj = Affine::zero();
    for (k, row) in vars.share.iter().enumerate() {
        let e = model.scenario.slot_energy(k);
        for (n, &j) in row.iter().enumerate() {
            obj.push(j, e * (1.0 + 1e-3 * n as f64 / nn as f64));
        }
    }
    second.set_objective(obj);
    let res = solve(&second, None, settings).expect("scheduling program is well formed");
    Ok((kappa, if res.is_optimal() { res.x } else { first.x }))
}

/// Solves the relaxed LP, then picks among near-optimal schedules the one
/// with least total energy, breaking ties toward earlier slots.
///
/// Shares at or below [`POLISH_SHARE`] are then fixed to zero and the LP is
/// solved again, for up to [`POLISH_ROUNDS`] rounds; a polished schedule is
/// kept when it is optimal and its `κ` is within [`POLISH_TOLERANCE`].
pub fn solve_scheduling(
    model: &Model,
    ls: &LargeScaleState,
    rho: &[f64],
    floors: Option<&[Vec<f64>]>,
    settings: &SolverSettings,
) -> Result<SchedulingSolution, SchedulingError> {
    let (program, vars) = build_restricted(model, ls, rho, floors, None);
    let (mut kappa, mut x) = two_stage(model, &program, &vars, settings)?;
    let floor_at = |k: usize, n: usize| floors.map_or(0.0, |f| f[k][n]);
    let mut support: Vec<Vec<bool>> = vars.share.iter().map(|row| vec![true; row.len()]).collect();
    for _ in 0..POLISH_ROUNDS {
        let mut changed = false;
        for (k, row) in vars.share.iter().enumerate() {
            for (n, &j) in row.iter().enumerate() {
                if support[k][n] && x[j] <= POLISH_SHARE && floor_at(k, n) == 0.0 {
                    support[k][n] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
        let (restricted, rvars) = build_restricted(model, ls, rho, floors, Some(&support));
        match two_stage(model, &restricted, &rvars, settings) {
            Ok((k2, mut x2)) if k2 <= kappa * (1.0 + POLISH_TOLERANCE) + 1e-15 => {
                for (k, row) in vars.share.iter().enumerate() {
                    for (n, &j) in row.iter().enumerate() {
                        if !support[k][n] {
                            x2[j] = 0.0;
                        }
                    }
                }
                kappa = k2;
                x = x2;
            }
            _ => break,
        }
    }
    let relaxed = vars.share.iter().map(|row| row.iter().map(|&j| x[j].clamp(0.0, 1.0)).collect()).collect();
    Ok(SchedulingSolution { schedule: Schedule::relaxed(relaxed, model.scenario.fading_blocks), kappa, program })
}

/// Rounds one slot's shares to block counts.
///
/// Each user asks for `⌊L·s⌉` blocks (or `⌈L·s⌉` when listed in `ceil`).
/// If the requests exceed `L`, users are served in order of priority
/// (`ceil` users first, then descending fractional part of `L·s`, then
/// index) and each receives at most the remaining capacity.
pub fn round_slot(shares: &[f64], fading_blocks: usize, ceil: &[bool]) -> Vec<u32> {
    let l = fading_blocks as f64;
    let scaled: Vec<f64> = shares.iter().map(|s| s.clamp(0.0, 1.0) * l).collect();
    let want: Vec<u32> = scaled
        .iter()
        .zip(ceil)
        .map(|(x, &c)| if c { (x - 1e-9).ceil().max(0.0) as u32 } else { x.round() as u32 })
        .collect();
    if want.iter().sum::<u32>() as usize <= fading_blocks {
        return want;
    }
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        ceil[b]
            .cmp(&ceil[a])
            .then((scaled[b] - scaled[b].floor()).total_cmp(&(scaled[a] - scaled[a].floor())))
            .then(a.cmp(&b))
    });
    let mut left = fading_blocks as u32;
    let mut out = vec![0; shares.len()];
    for k in order {
        out[k] = want[k].min(left);
        left -= out[k];
    }
    out
}

/// Rounds every slot of `relaxed[k][n]` with nearest-integer rounding and the cap repair.
pub fn round_schedule(relaxed: &[Vec<f64>], fading_blocks: usize) -> Vec<Vec<u32>> {
    round_with_ceil(relaxed, fading_blocks, &vec![false; relaxed.len()])
}

fn round_with_ceil(relaxed: &[Vec<f64>], fading_blocks: usize, ceil: &[bool]) -> Vec<Vec<u32>> {
    let kk = relaxed.len();
    let nn = relaxed.first().map_or(0, Vec::len);
    let mut out = vec![vec![0; nn]; kk];
    for n in 0..nn {
        let col: Vec<f64> = (0..kk).map(|k| relaxed[k][n]).collect();
        for (k, b) in round_slot(&col, fading_blocks, ceil).into_iter().enumerate() {
            out[k][n] = b;
        }
    }
    out
}

/// Outcome of rounding a relaxed schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundingReport {
    pub kappa_relaxed: f64,
    pub kappa_rounded: f64,
    /// Granularity bound `max_k E_k · K / L`.
    pub granularity: f64,
    /// Relative C2 shortfall per user after rounding.
    pub harvest_shortfall: Vec<f64>,
    /// Relative C3 shortfall per user after rounding.
    pub rate_shortfall: Vec<f64>,
    /// Slots where the per-slot cap repair changed a rounded count.
    pub capped_slots: usize,
    pub repair_pass: bool,
}

impl RoundingReport {
    pub fn worst_shortfall(&self) -> f64 {
        self.harvest_shortfall.iter().chain(&self.rate_shortfall).fold(0.0, |m, v| m.max(*v))
    }
}

fn shortfalls(model: &Model, ls: &LargeScaleState, rho: &[f64], share: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let s = model.scenario;
    let harvest = model.total_harvest(ls, rho, share);
    let rates = model.total_rates(ls, rho, share);
    let h = (0..model.num_users())
        .map(|k| if model.harvest_active() { ((model.threshold - harvest[k]) / model.threshold).max(0.0) } else { 0.0 })
        .collect();
    let r = (0..model.num_users())
        .map(|k| if model.rate_active(k) { ((s.min_rate[k] - rates[k]) / s.min_rate[k]).max(0.0) } else { 0.0 })
        .collect();
    (h, r)
}

fn capped_slots(relaxed: &[Vec<f64>], blocks: &[Vec<u32>], fading_blocks: usize) -> usize {
    let nn = blocks.first().map_or(0, Vec::len);
    (0..nn)
        .filter(|&n| relaxed.iter().zip(blocks).any(|(r, b)| (r[n].clamp(0.0, 1.0) * fading_blocks as f64).round() as u32 != b[n]))
        .count()
}

/// Rounds `schedule` and runs one repair pass if C2/C3 fall short by more than 1%.
pub fn round_with_repair(
    model: &Model,
    ls: &LargeScaleState,
    rho: &[f64],
    schedule: &Schedule,
    kappa_relaxed: f64,
    settings: &SolverSettings,
) -> (Schedule, RoundingReport) {
    let l = schedule.fading_blocks;
    let kk = model.num_users();
    let mut relaxed = schedule.relaxed.clone();
    let mut blocks = round_schedule(&relaxed, l);
    let (mut h, mut r) = shortfalls(model, ls, rho, &blocks_to_shares(&blocks, l));
    let mut repair_pass = false;
    let worst = |h: &[f64], r: &[f64]| h.iter().chain(r).fold(0.0f64, |m, v| m.max(*v));
    if worst(&h, &r) > REPAIR_THRESHOLD {
        let floors = blocks_to_shares(&blocks, l);
        if let Ok(sol) = solve_scheduling(model, ls, rho, Some(&floors), settings) {
            let ceil: Vec<bool> = (0..kk).map(|k| h[k] > 0.0 || r[k] > 0.0).collect();
            relaxed = sol.schedule.relaxed;
            blocks = round_with_ceil(&relaxed, l, &ceil);
            (h, r) = shortfalls(model, ls, rho, &blocks_to_shares(&blocks, l));
            repair_pass = true;
        }
    }
    let shares = blocks_to_shares(&blocks, l);
    let e_max = (0..kk).map(|k| model.scenario.slot_energy(k)).fold(0.0, f64::max);
    let report = RoundingReport {
        kappa_relaxed,
        kappa_rounded: model.max_energy(&shares),
        granularity: e_max * kk as f64 / l as f64,
        harvest_shortfall: h,
        rate_shortfall: r,
        capped_slots: capped_slots(&relaxed, &blocks, l),
        repair_pass,
    };
    (Schedule { relaxed, blocks: Some(blocks), fading_blocks: l }, report)
}

/// Joins at most ten labels, noting how many were left out.
pub fn summarize(labels: &[String]) -> String {
    let mut out = labels.iter().take(10).cloned().collect::<Vec<_>>().join(", ");
    if labels.len() > 10 {
        out.push_str(&format!(" and {} more", labels.len() - 10));
    }
    out
}
