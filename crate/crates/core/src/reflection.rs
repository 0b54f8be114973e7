//! SCA over the common per-slot reflection coefficient.
//!
//! The harvest constraint is concave in `ρ̄` and enters as the convex
//! quadratic row `Π + Σ_n c_n ρ̄_n² ≤ Σ_n c_n`. The rate of each pair uses the
//! minorant of [`LogQuadratic::minorant`] in `ρ̄`. Among maximizers of `Π`
//! the subproblem keeps the one with the largest `Σ ρ̄`.

use std::f64::consts::LN_2;

use irsuav_conic::{solve, Affine, ConicProgram, SolveResult, SolverSettings};
use serde::{Deserialize, Serialize};

use crate::channel::LargeScaleState;
use crate::model::Model;
use crate::trajectory::{sca_slack, ScaError, ScaTrace};

/// Relative slack on `Π` granted to the tie-breaking stage.
pub const PI_SLACK: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct ReflectionLayout {
    pub pi: usize,
    pub rho: Vec<usize>,
    /// `(k, n, y)` for every pair in a rate constraint.
    pub y: Vec<(usize, usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReflectionIterate {
    pub rho: Vec<f64>,
    /// Optimal value of the last subproblem.
    pub pi: f64,
}

/// Weighted minimum harvest margin `min_k Σ_n harvest / e_k`; `+∞` without a harvest constraint.
pub fn pi_exact(model: &Model, ls: &LargeScaleState, rho: &[f64], share: &[Vec<f64>]) -> f64 {
    if !model.harvest_active() {
        return f64::INFINITY;
    }
    model.total_harvest(ls, rho, share).into_iter().map(|h| h / model.threshold).fold(f64::INFINITY, f64::min)
}

/// Builds the reflection subproblem expanded at `prev_rho`.
pub fn build_reflection_subproblem(
    model: &Model,
    ls: &LargeScaleState,
    share: &[Vec<f64>],
    prev_rho: &[f64],
) -> (ConicProgram, ReflectionLayout) {
    let s = model.scenario;
    let (nn, kk) = (s.num_slots, s.num_users());
    let mut p = ConicProgram::maximize();
    let pi = p.free_var("Pi");
    let rho: Vec<usize> = (0..nn).map(|n| p.add_var(&format!("rho_{n}"), 0.0, 1.0)).collect();
    if model.harvest_active() {
        for k in 0..kk {
            let mut squares = Vec::new();
            let mut linear = Affine::var(pi);
            for n in 0..nn {
                let c = share[k][n] * model.unit_harvest(ls, &vec![0.0; nn], k, n) / model.threshold;
                if c > 0.0 {
                    squares.push(Affine::var(rho[n]) * c.sqrt());
                    linear.constant -= c;
                }
            }
            p.add_quadratic(&format!("C2_{k}"), squares, linear);
        }
    }
    let mut ys = Vec::new();
    for k in 0..kk {
        if !model.rate_active(k) {
            continue;
        }
        let mut row = Affine::constant(1.0);
        for n in 0..nn {
            let sh = share[k][n];
            if sh <= 0.0 {
                continue;
            }
            let f = model.rate_in_rho(ls, sh, k, n);
            let x0 = prev_rho[n];
            let w0 = f.power(x0);
            let y = p.free_var(&format!("y_{k}_{n}"));
            let omega = Affine::constant((1.0 + f.snr * (f.c - f.a * x0 * x0)) / w0)
                .term(rho[n], f.snr * (2.0 * f.a * x0 + f.b) / w0);
            p.add_rotated(&format!("rate_{k}_{n}"), omega, Affine::constant(0.5).term(y, -0.5), vec![Affine::constant(1.0)]);
            let w = sh / (LN_2 * s.min_rate[k]);
            row.push(y, -w);
            row.constant -= w * w0.ln();
            ys.push((k, n, y));
        }
        p.add_le(&format!("C3_{k}"), row);
    }
    p.set_objective(Affine::var(pi));
    (p, ReflectionLayout { pi, rho, y: ys })
}

fn failed(iteration: usize, res: SolveResult) -> ScaError {
    ScaError::Subproblem { iteration, status: res.status, detail: res.detail, implicated: res.implicated }
}

/// Factor applied to the solver tolerances of each reflection subproblem.
///
/// Near-infeasible rate demands make `Π` very sensitive to the rate rows, so
/// a point feasible only to the nominal tolerance can cost more than the
/// monotonicity slack at the next step. The nominal settings are the fallback.
pub const TIGHTENING: f64 = 1e-2;

/// Solves one subproblem: maximize `Π`, then maximize `Σ ρ̄` with `Π` held near its optimum.
pub fn solve_reflection_step(
    model: &Model,
    ls: &LargeScaleState,
    share: &[Vec<f64>],
    prev_rho: &[f64],
    settings: &SolverSettings,
    iteration: usize,
) -> Result<ReflectionIterate, ScaError> {
    let tight = SolverSettings {
        tol_feas: settings.tol_feas * TIGHTENING,
        tol_gap: settings.tol_gap * TIGHTENING,
        ..*settings
    };
    solve_step_with(model, ls, share, prev_rho, &tight, iteration)
        .or_else(|_| solve_step_with(model, ls, share, prev_rho, settings, iteration))
}

fn solve_step_with(
    model: &Model,
    ls: &LargeScaleState,
    share: &[Vec<f64>],
    prev_rho: &[f64],
    settings: &SolverSettings,
    iteration: usize,
) -> Result<ReflectionIterate, ScaError> {
    let (prog, layout) = build_reflection_subproblem(model, ls, share, prev_rho);
    let first = solve(&prog, None, settings).expect("reflection program is well formed");
    if !first.is_optimal() {
        return Err(failed(iteration, first));
    }
    let pi = first.value(layout.pi);
    let mut second = prog;
    second.add_ge("Pi-fixed", Affine::var(layout.pi).plus(-(pi - PI_SLACK * pi.abs().max(1.0))));
    let mut obj = Affine::zero();
    for &j in &layout.rho {
        obj.push(j, 1.0);
    }
    second.set_objective(obj);
    let res = solve(&second, None, settings).expect("reflection program is well formed");
    let x = if res.is_optimal() { res.x } else { first.x };
    Ok(ReflectionIterate { rho: layout.rho.iter().map(|&j| x[j].clamp(0.0, 1.0)).collect(), pi })
}

/// Checks the sign of the second derivative of every pair's rate on a grid of `ρ̄`.
///
/// Returns the number of pairs where the rate is not concave somewhere on the grid.
pub fn concavity_preflight(model: &Model, ls: &LargeScaleState, share: &[Vec<f64>]) -> usize {
    let mut bad = 0;
    for k in 0..model.num_users() {
        for n in 0..model.num_slots() {
            if share[k][n] <= 0.0 {
                continue;
            }
            let f = model.rate_in_rho(ls, 1.0, k, n);
            let scale = f.derivative(1.0).abs().max(f.derivative(0.0).abs()).max(1e-300);
            if (0..=100).any(|i| f.second_derivative(i as f64 / 100.0) > 1e-9 * scale) {
                bad += 1;
            }
        }
    }
    bad
}

/// Runs the reflection SCA from `init`.
pub fn sca_reflection(
    model: &Model,
    ls: &LargeScaleState,
    share: &[Vec<f64>],
    init: &[f64],
    settings: &SolverSettings,
) -> Result<(ReflectionIterate, ScaTrace), ScaError> {
    let s = model.scenario;
    let start = pi_exact(model, ls, init, share);
    let mut trace = ScaTrace { objective: vec![start], iterations: 0, converged: false };
    let mut current = ReflectionIterate { rho: init.to_vec(), pi: start };
    if !start.is_finite() {
        trace.converged = true;
        return Ok((current, trace));
    }
    for it in 1..=s.sca.max_iterations {
        let next = solve_reflection_step(model, ls, share, &current.rho, settings, it)?;
        let prev = *trace.objective.last().unwrap();
        if next.pi < prev - sca_slack(settings, prev) {
            return Err(ScaError::NonMonotone { iteration: it, previous: prev, current: next.pi });
        }
        trace.objective.push(next.pi);
        trace.iterations = it;
        current = next;
        if (current.pi - prev).abs() <= s.sca.tolerance {
            trace.converged = true;
            break;
        }
    }
    Ok((current, trace))
}
