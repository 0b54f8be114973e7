//! SCA over the UAV trajectory and velocity.
//!
//! Slacks are normalized by their values at the expansion point:
//! `ũ = u/u₀`, `r̃ = r/r₀`, `t̃ = t/√(u₀r₀)`. The gain bounds then read
//! `ũ + (α/(2x₀))‖q − q_node‖² ≤ 1 + α/2` with `x₀ = ‖q⁽ⁱ⁾ − q_node‖²`,
//! and the slack coupling is the rotated cone `ũ·r̃ ≥ t̃²`.
//!
//! The rate of each scheduled pair enters through the minorant of
//! [`LogQuadratic::minorant`], written as `y ≤ 1 − 1/ω(t̃)` with `ω` affine,
//! which is the rotated cone `ω·(1 − y) ≥ 1`.

use irsuav_conic::{solve, Affine, ConicProgram, SolveResult, SolveStatus, SolverSettings};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{SlotGeometry, DEGENERATE_DISTANCE};
use crate::model::Model;
use crate::rate::{psi, LogQuadratic};
use crate::scenario::{check_kinematics, clearance_nodes, Kinematics, Scenario, Vec3};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ScaError {
    #[error("expansion point within {distance:e} m of node {node} at slot {slot}")]
    DegenerateExpansion { slot: usize, node: usize, distance: f64 },
    #[error("subproblem at iteration {iteration} ended with status {status:?}: {detail}")]
    Subproblem { iteration: usize, status: SolveStatus, detail: String, implicated: Vec<String> },
    #[error("objective fell from {previous} to {current} at iteration {iteration}")]
    NonMonotone { iteration: usize, previous: f64, current: f64 },
}

impl ScaError {
    pub fn status(&self) -> SolveStatus {
        match self {
            Self::Subproblem { status, .. } => *status,
            _ => SolveStatus::NumericalFailure,
        }
    }
}

/// Speed band `[low, high]` replacing the plain speed cap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedBand {
    pub low: f64,
    pub high: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOptions {
    pub speed_band: Option<SpeedBand>,
    /// On a decrease of `χ`, retry once with the midpoint of the previous and
    /// new iterates before reporting [`ScaError::NonMonotone`].
    #[serde(default)]
    pub halve_on_decrease: bool,
}

/// Scheduled pair carried by the subproblem.
#[derive(Clone, Debug, PartialEq)]
pub struct PairVars {
    pub k: usize,
    pub n: usize,
    pub r: usize,
    /// `(t̃, y)` indices, present when the pair enters a rate constraint.
    pub rate: Option<(usize, usize)>,
    pub r0: f64,
}

/// Variable layout of the trajectory subproblem.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryLayout {
    pub chi: usize,
    pub q: Vec<[usize; 3]>,
    pub v: Vec<[usize; 3]>,
    /// `(ũ index, u₀)` for slots with any scheduled share.
    pub u: Vec<Option<(usize, f64)>>,
    pub pairs: Vec<PairVars>,
}

/// Accepted iterate of the trajectory SCA.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryIterate {
    pub kinematics: Kinematics,
    /// Surrogate objective of the last solve.
    pub chi: f64,
    /// Weighted minimum rate margin with the exact rate expression.
    pub chi_true: f64,
    /// Slack values `(n, u)` in linear units.
    pub u: Vec<(usize, f64)>,
    /// Slack values `(k, n, r, t)` in linear units.
    pub rt: Vec<(usize, usize, f64, f64)>,
}

fn vec_of(p: &mut ConicProgram, name: &str, lo: [f64; 3], hi: [f64; 3]) -> [usize; 3] {
    [
        p.add_var(&format!("{name}_x"), lo[0], hi[0]),
        p.add_var(&format!("{name}_y"), lo[1], hi[1]),
        p.add_var(&format!("{name}_z"), lo[2], hi[2]),
    ]
}

fn diff(a: [usize; 3], b: [usize; 3], scale: f64) -> Vec<Affine> {
    (0..3).map(|i| Affine::zero().term(a[i], scale).term(b[i], -scale)).collect()
}

fn offset_from(q: [usize; 3], c: Vec3, scale: f64) -> Vec<Affine> {
    let c = c.to_array();
    (0..3).map(|i| Affine::var(q[i]) * scale + Affine::constant(-c[i] * scale)).collect()
}

/// Tangent of the convex `(D/D₀)^{−α/2}` at `D₀`, a global lower bound affine in `D = ‖q − node‖²`.
pub fn gain_minorant(d_sq: f64, d0_sq: f64, alpha: f64) -> f64 {
    1.0 + alpha / 2.0 - alpha / 2.0 * d_sq / d0_sq
}

/// Affine lower bound `‖d₀‖² + 2d₀ᵀ(q − p₀)` on `‖q − c‖²`, tight at `p₀`.
pub fn distance_sq_minorant(q: Vec3, c: Vec3, p0: Vec3) -> f64 {
    let d0 = p0 - c;
    d0.norm_sq() + 2.0 * d0.dot(q - p0)
}

/// Gain bound `x ≤` [`gain_minorant`] for the normalized slack `x`.
fn add_gain_bound(p: &mut ConicProgram, label: &str, slack: usize, q: [usize; 3], node: Vec3, q0: Vec3, alpha: f64) {
    let x0 = (q0 - node).norm_sq();
    let w = (alpha / (2.0 * x0)).sqrt();
    p.add_quadratic(label, offset_from(q, node, w), Affine::var(slack).plus(-1.0 - alpha / 2.0));
}

/// `‖p − c‖ ≥ radius` linearized at `p0`, scaled to a unit-norm gradient.
fn add_exclusion(p: &mut ConicProgram, label: &str, q: [usize; 3], c: Vec3, p0: Vec3, radius: f64, horizontal: bool) {
    let mut d0 = p0 - c;
    if horizontal {
        d0.z = 0.0;
    }
    let scale = 2.0 * d0.norm().max(radius);
    // radius² − ‖d0‖² − 2 d0ᵀ(q − p0) ≤ 0
    let g = d0.to_array();
    let p0a = p0.to_array();
    let mut row = Affine::constant((radius * radius - d0.norm_sq()) / scale);
    for i in 0..3 {
        if g[i] != 0.0 {
            row.push(q[i], -2.0 * g[i] / scale);
            row.constant += 2.0 * g[i] * p0a[i] / scale;
        }
    }
    p.add_le(label, row);
}

/// Weighted minimum rate margin with exact rates; `+∞` when no user has a rate demand.
pub fn chi_exact(model: &Model, k: &Kinematics, rho: &[f64], share: &[Vec<f64>]) -> f64 {
    let s = model.scenario;
    let geo: Vec<SlotGeometry> = k.slot_positions().iter().map(|q| SlotGeometry::at(*q, s)).collect();
    let (_, beta_kb) = crate::channel::direct_links(s);
    (0..model.num_users())
        .filter(|&u| model.rate_active(u))
        .map(|u| {
            let total: f64 =
                (0..model.num_slots()).map(|n| share[u][n] * model.unit_rate_at(&geo[n], beta_kb[u], rho[n], u)).sum();
            total / s.min_rate[u]
        })
        .fold(f64::INFINITY, f64::min)
}

fn check_expansion(prev: &Kinematics, s: &Scenario) -> Result<(), ScaError> {
    let nodes = clearance_nodes(s);
    for (slot, q) in prev.slot_positions().iter().enumerate() {
        for (node, c) in nodes.iter().enumerate() {
            let distance = (*q - *c).norm();
            if distance < DEGENERATE_DISTANCE {
                return Err(ScaError::DegenerateExpansion { slot, node, distance });
            }
        }
    }
    Ok(())
}

/// Builds the convex trajectory subproblem expanded at `prev`.
pub fn build_trajectory_subproblem(
    model: &Model,
    prev: &Kinematics,
    share: &[Vec<f64>],
    rho: &[f64],
    options: &TrajectoryOptions,
) -> Result<(ConicProgram, TrajectoryLayout), ScaError> {
    let s = model.scenario;
    check_expansion(prev, s)?;
    let (nn, kk) = (s.num_slots, s.num_users());
    let dt = s.slot_duration;
    let mut p = ConicProgram::maximize();
    let chi = p.free_var("chi");
    let inf = f64::INFINITY;
    let q: Vec<[usize; 3]> = (0..=nn)
        .map(|n| {
            let name = format!("q_{n}");
            if n == 0 || n == nn {
                let fixed = if n == 0 { s.start_position } else { s.end_position }.to_array();
                vec_of(&mut p, &name, fixed, fixed)
            } else {
                vec_of(&mut p, &name, [-inf, -inf, s.h_min], [inf, inf, s.h_max])
            }
        })
        .collect();
    let v: Vec<[usize; 3]> = (0..nn).map(|n| vec_of(&mut p, &format!("v_{n}"), [-inf; 3], [inf; 3])).collect();
    let geo: Vec<SlotGeometry> = prev.slot_positions().iter().map(|x| SlotGeometry::at(*x, s)).collect();
    let (_, beta_kb) = crate::channel::direct_links(s);

    let mut u = vec![None; nn];
    for n in 0..nn {
        if (0..kk).any(|k| share[k][n] > 0.0) {
            let idx = p.add_var(&format!("u_{n}"), 0.0, inf);
            add_gain_bound(&mut p, &format!("gain-bu_{n}"), idx, q[n], s.bs_position, prev.positions[n], s.pathloss.bu);
            u[n] = Some((idx, geo[n].beta_bu));
        }
    }

    let mut pairs = Vec::new();
    let mut rate_rows: Vec<Affine> = (0..kk).map(|_| Affine::var(chi)).collect();
    for k in 0..kk {
        for n in 0..nn {
            let sh = share[k][n];
            if sh <= 0.0 {
                continue;
            }
            let (ui, u0) = u[n].expect("slot with share has a u slack");
            let r0 = geo[n].users[k].gain;
            let r = p.add_var(&format!("r_{k}_{n}"), 0.0, inf);
            add_gain_bound(&mut p, &format!("gain-ku_{k}_{n}"), r, q[n], s.user_positions[k], prev.positions[n], s.pathloss.ku);
            let mut rate = None;
            if model.rate_active(k) {
                let t = p.add_var(&format!("t_{k}_{n}"), 0.0, inf);
                let y = p.free_var(&format!("y_{k}_{n}"));
                p.add_rotated(
                    &format!("slack_{k}_{n}"),
                    Affine::var(ui),
                    Affine::zero().term(r, 0.5),
                    vec![Affine::var(t)],
                );
                let f = LogQuadratic::in_t(&psi(beta_kb[k], rho[n], &s.rician, model.elements()), beta_kb[k], sh, model.snr(k));
                let t0 = (u0 * r0).sqrt();
                let w0 = f.power(t0);
                let omega = Affine::constant((1.0 + f.snr * (f.c - f.a * t0 * t0)) / w0)
                    .term(t, f.snr * (2.0 * f.a * t0 * t0 + f.b * t0) / w0);
                p.add_rotated(
                    &format!("rate_{k}_{n}"),
                    omega,
                    Affine::constant(0.5).term(y, -0.5),
                    vec![Affine::constant(1.0)],
                );
                let w = sh / (std::f64::consts::LN_2 * s.min_rate[k]);
                rate_rows[k].push(y, -w);
                rate_rows[k].constant -= w * w0.ln();
                rate = Some((t, y));
            }
            pairs.push(PairVars { k, n, r, rate, r0 });
        }
    }
    for (k, row) in rate_rows.into_iter().enumerate() {
        if model.rate_active(k) {
            p.add_le(&format!("C3_{k}"), row);
        }
    }
    if model.harvest_active() {
        for k in 0..kk {
            let mut row = Affine::constant(1.0);
            for pv in pairs.iter().filter(|pv| pv.k == k) {
                let g = &geo[pv.n];
                let per_gain = model.unit_harvest_at(g, rho[pv.n], k) / model.harvest_link(g, k).0;
                let coef = share[k][pv.n] * per_gain / model.threshold;
                match s.eh_mode {
                    crate::scenario::EhMode::BsLink => {
                        let (ui, u0) = u[pv.n].unwrap();
                        row.push(ui, -coef * u0);
                    }
                    crate::scenario::EhMode::UserLink => row.push(pv.r, -coef * pv.r0),
                }
            }
            p.add_le(&format!("C2_{k}"), row);
        }
    }

    for n in 0..nn {
        let mut step = diff(q[n + 1], q[n], 1.0);
        for (i, row) in step.iter_mut().enumerate() {
            row.push(v[n][i], -dt);
            p.add_eq(&format!("C9_{n}_{i}"), row.clone());
        }
        let cap = options.speed_band.map_or(s.v_max, |b| b.high);
        p.add_soc(&format!("C11_{n}"), Affine::constant(cap), (0..3).map(|i| Affine::var(v[n][i])).collect());
        if let Some(band) = options.speed_band {
            let v0 = prev.velocities[n];
            let norm = v0.norm();
            if norm > 0.0 {
                let d = v0 * (1.0 / norm);
                let row = Affine::constant(band.low).term(v[n][0], -d.x).term(v[n][1], -d.y).term(v[n][2], -d.z);
                p.add_le(&format!("speed-floor_{n}"), row.compact());
            }
        }
    }
    for n in 0..nn.saturating_sub(1) {
        p.add_soc(&format!("C10_{n}"), Affine::constant(s.a_max * dt), diff(v[n + 1], v[n], 1.0));
    }
    for n in 1..nn {
        let p0 = prev.positions[n];
        for (z, zone) in s.nofly_zones.iter().enumerate() {
            add_exclusion(&mut p, &format!("nofly_{z}_{n}"), q[n], zone.center, p0, zone.radius, zone.is_cylinder(s.h_max));
        }
        if s.node_clearance > 0.0 {
            for (j, c) in clearance_nodes(s).into_iter().enumerate() {
                add_exclusion(&mut p, &format!("clearance_{j}_{n}"), q[n], c, p0, s.node_clearance, false);
            }
        }
    }
    p.set_objective(Affine::var(chi));
    Ok((p, TrajectoryLayout { chi, q, v, u, pairs }))
}

fn extract(s: &Scenario, layout: &TrajectoryLayout, res: &SolveResult) -> TrajectoryIterate {
    let x = &res.x;
    let at = |ix: [usize; 3]| Vec3::new(x[ix[0]], x[ix[1]], x[ix[2]]);
    let mut positions: Vec<Vec3> = layout.q.iter().map(|ix| at(*ix)).collect();
    let nn = s.num_slots;
    positions[0] = s.start_position;
    positions[nn] = s.end_position;
    for p in positions.iter_mut().take(nn).skip(1) {
        p.z = p.z.clamp(s.h_min, s.h_max);
    }
    let velocities = positions.windows(2).map(|w| (w[1] - w[0]) * (1.0 / s.slot_duration)).collect();
    let u = layout.u.iter().enumerate().filter_map(|(n, e)| e.map(|(i, u0)| (n, x[i] * u0))).collect();
    let rt = layout
        .pairs
        .iter()
        .map(|pv| {
            let u0 = layout.u[pv.n].unwrap().1;
            let t = pv.rate.map_or(f64::NAN, |(t, _)| x[t] * (u0 * pv.r0).sqrt());
            (pv.k, pv.n, x[pv.r] * pv.r0, t)
        })
        .collect();
    TrajectoryIterate { kinematics: Kinematics { positions, velocities }, chi: x[layout.chi], chi_true: f64::NAN, u, rt }
}

/// Per-iteration record of an SCA run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScaTrace {
    /// Objective at the starting point followed by one value per solve.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Monotonicity slack for SCA objectives.
pub fn sca_slack(settings: &SolverSettings, value: f64) -> f64 {
    10.0 * settings.tol_gap.max(settings.tol_feas) * value.abs().max(1.0)
}

fn midpoint(a: &Kinematics, b: &Kinematics) -> Kinematics {
    let avg = |x: &[Vec3], y: &[Vec3]| x.iter().zip(y).map(|(&p, &q)| (p + q) * 0.5).collect();
    Kinematics { positions: avg(&a.positions, &b.positions), velocities: avg(&a.velocities, &b.velocities) }
}

/// Runs the trajectory SCA from `init` until the objective settles.
pub fn sca_trajectory(
    model: &Model,
    init: &Kinematics,
    share: &[Vec<f64>],
    rho: &[f64],
    options: &TrajectoryOptions,
    settings: &SolverSettings,
) -> Result<(TrajectoryIterate, ScaTrace), ScaError> {
    let s = model.scenario;
    let start = chi_exact(model, init, rho, share);
    let mut trace = ScaTrace { objective: vec![start], iterations: 0, converged: false };
    let mut current = TrajectoryIterate {
        kinematics: init.clone(),
        chi: start,
        chi_true: start,
        u: Vec::new(),
        rt: Vec::new(),
    };
    if !start.is_finite() {
        trace.converged = true;
        return Ok((current, trace));
    }
    for it in 1..=s.sca.max_iterations {
        let (prog, layout) = build_trajectory_subproblem(model, &current.kinematics, share, rho, options)?;
        let res = solve(&prog, None, settings).expect("trajectory program is well formed");
        if !res.is_optimal() {
            return Err(ScaError::Subproblem { iteration: it, status: res.status, detail: res.detail, implicated: res.implicated });
        }
        let mut next = extract(s, &layout, &res);
        next.chi_true = chi_exact(model, &next.kinematics, rho, share);
        let prev = *trace.objective.last().unwrap();
        if next.chi < prev - sca_slack(settings, prev) {
            let mid = options.halve_on_decrease.then(|| midpoint(&current.kinematics, &next.kinematics));
            match mid.map(|k| (chi_exact(model, &k, rho, share), k)) {
                Some((chi, k)) if chi >= prev - sca_slack(settings, prev) && check_kinematics(&k, s).is_empty() => {
                    next = TrajectoryIterate { kinematics: k, chi, chi_true: chi, u: Vec::new(), rt: Vec::new() };
                }
                _ => return Err(ScaError::NonMonotone { iteration: it, previous: prev, current: next.chi }),
            }
        }
        trace.objective.push(next.chi);
        trace.iterations = it;
        current = next;
        if (current.chi - prev).abs() <= s.sca.tolerance {
            trace.converged = true;
            break;
        }
    }
    Ok((current, trace))
}

/// Periods of the sinusoid used by [`wave_kinematics`].
pub const WAVE_PERIODS: f64 = 2.0;

fn wave_point(s: &Scenario, normal: Vec3, amplitude: f64, x: f64) -> Vec3 {
    let base = s.start_position + (s.end_position - s.start_position) * x;
    base + normal * (amplitude * (2.0 * std::f64::consts::PI * WAVE_PERIODS * x).sin())
}

fn wave_length(s: &Scenario, normal: Vec3, amplitude: f64, samples: usize) -> Vec<f64> {
    let mut acc = vec![0.0; samples + 1];
    let mut prev = wave_point(s, normal, amplitude, 0.0);
    for i in 1..=samples {
        let q = wave_point(s, normal, amplitude, i as f64 / samples as f64);
        acc[i] = acc[i - 1] + (q - prev).norm();
        prev = q;
    }
    acc
}

/// Path from start to end of length `speed·T`, flown at constant speed.
///
/// The path is the chord plus a sinusoid of [`WAVE_PERIODS`] periods,
/// vertical unless the chord itself is vertical. Falls back to the straight
/// line when `speed·T` does not exceed the chord.
pub fn wave_kinematics(s: &Scenario, speed: f64) -> Kinematics {
    const FINE: usize = 20_000;
    let chord_vec = s.end_position - s.start_position;
    let chord = chord_vec.norm();
    let length = speed * s.horizon();
    let nn = s.num_slots;
    if chord == 0.0 || length <= chord * (1.0 + 1e-12) {
        return crate::scenario::straight_line_kinematics(s).expect("validated scenario");
    }
    let e1 = chord_vec * (1.0 / chord);
    let mut normal = Vec3::new(0.0, 0.0, 1.0) - e1 * e1.z;
    if normal.norm() < 1e-9 {
        normal = Vec3::new(1.0, 0.0, 0.0) - e1 * e1.x;
    }
    let normal = normal * (1.0 / normal.norm());
    let (mut lo, mut hi) = (0.0, length);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if wave_length(s, normal, mid, FINE)[FINE] < length {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let amplitude = 0.5 * (lo + hi);
    let acc = wave_length(s, normal, amplitude, FINE);
    let total = acc[FINE];
    let mut j = 0;
    let positions: Vec<Vec3> = (0..=nn)
        .map(|i| {
            if i == 0 {
                return s.start_position;
            }
            if i == nn {
                return s.end_position;
            }
            let target = total * i as f64 / nn as f64;
            while acc[j + 1] < target {
                j += 1;
            }
            let f = (target - acc[j]) / (acc[j + 1] - acc[j]);
            wave_point(s, normal, amplitude, (j as f64 + f) / FINE as f64)
        })
        .collect();
    let velocities = positions.windows(2).map(|w| (w[1] - w[0]) * (1.0 / s.slot_duration)).collect();
    Kinematics { positions, velocities }
}
