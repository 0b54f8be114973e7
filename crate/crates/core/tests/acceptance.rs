//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::f64::consts::TAU;
use std::time::Instant;

use common::{close, random_instance, random_point, reference, rng, run_captured};
use irsuav_conic::canonical::canonical_problems;
use irsuav_conic::{export_problem, parse_problem, solve, Backend, SolveStatus, SolverSettings};
use irsuav_core::channel::{direct_links, rician_split, LinkModel, SlotGeometry};
use irsuav_core::energy::{min_input_threshold, nonlinear_harvest};
use irsuav_core::experiments::{run_baseline, Baseline, BaselineOptions, SweepAxis};
use irsuav_core::oracle::{mc_decomposition_link, mc_rate};
use irsuav_core::orchestrator::{kappa_slack, RunReport, Stage};
use irsuav_core::phase::optimal_phases_at;
use irsuav_core::rate::{b_k, b_squared_optimal, mean_gain, psi, LogQuadratic};
use irsuav_core::scenario::{EhParams, Scenario, Vec3};
use irsuav_core::scheduling::round_slot;
use irsuav_core::trajectory::{distance_sq_minorant, gain_minorant, sca_slack};
use num_complex::Complex64;
use rand::Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c1_rate_bound() -> Check {
    let clock = Instant::now();
    let mut passed = 0;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..20u64 {
        let m = if i % 2 == 0 { 4 } else { 25 };
        let (s, state) = random_instance(1000 + i, m);
        let records = mc_rate(&state, &s, 100_000, i).map_err(|e| e.to_string())?;
        if records.iter().all(|r| r.below_bound()) {
            passed += 1;
        }
        for r in records.iter().filter(|r| r.estimate.std_err > 0.0) {
            worst = worst.max((r.estimate.mean - r.analytic) / r.estimate.std_err);
        }
    }
    let secs = clock.elapsed().as_secs_f64();
    ensure(passed == 20, || format!("{passed}/20 instances below bound + 3σ"))?;
    ensure(secs <= 120.0, || format!("took {secs:.1} s"))?;
    Ok(format!("20/20 instances, largest (MC − bound)/σ = {worst:.1}, {secs:.1} s"))
}

fn c2_decomposition() -> Check {
    let mut worst: f64 = 0.0;
    for i in 0..10u64 {
        let m = if i % 2 == 0 { 4 } else { 25 };
        let (s, state) = random_instance(2000 + i, m);
        let ls = state.large_scale(&s).map_err(|e| e.to_string())?;
        let share = state.schedule.effective();
        let n = (i as usize) % s.num_slots;
        let k = (0..3).find(|&k| share[k][n] > 0.0).expect("every slot has a user");
        let link = LinkModel::new(&ls, &s, k, n);
        let phases = state.phases.get(k, n).unwrap().to_vec();
        let d = mc_decomposition_link(&link, state.rho[n], &phases, 100_000, i, 0);
        for (name, est, closed) in [("a", d.a, d.closed[0]), ("c", d.c, d.closed[2]), ("d", d.d, d.closed[3]), ("e", d.e, d.closed[4])] {
            let z = (est.mean - closed).abs() / est.std_err;
            worst = worst.max(z);
            ensure(z <= 3.0, || format!("instance {i}: term {name} off by {z:.2}σ"))?;
        }
        ensure(d.b == d.closed[1], || format!("instance {i}: deterministic term differs"))?;
        let sum: f64 = d.closed.iter().sum();
        let g = mean_gain(&link, state.rho[n], &phases);
        ensure(close(sum, g, 1e-9, 0.0), || format!("instance {i}: closed terms {sum:e} vs g_k {g:e}"))?;
        let z = (d.total.mean - sum).abs() / d.total.std_err;
        worst = worst.max(z);
        ensure(z <= 3.0, || format!("instance {i}: term sum off by {z:.2}σ"))?;
    }
    Ok(format!("10 instances, largest deviation {worst:.2}σ"))
}

fn c3_phases() -> Check {
    const STEP: f64 = 1e-3;
    let steps = (TAU / STEP).ceil() as usize;
    let mut r = rng(3);
    let mut worst_align: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    for i in 0..20 {
        let mut s = reference();
        s.set_num_elements(2);
        s.user_positions = (0..3).map(|_| random_point(&mut r, (1.0, 1.0))).collect();
        let q = random_point(&mut r, (s.h_min + 1.0, s.h_max));
        let k = r.random_range(0..3);
        let rho = r.random_range(0.1..=1.0);
        let g = SlotGeometry::at(q, &s);
        let (d_kb, beta_kb) = direct_links(&s);
        let link = LinkModel::from_geometry(&g, d_kb[k], beta_kb[k], &s, k);
        let phases = optimal_phases_at(&g, d_kb[k], &s, k);

        let (kd, _) = rician_split(link.k_kb);
        let (ku, _) = rician_split(link.k_ku);
        let (kb, _) = rician_split(link.k_bu);
        let direct = link.h_kb_los * (kd * link.beta_kb).sqrt();
        let w = (ku * kb * link.beta_bu * link.beta_ku).sqrt() * rho;
        let coef: Vec<Complex64> = link.h_ku_los.iter().zip(&link.h_bu_los).map(|(u, b)| u.conj() * b * w).collect();

        for (c, beta) in coef.iter().zip(&phases) {
            let summand = c * Complex64::from_polar(1.0, *beta);
            let diff = (summand.arg() - direct.arg() + TAU / 2.0).rem_euclid(TAU) - TAU / 2.0;
            worst_align = worst_align.max(diff.abs());
        }
        let b = b_k(&link, rho, &phases).norm();
        let triangle = direct.norm() + coef.iter().map(|c| c.norm()).sum::<f64>();
        ensure(close(b, triangle, 1e-9, 0.0), || format!("geometry {i}: |b| {b:e} vs |F1|+|F2| {triangle:e}"))?;
        let closed = b_squared_optimal(link.beta_bu, link.beta_ku, link.beta_kb, rho, 2, &s.rician);
        ensure(close(b * b, closed, 1e-9, 0.0), || format!("geometry {i}: |b|² {:e} vs closed form {closed:e}", b * b))?;

        let t0: Vec<Complex64> = (0..steps).map(|j| coef[0] * Complex64::from_polar(1.0, j as f64 * STEP)).collect();
        let t1: Vec<Complex64> = (0..steps).map(|j| direct + coef[1] * Complex64::from_polar(1.0, j as f64 * STEP)).collect();
        let mut best: f64 = 0.0;
        for a in &t0 {
            for c in &t1 {
                best = best.max((a + c).norm_sqr());
            }
        }
        let best = best.sqrt();
        let slack = STEP * coef.iter().map(|c| c.norm()).sum::<f64>();
        ensure(b >= best - slack, || format!("geometry {i}: closed form {b:e} below grid maximum {best:e}"))?;
        worst_gap = worst_gap.max((best - b) / b);
    }
    ensure(worst_align <= 1e-9, || format!("alignment residual {worst_align:e} rad"))?;
    Ok(format!("20 geometries, alignment residual {worst_align:.1e} rad, grid excess {worst_gap:.1e} relative"))
}

fn c4_eh_round_trip() -> Check {
    let mut r = rng(4);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let midpoint = 10f64.powf(r.random_range(-4.0..-1.0));
        let p = EhParams {
            efficiency: r.random_range(0.1..=1.0),
            steepness: r.random_range(1.0..40.0) / midpoint,
            midpoint,
            saturation: 10f64.powf(r.random_range(-3.0..0.0)),
            element_energy: 1e-14,
        };
        let e_min = p.saturation * r.random_range(0.01..0.99);
        let x = min_input_threshold(&p, e_min).map_err(|e| format!("set {i}: {e}"))?;
        let err = (nonlinear_harvest(x, &p) - e_min).abs() / e_min;
        worst = worst.max(err);
        ensure(err <= 1e-9, || format!("set {i}: relative error {err:e}"))?;
        ensure(nonlinear_harvest(0.0, &p) == 0.0, || format!("set {i}: nonzero output at zero input"))?;
    }
    Ok(format!("100 parameter sets, worst relative error {worst:.1e}"))
}

fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn scan<F: Fn(f64, f64) -> (f64, f64)>(name: &str, points: &[(f64, f64)], f: F, violations: &mut Vec<String>) {
    for &(x, x0) in points {
        let (lower, exact) = f(x, x0);
        if lower > exact + 1e-9 * exact.abs().max(1.0) {
            violations.push(format!("{name} at {x:e} (expansion {x0:e}): {lower:e} > {exact:e}"));
        }
        let (at, exact0) = f(x0, x0);
        if (at - exact0).abs() > 1e-9 * exact0.abs().max(1.0) {
            violations.push(format!("{name} not tight at {x0:e}: {at:e} vs {exact0:e}"));
        }
    }
}

fn c5_sca_soundness() -> Check {
    let mut r = rng(5);
    let mut violations = Vec::new();
    let mut worst_fd: f64 = 0.0;
    let s = reference();
    let snr = s.transmit_power[0] / s.noise_power;

    let pts: Vec<(f64, f64)> = (0..1000).map(|_| (10f64.powf(r.random_range(0.0..5.0)), 10f64.powf(r.random_range(0.0..5.0)))).collect();
    for alpha in [2.0, 2.4, 3.5] {
        scan("gain", &pts, |d, d0| (gain_minorant(d, d0, alpha), (d / d0).powf(-alpha / 2.0)), &mut violations);
        for &(_, d0) in pts.iter().take(100) {
            let fd = central(|d| (d / d0).powf(-alpha / 2.0), d0, d0 * 1e-5);
            let analytic = -alpha / (2.0 * d0);
            worst_fd = worst_fd.max((fd - analytic).abs() / analytic.abs());
        }
    }

    for _ in 0..1000 {
        let c = random_point(&mut r, (0.0, 20.0));
        let p0 = random_point(&mut r, (0.0, 20.0));
        let q = random_point(&mut r, (0.0, 20.0));
        let lower = distance_sq_minorant(q, c, p0);
        let exact = (q - c).norm_sq();
        if lower > exact + 1e-9 * exact.max(1.0) {
            violations.push(format!("exclusion at {q:?}: {lower:e} > {exact:e}"));
        }
        let at = distance_sq_minorant(p0, c, p0);
        if (at - (p0 - c).norm_sq()).abs() > 1e-9 * at.max(1.0) {
            violations.push("exclusion not tight".into());
        }
        let h = 1e-4;
        for axis in 0..3 {
            let e = [Vec3::new(h, 0.0, 0.0), Vec3::new(0.0, h, 0.0), Vec3::new(0.0, 0.0, h)][axis];
            let fd = ((p0 + e - c).norm_sq() - (p0 - e - c).norm_sq()) / (2.0 * h);
            let slope = (distance_sq_minorant(p0 + e, c, p0) - distance_sq_minorant(p0 - e, c, p0)) / (2.0 * h);
            let analytic = 2.0 * (p0 - c).to_array()[axis];
            if analytic.abs() > 1e-3 {
                worst_fd = worst_fd.max((fd - analytic).abs() / analytic.abs()).max((slope - analytic).abs() / analytic.abs());
            }
        }
    }

    for _ in 0..10 {
        let beta_bu = 10f64.powf(r.random_range(-8.0..-5.0));
        let beta_ku = 10f64.powf(r.random_range(-8.0..-5.0));
        let beta_kb = 10f64.powf(r.random_range(-11.0..-9.0));
        let rho = r.random_range(0.0..=1.0);
        let m = [4, 25, 100][r.random_range(0..3)];
        let share = r.random_range(0.1..=1.0);
        let t_ref = (beta_bu * beta_ku).sqrt();
        let forms = [
            ("rate in t", LogQuadratic::in_t(&psi(beta_kb, rho, &s.rician, m), beta_kb, share, snr), t_ref),
            ("rate in rho", LogQuadratic::in_rho(beta_bu, beta_ku, beta_kb, &s.rician, m, share, snr), 1.0),
        ];
        for (name, f, span) in forms {
            let pts: Vec<(f64, f64)> = (0..100).map(|_| (r.random_range(0.0..2.0) * span, r.random_range(0.01..2.0) * span)).collect();
            scan(name, &pts, |x, x0| (f.minorant(x, x0), f.value(x)), &mut violations);
            for &(x, x0) in pts.iter().take(20) {
                let h = span * 1e-6;
                for (what, fd, analytic) in [
                    ("derivative", central(|y| f.value(y), x, h), f.derivative(x)),
                    ("second derivative", central(|y| f.derivative(y), x, h), f.second_derivative(x)),
                    ("minorant derivative", central(|y| f.minorant(y, x0), x, h), f.minorant_derivative(x, x0)),
                ] {
                    if !analytic.is_finite() || f.linearized_power(x, x0) <= 0.0 && what == "minorant derivative" {
                        continue;
                    }
                    let err = (fd - analytic).abs() / analytic.abs().max(1e-300);
                    if analytic.abs() > 1e-12 * f.value(span).abs().max(1.0) {
                        worst_fd = worst_fd.max(err);
                    }
                }
            }
        }
    }
    ensure(violations.is_empty(), || format!("{} violations, first: {}", violations.len(), violations[0]))?;
    ensure(worst_fd <= 1e-6, || format!("finite-difference mismatch {worst_fd:e}"))?;
    Ok(format!("no bound violations, worst finite-difference mismatch {worst_fd:.1e}"))
}

fn monotone_traces(report: &RunReport, s: &Scenario) -> Result<(), String> {
    let settings = SolverSettings::default();
    for o in &report.outer {
        for w in o.chi.windows(2) {
            ensure(w[1] >= w[0] - sca_slack(&settings, w[0]), || format!("χ drops {} → {} in iteration {}", w[0], w[1], o.iteration))?;
        }
        for w in o.pi.windows(2) {
            ensure(w[1] >= w[0] - sca_slack(&settings, w[0]), || format!("Π drops {} → {} in iteration {}", w[0], w[1], o.iteration))?;
        }
    }
    for w in report.kappa_trace().windows(2) {
        ensure(w[1] <= w[0] + kappa_slack(s, &settings, w[0]), || format!("κ rises {} → {}", w[0], w[1]))?;
    }
    Ok(())
}

struct Runs {
    reference: RunReport,
    reference_secs: f64,
    programs: Vec<(Stage, usize, irsuav_conic::ConicProgram)>,
    m50: Vec<(Baseline, Result<RunReport, String>)>,
    m_sweep: Vec<(f64, Result<RunReport, String>)>,
    r_sweep: Vec<(f64, Result<RunReport, String>)>,
}

fn attempt(b: Baseline, s: &Scenario) -> Result<RunReport, String> {
    run_baseline(b, s, &BaselineOptions::default()).map(|(_, r, _)| r).map_err(|e| e.to_string())
}

fn runs() -> Runs {
    let s = reference();
    let clock = Instant::now();
    let (_, reference, cap) = run_captured(Baseline::Proposed, &s);
    let reference_secs = clock.elapsed().as_secs_f64();
    let mut s50 = s.clone();
    s50.set_num_elements(50);
    let m50 = Baseline::ALL.iter().map(|&b| (b, attempt(b, &s50))).collect();
    let m_sweep = [9.0, 25.0, 49.0, 100.0].iter().map(|&v| (v, attempt(Baseline::Proposed, &SweepAxis::NumElements.apply(&s, v)))).collect();
    let r_sweep = [10.0, 15.0, 20.0, 25.0, 30.0].iter().map(|&v| (v, attempt(Baseline::Proposed, &SweepAxis::MinRate.apply(&s, v)))).collect();
    Runs { reference, reference_secs, programs: cap.programs, m50, m_sweep, r_sweep }
}

fn c6_monotonicity(runs: &Runs) -> Check {
    let r = &runs.reference;
    monotone_traces(r, &reference())?;
    ensure(r.converged, || "outer loop did not converge".into())?;
    ensure(r.outer.len() <= 10, || format!("{} outer iterations", r.outer.len()))?;
    ensure(runs.reference_secs <= 300.0, || format!("took {:.1} s", runs.reference_secs))?;
    let inner: usize = r.outer.iter().map(|o| o.trajectory_iterations + o.reflection_iterations).sum();
    Ok(format!("{} outer iterations, {inner} inner SCA solves, {:.1} s at N = 60", r.outer.len(), runs.reference_secs))
}

fn c7_audit(runs: &Runs) -> Check {
    let mut all: Vec<(String, &RunReport)> = vec![("reference".into(), &runs.reference)];
    for (b, r) in &runs.m50 {
        all.extend(r.as_ref().ok().map(|r| (format!("M=50 {}", b.name()), r)));
    }
    for (v, r) in &runs.m_sweep {
        all.extend(r.as_ref().ok().map(|r| (format!("M={v}"), r)));
    }
    for (v, r) in &runs.r_sweep {
        all.extend(r.as_ref().ok().map(|r| (format!("R_min={v}"), r)));
    }
    let mut worst: f64 = 0.0;
    let mut slack_ratio: f64 = 0.0;
    let mut shortfall: f64 = 0.0;
    let mut count = 0;
    for (name, r) in all.iter().filter(|(_, r)| r.converged) {
        let res = r.audit_relaxed.max_residual();
        ensure(res <= 1e-6, || format!("{name}: residual {res:e} in {:?}", r.audit_relaxed.residuals.iter().max_by(|a, b| a.value.total_cmp(&b.value))))?;
        worst = worst.max(res);
        slack_ratio = slack_ratio.max((r.kappa_rounded - r.kappa_relaxed) / r.rounding.granularity);
        shortfall = shortfall.max(r.rounding.worst_shortfall());
        count += 1;
    }
    Ok(format!(
        "{count} converged runs, worst residual {worst:.1e}; rounding: κ excess up to {slack_ratio:.2}·E·K/L, C2/C3 shortfall up to {shortfall:.1e}"
    ))
}

fn c8_ordering(runs: &Runs) -> Check {
    let kappa = |b: Baseline| -> Result<f64, String> {
        let (_, r) = runs.m50.iter().find(|(x, _)| *x == b).unwrap();
        r.as_ref().map(|r| r.kappa_relaxed).map_err(|e| format!("{}: {e}", b.name()))
    };
    let (eh, prop, straight, irs) =
        (kappa(Baseline::NoEh)?, kappa(Baseline::Proposed)?, kappa(Baseline::StraightTrajectory)?, kappa(Baseline::NoIrs)?);
    let gain = 100.0 * (irs - prop) / irs;
    let line = format!("no-eh {eh:.5e} ≤ proposed {prop:.5e} ≤ straight {straight:.5e} ≤ no-irs {irs:.5e}, improvement {gain:.2}%");
    ensure(eh <= prop && prop <= straight && straight <= irs, || format!("ordering broken: {line}"))?;
    ensure(gain >= 3.0, || format!("improvement below 3%: {line}"))?;
    Ok(line)
}

fn series(rows: &[(f64, Result<RunReport, String>)]) -> Result<Vec<(f64, f64)>, String> {
    rows.iter().map(|(v, r)| r.as_ref().map(|r| (*v, r.kappa_relaxed)).map_err(|e| format!("{v}: {e}"))).collect()
}

fn c9_sweeps(runs: &Runs) -> Check {
    let m = series(&runs.m_sweep)?;
    let r = series(&runs.r_sweep)?;
    let fmt = |v: &[(f64, f64)]| v.iter().map(|(x, k)| format!("{x}:{k:.4e}")).collect::<Vec<_>>().join(" ");
    ensure(m.windows(2).all(|w| w[1].1 <= w[0].1), || format!("κ over M not nonincreasing: {}", fmt(&m)))?;
    ensure(r.windows(2).all(|w| w[1].1 >= w[0].1), || format!("κ over R_min not nondecreasing: {}", fmt(&r)))?;
    Ok(format!("M {}; R_min {}", fmt(&m), fmt(&r)))
}

fn c10_rounding() -> Check {
    let mut cases = 0;
    for l in 1..=10usize {
        let grid: Vec<f64> = (0..=10 * l).map(|i| i as f64 / (10 * l) as f64).collect();
        for &a in &grid {
            for &b in &grid {
                for ceil in [[false, false], [true, false], [false, true], [true, true]] {
                    let out = round_slot(&[a, b], l, &ceil);
                    cases += 1;
                    let total: u32 = out.iter().sum();
                    ensure(total as usize <= l, || format!("L={l}, shares ({a}, {b}), ceil {ceil:?}: {out:?}"))?;
                    if ceil == [false, false] {
                        let want = [(a * l as f64).round() as u32, (b * l as f64).round() as u32];
                        if (want[0] + want[1]) as usize <= l {
                            ensure(out == want, || format!("L={l}, shares ({a}, {b}): {out:?} vs {want:?}"))?;
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{cases} slots over L = 1..10"))
}

fn c11_solver(runs: &Runs) -> Check {
    let canonical = canonical_problems();
    ensure(canonical.len() == 10, || format!("{} canonical problems", canonical.len()))?;
    for case in &canonical {
        for backend in [Backend::Clarabel, Backend::Barrier] {
            let r = solve(&case.program, None, &SolverSettings::with_backend(backend)).map_err(|e| e.to_string())?;
            ensure(r.status == SolveStatus::Optimal && (r.objective - case.optimum).abs() <= 1e-6 * case.optimum.abs().max(1.0), || {
                format!("{} on {backend:?}: {:?} {} vs {}", case.name, r.status, r.objective, case.optimum)
            })?;
        }
    }
    let mut worst: f64 = 0.0;
    let mut checked = Vec::new();
    for stage in [Stage::Scheduling, Stage::Trajectory, Stage::Reflection] {
        let (_, it, program) = runs.programs.iter().find(|(s, it, _)| *s == stage && *it == 1).ok_or(format!("no {stage:?} program"))?;
        let text = export_problem(program);
        let parsed = parse_problem(&text).map_err(|e| e.to_string())?;
        ensure(&parsed == program, || format!("{stage:?} program does not round-trip"))?;
        let a = solve(&parsed, None, &SolverSettings::with_backend(Backend::Clarabel)).map_err(|e| e.to_string())?;
        let b = solve(&parsed, None, &SolverSettings::with_backend(Backend::Barrier)).map_err(|e| e.to_string())?;
        ensure(a.is_optimal() && b.is_optimal(), || format!("{stage:?}: {:?} / {:?}", a.status, b.status))?;
        let rel = (a.objective - b.objective).abs() / a.objective.abs().max(b.objective.abs()).max(1e-300);
        ensure(rel <= 1e-5, || format!("{stage:?} iteration {it}: {} vs {} ({rel:e})", a.objective, b.objective))?;
        worst = worst.max(rel);
        checked.push(format!("{stage:?}"));
    }
    Ok(format!("10 canonical problems on both backends; {} programs agree within {worst:.1e}", checked.join("/")))
}

fn c12_determinism() -> Check {
    let s = reference();
    let a = run_baseline(Baseline::Proposed, &s, &BaselineOptions::default()).map_err(|e| e.to_string())?.1.to_json();
    let b = run_baseline(Baseline::Proposed, &s, &BaselineOptions::default()).map_err(|e| e.to_string())?.1.to_json();
    ensure(a == b, || "reports differ".into())?;
    Ok(format!("{} bytes identical", a.len()))
}

fn main() {
    let clock = Instant::now();
    let runs = runs();
    eprintln!("shared runs took {:.1} s", clock.elapsed().as_secs_f64());
    let criteria: Vec<(&str, Box<dyn Fn() -> Check + '_>)> = vec![
        ("rate bound holds under Monte Carlo", Box::new(c1_rate_bound)),
        ("received-power decomposition", Box::new(c2_decomposition)),
        ("closed-form phases are optimal", Box::new(c3_phases)),
        ("harvest threshold round trip", Box::new(c4_eh_round_trip)),
        ("SCA surrogates are sound", Box::new(c5_sca_soundness)),
        ("monotone traces and convergence", Box::new(|| c6_monotonicity(&runs))),
        ("feasibility audit", Box::new(|| c7_audit(&runs))),
        ("baseline ordering at M = 50", Box::new(|| c8_ordering(&runs))),
        ("sweep monotonicity", Box::new(|| c9_sweeps(&runs))),
        ("rounding respects the block budget", Box::new(c10_rounding)),
        ("solver correctness", Box::new(|| c11_solver(&runs))),
        ("determinism", Box::new(c12_determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = check();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
