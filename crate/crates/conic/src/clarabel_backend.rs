use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use crate::lower::{Lowered, Origin};
use crate::model::Affine;
use crate::{SolveResult, SolveStatus, SolverSettings};

struct Rows {
    triplets: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    origin: Vec<Origin>,
}

impl Rows {
    /// Appends the row `s = b − A x` where `s` equals `sign·expr`.
    fn push(&mut self, expr: &Affine, sign: f64, origin: Origin) {
        let r = self.b.len();
        for &(j, c) in &expr.terms {
            self.triplets.push((r, j, -sign * c));
        }
        self.b.push(sign * expr.constant);
        self.origin.push(origin);
    }
}

fn csc(m: usize, n: usize, mut t: Vec<(usize, usize, f64)>) -> CscMatrix<f64> {
    t.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
    let mut colptr = vec![0usize; n + 1];
    let mut rowval = Vec::with_capacity(t.len());
    let mut nzval: Vec<f64> = Vec::with_capacity(t.len());
    let mut last: Option<(usize, usize)> = None;
    for (r, c, v) in t {
        if last == Some((r, c)) {
            *nzval.last_mut().unwrap() += v;
            continue;
        }
        rowval.push(r);
        nzval.push(v);
        colptr[c + 1] += 1;
        last = Some((r, c));
    }
    for j in 0..n {
        colptr[j + 1] += colptr[j];
    }
    CscMatrix::new(m, n, colptr, rowval, nzval)
}

pub(crate) fn solve(low: &Lowered, settings: &SolverSettings) -> (SolveResult, Vec<f64>, Vec<Origin>) {
    let n = low.num_vars;
    let mut rows = Rows { triplets: Vec::new(), b: Vec::new(), origin: Vec::new() };
    let mut cones = Vec::new();
    for (a, o) in &low.eq {
        rows.push(a, -1.0, *o);
    }
    if !low.eq.is_empty() {
        cones.push(SupportedConeT::ZeroConeT(low.eq.len()));
    }
    // `a(x) ≤ 0` becomes `s = −a(x) ≥ 0`.
    for (a, o) in &low.le {
        rows.push(a, -1.0, *o);
    }
    if !low.le.is_empty() {
        cones.push(SupportedConeT::NonnegativeConeT(low.le.len()));
    }
    for (block, o) in &low.soc {
        for a in block {
            rows.push(a, 1.0, *o);
        }
        cones.push(SupportedConeT::SecondOrderConeT(block.len()));
    }
    let m = rows.b.len();
    let mut q = vec![0.0; n];
    for &(j, c) in &low.cost.terms {
        q[j] += c;
    }
    let p = CscMatrix::zeros((n, n));
    let a = csc(m, n, rows.triplets);
    let mut failures = Vec::new();
    for rung in RUNGS {
        let (res, z) = attempt(&p, &q, &a, &rows.b, &cones, settings, rung);
        if res.status != SolveStatus::NumericalFailure && res.status != SolveStatus::IterationLimit {
            return (res, z, rows.origin);
        }
        failures.push((res, z));
    }
    let pick = failures.iter().position(|(r, _)| r.status == SolveStatus::NumericalFailure && verified(low, r, settings));
    let (mut res, z) = failures.swap_remove(pick.unwrap_or(0));
    if pick.is_some() {
        res.status = SolveStatus::Optimal;
        res.detail.push_str(" (verified)");
    }
    (res, z, rows.origin)
}

/// Independent check of an inexact termination: unscaled constraint violation
/// and duality gap within the requested tolerances.
fn verified(low: &Lowered, res: &SolveResult, settings: &SolverSettings) -> bool {
    if res.x.iter().any(|v| !v.is_finite()) || !res.gap.is_finite() {
        return false;
    }
    let scale = low
        .eq
        .iter()
        .chain(&low.le)
        .map(|(a, _)| a.constant.abs())
        .chain(low.soc.iter().flat_map(|(b, _)| b.iter().map(|a| a.constant.abs())))
        .fold(0.0, f64::max);
    low.max_violation(&res.x) <= settings.tol_feas * (1.0 + scale) && res.gap <= settings.tol_gap
}

/// Setting variants tried in order until one terminates cleanly.
#[derive(Clone, Copy)]
struct Rung {
    equilibrate: bool,
    max_step_fraction: f64,
    static_regularization: f64,
}

const RUNGS: [Rung; 4] = [
    Rung { equilibrate: true, max_step_fraction: 0.99, static_regularization: 1e-8 },
    Rung { equilibrate: false, max_step_fraction: 0.99, static_regularization: 1e-8 },
    Rung { equilibrate: true, max_step_fraction: 0.9, static_regularization: 1e-8 },
    Rung { equilibrate: true, max_step_fraction: 0.99, static_regularization: 1e-7 },
];

fn attempt(
    p: &CscMatrix<f64>,
    q: &[f64],
    a: &CscMatrix<f64>,
    b: &[f64],
    cones: &[SupportedConeT<f64>],
    settings: &SolverSettings,
    rung: Rung,
) -> (SolveResult, Vec<f64>) {
    let n = q.len();
    let opts = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(settings.max_iter)
        .tol_feas(settings.tol_feas)
        .tol_gap_abs(settings.tol_gap)
        .tol_gap_rel(settings.tol_gap)
        .equilibrate_enable(rung.equilibrate)
        .max_step_fraction(rung.max_step_fraction)
        .static_regularization_constant(rung.static_regularization)
        .build()
        .expect("valid clarabel settings");
    let mut solver = match DefaultSolver::new(p, q, a, b, cones, opts) {
        Ok(s) => s,
        Err(e) => {
            return (SolveResult::failed(n, SolveStatus::NumericalFailure, format!("setup: {e:?}")), Vec::new());
        }
    };
    solver.solve();
    let sol = &solver.solution;
    let status = match sol.status {
        SolverStatus::Solved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            SolveStatus::Infeasible
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::IterationLimit,
        _ => SolveStatus::NumericalFailure,
    };
    let gap = (sol.obj_val - sol.obj_val_dual).abs() / (1.0 + sol.obj_val.abs());
    let res = SolveResult {
        status,
        x: sol.x.clone(),
        objective: f64::NAN,
        primal_residual: sol.r_prim,
        dual_residual: sol.r_dual,
        gap,
        iterations: sol.iterations,
        implicated: Vec::new(),
        detail: format!("{:?}", sol.status),
    };
    (res, sol.z.clone())
}
