//! Dense primal log-barrier method with a phase-I feasibility search.
//!
//! Slow compared to the sparse backend but shares no code with it, which
//! makes it useful as a cross-check on exported problems.

use nalgebra::{DMatrix, DVector};

use crate::lower::Lowered;
use crate::model::Affine;
use crate::{SolveResult, SolveStatus, SolverSettings};

const MU: f64 = 16.0;
const MAX_NEWTON: usize = 200;
const RADIUS: f64 = 1e6;

struct Problem {
    n: usize,
    cost: DVector<f64>,
    cost_const: f64,
    eq_mat: DMatrix<f64>,
    eq_rhs: DVector<f64>,
    le: Vec<Affine>,
    soc: Vec<Vec<Affine>>,
}

impl Problem {
    fn from_lowered(low: &Lowered) -> Self {
        let n = low.num_vars;
        let mut cost = DVector::zeros(n);
        for &(j, c) in &low.cost.terms {
            cost[j] += c;
        }
        let p = low.eq.len();
        let mut eq_mat = DMatrix::zeros(p, n);
        let mut eq_rhs = DVector::zeros(p);
        for (r, (a, _)) in low.eq.iter().enumerate() {
            for &(j, c) in &a.terms {
                eq_mat[(r, j)] += c;
            }
            eq_rhs[r] = -a.constant;
        }
        Self {
            n,
            cost,
            cost_const: low.cost.constant,
            eq_mat,
            eq_rhs,
            le: low.le.iter().map(|(a, _)| a.clone()).collect(),
            soc: low.soc.iter().map(|(b, _)| b.clone()).collect(),
        }
    }

    /// Feasibility problem in `(x, s)`: minimize `s` with every inequality relaxed by `s`.
    fn phase_one(&self) -> Self {
        let n = self.n + 1;
        let s = self.n;
        let mut cost = DVector::zeros(n);
        cost[s] = 1.0;
        let eq_mat = self.eq_mat.clone().insert_column(s, 0.0);
        let mut le: Vec<Affine> = self.le.iter().map(|a| a.clone().term(s, -1.0)).collect();
        le.push(Affine::constant(-1.0).term(s, -1.0));
        let soc = self
            .soc
            .iter()
            .map(|b| {
                let mut b = b.clone();
                b[0].push(s, 1.0);
                b
            })
            .collect();
        Self { n, cost, cost_const: 0.0, eq_mat, eq_rhs: self.eq_rhs.clone(), le, soc }
    }

    fn degree(&self) -> f64 {
        (self.le.len() + 2 * self.soc.len()) as f64
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        self.le.iter().all(|a| a.eval(x) < 0.0)
            && self.soc.iter().all(|b| {
                let h = b[0].eval(x);
                let t: f64 = b[1..].iter().map(|a| a.eval(x).powi(2)).sum();
                h > 0.0 && h * h - t > 0.0
            })
    }

    fn barrier(&self, x: &[f64]) -> f64 {
        let mut v = 0.0;
        for a in &self.le {
            v -= (-a.eval(x)).ln();
        }
        for b in &self.soc {
            let h = b[0].eval(x);
            let t: f64 = b[1..].iter().map(|a| a.eval(x).powi(2)).sum();
            v -= (h * h - t).ln();
        }
        v
    }

    fn merit(&self, t: f64, x: &[f64]) -> f64 {
        let c: f64 = self.cost.iter().zip(x).map(|(c, x)| c * x).sum();
        t * c + self.barrier(x)
    }

    /// Gradient and Hessian of `t·cᵀx + φ(x)`.
    fn derivatives(&self, t: f64, x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let mut g = &self.cost * t;
        let mut h = DMatrix::zeros(self.n, self.n);
        for a in &self.le {
            let f = a.eval(x);
            for &(i, ci) in &a.terms {
                g[i] -= ci / f;
                for &(j, cj) in &a.terms {
                    h[(i, j)] += ci * cj / (f * f);
                }
            }
        }
        for b in &self.soc {
            let y: Vec<f64> = b.iter().map(|a| a.eval(x)).collect();
            let d = y[0] * y[0] - y[1..].iter().map(|v| v * v).sum::<f64>();
            let grad_d: Vec<f64> =
                y.iter().enumerate().map(|(k, v)| if k == 0 { 2.0 * v } else { -2.0 * v }).collect();
            for (ka, ra) in b.iter().enumerate() {
                let gy = -grad_d[ka] / d;
                for &(i, ci) in &ra.terms {
                    g[i] += gy * ci;
                }
                for (kb, rb) in b.iter().enumerate() {
                    let mut hy = grad_d[ka] * grad_d[kb] / (d * d);
                    if ka == kb {
                        let curv = if ka == 0 { 2.0 } else { -2.0 };
                        hy -= curv / d;
                    }
                    if hy == 0.0 {
                        continue;
                    }
                    for &(i, ci) in &ra.terms {
                        for &(j, cj) in &rb.terms {
                            h[(i, j)] += hy * ci * cj;
                        }
                    }
                }
            }
        }
        (g, h)
    }

    /// Equality-constrained Newton minimization of the merit function from a feasible point.
    fn center(&self, t: f64, x: &mut Vec<f64>, budget: &mut usize) -> Result<(), SolveStatus> {
        let p = self.eq_mat.nrows();
        let n = self.n;
        for _ in 0..MAX_NEWTON {
            if *budget == 0 {
                return Err(SolveStatus::IterationLimit);
            }
            *budget -= 1;
            let (g, h) = self.derivatives(t, x);
            let mut kkt = DMatrix::zeros(n + p, n + p);
            kkt.view_mut((0, 0), (n, n)).copy_from(&h);
            kkt.view_mut((n, 0), (p, n)).copy_from(&self.eq_mat);
            kkt.view_mut((0, n), (n, p)).copy_from(&self.eq_mat.transpose());
            let mut rhs = DVector::zeros(n + p);
            rhs.rows_mut(0, n).copy_from(&(-&g));
            let sol = kkt.lu().solve(&rhs).ok_or(SolveStatus::NumericalFailure)?;
            let dx = sol.rows(0, n).into_owned();
            let decrement = -g.dot(&dx);
            if !decrement.is_finite() {
                return Err(SolveStatus::NumericalFailure);
            }
            if decrement < 1e-12 {
                return Ok(());
            }
            let f0 = self.merit(t, x);
            let mut step = 1.0;
            let trial = |s: f64| -> Vec<f64> { x.iter().zip(dx.iter()).map(|(a, d)| a + s * d).collect() };
            let mut cand = trial(step);
            while !self.in_domain(&cand) || self.merit(t, &cand) > f0 - 0.25 * step * decrement {
                step *= 0.5;
                if step < 1e-14 {
                    return Ok(());
                }
                cand = trial(step);
            }
            *x = cand;
            if decrement < 1e-10 {
                return Ok(());
            }
        }
        Ok(())
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.cost_const + self.cost.iter().zip(x).map(|(c, x)| c * x).sum::<f64>()
    }

    /// Barrier path from a strictly feasible point; `stop` ends early when it returns true.
    fn path(
        &self,
        x: &mut Vec<f64>,
        tol: f64,
        budget: &mut usize,
        stop: impl Fn(&[f64]) -> bool,
    ) -> Result<f64, SolveStatus> {
        let m = self.degree().max(1.0);
        let mut t = 1.0;
        loop {
            self.center(t, x, budget)?;
            if stop(x) {
                return Ok(m / t);
            }
            let obj = self.objective(x);
            if obj < -1e15 {
                return Err(SolveStatus::Unbounded);
            }
            if m / t <= tol * obj.abs().max(1.0) {
                return Ok(m / t);
            }
            t *= MU;
        }
    }
}

fn least_norm_start(prob: &Problem, warm: Option<&[f64]>) -> Option<Vec<f64>> {
    let base = match warm {
        Some(w) if w.len() == prob.n => DVector::from_column_slice(w),
        _ => DVector::zeros(prob.n),
    };
    if prob.eq_mat.nrows() == 0 {
        return Some(base.as_slice().to_vec());
    }
    let resid = &prob.eq_rhs - &prob.eq_mat * &base;
    let pinv = prob.eq_mat.clone().pseudo_inverse(1e-12).ok()?;
    let x = base + pinv * resid;
    let err = (&prob.eq_mat * &x - &prob.eq_rhs).amax();
    (err <= 1e-7 * (1.0 + prob.eq_rhs.amax())).then(|| x.as_slice().to_vec())
}

pub(crate) fn solve(low: &Lowered, warm: Option<&[f64]>, settings: &SolverSettings) -> SolveResult {
    let mut prob = Problem::from_lowered(low);
    let n = prob.n;
    let Some(mut x) = least_norm_start(&prob, warm) else {
        return SolveResult::failed(n, SolveStatus::Infeasible, "inconsistent equalities".into());
    };
    // A large ball keeps every barrier subproblem bounded.
    let radius = RADIUS * x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut ball = vec![Affine::constant(radius)];
    ball.extend((0..n).map(Affine::var));
    prob.soc.push(ball);
    let mut budget = settings.max_iter.max(1) as usize * 50;
    if !prob.in_domain(&x) {
        let p1 = prob.phase_one();
        let worst = prob
            .le
            .iter()
            .map(|a| a.eval(&x))
            .chain(prob.soc.iter().map(|b| {
                let t: f64 = b[1..].iter().map(|a| a.eval(&x).powi(2)).sum();
                t.sqrt() - b[0].eval(&x)
            }))
            .fold(0.0f64, f64::max);
        let mut z = x.clone();
        z.push(worst.abs() + 1.0);
        let r = p1.path(&mut z, 1e-10, &mut budget, |z| z[n] < 0.0);
        if let Err(status) = r {
            return SolveResult::failed(n, status, "phase one".into());
        }
        if z[n] >= 0.0 {
            return SolveResult::failed(n, SolveStatus::Infeasible, format!("phase one optimum {:e}", z[n]));
        }
        z.truncate(n);
        x = z;
    }
    let iterations_before = budget;
    let (mut status, gap) = match prob.path(&mut x, settings.tol_gap, &mut budget, |_| false) {
        Ok(gap) => (SolveStatus::Optimal, gap),
        Err(s) => (s, f64::NAN),
    };
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if status == SolveStatus::Optimal && norm > 0.99 * radius {
        status = SolveStatus::Unbounded;
    }
    SolveResult {
        status,
        objective: f64::NAN,
        primal_residual: low.max_violation(&x).max(0.0),
        dual_residual: f64::NAN,
        gap,
        iterations: (iterations_before - budget) as u32,
        implicated: Vec::new(),
        detail: "barrier".into(),
        x,
    }
}
