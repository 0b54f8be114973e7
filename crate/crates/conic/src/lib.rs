//! Conic modeling layer for LP/SOCP subproblems.
//!
//! A [`ConicProgram`] holds variables with bounds, a linear objective and
//! constraint blocks (linear rows, second-order cones, rotated cones and
//! convex quadratic rows). Programs are lowered to linear rows plus standard
//! cones and handed to one of two backends:
//!
//! * [`Backend::Clarabel`] (default): sparse primal-dual interior point.
//! * [`Backend::Barrier`]: dense primal log-barrier method, used as an
//!   independent reference on small and medium instances.
//!
//! Programs round-trip through a plain text format, see [`format`].

mod barrier;
pub mod canonical;
mod clarabel_backend;
pub mod format;
pub mod lower;
pub mod model;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use format::{export_problem, parse_problem};
pub use lower::{Lowered, Origin};
pub use model::{Affine, ConicProgram, Constraint, ConstraintKind, Sense, Variable};

#[derive(Debug, Error)]
pub enum ConicError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalFailure,
}

/// Name and version of the sparse interior-point backend.
pub const BACKEND_VERSION: &str = "clarabel 0.11";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    #[default]
    Clarabel,
    Barrier,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub backend: Backend,
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub max_iter: u32,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { backend: Backend::Clarabel, tol_feas: 1e-8, tol_gap: 1e-8, max_iter: 200 }
    }
}

impl SolverSettings {
    pub fn with_backend(backend: Backend) -> Self {
        Self { backend, ..Self::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Primal point (empty when the backend produced none).
    pub x: Vec<f64>,
    /// Objective in the program's own sense, evaluated at `x`.
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: u32,
    /// Labels of constraints carrying weight in an infeasibility certificate.
    pub implicated: Vec<String>,
    pub detail: String,
}

impl SolveResult {
    pub(crate) fn failed(n: usize, status: SolveStatus, detail: String) -> Self {
        Self {
            status,
            x: vec![f64::NAN; n],
            objective: f64::NAN,
            primal_residual: f64::NAN,
            dual_residual: f64::NAN,
            gap: f64::NAN,
            iterations: 0,
            implicated: Vec::new(),
            detail,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn value(&self, index: usize) -> f64 {
        self.x[index]
    }
}

fn origin_label(p: &ConicProgram, o: Origin) -> String {
    match o {
        Origin::Constraint(i) => p.constraints[i].label.clone(),
        Origin::Lower(j) => format!("{}>=lower", p.vars[j].name),
        Origin::Upper(j) => format!("{}<=upper", p.vars[j].name),
    }
}

/// Solves `p` with the configured backend.
///
/// `warm_start` seeds the phase-I search of the barrier backend and is
/// ignored by the sparse backend. Results are deterministic for identical
/// inputs.
pub fn solve(
    p: &ConicProgram,
    warm_start: Option<&[f64]>,
    settings: &SolverSettings,
) -> Result<SolveResult, ConicError> {
    p.validate()?;
    let low = p.lower();
    let mut res = match settings.backend {
        Backend::Clarabel => {
            let (mut res, cert, origins) = clarabel_backend::solve(&low, settings);
            if res.status == SolveStatus::Infeasible && !cert.is_empty() {
                let peak = cert.iter().fold(0.0f64, |m, z| m.max(z.abs()));
                let mut seen = Vec::new();
                for (z, o) in cert.iter().zip(&origins) {
                    if z.abs() > 1e-3 * peak && !seen.contains(o) {
                        seen.push(*o);
                    }
                }
                res.implicated = seen.into_iter().map(|o| origin_label(p, o)).collect();
            }
            res
        }
        Backend::Barrier => barrier::solve(&low, warm_start, settings),
    };
    if res.x.len() == p.num_vars() && res.x.iter().all(|v| v.is_finite()) {
        res.objective = p.objective.eval(&res.x);
        if res.status == SolveStatus::Optimal {
            res.primal_residual = p.max_violation(&res.x);
        }
    }
    Ok(res)
}
