//! Program container: variables, affine expressions and constraint blocks.

use std::ops::{Add, Mul, Neg, Sub};

use crate::ConicError;

/// Sparse affine expression `constant + Σ coef·x[index]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn var(index: usize) -> Self {
        Self { terms: vec![(index, 1.0)], constant: 0.0 }
    }

    /// Adds `coef·x[index]`.
    pub fn term(mut self, index: usize, coef: f64) -> Self {
        self.push(index, coef);
        self
    }

    /// Adds a constant.
    pub fn plus(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn push(&mut self, index: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push((index, coef));
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().fold(self.constant, |acc, &(i, c)| acc + c * x[i])
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|&(i, c)| (i, c * k)).collect(),
            constant: self.constant * k,
        }
    }

    /// Merges repeated indices and drops zero coefficients; order follows first appearance.
    pub fn compact(&self) -> Self {
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for &(i, c) in &self.terms {
            match out.iter_mut().find(|(j, _)| *j == i) {
                Some(slot) => slot.1 += c,
                None => out.push((i, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        Self { terms: out, constant: self.constant }
    }

    pub fn max_index(&self) -> Option<usize> {
        self.terms.iter().map(|&(i, _)| i).max()
    }
}

impl Add for Affine {
    type Output = Affine;
    fn add(mut self, rhs: Affine) -> Affine {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
        self
    }
}

impl Sub for Affine {
    type Output = Affine;
    fn sub(self, rhs: Affine) -> Affine {
        self + (-rhs)
    }
}

impl Neg for Affine {
    type Output = Affine;
    fn neg(self) -> Affine {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for Affine {
    type Output = Affine;
    fn mul(self, k: f64) -> Affine {
        self.scaled(k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

/// Constraint kinds. Every expression compares against zero.
#[derive(Clone, Debug, PartialEq)]
pub enum ConstraintKind {
    /// `expr = 0`
    Eq(Affine),
    /// `expr ≤ 0`
    Le(Affine),
    /// `‖tail‖ ≤ head`
    Soc { head: Affine, tail: Vec<Affine> },
    /// `2·a·b ≥ ‖tail‖²` with `a, b ≥ 0`
    Rotated { a: Affine, b: Affine, tail: Vec<Affine> },
    /// `Σ squares² + linear ≤ 0`
    Quadratic { squares: Vec<Affine>, linear: Affine },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub label: String,
    pub kind: ConstraintKind,
}

/// A conic program over real variables with a linear objective.
#[derive(Clone, Debug, PartialEq)]
pub struct ConicProgram {
    pub sense: Sense,
    pub vars: Vec<Variable>,
    pub objective: Affine,
    pub constraints: Vec<Constraint>,
}

impl Default for ConicProgram {
    fn default() -> Self {
        Self::maximize()
    }
}

fn token(s: &str) -> String {
    let t: String = s.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect();
    if t.is_empty() {
        "_".to_string()
    } else {
        t
    }
}

impl ConicProgram {
    pub fn maximize() -> Self {
        Self::with_sense(Sense::Maximize)
    }

    pub fn minimize() -> Self {
        Self::with_sense(Sense::Minimize)
    }

    pub fn with_sense(sense: Sense) -> Self {
        Self { sense, vars: Vec::new(), objective: Affine::zero(), constraints: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    /// Adds a variable with box bounds (use infinities for free sides) and returns its index.
    pub fn add_var(&mut self, name: &str, lower: f64, upper: f64) -> usize {
        self.vars.push(Variable { name: token(name), lower, upper });
        self.vars.len() - 1
    }

    pub fn free_var(&mut self, name: &str) -> usize {
        self.add_var(name, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn set_objective(&mut self, objective: Affine) {
        self.objective = objective;
    }

    fn push(&mut self, label: &str, kind: ConstraintKind) {
        self.constraints.push(Constraint { label: token(label), kind });
    }

    /// `expr = 0`
    pub fn add_eq(&mut self, label: &str, expr: Affine) {
        self.push(label, ConstraintKind::Eq(expr));
    }

    /// `expr ≤ 0`
    pub fn add_le(&mut self, label: &str, expr: Affine) {
        self.push(label, ConstraintKind::Le(expr));
    }

    /// `expr ≥ 0`
    pub fn add_ge(&mut self, label: &str, expr: Affine) {
        self.push(label, ConstraintKind::Le(-expr));
    }

    /// `‖tail‖ ≤ head`
    pub fn add_soc(&mut self, label: &str, head: Affine, tail: Vec<Affine>) {
        self.push(label, ConstraintKind::Soc { head, tail });
    }

    /// `2·a·b ≥ ‖tail‖²`, `a, b ≥ 0`
    pub fn add_rotated(&mut self, label: &str, a: Affine, b: Affine, tail: Vec<Affine>) {
        self.push(label, ConstraintKind::Rotated { a, b, tail });
    }

    /// `Σ squares² + linear ≤ 0`
    pub fn add_quadratic(&mut self, label: &str, squares: Vec<Affine>, linear: Affine) {
        self.push(label, ConstraintKind::Quadratic { squares, linear });
    }

    /// Checks that every expression references an existing variable and all data is finite.
    pub fn validate(&self) -> Result<(), ConicError> {
        let n = self.vars.len();
        let bad = |a: &Affine| {
            !a.constant.is_finite()
                || a.terms.iter().any(|&(i, c)| i >= n || !c.is_finite())
        };
        if bad(&self.objective) {
            return Err(ConicError::Malformed("objective".into()));
        }
        for v in &self.vars {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(ConicError::Malformed(format!("bounds of {}", v.name)));
            }
        }
        for c in &self.constraints {
            if c.exprs().into_iter().any(bad) {
                return Err(ConicError::Malformed(c.label.clone()));
            }
        }
        Ok(())
    }

    /// Largest constraint or bound violation at `x` (zero when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &xi) in self.vars.iter().zip(x) {
            worst = worst.max(v.lower - xi).max(xi - v.upper);
        }
        for c in &self.constraints {
            worst = worst.max(c.violation(x));
        }
        worst
    }
}

impl Constraint {
    pub fn exprs(&self) -> Vec<&Affine> {
        match &self.kind {
            ConstraintKind::Eq(a) | ConstraintKind::Le(a) => vec![a],
            ConstraintKind::Soc { head, tail } => std::iter::once(head).chain(tail).collect(),
            ConstraintKind::Rotated { a, b, tail } => [a, b].into_iter().chain(tail).collect(),
            ConstraintKind::Quadratic { squares, linear } => {
                std::iter::once(linear).chain(squares).collect()
            }
        }
    }

    pub fn violation(&self, x: &[f64]) -> f64 {
        let norm2 = |v: &[Affine]| v.iter().map(|a| a.eval(x).powi(2)).sum::<f64>();
        match &self.kind {
            ConstraintKind::Eq(a) => a.eval(x).abs(),
            ConstraintKind::Le(a) => a.eval(x).max(0.0),
            ConstraintKind::Soc { head, tail } => (norm2(tail).sqrt() - head.eval(x)).max(0.0),
            ConstraintKind::Rotated { a, b, tail } => {
                let (av, bv) = (a.eval(x), b.eval(x));
                let s = (av + bv) / std::f64::consts::SQRT_2;
                let d = (av - bv) / std::f64::consts::SQRT_2;
                ((norm2(tail) + d * d).sqrt() - s).max(0.0)
            }
            ConstraintKind::Quadratic { squares, linear } => {
                (norm2(squares) + linear.eval(x)).max(0.0)
            }
        }
    }
}
