//! Lowering to the canonical form shared by the backends: minimize `cᵀx`
//! subject to equality rows, `≤ 0` rows and standard second-order cones.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::model::{Affine, ConicProgram, ConstraintKind, Sense};

/// Where a lowered row or cone came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Constraint(usize),
    Lower(usize),
    Upper(usize),
}

#[derive(Clone, Debug)]
pub struct Lowered {
    pub num_vars: usize,
    /// Minimization objective; equals the original objective negated when maximizing.
    pub cost: Affine,
    pub eq: Vec<(Affine, Origin)>,
    pub le: Vec<(Affine, Origin)>,
    /// Each block is `[head, tail...]` meaning `‖tail‖ ≤ head`.
    pub soc: Vec<(Vec<Affine>, Origin)>,
}

fn rotated_to_soc(a: &Affine, b: &Affine, tail: &[Affine]) -> Vec<Affine> {
    let head = (a.clone() + b.clone()) * FRAC_1_SQRT_2;
    let diff = (a.clone() - b.clone()) * FRAC_1_SQRT_2;
    let mut block = Vec::with_capacity(tail.len() + 2);
    block.push(head.compact());
    block.extend(tail.iter().map(Affine::compact));
    block.push(diff.compact());
    block
}

impl ConicProgram {
    pub fn lower(&self) -> Lowered {
        let cost = match self.sense {
            Sense::Minimize => self.objective.compact(),
            Sense::Maximize => (-self.objective.clone()).compact(),
        };
        let mut out = Lowered {
            num_vars: self.vars.len(),
            cost,
            eq: Vec::new(),
            le: Vec::new(),
            soc: Vec::new(),
        };
        for (j, v) in self.vars.iter().enumerate() {
            if v.lower == v.upper {
                out.eq.push((Affine::var(j).plus(-v.lower), Origin::Lower(j)));
                continue;
            }
            if v.lower.is_finite() {
                out.le.push((Affine::constant(v.lower).term(j, -1.0), Origin::Lower(j)));
            }
            if v.upper.is_finite() {
                out.le.push((Affine::var(j).plus(-v.upper), Origin::Upper(j)));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            let origin = Origin::Constraint(i);
            match &c.kind {
                ConstraintKind::Eq(a) => out.eq.push((a.compact(), origin)),
                ConstraintKind::Le(a) => out.le.push((a.compact(), origin)),
                ConstraintKind::Soc { head, tail } => {
                    let block = std::iter::once(head).chain(tail).map(Affine::compact).collect();
                    out.soc.push((block, origin));
                }
                ConstraintKind::Rotated { a, b, tail } => {
                    out.soc.push((rotated_to_soc(a, b, tail), origin));
                }
                ConstraintKind::Quadratic { squares, linear } => {
                    // Dividing by the constant keeps head and diff apart when it is large.
                    let s = linear.constant.abs().max(1.0);
                    let a = -linear.clone() * (1.0 / s);
                    let b = Affine::constant(0.5);
                    let tail: Vec<Affine> = squares.iter().map(|q| q.clone() * (1.0 / s.sqrt())).collect();
                    out.soc.push((rotated_to_soc(&a, &b, &tail), origin));
                }
            }
        }
        out
    }
}

impl Lowered {
    pub fn num_rows(&self) -> usize {
        self.eq.len() + self.le.len() + self.soc.iter().map(|(b, _)| b.len()).sum::<usize>()
    }

    /// Largest violation of the lowered constraints at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, _) in &self.eq {
            worst = worst.max(a.eval(x).abs());
        }
        for (a, _) in &self.le {
            worst = worst.max(a.eval(x));
        }
        for (block, _) in &self.soc {
            let head = block[0].eval(x);
            let tail: f64 = block[1..].iter().map(|a| a.eval(x).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(tail - head);
        }
        worst
    }
}
