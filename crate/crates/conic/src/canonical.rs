//! Small programs with optima known in closed form.

use std::f64::consts::SQRT_2;

use crate::model::{Affine, ConicProgram};

pub struct Canonical {
    pub name: &'static str,
    pub program: ConicProgram,
    pub optimum: f64,
}

fn case(name: &'static str, program: ConicProgram, optimum: f64) -> Canonical {
    Canonical { name, program, optimum }
}

pub fn canonical_problems() -> Vec<Canonical> {
    let mut out = Vec::new();

    let mut p = ConicProgram::maximize();
    let chi = p.free_var("chi");
    p.add_le("cap", Affine::var(chi).plus(-1.0));
    p.set_objective(Affine::var(chi));
    out.push(case("bounded-scalar", p, 1.0));

    let mut p = ConicProgram::maximize();
    let x = p.free_var("x");
    let y = p.free_var("y");
    p.add_soc("ball", Affine::constant(SQRT_2), vec![Affine::var(x), Affine::var(y)]);
    p.set_objective(Affine::var(x).term(y, 1.0));
    out.push(case("disc-linear", p, 2.0));

    let mut p = ConicProgram::maximize();
    let u = p.add_var("u", f64::NEG_INFINITY, 2.0);
    let r = p.add_var("r", f64::NEG_INFINITY, 2.0);
    let t = p.free_var("t");
    p.add_rotated("hyp", Affine::var(u), Affine::var(r), vec![Affine::var(t)]);
    p.set_objective(Affine::var(t));
    out.push(case("rotated-max", p, 8f64.sqrt()));

    let mut p = ConicProgram::maximize();
    let x = p.add_var("x", 0.0, 1.0);
    let y = p.add_var("y", 0.0, 2.0);
    p.add_le("sum", Affine::var(x).term(y, 1.0).plus(-2.5));
    p.set_objective(Affine::zero().term(x, 3.0).term(y, 2.0));
    out.push(case("box-lp", p, 6.0));

    let mut p = ConicProgram::minimize();
    let x = p.add_var("x", 0.0, f64::INFINITY);
    let y = p.add_var("y", 0.0, f64::INFINITY);
    p.add_eq("simplex", Affine::var(x).term(y, 1.0).plus(-1.0));
    p.set_objective(Affine::var(x).term(y, 2.0));
    out.push(case("simplex-lp", p, 1.0));

    let mut p = ConicProgram::maximize();
    let x = p.free_var("x");
    let y = p.free_var("y");
    p.add_quadratic("shifted-ball", vec![Affine::var(x).plus(-1.0), Affine::var(y)], Affine::constant(-4.0));
    p.set_objective(Affine::var(x));
    out.push(case("quadratic-ball", p, 3.0));

    let mut p = ConicProgram::minimize();
    let x = p.free_var("x");
    let y = p.free_var("y");
    let t = p.free_var("t");
    p.add_soc("dist", Affine::var(t), vec![Affine::var(x).plus(-3.0), Affine::var(y).plus(-4.0)]);
    p.add_le("half-plane", Affine::var(x).term(y, 1.0).plus(-1.0));
    p.set_objective(Affine::var(t));
    out.push(case("projection", p, 6.0 / SQRT_2));

    let mut p = ConicProgram::minimize();
    let u = p.free_var("u");
    let r = p.free_var("r");
    p.add_rotated("hyp", Affine::var(u), Affine::var(r), vec![Affine::constant(1.0)]);
    p.set_objective(Affine::var(u).term(r, 1.0));
    out.push(case("rotated-min", p, SQRT_2));

    let mut p = ConicProgram::maximize();
    let x = p.free_var("x");
    let y = p.free_var("y");
    p.add_quadratic("parabola", vec![Affine::var(x)], Affine::var(y).plus(-1.0));
    p.set_objective(Affine::var(y));
    out.push(case("parabola", p, 1.0));

    let mut p = ConicProgram::minimize();
    let k = p.free_var("kappa");
    let s1 = p.add_var("s1", 0.0, 1.0);
    let s2 = p.add_var("s2", 0.0, 1.0);
    p.add_le("e1", Affine::zero().term(s1, 2.0).term(k, -1.0));
    p.add_le("e2", Affine::zero().term(s2, 3.0).term(k, -1.0));
    p.add_eq("share", Affine::var(s1).term(s2, 1.0).plus(-1.0));
    p.set_objective(Affine::var(k));
    out.push(case("min-max", p, 1.2));

    out
}
