//! Portable text format for conic programs.
//!
//! ```text
//! conic-program 1
//! sense maximize
//! vars 2
//! var x 0.0 inf
//! var y -inf 1.0
//! objective 0.0 0:1.0 1:1.0
//! constraints 2
//! le cap -2.0 0:1.0 1:1.0
//! soc ball 2
//!   1.4142135623730951
//!   0.0 0:1.0
//!   0.0 1:1.0
//! end
//! ```
//!
//! An affine expression is written as its constant followed by `index:coef`
//! pairs. Cone records are followed by indented expression lines: `soc`
//! gives the head then `m` tail rows, `rotated` gives `a`, `b`, then `m`
//! tail rows, `quadratic` gives the linear part then `m` squared rows.
//! Numbers use the shortest representation that parses back to the same
//! `f64`, so `parse(export(p)) == p`. Lines starting with `#` are comments.

use std::fmt::Write as _;

use crate::model::{Affine, ConicProgram, Constraint, ConstraintKind, Sense, Variable};
use crate::ConicError;

const MAGIC: &str = "conic-program 1";

fn write_affine(out: &mut String, a: &Affine) {
    write!(out, "{:?}", a.constant).unwrap();
    for &(i, c) in &a.terms {
        write!(out, " {i}:{c:?}").unwrap();
    }
}

fn write_block(out: &mut String, head: &str, label: &str, exprs: &[&Affine], extra: usize) {
    writeln!(out, "{head} {label} {}", exprs.len() - extra).unwrap();
    for a in exprs {
        out.push_str("  ");
        write_affine(out, a);
        out.push('\n');
    }
}

/// Serializes a program to the portable text format.
pub fn export_problem(p: &ConicProgram) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    let sense = match p.sense {
        Sense::Maximize => "maximize",
        Sense::Minimize => "minimize",
    };
    writeln!(out, "sense {sense}").unwrap();
    writeln!(out, "vars {}", p.vars.len()).unwrap();
    for v in &p.vars {
        writeln!(out, "var {} {:?} {:?}", v.name, v.lower, v.upper).unwrap();
    }
    out.push_str("objective ");
    write_affine(&mut out, &p.objective);
    out.push('\n');
    writeln!(out, "constraints {}", p.constraints.len()).unwrap();
    for c in &p.constraints {
        match &c.kind {
            ConstraintKind::Eq(a) | ConstraintKind::Le(a) => {
                let tag = if matches!(c.kind, ConstraintKind::Eq(_)) { "eq" } else { "le" };
                write!(out, "{tag} {} ", c.label).unwrap();
                write_affine(&mut out, a);
                out.push('\n');
            }
            ConstraintKind::Soc { head, tail } => {
                let exprs: Vec<&Affine> = std::iter::once(head).chain(tail).collect();
                write_block(&mut out, "soc", &c.label, &exprs, 1);
            }
            ConstraintKind::Rotated { a, b, tail } => {
                let exprs: Vec<&Affine> = [a, b].into_iter().chain(tail).collect();
                write_block(&mut out, "rotated", &c.label, &exprs, 2);
            }
            ConstraintKind::Quadratic { squares, linear } => {
                let exprs: Vec<&Affine> = std::iter::once(linear).chain(squares).collect();
                write_block(&mut out, "quadratic", &c.label, &exprs, 1);
            }
        }
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str), ConicError> {
        loop {
            match self.inner.next() {
                Some((i, l)) => {
                    let t = l.trim();
                    if t.is_empty() || t.starts_with('#') {
                        continue;
                    }
                    return Ok((i + 1, t));
                }
                None => return Err(ConicError::Parse { line: 0, msg: "unexpected end".into() }),
            }
        }
    }
}

fn perr(line: usize, msg: impl Into<String>) -> ConicError {
    ConicError::Parse { line, msg: msg.into() }
}

fn num(line: usize, s: &str) -> Result<f64, ConicError> {
    s.parse::<f64>().map_err(|_| perr(line, format!("bad number {s:?}")))
}

fn count(line: usize, s: Option<&str>) -> Result<usize, ConicError> {
    s.and_then(|t| t.parse().ok()).ok_or_else(|| perr(line, "bad count"))
}

fn parse_affine<'a>(line: usize, mut toks: impl Iterator<Item = &'a str>) -> Result<Affine, ConicError> {
    let constant = num(line, toks.next().ok_or_else(|| perr(line, "missing constant"))?)?;
    let mut terms = Vec::new();
    for t in toks {
        let (i, c) = t.split_once(':').ok_or_else(|| perr(line, format!("bad term {t:?}")))?;
        let i: usize = i.parse().map_err(|_| perr(line, format!("bad index {i:?}")))?;
        terms.push((i, num(line, c)?));
    }
    Ok(Affine { terms, constant })
}

fn expect<'a>(lines: &mut Lines<'a>, key: &str) -> Result<(usize, std::str::SplitWhitespace<'a>), ConicError> {
    let (ln, l) = lines.next()?;
    let mut toks = l.split_whitespace();
    if toks.next() != Some(key) {
        return Err(perr(ln, format!("expected {key:?}")));
    }
    Ok((ln, toks))
}

/// Parses the portable text format.
pub fn parse_problem(text: &str) -> Result<ConicProgram, ConicError> {
    let mut lines = Lines { inner: text.lines().enumerate().peekable() };
    let (ln, first) = lines.next()?;
    if first != MAGIC {
        return Err(perr(ln, "missing header"));
    }
    let (ln, mut toks) = expect(&mut lines, "sense")?;
    let sense = match toks.next() {
        Some("maximize") => Sense::Maximize,
        Some("minimize") => Sense::Minimize,
        _ => return Err(perr(ln, "bad sense")),
    };
    let (ln, mut toks) = expect(&mut lines, "vars")?;
    let n = count(ln, toks.next())?;
    let mut vars = Vec::with_capacity(n);
    for _ in 0..n {
        let (ln, mut toks) = expect(&mut lines, "var")?;
        let name = toks.next().ok_or_else(|| perr(ln, "missing name"))?.to_string();
        let lower = num(ln, toks.next().unwrap_or(""))?;
        let upper = num(ln, toks.next().unwrap_or(""))?;
        vars.push(Variable { name, lower, upper });
    }
    let (ln, toks) = expect(&mut lines, "objective")?;
    let objective = parse_affine(ln, toks)?;
    let (ln, mut toks) = expect(&mut lines, "constraints")?;
    let m = count(ln, toks.next())?;
    let mut constraints = Vec::with_capacity(m);
    for _ in 0..m {
        let (ln, l) = lines.next()?;
        let mut toks = l.split_whitespace();
        let tag = toks.next().unwrap_or("");
        let label = toks.next().ok_or_else(|| perr(ln, "missing label"))?.to_string();
        let mut block = |extra: usize, toks: &mut std::str::SplitWhitespace| {
            let k = count(ln, toks.next())? + extra;
            (0..k)
                .map(|_| {
                    let (ln, l) = lines.next()?;
                    parse_affine(ln, l.split_whitespace())
                })
                .collect::<Result<Vec<_>, _>>()
        };
        let kind = match tag {
            "eq" => ConstraintKind::Eq(parse_affine(ln, toks)?),
            "le" => ConstraintKind::Le(parse_affine(ln, toks)?),
            "soc" => {
                let mut e = block(1, &mut toks)?;
                let head = e.remove(0);
                ConstraintKind::Soc { head, tail: e }
            }
            "rotated" => {
                let mut e = block(2, &mut toks)?;
                let a = e.remove(0);
                let b = e.remove(0);
                ConstraintKind::Rotated { a, b, tail: e }
            }
            "quadratic" => {
                let mut e = block(1, &mut toks)?;
                let linear = e.remove(0);
                ConstraintKind::Quadratic { squares: e, linear }
            }
            other => return Err(perr(ln, format!("unknown record {other:?}"))),
        };
        constraints.push(Constraint { label, kind });
    }
    let (ln, l) = lines.next()?;
    if l != "end" {
        return Err(perr(ln, "expected end"));
    }
    let p = ConicProgram { sense, vars, objective, constraints };
    p.validate()?;
    Ok(p)
}
