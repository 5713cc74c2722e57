//! CPLEX-style LP text for handing instances to external solvers, and a
//! reader for the subset this module writes.

use std::fmt::Write as _;

use super::IlpInstance;
use crate::error::{Error, Result};
use crate::polytope::IntBox;

fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn write_expr(out: &mut String, coefs: &[f64]) {
    let mut first = true;
    for (j, &c) in coefs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        if first {
            let _ = write!(out, "{} x{j}", num(c));
            first = false;
        } else if c < 0.0 {
            let _ = write!(out, " - {} x{j}", num(-c));
        } else {
            let _ = write!(out, " + {} x{j}", num(c));
        }
    }
    if first {
        out.push_str("0 x0");
    }
}

/// Renders `inst` in LP format: rows as `a·x >= -b`, integer bounds, all variables general integers.
pub fn write_lp_file(inst: &IlpInstance) -> String {
    let n = inst.num_vars();
    let mut out = String::new();
    let _ = writeln!(out, "\\ {n} integer variables, {} rows", inst.num_rows());
    out.push_str("Minimize\n obj: ");
    write_expr(&mut out, &inst.c);
    out.push_str("\nSubject To\n");
    for (i, (a, b)) in inst.a.iter().zip(&inst.b).enumerate() {
        let _ = write!(out, " r{i}: ");
        write_expr(&mut out, a);
        let _ = writeln!(out, " >= {}", num(-b));
    }
    out.push_str("Bounds\n");
    for j in 0..n {
        let _ = writeln!(out, " {} <= x{j} <= {}", inst.bounds.lo[j], inst.bounds.hi[j]);
    }
    out.push_str("General\n");
    for j in 0..n {
        let _ = write!(out, " x{j}");
        if j % 16 == 15 || j + 1 == n {
            out.push('\n');
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    General,
    Done,
}

fn section_of(line: &str) -> Option<Section> {
    match line.to_ascii_lowercase().as_str() {
        "minimize" | "minimum" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
        "bounds" | "bound" => Some(Section::Bounds),
        "general" | "generals" | "gen" | "integer" | "integers" => Some(Section::General),
        "end" => Some(Section::Done),
        _ => None,
    }
}

fn var_index(tok: &str) -> Option<usize> {
    tok.strip_prefix('x')?.parse().ok()
}

/// Parses `coef var` terms separated by signs into a dense vector.
fn parse_expr(text: &str, offset: usize, dense: &mut Vec<f64>) -> Result<()> {
    let err = |msg: String| Error::Parse { offset, msg };
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for tok in text.split_whitespace() {
        match tok {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            _ => {
                if let Some(j) = var_index(tok) {
                    if dense.len() <= j {
                        dense.resize(j + 1, 0.0);
                    }
                    dense[j] += sign * coef.take().unwrap_or(1.0);
                    sign = 1.0;
                } else {
                    let v: f64 = tok.parse().map_err(|_| err(format!("bad token `{tok}`")))?;
                    if coef.is_some() {
                        return Err(err(format!("two coefficients in a row near `{tok}`")));
                    }
                    coef = Some(v);
                }
            }
        }
    }
    if coef.is_some() {
        return Err(err("dangling coefficient".into()));
    }
    Ok(())
}

fn strip_label(s: &str) -> &str {
    match s.find(':') {
        Some(i) => &s[i + 1..],
        None => s,
    }
}

/// Reads LP text produced by [`write_lp_file`].
pub fn parse_lp_file(text: &str) -> Result<IlpInstance> {
    let mut section = Section::Preamble;
    let mut c = Vec::new();
    let mut a: Vec<Vec<f64>> = Vec::new();
    let mut b = Vec::new();
    let mut bounds: Vec<(usize, i64, i64)> = Vec::new();
    let mut generals = Vec::new();
    let mut offset = 0usize;
    for raw in text.split_inclusive('\n') {
        let line_offset = offset;
        offset += raw.len();
        let line = raw.trim();
        if line.is_empty() || line.starts_with('\\') {
            continue;
        }
        let err = |msg: String| Error::Parse { offset: line_offset, msg };
        if let Some(s) = section_of(line) {
            section = s;
            continue;
        }
        match section {
            Section::Preamble | Section::Done => return Err(err(format!("unexpected line `{line}`"))),
            Section::Objective => parse_expr(strip_label(line), line_offset, &mut c)?,
            Section::Constraints => {
                let body = strip_label(line);
                let idx = body.find(">=").ok_or_else(|| err("only `>=` rows are supported".into()))?;
                let mut row = Vec::new();
                parse_expr(&body[..idx], line_offset, &mut row)?;
                let rhs: f64 = body[idx + 2..].trim().parse().map_err(|_| err("bad right-hand side".into()))?;
                a.push(row);
                b.push(-rhs);
            }
            Section::Bounds => {
                let parts: Vec<&str> = line.split("<=").map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(err(format!("expected `l <= x <= u`, got `{line}`")));
                }
                let j = var_index(parts[1]).ok_or_else(|| err(format!("bad variable `{}`", parts[1])))?;
                let lo = parts[0].parse().map_err(|_| err("bad lower bound".into()))?;
                let hi = parts[2].parse().map_err(|_| err("bad upper bound".into()))?;
                bounds.push((j, lo, hi));
            }
            Section::General => {
                for tok in line.split_whitespace() {
                    generals.push(var_index(tok).ok_or_else(|| err(format!("bad variable `{tok}`")))?);
                }
            }
        }
    }
    let n = bounds.len();
    let mut lo = vec![0i64; n];
    let mut hi = vec![0i64; n];
    let mut seen = vec![false; n];
    for (j, l, h) in bounds {
        if j >= n || seen[j] {
            return Err(Error::Parse { offset: text.len(), msg: format!("bounds for x{j} missing or repeated") });
        }
        seen[j] = true;
        lo[j] = l;
        hi[j] = h;
    }
    if generals.len() != n {
        return Err(Error::Parse { offset: text.len(), msg: "every variable must be declared general".into() });
    }
    c.resize(n, 0.0);
    for row in &mut a {
        row.resize(n, 0.0);
    }
    IlpInstance::new(c, a, b, IntBox::new(lo, hi)?)
}
