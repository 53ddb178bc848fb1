//! MPS export.
//!
//! Records are laid out on the fixed-format field columns (2, 5, 15, 25, 40,
//! 50). Names longer than eight characters push later fields right; readers in
//! free-MPS mode accept such files unchanged.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{LpError, LpProblem, Sense};

const OBJECTIVE_ROW: &str = "COST";

/// Shortest representation that fits in a 12-character numeric field.
fn number(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() <= 12 {
        return plain;
    }
    for digits in (1..=10).rev() {
        let s = format!("{v:.digits$e}");
        if s.len() <= 12 {
            return s;
        }
    }
    format!("{v:e}")
}

fn pad_to(line: &mut String, col: usize) {
    // `col` is 1-based; at least one separating space once a field overflows
    if line.len() + 1 < col {
        while line.len() + 1 < col {
            line.push(' ');
        }
    } else if !line.ends_with(' ') {
        line.push(' ');
    }
}

fn record(f1: &str, f2: &str, f3: &str, f4: &str, f5: Option<(&str, &str)>) -> String {
    let mut line = String::new();
    pad_to(&mut line, 2);
    line.push_str(f1);
    pad_to(&mut line, 5);
    line.push_str(f2);
    if !f3.is_empty() {
        pad_to(&mut line, 15);
        line.push_str(f3);
    }
    if !f4.is_empty() {
        pad_to(&mut line, 25);
        line.push_str(f4);
    }
    if let Some((f5, f6)) = f5 {
        pad_to(&mut line, 40);
        line.push_str(f5);
        pad_to(&mut line, 50);
        line.push_str(f6);
    }
    line.trim_end().to_string()
}

pub(crate) fn to_mps_string(problem: &LpProblem) -> String {
    let mut out = String::new();
    let name = if problem.name.is_empty() {
        "LP"
    } else {
        problem.name.as_str()
    };
    let _ = writeln!(out, "NAME          {name}");
    out.push_str("ROWS\n");
    out.push_str(&record("N", OBJECTIVE_ROW, "", "", None));
    out.push('\n');
    for c in problem.constraints() {
        let kind = match c.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        out.push_str(&record(kind, &c.name, "", "", None));
        out.push('\n');
    }

    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); problem.num_variables()];
    for (i, c) in problem.constraints().iter().enumerate() {
        for &(v, a) in &c.terms {
            columns[v.0].push((i, a));
        }
    }
    out.push_str("COLUMNS\n");
    for (var, col) in problem.variables().iter().zip(&columns) {
        let mut entries: Vec<(&str, f64)> = Vec::with_capacity(col.len() + 1);
        if var.cost != 0.0 || col.is_empty() {
            entries.push((OBJECTIVE_ROW, var.cost));
        }
        entries.extend(
            col.iter()
                .map(|&(i, a)| (problem.constraints()[i].name.as_str(), a)),
        );
        for pair in entries.chunks(2) {
            let second = pair.get(1).map(|&(r, a)| (r, number(a)));
            out.push_str(&record(
                "",
                &var.name,
                pair[0].0,
                &number(pair[0].1),
                second.as_ref().map(|(r, a)| (*r, a.as_str())),
            ));
            out.push('\n');
        }
    }

    out.push_str("RHS\n");
    let rhs: Vec<(&str, f64)> = problem
        .constraints()
        .iter()
        .filter(|c| c.rhs != 0.0)
        .map(|c| (c.name.as_str(), c.rhs))
        .collect();
    for pair in rhs.chunks(2) {
        let second = pair.get(1).map(|&(r, a)| (r, number(a)));
        out.push_str(&record(
            "",
            "RHS",
            pair[0].0,
            &number(pair[0].1),
            second.as_ref().map(|(r, a)| (*r, a.as_str())),
        ));
        out.push('\n');
    }

    out.push_str("BOUNDS\n");
    for var in problem.variables() {
        let (lo, up) = (var.lower, var.upper);
        let mut emit = |kind: &str, value: Option<f64>| {
            let v = value.map(number).unwrap_or_default();
            out.push_str(&record(kind, "BND", &var.name, &v, None));
            out.push('\n');
        };
        if lo == up {
            emit("FX", Some(lo));
            continue;
        }
        match (lo.is_finite(), up.is_finite()) {
            (false, false) => emit("FR", None),
            (false, true) => {
                emit("MI", None);
                emit("UP", Some(up));
            }
            (true, _) => {
                if lo != 0.0 {
                    emit("LO", Some(lo));
                }
                if up.is_finite() {
                    emit("UP", Some(up));
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

/// Writes `problem` as an MPS file at `path`.
pub fn export_mps(problem: &LpProblem, path: impl AsRef<Path>) -> Result<(), LpError> {
    fs::write(path, to_mps_string(problem))?;
    Ok(())
}
