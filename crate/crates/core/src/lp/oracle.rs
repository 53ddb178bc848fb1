//! Brute-force optimum of a small LP by enumerating every vertex.
//!
//! A vertex is fixed by choosing `n` linearly independent active constraints
//! among the rows and the finite variable bounds. Each choice is solved with
//! Gaussian elimination and kept when it satisfies every constraint. This path
//! shares no code with the simplex solver and is only meant for tests.

use thiserror::Error;

use super::{LpProblem, Sense};

pub const ORACLE_MAX_VARIABLES: usize = 12;
const ORACLE_MAX_SYSTEMS: u64 = 20_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("problem too large for enumeration ({0})")]
    TooLarge(String),
    #[error("no feasible vertex")]
    Infeasible,
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

/// Next k-combination of 0..n in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in (i + 1)..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-10 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in (k + 1)..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Exact optimum of a bounded LP with at most [`ORACLE_MAX_VARIABLES`]
/// variables.
pub fn enumerate_vertices_oracle(problem: &LpProblem) -> Result<f64, OracleError> {
    let n = problem.num_variables();
    let rows = problem.constraints();
    let m = rows.len();
    if n > ORACLE_MAX_VARIABLES {
        return Err(OracleError::TooLarge(format!(
            "{n} variables > {ORACLE_MAX_VARIABLES}"
        )));
    }
    let bound_sides: Vec<Vec<f64>> = problem
        .variables()
        .iter()
        .map(|v| {
            let mut s = Vec::new();
            if v.lower.is_finite() {
                s.push(v.lower);
            }
            if v.upper.is_finite() && v.upper != v.lower {
                s.push(v.upper);
            }
            s
        })
        .collect();

    let mut work: u64 = 0;
    for r in 0..=m.min(n) {
        work += binomial(m, r) * binomial(n, n - r) * (1u64 << (n - r));
    }
    if work > ORACLE_MAX_SYSTEMS {
        return Err(OracleError::TooLarge(format!("{work} candidate systems")));
    }
    if n == 0 {
        return if problem.max_violation(&[]) <= 1e-9 {
            Ok(0.0)
        } else {
            Err(OracleError::Infeasible)
        };
    }

    let scale = 1.0
        + rows
            .iter()
            .map(|c| c.rhs.abs())
            .chain(problem.variables().iter().flat_map(|v| {
                [v.lower, v.upper].into_iter().filter(|b| b.is_finite()).map(f64::abs)
            }))
            .fold(0.0, f64::max);
    let feas_tol = 1e-9 * scale;

    let mut best: Option<f64> = None;
    for mask in 0u32..(1u32 << m) {
        let active_rows: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        if active_rows.len() > n {
            continue;
        }
        let k = n - active_rows.len();
        let mut vars: Vec<usize> = (0..k).collect();
        loop {
            if vars.iter().all(|&v| !bound_sides[v].is_empty()) {
                let choices: usize = vars.iter().map(|&v| bound_sides[v].len()).product();
                for mut pick in 0..choices {
                    let mut a = Vec::with_capacity(n);
                    let mut b = Vec::with_capacity(n);
                    for &i in &active_rows {
                        let mut row = vec![0.0; n];
                        for &(v, c) in &rows[i].terms {
                            row[v.0] += c;
                        }
                        a.push(row);
                        b.push(rows[i].rhs);
                    }
                    for &v in &vars {
                        let sides = &bound_sides[v];
                        let side = sides[pick % sides.len()];
                        pick /= sides.len();
                        let mut row = vec![0.0; n];
                        row[v] = 1.0;
                        a.push(row);
                        b.push(side);
                    }
                    if let Some(x) = solve_dense(a, b) {
                        let feasible = problem.variables().iter().zip(&x).all(|(var, &xi)| {
                            xi >= var.lower - feas_tol && xi <= var.upper + feas_tol
                        }) && rows.iter().all(|c| {
                            let act = c.activity(&x);
                            match c.sense {
                                Sense::Le => act <= c.rhs + feas_tol,
                                Sense::Ge => act >= c.rhs - feas_tol,
                                Sense::Eq => (act - c.rhs).abs() <= feas_tol,
                            }
                        });
                        if feasible {
                            let obj = problem.objective_at(&x);
                            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
                        }
                    }
                }
            }
            if k == 0 || !next_combination(&mut vars, n) {
                break;
            }
        }
    }
    best.ok_or(OracleError::Infeasible)
}
