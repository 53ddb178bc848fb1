//! Two-phase bounded-variable primal revised simplex.
//!
//! Rows are brought to equality form with one slack per row (an equality row
//! gets a slack fixed at zero). Phase one adds an artificial column wherever
//! the slack alone cannot absorb the starting residual and minimizes their sum.
//! Entering columns are chosen by largest reduced cost until a run of
//! degenerate pivots is seen, after which Bland's smallest-index rule is used
//! for both entering and leaving choices until the objective moves again.

use super::factor::{BasisColumn, BasisFactor};
use super::{Certificate, LpError, LpProblem, LpSolution, LpStatus, Sense};
use super::{FEASIBILITY_TOL, OPTIMALITY_TOL};

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    /// Pivots between fresh factorizations of the basis.
    pub refactor_interval: usize,
    /// The iteration cap is `cap_factor * (rows + columns)`.
    pub cap_factor: usize,
    /// Consecutive degenerate pivots tolerated before switching to Bland's rule.
    pub degenerate_run: usize,
    /// Use Bland's rule from the first pivot.
    pub bland_only: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feasibility_tol: FEASIBILITY_TOL,
            optimality_tol: OPTIMALITY_TOL,
            pivot_tol: 1e-9,
            refactor_interval: 50,
            cap_factor: 50,
            degenerate_run: 25,
            bland_only: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Status {
    Basic(usize),
    Lower,
    Upper,
    /// Nonbasic free column held at zero.
    Zero,
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Structural,
    Unit { row: usize, sign: f64 },
}

enum PhaseEnd {
    Optimal,
    Unbounded(Vec<f64>),
}

struct Simplex<'o> {
    m: usize,
    n: usize,
    cols: Vec<Vec<(usize, f64)>>,
    kind: Vec<Kind>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    status: Vec<Status>,
    basis: Vec<usize>,
    b: Vec<f64>,
    factor: BasisFactor,
    opts: &'o SolverOptions,
    iterations: usize,
    cap: usize,
    artificials: Vec<usize>,
}

pub(crate) fn solve(problem: &LpProblem, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    let mut s = Simplex::new(problem, opts);
    if !s.artificials.is_empty() {
        for j in 0..s.cost.len() {
            s.cost[j] = 0.0;
        }
        for &a in &s.artificials {
            s.cost[a] = 1.0;
        }
        s.refactor()?;
        match s.run()? {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded(_) => {
                // phase one is bounded below by zero; only numerical trouble lands here
                return Err(LpError::SingularBasis {
                    iterations: s.iterations,
                });
            }
        }
        let b_scale = 1.0 + s.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let worst = s
            .artificials
            .iter()
            .fold(0.0f64, |acc, &a| acc.max(s.x[a]));
        if worst > opts.feasibility_tol * b_scale {
            let y = s.duals();
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                objective: f64::NAN,
                primal: s.x[..s.n].to_vec(),
                dual: vec![0.0; s.m],
                iterations: s.iterations,
                certificate: Some(Certificate::Farkas(y)),
            });
        }
        for &a in &s.artificials {
            s.upper[a] = 0.0;
            if !matches!(s.status[a], Status::Basic(_)) {
                s.x[a] = 0.0;
            }
        }
    }
    for j in 0..s.cost.len() {
        s.cost[j] = if j < s.n {
            problem.variables()[j].cost
        } else {
            0.0
        };
    }
    s.refactor()?;
    match s.run()? {
        PhaseEnd::Unbounded(ray) => Ok(LpSolution {
            status: LpStatus::Unbounded,
            objective: f64::NEG_INFINITY,
            primal: s.x[..s.n].to_vec(),
            dual: vec![0.0; s.m],
            iterations: s.iterations,
            certificate: Some(Certificate::Ray(ray)),
        }),
        PhaseEnd::Optimal => {
            s.refactor()?;
            let dual = s.duals();
            let primal = s.x[..s.n].to_vec();
            let objective = problem.objective_at(&primal);
            Ok(LpSolution {
                status: LpStatus::Optimal,
                objective,
                primal,
                dual,
                iterations: s.iterations,
                certificate: None,
            })
        }
    }
}

impl<'o> Simplex<'o> {
    fn new(problem: &LpProblem, opts: &'o SolverOptions) -> Self {
        let n = problem.num_variables();
        let m = problem.num_constraints();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, con) in problem.constraints().iter().enumerate() {
            for &(v, a) in &con.terms {
                cols[v.0].push((i, a));
            }
        }
        let mut kind = vec![Kind::Structural; n];
        let mut lower: Vec<f64> = problem.variables().iter().map(|v| v.lower).collect();
        let mut upper: Vec<f64> = problem.variables().iter().map(|v| v.upper).collect();
        let mut x = Vec::with_capacity(n + m);
        let mut status = Vec::with_capacity(n + m);
        for j in 0..n {
            let (v, st) = if lower[j].is_finite() {
                (lower[j], Status::Lower)
            } else if upper[j].is_finite() {
                (upper[j], Status::Upper)
            } else {
                (0.0, Status::Zero)
            };
            x.push(v);
            status.push(st);
        }
        let b: Vec<f64> = problem.constraints().iter().map(|c| c.rhs).collect();
        let mut residual = b.clone();
        for (j, col) in cols.iter().enumerate() {
            if x[j] != 0.0 {
                for &(i, a) in col {
                    residual[i] -= a * x[j];
                }
            }
        }
        let mut basis = vec![usize::MAX; m];
        let mut artificials = Vec::new();
        let mut pending = Vec::new();
        for (i, con) in problem.constraints().iter().enumerate() {
            let (lo, hi) = match con.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            let j = kind.len();
            kind.push(Kind::Unit { row: i, sign: 1.0 });
            lower.push(lo);
            upper.push(hi);
            let r = residual[i];
            if r >= lo && r <= hi {
                x.push(r);
                status.push(Status::Basic(i));
                basis[i] = j;
            } else {
                let (v, st) = if r < lo { (lo, Status::Lower) } else { (hi, Status::Upper) };
                x.push(v);
                status.push(st);
                pending.push((i, r - v));
            }
        }
        for (i, gap) in pending {
            let j = kind.len();
            let sign = if gap >= 0.0 { 1.0 } else { -1.0 };
            kind.push(Kind::Unit { row: i, sign });
            lower.push(0.0);
            upper.push(f64::INFINITY);
            x.push(gap.abs());
            status.push(Status::Basic(i));
            basis[i] = j;
            artificials.push(j);
        }
        let total = kind.len();
        Simplex {
            m,
            n,
            cols,
            kind,
            lower,
            upper,
            cost: vec![0.0; total],
            x,
            status,
            basis,
            b,
            factor: BasisFactor::default(),
            opts,
            iterations: 0,
            cap: opts.cap_factor * (m + n).max(1),
            artificials,
        }
    }

    fn column(&self, j: usize) -> BasisColumn<'_> {
        match self.kind[j] {
            Kind::Structural => BasisColumn::Sparse(&self.cols[j]),
            Kind::Unit { row, sign } => BasisColumn::Unit { row, sign },
        }
    }

    fn dense_column(&self, j: usize) -> Vec<f64> {
        let mut a = vec![0.0; self.m];
        match self.kind[j] {
            Kind::Structural => {
                for &(i, v) in &self.cols[j] {
                    a[i] = v;
                }
            }
            Kind::Unit { row, sign } => a[row] = sign,
        }
        a
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let columns: Vec<BasisColumn<'_>> = self.basis.iter().map(|&j| self.column(j)).collect();
        self.factor = BasisFactor::new(self.m, &columns, 1e-11).ok_or(LpError::SingularBasis {
            iterations: self.iterations,
        })?;
        let mut rhs = self.b.clone();
        for j in 0..self.kind.len() {
            if matches!(self.status[j], Status::Basic(_)) || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            match self.kind[j] {
                Kind::Structural => {
                    for &(i, v) in &self.cols[j] {
                        rhs[i] -= v * xj;
                    }
                }
                Kind::Unit { row, sign } => rhs[row] -= sign * xj,
            }
        }
        let xb = self.factor.ftran(&rhs);
        for (p, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[p];
        }
        Ok(())
    }

    fn duals(&self) -> Vec<f64> {
        let cb: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        self.factor.btran(&cb)
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        match self.kind[j] {
            Kind::Structural => {
                self.cost[j] - self.cols[j].iter().map(|&(i, v)| v * y[i]).sum::<f64>()
            }
            Kind::Unit { row, sign } => self.cost[j] - sign * y[row],
        }
    }

    /// Returns the entering column and its direction of motion.
    fn price(&self, y: &[f64], bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.optimality_tol;
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.kind.len() {
            let dir = match self.status[j] {
                Status::Basic(_) => continue,
                Status::Lower => {
                    if self.upper[j] <= self.lower[j] {
                        continue;
                    }
                    let d = self.reduced_cost(j, y);
                    if d < -tol {
                        (1.0, -d)
                    } else {
                        continue;
                    }
                }
                Status::Upper => {
                    if self.upper[j] <= self.lower[j] {
                        continue;
                    }
                    let d = self.reduced_cost(j, y);
                    if d > tol {
                        (-1.0, d)
                    } else {
                        continue;
                    }
                }
                Status::Zero => {
                    let d = self.reduced_cost(j, y);
                    if d.abs() > tol {
                        (-d.signum(), d.abs())
                    } else {
                        continue;
                    }
                }
            };
            if bland {
                return Some((j, dir.0));
            }
            if dir.1 > best_score {
                best_score = dir.1;
                best = Some((j, dir.0));
            }
        }
        best
    }

    fn run(&mut self) -> Result<PhaseEnd, LpError> {
        let mut degenerate = 0usize;
        loop {
            if self.iterations >= self.cap {
                return Err(LpError::CycleLimitExceeded { cap: self.cap });
            }
            if self.factor.num_etas() >= self.opts.refactor_interval {
                self.refactor()?;
            }
            let bland = self.opts.bland_only || degenerate >= self.opts.degenerate_run;
            let y = self.duals();
            let Some((q, dir)) = self.price(&y, bland) else {
                return Ok(PhaseEnd::Optimal);
            };
            let alpha = self.factor.ftran(&self.dense_column(q));

            // ratio test
            let mut theta = f64::INFINITY;
            let mut leave: Option<(usize, bool)> = None; // (position, hits upper)
            for (p, &a) in alpha.iter().enumerate() {
                if a.abs() <= self.opts.pivot_tol {
                    continue;
                }
                let j = self.basis[p];
                let g = -dir * a;
                let (t, to_upper) = if g < 0.0 {
                    if !self.lower[j].is_finite() {
                        continue;
                    }
                    (((self.x[j] - self.lower[j]) / -g).max(0.0), false)
                } else {
                    if !self.upper[j].is_finite() {
                        continue;
                    }
                    (((self.upper[j] - self.x[j]) / g).max(0.0), true)
                };
                let replace = match leave {
                    None => true,
                    Some((lp, _)) => {
                        let tie = 1e-12 * (1.0 + theta.abs());
                        if t < theta - tie {
                            true
                        } else if t <= theta + tie {
                            if bland {
                                j < self.basis[lp]
                            } else {
                                a.abs() > alpha[lp].abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if replace {
                    theta = theta.min(t);
                    leave = Some((p, to_upper));
                }
            }
            let flip = self.upper[q] - self.lower[q];
            self.iterations += 1;
            if flip.is_finite() && flip <= theta {
                // bound flip, basis unchanged
                self.x[q] += dir * flip;
                self.status[q] = if dir > 0.0 { Status::Upper } else { Status::Lower };
                for (p, &a) in alpha.iter().enumerate() {
                    if a != 0.0 {
                        let j = self.basis[p];
                        self.x[j] -= dir * flip * a;
                    }
                }
                degenerate = 0;
                continue;
            }
            let Some((r, to_upper)) = leave else {
                let mut ray = vec![0.0; self.n];
                if q < self.n {
                    ray[q] = dir;
                }
                for (p, &a) in alpha.iter().enumerate() {
                    let j = self.basis[p];
                    if j < self.n {
                        ray[j] = -dir * a;
                    }
                }
                return Ok(PhaseEnd::Unbounded(ray));
            };
            if theta <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.x[q] += dir * theta;
            for (p, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    let j = self.basis[p];
                    self.x[j] -= dir * theta * a;
                }
            }
            let leaving = self.basis[r];
            if to_upper {
                self.x[leaving] = self.upper[leaving];
                self.status[leaving] = Status::Upper;
            } else {
                self.x[leaving] = self.lower[leaving];
                self.status[leaving] = Status::Lower;
            }
            self.basis[r] = q;
            self.status[q] = Status::Basic(r);
            self.factor.push_eta(r, &alpha);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{check_optimality, LpProblem, Sense};

    fn klee_minty(d: usize) -> LpProblem {
        // max sum 2^(d-j) x_j  s.t.  2 sum_{j<i} 2^(i-j) x_j + x_i <= 5^i
        let mut lp = LpProblem::new("km");
        let vars: Vec<_> = (0..d)
            .map(|j| {
                lp.add_variable(0.0, f64::INFINITY, -(2f64.powi((d - 1 - j) as i32)))
                    .unwrap()
            })
            .collect();
        for i in 0..d {
            let mut terms = Vec::new();
            for (j, &v) in vars.iter().enumerate().take(i) {
                terms.push((v, 2f64.powi((i - j + 1) as i32)));
            }
            terms.push((vars[i], 1.0));
            lp.add_constraint(&terms, Sense::Le, 5f64.powi(i as i32 + 1))
                .unwrap();
        }
        lp
    }

    #[test]
    fn klee_minty_is_solved_with_both_pricing_rules() {
        let lp = klee_minty(6);
        let expected = -(5f64.powi(6));
        for bland in [false, true] {
            let opts = SolverOptions {
                bland_only: bland,
                ..Default::default()
            };
            let sol = lp.solve_with(&opts).unwrap();
            assert_eq!(sol.status, LpStatus::Optimal);
            assert!((sol.objective - expected).abs() < 1e-6, "{}", sol.objective);
            let k = check_optimality(&lp, &sol);
            assert!(k.primal_infeasibility < 1e-7);
            assert!(k.relative_gap < 1e-9);
        }
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's classic cycling instance.
        let mut lp = LpProblem::new("beale");
        let x4 = lp.add_variable(0.0, f64::INFINITY, -0.75).unwrap();
        let x5 = lp.add_variable(0.0, f64::INFINITY, 150.0).unwrap();
        let x6 = lp.add_variable(0.0, f64::INFINITY, -0.02).unwrap();
        let x7 = lp.add_variable(0.0, f64::INFINITY, 6.0).unwrap();
        lp.add_constraint(
            &[(x4, 0.25), (x5, -60.0), (x6, -0.04), (x7, 9.0)],
            Sense::Le,
            0.0,
        )
        .unwrap();
        lp.add_constraint(
            &[(x4, 0.5), (x5, -90.0), (x6, -0.02), (x7, 3.0)],
            Sense::Le,
            0.0,
        )
        .unwrap();
        lp.add_constraint(&[(x6, 1.0)], Sense::Le, 1.0).unwrap();
        for bland in [false, true] {
            let opts = SolverOptions {
                bland_only: bland,
                degenerate_run: 1,
                ..Default::default()
            };
            let sol = lp.solve_with(&opts).unwrap();
            assert_eq!(sol.status, LpStatus::Optimal);
            assert!((sol.objective + 0.05).abs() < 1e-9);
        }
    }

    #[test]
    fn refactorization_interval_does_not_change_optimum() {
        let lp = klee_minty(8);
        let a = lp
            .solve_with(&SolverOptions {
                refactor_interval: 1,
                ..Default::default()
            })
            .unwrap();
        let b = lp
            .solve_with(&SolverOptions {
                refactor_interval: 1000,
                ..Default::default()
            })
            .unwrap();
        assert!((a.objective - b.objective).abs() < 1e-6);
    }

    #[test]
    fn iteration_cap_reports_cycle_limit() {
        let lp = klee_minty(5);
        let err = lp
            .solve_with(&SolverOptions {
                cap_factor: 0,
                ..Default::default()
            })
            .unwrap_err();
        assert!(matches!(err, LpError::CycleLimitExceeded { .. }));
    }
}
