//! Linear programs: construction, a bounded-variable revised simplex solver,
//! an exhaustive vertex-enumeration oracle for small instances, and MPS export.
//!
//! Every problem is a minimization. Variables carry their own bounds, which
//! may be infinite; constraints are `terms (<=|=|>=) rhs`.

mod factor;
mod mps;
mod oracle;
mod simplex;
mod verify;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mps::export_mps;
pub use oracle::{enumerate_vertices_oracle, OracleError, ORACLE_MAX_VARIABLES};
pub use simplex::SolverOptions;
pub use verify::{check_optimality, KktResiduals};

/// Primal feasibility tolerance (absolute).
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Reduced-cost optimality tolerance.
pub const OPTIMALITY_TOL: f64 = 1e-9;
/// Relative duality-gap tolerance.
pub const DUALITY_GAP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConstraintId(pub usize);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    /// Left-hand-side activity at `x`.
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * x[v.0]).sum()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("invalid bounds for {name}: lower {lower} > upper {upper}")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
    #[error("NaN bound for {name}")]
    NanBound { name: String },
    #[error("non-finite objective coefficient {value} for {name}")]
    NonFiniteCost { name: String, value: f64 },
    #[error("constraint references unknown variable {0}")]
    UnknownVariable(VarId),
    #[error("non-finite coefficient {value} in constraint {name}")]
    NonFiniteCoefficient { name: String, value: f64 },
    #[error("unknown constraint {0}")]
    UnknownConstraint(ConstraintId),
    #[error("iteration cap of {cap} reached without convergence")]
    CycleLimitExceeded { cap: usize },
    #[error("basis matrix became numerically singular after {iterations} iterations")]
    SingularBasis { iterations: usize },
    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LpError {
    fn from(e: std::io::Error) -> Self {
        LpError::Io(e.to_string())
    }
}

/// A minimization linear program.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub name: String,
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
}

impl LpProblem {
    pub fn new(name: impl Into<String>) -> Self {
        LpProblem {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn add_variable(&mut self, lower: f64, upper: f64, cost: f64) -> Result<VarId, LpError> {
        let name = format!("v{}", self.variables.len());
        self.add_named_variable(name, lower, upper, cost)
    }

    pub fn add_named_variable(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        cost: f64,
    ) -> Result<VarId, LpError> {
        let name = name.into();
        if lower.is_nan() || upper.is_nan() {
            return Err(LpError::NanBound { name });
        }
        if lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(LpError::InvalidBounds { name, lower, upper });
        }
        if !cost.is_finite() {
            return Err(LpError::NonFiniteCost { name, value: cost });
        }
        self.variables.push(Variable {
            name,
            lower,
            upper,
            cost,
        });
        Ok(VarId(self.variables.len() - 1))
    }

    pub fn add_constraint(
        &mut self,
        terms: &[(VarId, f64)],
        sense: Sense,
        rhs: f64,
    ) -> Result<ConstraintId, LpError> {
        let name = format!("c{}", self.constraints.len());
        self.add_named_constraint(name, terms, sense, rhs)
    }

    /// Adds a constraint; repeated variables within `terms` have their
    /// coefficients summed.
    pub fn add_named_constraint(
        &mut self,
        name: impl Into<String>,
        terms: &[(VarId, f64)],
        sense: Sense,
        rhs: f64,
    ) -> Result<ConstraintId, LpError> {
        let name = name.into();
        if !rhs.is_finite() {
            return Err(LpError::NonFiniteCoefficient { name, value: rhs });
        }
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        for &(v, a) in terms {
            if v.0 >= self.variables.len() {
                return Err(LpError::UnknownVariable(v));
            }
            if !a.is_finite() {
                return Err(LpError::NonFiniteCoefficient { name, value: a });
            }
            match merged.iter_mut().find(|(w, _)| *w == v) {
                Some(entry) => entry.1 += a,
                None => merged.push((v, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        self.constraints.push(Constraint {
            name,
            terms: merged,
            sense,
            rhs,
        });
        Ok(ConstraintId(self.constraints.len() - 1))
    }

    pub fn set_rhs(&mut self, c: ConstraintId, rhs: f64) -> Result<(), LpError> {
        let con = self
            .constraints
            .get_mut(c.0)
            .ok_or(LpError::UnknownConstraint(c))?;
        if !rhs.is_finite() {
            return Err(LpError::NonFiniteCoefficient {
                name: con.name.clone(),
                value: rhs,
            });
        }
        con.rhs = rhs;
        Ok(())
    }

    pub fn set_cost(&mut self, v: VarId, cost: f64) -> Result<(), LpError> {
        let var = self
            .variables
            .get_mut(v.0)
            .ok_or(LpError::UnknownVariable(v))?;
        if !cost.is_finite() {
            return Err(LpError::NonFiniteCost {
                name: var.name.clone(),
                value: cost,
            });
        }
        var.cost = cost;
        Ok(())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn variable(&self, v: VarId) -> &Variable {
        &self.variables[v.0]
    }

    pub fn constraint(&self, c: ConstraintId) -> &Constraint {
        &self.constraints[c.0]
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.variables.iter().zip(x).map(|(v, xi)| v.cost * xi).sum()
    }

    /// Largest absolute bound or constraint violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (var, &xi) in self.variables.iter().zip(x) {
            worst = worst.max(var.lower - xi).max(xi - var.upper);
        }
        for con in &self.constraints {
            let act = con.activity(x);
            let v = match con.sense {
                Sense::Le => act - con.rhs,
                Sense::Ge => con.rhs - act,
                Sense::Eq => (act - con.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        simplex::solve(self, &SolverOptions::default())
    }

    pub fn solve_with(&self, options: &SolverOptions) -> Result<LpSolution, LpError> {
        simplex::solve(self, options)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Evidence attached to a non-optimal status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Certificate {
    /// Phase-one row multipliers proving infeasibility.
    Farkas(Vec<f64>),
    /// Primal direction (per structural variable) along which the objective
    /// decreases without bound.
    Ray(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
    pub iterations: usize,
    pub certificate: Option<Certificate>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.primal[v.0]
    }

    pub fn dual_of(&self, c: ConstraintId) -> f64 {
        self.dual[c.0]
    }
}
