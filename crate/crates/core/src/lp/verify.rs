use super::{LpProblem, LpSolution, Sense};

/// Optimality residuals recomputed from the problem data, independent of the
/// solver's internal state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// Largest bound or row violation of the primal point.
    pub primal_infeasibility: f64,
    /// Largest sign violation of row duals or reduced costs.
    pub dual_infeasibility: f64,
    /// Largest |multiplier x distance-to-bound| product.
    pub complementarity: f64,
    /// |primal - dual| / max(1, |primal|).
    pub relative_gap: f64,
}

pub fn check_optimality(problem: &LpProblem, sol: &LpSolution) -> KktResiduals {
    let x = &sol.primal;
    let y = &sol.dual;
    let primal_infeasibility = problem.max_violation(x);

    let mut reduced: Vec<f64> = problem.variables().iter().map(|v| v.cost).collect();
    let mut dual_infeasibility: f64 = 0.0;
    let mut complementarity: f64 = 0.0;
    let mut dual_obj = 0.0;
    for (con, &yi) in problem.constraints().iter().zip(y) {
        for &(v, a) in &con.terms {
            reduced[v.0] -= a * yi;
        }
        let slack = con.rhs - con.activity(x);
        match con.sense {
            Sense::Le => dual_infeasibility = dual_infeasibility.max(yi),
            Sense::Ge => dual_infeasibility = dual_infeasibility.max(-yi),
            Sense::Eq => {}
        }
        complementarity = complementarity.max((yi * slack).abs());
        dual_obj += yi * con.rhs;
    }
    for ((var, &d), &xj) in problem.variables().iter().zip(&reduced).zip(x) {
        // a positive reduced cost must be supported by the lower bound, a
        // negative one by the upper bound
        if d > 0.0 {
            if var.lower.is_finite() {
                dual_obj += d * var.lower;
                complementarity = complementarity.max(d * (xj - var.lower).abs());
            } else {
                dual_infeasibility = dual_infeasibility.max(d);
            }
        } else if d < 0.0 {
            if var.upper.is_finite() {
                dual_obj += d * var.upper;
                complementarity = complementarity.max(-d * (var.upper - xj).abs());
            } else {
                dual_infeasibility = dual_infeasibility.max(-d);
            }
        }
    }
    let primal_obj = problem.objective_at(x);
    KktResiduals {
        primal_infeasibility,
        dual_infeasibility,
        complementarity,
        relative_gap: (primal_obj - dual_obj).abs() / primal_obj.abs().max(1.0),
    }
}
