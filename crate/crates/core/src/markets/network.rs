//! Shared pieces of the network-constrained models: angle and flow
//! variables, AC flow rows and per-bus bookkeeping.

use crate::lp::{ConstraintId, LpError, LpProblem, LpSolution, Sense, VarId};
use crate::system::{LineKind, Network};

pub(super) struct FlowVars {
    /// Present only when the network has AC lines.
    pub angle: Option<Vec<VarId>>,
    pub flow: Vec<VarId>,
}

impl FlowVars {
    pub fn angles(&self, sol: &LpSolution, buses: usize) -> Vec<f64> {
        match &self.angle {
            Some(vars) => vars.iter().map(|&v| sol.value(v)).collect(),
            None => vec![0.0; buses],
        }
    }

    pub fn flows(&self, sol: &LpSolution) -> Vec<f64> {
        self.flow.iter().map(|&v| sol.value(v)).collect()
    }
}

/// Scenario suffix for names, e.g. `_w17`.
pub(super) fn suffix(scenario: Option<usize>) -> String {
    match scenario {
        Some(w) => format!("_w{w}"),
        None => String::new(),
    }
}

/// Adds angles (`{angle}_n*`), flows (`{flow}_l*`) bounded by `limits`,
/// and the AC rows `{row}_l*`: f - B (angle_to - angle_from) = 0.
pub(super) fn add_flows(
    lp: &mut LpProblem,
    net: &Network,
    names: (&str, &str, &str),
    sfx: &str,
    limits: &[f64],
) -> Result<FlowVars, LpError> {
    let (angle_name, flow_name, row_name) = names;
    let has_ac = net.lines.iter().any(|l| l.kind == LineKind::Ac);
    let angle = if has_ac {
        let mut vars = Vec::with_capacity(net.buses.len());
        for n in 0..net.buses.len() {
            let (lo, up) = if n == net.reference_bus {
                (0.0, 0.0)
            } else {
                (f64::NEG_INFINITY, f64::INFINITY)
            };
            vars.push(lp.add_named_variable(format!("{angle_name}_n{n}{sfx}"), lo, up, 0.0)?);
        }
        Some(vars)
    } else {
        None
    };
    let mut flow = Vec::with_capacity(net.lines.len());
    for (l, &lim) in limits.iter().enumerate() {
        let lim = lim.max(0.0);
        flow.push(lp.add_named_variable(format!("{flow_name}_l{l}{sfx}"), -lim, lim, 0.0)?);
    }
    if let Some(angles) = &angle {
        for (l, line) in net.lines.iter().enumerate() {
            if line.kind != LineKind::Ac {
                continue;
            }
            let b = line.susceptance;
            lp.add_named_constraint(
                format!("{row_name}_l{l}{sfx}"),
                &[(flow[l], 1.0), (angles[line.to], -b), (angles[line.from], b)],
                Sense::Eq,
                0.0,
            )?;
        }
    }
    Ok(FlowVars { angle, flow })
}

/// Terms `coef * A_ln * f_l` for every line touching bus `n`.
pub(super) fn flow_terms(net: &Network, n: usize, flow: &[VarId], coef: f64) -> Vec<(VarId, f64)> {
    net.lines
        .iter()
        .enumerate()
        .filter_map(|(l, _)| {
            let a = net.incidence(l, n);
            (a != 0.0).then(|| (flow[l], coef * a))
        })
        .collect()
}

/// Sum over lines of `A_ln * values[l]` at bus `n`.
pub(super) fn flow_sum(net: &Network, n: usize, values: &[f64]) -> f64 {
    (0..net.lines.len()).map(|l| net.incidence(l, n) * values[l]).sum()
}

pub(super) fn units_at(net: &Network, n: usize) -> impl Iterator<Item = usize> + '_ {
    net.units.iter().enumerate().filter(move |(_, u)| u.bus == n).map(|(i, _)| i)
}

pub(super) fn farms_at(net: &Network, n: usize) -> impl Iterator<Item = usize> + '_ {
    net.wind_farms
        .iter()
        .enumerate()
        .filter(move |(_, w)| w.bus == n)
        .map(|(j, _)| j)
}

pub(super) fn values(sol: &LpSolution, vars: &[VarId]) -> Vec<f64> {
    vars.iter().map(|&v| sol.value(v)).collect()
}

pub(super) fn optional_values(sol: &LpSolution, vars: &[Option<VarId>]) -> Vec<f64> {
    vars.iter().map(|v| v.map_or(0.0, |v| sol.value(v))).collect()
}

pub(super) fn duals(sol: &LpSolution, rows: &[ConstraintId]) -> Vec<f64> {
    rows.iter().map(|&c| sol.dual_of(c)).collect()
}

pub(super) fn full_limits(net: &Network) -> Vec<f64> {
    net.lines.iter().map(|l| l.f_max).collect()
}
