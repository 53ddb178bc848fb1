//! Two-stage stochastic clearing: day-ahead energy and reserve are chosen
//! jointly with the recourse in every wind scenario.

use crate::lp::{ConstraintId, LpError, LpProblem, LpSolution, Sense, VarId};
use crate::system::Network;
use crate::uncertainty::ScenarioSet;

use super::network::{
    add_flows, duals, farms_at, flow_terms, full_limits, optional_values, suffix, units_at,
    values, FlowVars,
};
use super::{
    check_scenarios, solve_stage, BalancingOutcome, CostBreakdown, DaSchedule, Design,
    MarketError, MarketOutcome, ReserveAllocation, ReserveSchedule, Stage,
};

struct Recourse {
    up: Vec<Option<VarId>>,
    down: Vec<Option<VarId>>,
    spill: Vec<Option<VarId>>,
    shed: Vec<Option<VarId>>,
    flows: FlowVars,
}

struct Model {
    lp: LpProblem,
    p: Vec<VarId>,
    p_wind: Vec<VarId>,
    reserve_up: Vec<Option<VarId>>,
    reserve_down: Vec<Option<VarId>>,
    da_flows: FlowVars,
    da_balance: Vec<ConstraintId>,
    recourse: Vec<Recourse>,
}

fn lp_err(source: LpError) -> MarketError {
    MarketError::SolverFailed {
        stage: Stage::Stochastic,
        source,
    }
}

fn formulate(net: &Network, scenarios: &ScenarioSet) -> Result<Model, MarketError> {
    check_scenarios(net, scenarios)?;
    let supply = net.total_unit_capacity() + net.total_wind_capacity();
    if supply < net.total_demand() {
        return Err(MarketError::Infeasible {
            stage: Stage::Stochastic,
            detail: format!(
                "demand {} MW exceeds installed capacity {} MW",
                net.total_demand(),
                supply
            ),
        });
    }
    formulate_lp(net, scenarios).map_err(lp_err)
}

fn formulate_lp(net: &Network, scenarios: &ScenarioSet) -> Result<Model, LpError> {
    let mut lp = LpProblem::new(format!("stochastic_{}", net.name));
    let mut p = Vec::new();
    let mut reserve_up = Vec::new();
    let mut reserve_down = Vec::new();
    for (i, u) in net.units.iter().enumerate() {
        p.push(lp.add_named_variable(format!("p_i{i}"), 0.0, u.p_max, u.cost)?);
    }
    for (i, u) in net.units.iter().enumerate() {
        reserve_up.push(if u.reserve_up_max > 0.0 {
            let r = lp.add_named_variable(
                format!("RUP_i{i}"),
                0.0,
                u.reserve_up_max,
                u.reserve_up_cost,
            )?;
            lp.add_named_constraint(
                format!("capUP_i{i}"),
                &[(p[i], 1.0), (r, 1.0)],
                Sense::Le,
                u.p_max,
            )?;
            Some(r)
        } else {
            None
        });
        reserve_down.push(if u.reserve_down_max > 0.0 {
            let r = lp.add_named_variable(
                format!("RDN_i{i}"),
                0.0,
                u.reserve_down_max,
                u.reserve_down_cost,
            )?;
            lp.add_named_constraint(
                format!("capDN_i{i}"),
                &[(p[i], 1.0), (r, -1.0)],
                Sense::Ge,
                0.0,
            )?;
            Some(r)
        } else {
            None
        });
    }
    let mut p_wind = Vec::new();
    for (j, w) in net.wind_farms.iter().enumerate() {
        p_wind.push(lp.add_named_variable(format!("pW_j{j}"), 0.0, w.capacity, 0.0)?);
    }
    let da_flows = add_flows(&mut lp, net, ("dDA", "fDA", "flowDA"), "", &full_limits(net))?;
    let mut da_balance = Vec::new();
    for (n, bus) in net.buses.iter().enumerate() {
        let mut terms: Vec<(VarId, f64)> = units_at(net, n).map(|i| (p[i], 1.0)).collect();
        terms.extend(farms_at(net, n).map(|j| (p_wind[j], 1.0)));
        terms.extend(flow_terms(net, n, &da_flows.flow, -1.0));
        da_balance.push(lp.add_named_constraint(
            format!("balDA_n{n}"),
            &terms,
            Sense::Eq,
            bus.demand,
        )?);
    }

    let mut recourse = Vec::with_capacity(scenarios.len());
    for w in 0..scenarios.len() {
        let prob = scenarios.probabilities()[w];
        let sfx = suffix(Some(w));
        let realized = scenarios.realization(w);
        let mut up = Vec::new();
        let mut down = Vec::new();
        for (i, u) in net.units.iter().enumerate() {
            up.push(match reserve_up[i] {
                Some(cap) => {
                    let r = lp.add_named_variable(
                        format!("rUP_i{i}{sfx}"),
                        0.0,
                        u.reserve_up_max,
                        prob * u.cost,
                    )?;
                    lp.add_named_constraint(
                        format!("limUP_i{i}{sfx}"),
                        &[(r, 1.0), (cap, -1.0)],
                        Sense::Le,
                        0.0,
                    )?;
                    Some(r)
                }
                None => None,
            });
            down.push(match reserve_down[i] {
                Some(cap) => {
                    let r = lp.add_named_variable(
                        format!("rDN_i{i}{sfx}"),
                        0.0,
                        u.reserve_down_max,
                        -prob * u.cost,
                    )?;
                    lp.add_named_constraint(
                        format!("limDN_i{i}{sfx}"),
                        &[(r, 1.0), (cap, -1.0)],
                        Sense::Le,
                        0.0,
                    )?;
                    Some(r)
                }
                None => None,
            });
        }
        let mut spill = Vec::new();
        for (j, &mw) in realized.iter().enumerate() {
            spill.push(if mw > 0.0 {
                Some(lp.add_named_variable(format!("spill_j{j}{sfx}"), 0.0, mw, 0.0)?)
            } else {
                None
            });
        }
        let mut shed = Vec::new();
        for (n, bus) in net.buses.iter().enumerate() {
            shed.push(if bus.demand > 0.0 {
                Some(lp.add_named_variable(
                    format!("shed_n{n}{sfx}"),
                    0.0,
                    bus.demand,
                    prob * net.voll,
                )?)
            } else {
                None
            });
        }
        let flows = add_flows(&mut lp, net, ("dRT", "fRT", "flowRT"), &sfx, &full_limits(net))?;
        for n in 0..net.buses.len() {
            let mut terms: Vec<(VarId, f64)> = Vec::new();
            for i in units_at(net, n) {
                if let Some(r) = up[i] {
                    terms.push((r, 1.0));
                }
                if let Some(r) = down[i] {
                    terms.push((r, -1.0));
                }
            }
            if let Some(s) = shed[n] {
                terms.push((s, 1.0));
            }
            let mut rhs = 0.0;
            for j in farms_at(net, n) {
                rhs -= realized[j];
                terms.push((p_wind[j], -1.0));
                if let Some(s) = spill[j] {
                    terms.push((s, -1.0));
                }
            }
            terms.extend(flow_terms(net, n, &da_flows.flow, 1.0));
            terms.extend(flow_terms(net, n, &flows.flow, -1.0));
            lp.add_named_constraint(format!("balRT_n{n}{sfx}"), &terms, Sense::Eq, rhs)?;
        }
        recourse.push(Recourse {
            up,
            down,
            spill,
            shed,
            flows,
        });
    }
    Ok(Model {
        lp,
        p,
        p_wind,
        reserve_up,
        reserve_down,
        da_flows,
        da_balance,
        recourse,
    })
}

/// The stochastic clearing LP without solving it.
pub fn stochastic_problem(net: &Network, scenarios: &ScenarioSet) -> Result<LpProblem, MarketError> {
    Ok(formulate(net, scenarios)?.lp)
}

fn unpack(net: &Network, scenarios: &ScenarioSet, m: &Model, sol: &LpSolution) -> MarketOutcome {
    let p = values(sol, &m.p);
    let energy_cost = net.units.iter().zip(&p).map(|(u, x)| u.cost * x).sum();
    let da = DaSchedule {
        p,
        p_wind: values(sol, &m.p_wind),
        angle: m.da_flows.angles(sol, net.buses.len()),
        flow: m.da_flows.flows(sol),
        prices: duals(sol, &m.da_balance),
        energy_cost,
    };
    let up = optional_values(sol, &m.reserve_up);
    let down = optional_values(sol, &m.reserve_down);
    let reserve_cost = net
        .units
        .iter()
        .enumerate()
        .map(|(i, u)| u.reserve_up_cost * up[i] + u.reserve_down_cost * down[i])
        .sum();
    let reserve = ReserveSchedule {
        up,
        down,
        allocation: ReserveAllocation::Pooled,
        cost: reserve_cost,
    };
    let balancing: Vec<BalancingOutcome> = m
        .recourse
        .iter()
        .map(|rc| {
            let r_up = optional_values(sol, &rc.up);
            let r_down = optional_values(sol, &rc.down);
            let shed = optional_values(sol, &rc.shed);
            let cost = net
                .units
                .iter()
                .enumerate()
                .map(|(i, u)| u.cost * (r_up[i] - r_down[i]))
                .sum::<f64>()
                + net.voll * shed.iter().sum::<f64>();
            BalancingOutcome {
                r_up,
                r_down,
                spill: optional_values(sol, &rc.spill),
                shed,
                angle: rc.flows.angles(sol, net.buses.len()),
                flow: rc.flows.flows(sol),
                cost,
            }
        })
        .collect();
    let probabilities = scenarios.probabilities().to_vec();
    let expected = balancing
        .iter()
        .zip(&probabilities)
        .map(|(b, q)| q * b.cost)
        .sum();
    let costs = CostBreakdown::new(da.energy_cost, reserve.cost, expected);
    MarketOutcome {
        design: Design::Stochastic,
        da,
        reserve,
        balancing,
        probabilities,
        costs,
    }
}

/// Solves the stochastic clearing on `scenarios`.
pub fn build_stochastic(net: &Network, scenarios: &ScenarioSet) -> Result<MarketOutcome, MarketError> {
    let model = formulate(net, scenarios)?;
    let sol = solve_stage(&model.lp, Stage::Stochastic)?;
    Ok(unpack(net, scenarios, &model, &sol))
}
