//! Deterministic stages: co-optimized day-ahead energy and reserve, the
//! reserve capacity market, the energy-only day-ahead market and the
//! real-time balancing market.

use crate::lp::{ConstraintId, LpError, LpProblem, LpSolution, Sense, VarId};
use crate::system::Network;
use crate::uncertainty::Requirement;

use super::network::{
    add_flows, duals, farms_at, flow_sum, flow_terms, full_limits, optional_values, units_at,
    values, FlowVars,
};
use super::{
    solve_stage, BalancingOutcome, CrossBorderUse, DaSchedule, Direction, MarketError,
    ReserveAllocation, ReserveSchedule, Stage,
};

fn lp_err(stage: Stage) -> impl Fn(LpError) -> MarketError {
    move |source| MarketError::SolverFailed { stage, source }
}

/// Slack allowed when comparing a requirement with what is on offer.
fn short_of(required: f64, available: f64) -> bool {
    required - available > 1e-9 * required.abs().max(1.0)
}

fn check_forecast(net: &Network, forecast: &[f64]) -> Result<(), MarketError> {
    if forecast.len() != net.wind_farms.len() {
        return Err(MarketError::InvalidInput(format!(
            "forecast has {} entries, network has {} wind farms",
            forecast.len(),
            net.wind_farms.len()
        )));
    }
    if let Some(v) = forecast.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(MarketError::InvalidInput(format!("wind forecast {v} must be >= 0")));
    }
    Ok(())
}

struct DaModel {
    lp: LpProblem,
    p: Vec<VarId>,
    p_wind: Vec<VarId>,
    flows: FlowVars,
    balance: Vec<ConstraintId>,
}

/// Energy part shared by both day-ahead formulations.
fn da_energy(
    lp: &mut LpProblem,
    net: &Network,
    p_bounds: &[(f64, f64)],
    forecast: &[f64],
    limits: &[f64],
) -> Result<(Vec<VarId>, Vec<VarId>, FlowVars, Vec<ConstraintId>), LpError> {
    let mut p = Vec::new();
    for (i, (u, &(lo, up))) in net.units.iter().zip(p_bounds).enumerate() {
        p.push(lp.add_named_variable(format!("p_i{i}"), lo, up, u.cost)?);
    }
    let mut p_wind = Vec::new();
    for (j, &f) in forecast.iter().enumerate() {
        p_wind.push(lp.add_named_variable(format!("pW_j{j}"), 0.0, f, 0.0)?);
    }
    let flows = add_flows(lp, net, ("dDA", "fDA", "flowDA"), "", limits)?;
    let mut balance = Vec::new();
    for (n, bus) in net.buses.iter().enumerate() {
        let mut terms: Vec<(VarId, f64)> = units_at(net, n).map(|i| (p[i], 1.0)).collect();
        terms.extend(farms_at(net, n).map(|j| (p_wind[j], 1.0)));
        terms.extend(flow_terms(net, n, &flows.flow, -1.0));
        balance.push(lp.add_named_constraint(
            format!("balDA_n{n}"),
            &terms,
            Sense::Eq,
            bus.demand,
        )?);
    }
    Ok((p, p_wind, flows, balance))
}

fn da_schedule(net: &Network, m: &DaModel, sol: &LpSolution) -> DaSchedule {
    let p = values(sol, &m.p);
    let energy_cost = net.units.iter().zip(&p).map(|(u, x)| u.cost * x).sum();
    DaSchedule {
        p,
        p_wind: values(sol, &m.p_wind),
        angle: m.flows.angles(sol, net.buses.len()),
        flow: m.flows.flows(sol),
        prices: duals(sol, &m.balance),
        energy_cost,
    }
}

struct CooptModel {
    da: DaModel,
    up: Vec<Option<VarId>>,
    down: Vec<Option<VarId>>,
}

fn formulate_coopt(
    net: &Network,
    requirement: Requirement,
    forecast: &[f64],
) -> Result<CooptModel, MarketError> {
    check_forecast(net, forecast)?;
    let stage = Stage::DayAhead;
    let offers = [
        (Direction::Up, requirement.up, net.units.iter().map(|u| u.reserve_up_max).sum::<f64>()),
        (
            Direction::Down,
            requirement.down,
            net.units.iter().map(|u| u.reserve_down_max).sum::<f64>(),
        ),
    ];
    for (direction, required, available) in offers {
        if short_of(required, available) {
            return Err(MarketError::InfeasibleRequirements {
                stage,
                scope: "the system".into(),
                direction,
                required,
                available,
                cause: "unit reserve offers".into(),
            });
        }
    }
    let build = || -> Result<CooptModel, LpError> {
        let mut lp = LpProblem::new(format!("det_coopt_{}", net.name));
        let bounds: Vec<(f64, f64)> = net.units.iter().map(|u| (0.0, u.p_max)).collect();
        let (p, p_wind, flows, balance) =
            da_energy(&mut lp, net, &bounds, forecast, &full_limits(net))?;
        let mut up = Vec::new();
        let mut down = Vec::new();
        for (i, u) in net.units.iter().enumerate() {
            up.push(if u.reserve_up_max > 0.0 {
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
            down.push(if u.reserve_down_max > 0.0 {
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
        let up_terms: Vec<(VarId, f64)> = up.iter().flatten().map(|&v| (v, 1.0)).collect();
        let down_terms: Vec<(VarId, f64)> = down.iter().flatten().map(|&v| (v, 1.0)).collect();
        lp.add_named_constraint("reqUP", &up_terms, Sense::Ge, requirement.up)?;
        lp.add_named_constraint("reqDN", &down_terms, Sense::Ge, requirement.down)?;
        Ok(CooptModel {
            da: DaModel {
                lp,
                p,
                p_wind,
                flows,
                balance,
            },
            up,
            down,
        })
    };
    build().map_err(lp_err(stage))
}

/// The day-ahead co-optimization LP without solving it.
pub fn det_cooptimization_problem(
    net: &Network,
    requirement: Requirement,
    forecast: &[f64],
) -> Result<LpProblem, MarketError> {
    Ok(formulate_coopt(net, requirement, forecast)?.da.lp)
}

/// Day-ahead energy and reserve cleared together against a point forecast
/// and a system-wide requirement.
pub fn build_det_cooptimization(
    net: &Network,
    requirement: Requirement,
    forecast: &[f64],
) -> Result<(DaSchedule, ReserveSchedule), MarketError> {
    let m = formulate_coopt(net, requirement, forecast)?;
    let sol = solve_stage(&m.da.lp, Stage::DayAhead).map_err(|e| match e {
        MarketError::Infeasible { stage, .. } => MarketError::Infeasible {
            stage,
            detail: "demand and reserve requirements exceed joint unit capacity or transfer limits"
                .into(),
        },
        other => other,
    })?;
    let da = da_schedule(net, &m.da, &sol);
    let up = optional_values(&sol, &m.up);
    let down = optional_values(&sol, &m.down);
    let cost = net
        .units
        .iter()
        .enumerate()
        .map(|(i, u)| u.reserve_up_cost * up[i] + u.reserve_down_cost * down[i])
        .sum();
    Ok((
        da,
        ReserveSchedule {
            up,
            down,
            allocation: ReserveAllocation::Pooled,
            cost,
        },
    ))
}

struct ReserveModel {
    lp: LpProblem,
    /// `[unit][area]`, present for units offering in that direction.
    up: Vec<Vec<Option<VarId>>>,
    down: Vec<Vec<Option<VarId>>>,
    /// `(area, provider_area, limit)` for every ordered pair of areas.
    pairs: Vec<(usize, usize, f64)>,
}

fn check_x(net: &Network, x: &[f64]) -> Result<(), MarketError> {
    if x.len() != net.lines.len() {
        return Err(MarketError::InvalidInput(format!(
            "{} X values given for {} lines",
            x.len(),
            net.lines.len()
        )));
    }
    if let Some(v) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(MarketError::InvalidInput(format!("X = {v} must lie in [0, 1]")));
    }
    Ok(())
}

/// Sum of X times f_max over the lines joining areas `a` and `b`.
fn transfer_limit(net: &Network, x: &[f64], a: usize, b: usize) -> f64 {
    net.lines_between(a, b).into_iter().map(|l| x[l] * net.lines[l].f_max).sum()
}

/// Explains which limit makes an area requirement unattainable.
fn diagnose_areas(
    net: &Network,
    requirements: &[Requirement],
    x: &[f64],
) -> Result<(), MarketError> {
    let areas = net.areas.len();
    for direction in [Direction::Up, Direction::Down] {
        let offer = |i: usize| match direction {
            Direction::Up => net.units[i].reserve_up_max,
            Direction::Down => net.units[i].reserve_down_max,
        };
        let mut pool = vec![0.0; areas];
        for i in 0..net.units.len() {
            pool[net.unit_area(i)] += offer(i);
        }
        let mut system_required = 0.0;
        for a in 0..areas {
            let required = match direction {
                Direction::Up => requirements[a].up,
                Direction::Down => requirements[a].down,
            };
            system_required += required;
            let mut reachable = pool[a];
            let mut unconstrained = pool[a];
            for b in (0..areas).filter(|&b| b != a) {
                reachable += pool[b].min(transfer_limit(net, x, a, b));
                unconstrained += pool[b];
            }
            if short_of(required, reachable) {
                let cause = if short_of(required, unconstrained) {
                    "unit reserve offers"
                } else {
                    "cross-border allocation X*f_max"
                };
                return Err(MarketError::InfeasibleRequirements {
                    stage: Stage::ReserveMarket,
                    scope: format!("area {}", net.areas[a].id),
                    direction,
                    required,
                    available: reachable,
                    cause: cause.into(),
                });
            }
        }
        let total: f64 = pool.iter().sum();
        if short_of(system_required, total) {
            return Err(MarketError::InfeasibleRequirements {
                stage: Stage::ReserveMarket,
                scope: "all areas together".into(),
                direction,
                required: system_required,
                available: total,
                cause: "unit reserve offers".into(),
            });
        }
    }
    Ok(())
}

fn formulate_reserve(
    net: &Network,
    requirements: &[Requirement],
    x: &[f64],
) -> Result<ReserveModel, MarketError> {
    if requirements.len() != net.areas.len() {
        return Err(MarketError::InvalidInput(format!(
            "{} area requirements given for {} areas",
            requirements.len(),
            net.areas.len()
        )));
    }
    check_x(net, x)?;
    diagnose_areas(net, requirements, x)?;
    let areas = net.areas.len();
    let build = || -> Result<ReserveModel, LpError> {
        let mut lp = LpProblem::new(format!("reserve_market_{}", net.name));
        let mut up = Vec::new();
        let mut down = Vec::new();
        for (i, u) in net.units.iter().enumerate() {
            let mut row_up = Vec::new();
            let mut row_down = Vec::new();
            for a in 0..areas {
                row_up.push(if u.reserve_up_max > 0.0 {
                    Some(lp.add_named_variable(
                        format!("RUP_i{i}_a{a}"),
                        0.0,
                        u.reserve_up_max,
                        u.reserve_up_cost,
                    )?)
                } else {
                    None
                });
                row_down.push(if u.reserve_down_max > 0.0 {
                    Some(lp.add_named_variable(
                        format!("RDN_i{i}_a{a}"),
                        0.0,
                        u.reserve_down_max,
                        u.reserve_down_cost,
                    )?)
                } else {
                    None
                });
            }
            let ups: Vec<(VarId, f64)> = row_up.iter().flatten().map(|&v| (v, 1.0)).collect();
            let downs: Vec<(VarId, f64)> = row_down.iter().flatten().map(|&v| (v, 1.0)).collect();
            if !ups.is_empty() {
                lp.add_named_constraint(format!("sumUP_i{i}"), &ups, Sense::Le, u.reserve_up_max)?;
            }
            if !downs.is_empty() {
                lp.add_named_constraint(
                    format!("sumDN_i{i}"),
                    &downs,
                    Sense::Le,
                    u.reserve_down_max,
                )?;
            }
            if !ups.is_empty() && !downs.is_empty() {
                let both: Vec<(VarId, f64)> = ups.iter().chain(&downs).copied().collect();
                lp.add_named_constraint(format!("sumRR_i{i}"), &both, Sense::Le, u.p_max)?;
            }
            up.push(row_up);
            down.push(row_down);
        }
        for (a, req) in requirements.iter().enumerate() {
            let ups: Vec<(VarId, f64)> = up.iter().filter_map(|r| r[a]).map(|v| (v, 1.0)).collect();
            let downs: Vec<(VarId, f64)> =
                down.iter().filter_map(|r| r[a]).map(|v| (v, 1.0)).collect();
            lp.add_named_constraint(format!("reqUP_a{a}"), &ups, Sense::Ge, req.up)?;
            lp.add_named_constraint(format!("reqDN_a{a}"), &downs, Sense::Ge, req.down)?;
        }
        let mut pairs = Vec::new();
        for a in 0..areas {
            for b in (0..areas).filter(|&b| b != a) {
                let limit = transfer_limit(net, x, a, b);
                pairs.push((a, b, limit));
                let providers: Vec<usize> =
                    (0..net.units.len()).filter(|&i| net.unit_area(i) == b).collect();
                let ups: Vec<(VarId, f64)> =
                    providers.iter().filter_map(|&i| up[i][a]).map(|v| (v, 1.0)).collect();
                let downs: Vec<(VarId, f64)> =
                    providers.iter().filter_map(|&i| down[i][a]).map(|v| (v, 1.0)).collect();
                if !ups.is_empty() {
                    lp.add_named_constraint(format!("xbUP_a{a}_b{b}"), &ups, Sense::Le, limit)?;
                }
                if !downs.is_empty() {
                    lp.add_named_constraint(format!("xbDN_a{a}_b{b}"), &downs, Sense::Le, limit)?;
                }
            }
        }
        Ok(ReserveModel {
            lp,
            up,
            down,
            pairs,
        })
    };
    build().map_err(lp_err(Stage::ReserveMarket))
}

/// The reserve capacity market LP without solving it.
pub fn reserve_capacity_problem(
    net: &Network,
    area_requirements: &[Requirement],
    x: &[f64],
) -> Result<LpProblem, MarketError> {
    Ok(formulate_reserve(net, area_requirements, x)?.lp)
}

/// Procures each area's requirement, letting units of another area
/// contribute up to `x[l] * f_max` summed over the lines in between.
pub fn build_reserve_capacity_market(
    net: &Network,
    area_requirements: &[Requirement],
    x: &[f64],
) -> Result<ReserveSchedule, MarketError> {
    let m = formulate_reserve(net, area_requirements, x)?;
    let sol = solve_stage(&m.lp, Stage::ReserveMarket).map_err(|e| match e {
        MarketError::Infeasible { stage, .. } => MarketError::Infeasible {
            stage,
            detail: "joint up and down offers exceed unit capacity".into(),
        },
        other => other,
    })?;
    let by_area = |vars: &Vec<Vec<Option<VarId>>>| -> Vec<Vec<f64>> {
        vars.iter().map(|row| optional_values(&sol, row)).collect()
    };
    let up_alloc = by_area(&m.up);
    let down_alloc = by_area(&m.down);
    let up: Vec<f64> = up_alloc.iter().map(|r| r.iter().sum()).collect();
    let down: Vec<f64> = down_alloc.iter().map(|r| r.iter().sum()).collect();
    let cost = net
        .units
        .iter()
        .enumerate()
        .map(|(i, u)| u.reserve_up_cost * up[i] + u.reserve_down_cost * down[i])
        .sum();
    let cross_border = m
        .pairs
        .iter()
        .map(|&(a, b, limit)| {
            let from_b = |alloc: &Vec<Vec<f64>>| -> f64 {
                (0..net.units.len())
                    .filter(|&i| net.unit_area(i) == b)
                    .map(|i| alloc[i][a])
                    .sum()
            };
            CrossBorderUse {
                area: a,
                provider_area: b,
                limit,
                up: from_b(&up_alloc),
                down: from_b(&down_alloc),
            }
        })
        .collect();
    Ok(ReserveSchedule {
        up,
        down,
        allocation: ReserveAllocation::ByArea {
            up: up_alloc,
            down: down_alloc,
            cross_border,
        },
        cost,
    })
}

fn formulate_energy_only(
    net: &Network,
    reserve: &ReserveSchedule,
    x: &[f64],
    forecast: &[f64],
) -> Result<DaModel, MarketError> {
    check_forecast(net, forecast)?;
    check_x(net, x)?;
    check_reserve(net, reserve)?;
    let bounds: Vec<(f64, f64)> = net
        .units
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let up = (u.p_max - reserve.up[i]).max(0.0);
            (reserve.down[i].min(up), up)
        })
        .collect();
    let limits: Vec<f64> = net
        .lines
        .iter()
        .zip(x)
        .map(|(l, xl)| (1.0 - xl) * l.f_max)
        .collect();
    let mut lp = LpProblem::new(format!("energy_only_da_{}", net.name));
    let (p, p_wind, flows, balance) = da_energy(&mut lp, net, &bounds, forecast, &limits)
        .map_err(lp_err(Stage::EnergyOnlyDayAhead))?;
    Ok(DaModel {
        lp,
        p,
        p_wind,
        flows,
        balance,
    })
}

fn check_reserve(net: &Network, reserve: &ReserveSchedule) -> Result<(), MarketError> {
    if reserve.up.len() != net.units.len() || reserve.down.len() != net.units.len() {
        return Err(MarketError::InvalidInput(format!(
            "reserve schedule covers {} units, network has {}",
            reserve.up.len(),
            net.units.len()
        )));
    }
    Ok(())
}

/// The energy-only day-ahead LP without solving it.
pub fn energy_only_da_problem(
    net: &Network,
    reserve: &ReserveSchedule,
    x: &[f64],
    forecast: &[f64],
) -> Result<LpProblem, MarketError> {
    Ok(formulate_energy_only(net, reserve, x, forecast)?.lp)
}

/// Energy dispatch around procured reserve, on the transfer capacity left
/// after the `x` share set aside for reserve exchange.
pub fn build_energy_only_da(
    net: &Network,
    reserve: &ReserveSchedule,
    x: &[f64],
    forecast: &[f64],
) -> Result<DaSchedule, MarketError> {
    let m = formulate_energy_only(net, reserve, x, forecast)?;
    let sol = solve_stage(&m.lp, Stage::EnergyOnlyDayAhead).map_err(|e| match e {
        MarketError::Infeasible { stage, .. } => MarketError::Infeasible {
            stage,
            detail: "demand cannot be served within the capacity left after reserve and the transfer capacity left after X".into(),
        },
        other => other,
    })?;
    Ok(da_schedule(net, &m, &sol))
}

struct BalancingModel {
    lp: LpProblem,
    up: Vec<Option<VarId>>,
    down: Vec<Option<VarId>>,
    spill: Vec<Option<VarId>>,
    shed: Vec<Option<VarId>>,
    flows: FlowVars,
}

fn formulate_balancing(
    net: &Network,
    da: &DaSchedule,
    reserve: &ReserveSchedule,
    realization: &[f64],
) -> Result<BalancingModel, MarketError> {
    check_reserve(net, reserve)?;
    if realization.len() != net.wind_farms.len() || da.p_wind.len() != net.wind_farms.len() {
        return Err(MarketError::InvalidInput(format!(
            "wind vectors do not match the {} farms of the network",
            net.wind_farms.len()
        )));
    }
    if da.flow.len() != net.lines.len() {
        return Err(MarketError::InvalidInput("day-ahead flows do not match the lines".into()));
    }
    let build = || -> Result<BalancingModel, LpError> {
        let mut lp = LpProblem::new(format!("balancing_{}", net.name));
        let mut up = Vec::new();
        let mut down = Vec::new();
        for (i, u) in net.units.iter().enumerate() {
            let r_up = reserve.up[i].max(0.0);
            let r_down = reserve.down[i].max(0.0);
            up.push(if r_up > 0.0 {
                Some(lp.add_named_variable(format!("rUP_i{i}"), 0.0, r_up, u.cost)?)
            } else {
                None
            });
            down.push(if r_down > 0.0 {
                Some(lp.add_named_variable(format!("rDN_i{i}"), 0.0, r_down, -u.cost)?)
            } else {
                None
            });
        }
        let mut spill = Vec::new();
        for (j, &mw) in realization.iter().enumerate() {
            spill.push(if mw > 0.0 {
                Some(lp.add_named_variable(format!("spill_j{j}"), 0.0, mw, 0.0)?)
            } else {
                None
            });
        }
        let mut shed = Vec::new();
        for (n, bus) in net.buses.iter().enumerate() {
            shed.push(if bus.demand > 0.0 {
                Some(lp.add_named_variable(format!("shed_n{n}"), 0.0, bus.demand, net.voll)?)
            } else {
                None
            });
        }
        let flows = add_flows(&mut lp, net, ("dRT", "fRT", "flowRT"), "", &full_limits(net))?;
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
            let mut rhs = -flow_sum(net, n, &da.flow);
            for j in farms_at(net, n) {
                rhs += da.p_wind[j] - realization[j];
                if let Some(s) = spill[j] {
                    terms.push((s, -1.0));
                }
            }
            terms.extend(flow_terms(net, n, &flows.flow, -1.0));
            lp.add_named_constraint(format!("balRT_n{n}"), &terms, Sense::Eq, rhs)?;
        }
        Ok(BalancingModel {
            lp,
            up,
            down,
            spill,
            shed,
            flows,
        })
    };
    build().map_err(lp_err(Stage::Balancing))
}

/// The balancing LP for one realization without solving it.
pub fn balancing_problem(
    net: &Network,
    da: &DaSchedule,
    reserve: &ReserveSchedule,
    realization: &[f64],
) -> Result<LpProblem, MarketError> {
    Ok(formulate_balancing(net, da, reserve, realization)?.lp)
}

/// Real-time redispatch within the procured reserve after wind output
/// `realization` (MW per farm) is observed.
pub fn build_balancing(
    net: &Network,
    da: &DaSchedule,
    reserve: &ReserveSchedule,
    realization: &[f64],
) -> Result<BalancingOutcome, MarketError> {
    let m = formulate_balancing(net, da, reserve, realization)?;
    let sol = solve_stage(&m.lp, Stage::Balancing)?;
    let r_up = optional_values(&sol, &m.up);
    let r_down = optional_values(&sol, &m.down);
    let shed = optional_values(&sol, &m.shed);
    let cost = net
        .units
        .iter()
        .enumerate()
        .map(|(i, u)| u.cost * (r_up[i] - r_down[i]))
        .sum::<f64>()
        + net.voll * shed.iter().sum::<f64>();
    Ok(BalancingOutcome {
        r_up,
        r_down,
        spill: optional_values(&sol, &m.spill),
        shed,
        angle: m.flows.angles(&sol, net.buses.len()),
        flow: m.flows.flows(&sol),
        cost,
    })
}
