//! Market-clearing models: stochastic co-optimization, deterministic
//! energy/reserve co-optimization, and sequential reserve-then-energy
//! clearing, each followed by real-time balancing.
//!
//! LP names encode symbol, index and scenario, e.g. `rUP_i3_w17` is the up
//! regulation of unit 3 in scenario 17. See `docs/lp-names.md`.

mod deterministic;
mod network;
mod stochastic;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::lp::{LpError, LpProblem, LpSolution, LpStatus};
use crate::system::Network;
use crate::uncertainty::{conditional_mean_forecast, BetaMarginal, Requirement, ScenarioSet};

pub use deterministic::{
    balancing_problem, build_balancing, build_det_cooptimization, build_energy_only_da,
    build_reserve_capacity_market, det_cooptimization_problem, energy_only_da_problem,
    reserve_capacity_problem,
};
pub use stochastic::{build_stochastic, stochastic_problem};

/// Market design under study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Design {
    #[serde(rename = "stochastic")]
    Stochastic,
    #[serde(rename = "det-coopt")]
    DetCoopt,
    #[serde(rename = "sequential")]
    Sequential,
}

impl Design {
    pub const ALL: [Design; 3] = [Design::Stochastic, Design::DetCoopt, Design::Sequential];

    pub fn name(self) -> &'static str {
        match self {
            Design::Stochastic => "stochastic",
            Design::DetCoopt => "det-coopt",
            Design::Sequential => "sequential",
        }
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Design {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stochastic" => Ok(Design::Stochastic),
            "det-coopt" => Ok(Design::DetCoopt),
            "sequential" => Ok(Design::Sequential),
            _ => Err(format!(
                "unknown design `{s}` (expected stochastic, det-coopt or sequential)"
            )),
        }
    }
}

/// Which LP a failure came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stage {
    Stochastic,
    DayAhead,
    ReserveMarket,
    EnergyOnlyDayAhead,
    Balancing,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Stochastic => "stochastic clearing",
            Stage::DayAhead => "day-ahead energy and reserve",
            Stage::ReserveMarket => "reserve capacity market",
            Stage::EnergyOnlyDayAhead => "energy-only day-ahead",
            Stage::Balancing => "balancing",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Up,
    Down,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Up => "up",
            Direction::Down => "down",
        })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MarketError {
    #[error("{stage}: {direction} reserve requirement {required} MW for {scope} cannot be met ({available} MW available; binding: {cause})")]
    InfeasibleRequirements {
        stage: Stage,
        scope: String,
        direction: Direction,
        required: f64,
        available: f64,
        cause: String,
    },
    #[error("{stage}: problem is infeasible{}", detail_suffix(.detail))]
    Infeasible { stage: Stage, detail: String },
    #[error("{stage}: solver reported an unbounded problem")]
    Unbounded { stage: Stage },
    #[error("{stage}: solver failed: {source}")]
    SolverFailed { stage: Stage, source: LpError },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

fn detail_suffix(d: &str) -> String {
    if d.is_empty() {
        String::new()
    } else {
        format!(" ({d})")
    }
}

impl MarketError {
    pub fn stage(&self) -> Option<Stage> {
        match self {
            MarketError::InfeasibleRequirements { stage, .. }
            | MarketError::Infeasible { stage, .. }
            | MarketError::Unbounded { stage }
            | MarketError::SolverFailed { stage, .. } => Some(*stage),
            MarketError::InvalidInput(_) => None,
        }
    }
}

pub(crate) fn solve_stage(lp: &LpProblem, stage: Stage) -> Result<LpSolution, MarketError> {
    let sol = lp
        .solve()
        .map_err(|source| MarketError::SolverFailed { stage, source })?;
    match sol.status {
        LpStatus::Optimal => Ok(sol),
        LpStatus::Infeasible => Err(MarketError::Infeasible {
            stage,
            detail: String::new(),
        }),
        LpStatus::Unbounded => Err(MarketError::Unbounded { stage }),
    }
}

/// Day-ahead energy schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DaSchedule {
    /// MW per dispatchable unit.
    pub p: Vec<f64>,
    /// MW per wind farm.
    pub p_wind: Vec<f64>,
    /// Voltage angle per bus (zero everywhere on networks without AC lines).
    pub angle: Vec<f64>,
    /// MW per line, signed by line orientation.
    pub flow: Vec<f64>,
    /// Duals of the nodal balance rows, $/MWh.
    pub prices: Vec<f64>,
    /// Sum of energy offers times dispatch, $.
    pub energy_cost: f64,
}

/// Cross-border reserve procured for `area` from units in `provider_area`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossBorderUse {
    pub area: usize,
    pub provider_area: usize,
    /// Sum of X times f_max over the lines joining the two areas, MW.
    pub limit: f64,
    pub up: f64,
    pub down: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ReserveAllocation {
    /// One pool of reserve per unit.
    Pooled,
    /// Reserve per unit and per area served, `[unit][area]`.
    ByArea {
        up: Vec<Vec<f64>>,
        down: Vec<Vec<f64>>,
        cross_border: Vec<CrossBorderUse>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReserveSchedule {
    /// Total up reserve per unit, MW.
    pub up: Vec<f64>,
    /// Total down reserve per unit, MW.
    pub down: Vec<f64>,
    pub allocation: ReserveAllocation,
    /// Capacity payments, $.
    pub cost: f64,
}

impl ReserveSchedule {
    pub fn none(units: usize) -> Self {
        ReserveSchedule {
            up: vec![0.0; units],
            down: vec![0.0; units],
            allocation: ReserveAllocation::Pooled,
            cost: 0.0,
        }
    }
}

/// Real-time redispatch for one wind realization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalancingOutcome {
    pub r_up: Vec<f64>,
    pub r_down: Vec<f64>,
    pub spill: Vec<f64>,
    pub shed: Vec<f64>,
    pub angle: Vec<f64>,
    pub flow: Vec<f64>,
    /// Regulation at energy offers plus shedding at VOLL; negative when
    /// down-regulation dominates.
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CostBreakdown {
    pub da_energy: f64,
    pub reserve_capacity: f64,
    pub expected_balancing: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(da_energy: f64, reserve_capacity: f64, expected_balancing: f64) -> Self {
        CostBreakdown {
            da_energy,
            reserve_capacity,
            expected_balancing,
            total: da_energy + reserve_capacity + expected_balancing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketOutcome {
    pub design: Design,
    pub da: DaSchedule,
    pub reserve: ReserveSchedule,
    pub balancing: Vec<BalancingOutcome>,
    pub probabilities: Vec<f64>,
    pub costs: CostBreakdown,
}

/// Mean wind forecast of every farm at its installed capacity.
pub fn mean_forecast(network: &Network) -> Result<Vec<f64>, MarketError> {
    network
        .wind_farms
        .iter()
        .map(|w| {
            BetaMarginal::new(w.alpha, w.beta)
                .map(|m| conditional_mean_forecast(&m, w.capacity))
                .map_err(|e| MarketError::InvalidInput(e.to_string()))
        })
        .collect()
}

fn check_scenarios(network: &Network, scenarios: &ScenarioSet) -> Result<(), MarketError> {
    if scenarios.is_empty() {
        return Err(MarketError::InvalidInput("at least one scenario is required".into()));
    }
    if scenarios.capacities().len() != network.wind_farms.len() {
        return Err(MarketError::InvalidInput(format!(
            "scenario set has {} farms, network has {}",
            scenarios.capacities().len(),
            network.wind_farms.len()
        )));
    }
    Ok(())
}

fn balance_all(
    network: &Network,
    da: &DaSchedule,
    reserve: &ReserveSchedule,
    scenarios: &ScenarioSet,
) -> Result<Vec<BalancingOutcome>, MarketError> {
    (0..scenarios.len())
        .into_par_iter()
        .map(|w| build_balancing(network, da, reserve, &scenarios.realization(w)))
        .collect()
}

fn assemble(
    design: Design,
    da: DaSchedule,
    reserve: ReserveSchedule,
    balancing: Vec<BalancingOutcome>,
    scenarios: &ScenarioSet,
) -> MarketOutcome {
    let probabilities = scenarios.probabilities().to_vec();
    let expected: f64 = balancing
        .iter()
        .zip(&probabilities)
        .map(|(b, p)| p * b.cost)
        .sum();
    let costs = CostBreakdown::new(da.energy_cost, reserve.cost, expected);
    MarketOutcome {
        design,
        da,
        reserve,
        balancing,
        probabilities,
        costs,
    }
}

/// Co-optimized day-ahead clearing against the mean forecast and a
/// system-wide requirement, then balancing in every scenario.
pub fn clear_det_coopt(
    network: &Network,
    scenarios: &ScenarioSet,
    requirement: Requirement,
) -> Result<MarketOutcome, MarketError> {
    check_scenarios(network, scenarios)?;
    let forecast = mean_forecast(network)?;
    let (da, reserve) = build_det_cooptimization(network, requirement, &forecast)?;
    let balancing = balance_all(network, &da, &reserve, scenarios)?;
    Ok(assemble(Design::DetCoopt, da, reserve, balancing, scenarios))
}

/// Reserve capacity market with per-area requirements, energy-only
/// day-ahead market on the remaining transfer capacity, then balancing.
/// Uses each line's `x_share`.
pub fn clear_sequential(
    network: &Network,
    scenarios: &ScenarioSet,
    area_requirements: &[Requirement],
) -> Result<MarketOutcome, MarketError> {
    check_scenarios(network, scenarios)?;
    let x: Vec<f64> = network.lines.iter().map(|l| l.x_share).collect();
    let forecast = mean_forecast(network)?;
    let reserve = build_reserve_capacity_market(network, area_requirements, &x)?;
    let da = build_energy_only_da(network, &reserve, &x, &forecast)?;
    let balancing = balance_all(network, &da, &reserve, scenarios)?;
    Ok(assemble(Design::Sequential, da, reserve, balancing, scenarios))
}

/// The LPs a design solves, named by stage, for export. Earlier stages are
/// solved to fix the inputs of later ones; balancing is built for
/// scenario 0 only.
pub fn design_problems(
    network: &Network,
    scenarios: &ScenarioSet,
    design: Design,
    system_requirement: Requirement,
    area_requirements: &[Requirement],
) -> Result<Vec<(&'static str, LpProblem)>, MarketError> {
    check_scenarios(network, scenarios)?;
    if scenarios.is_empty() {
        return Err(MarketError::InvalidInput("no scenarios".into()));
    }
    let forecast = mean_forecast(network)?;
    let sample = scenarios.realization(0);
    match design {
        Design::Stochastic => Ok(vec![("stochastic", stochastic_problem(network, scenarios)?)]),
        Design::DetCoopt => {
            let da_lp = det_cooptimization_problem(network, system_requirement, &forecast)?;
            let (da, reserve) = build_det_cooptimization(network, system_requirement, &forecast)?;
            let bal = balancing_problem(network, &da, &reserve, &sample)?;
            Ok(vec![("day_ahead", da_lp), ("balancing_w0", bal)])
        }
        Design::Sequential => {
            let x: Vec<f64> = network.lines.iter().map(|l| l.x_share).collect();
            let res_lp = reserve_capacity_problem(network, area_requirements, &x)?;
            let reserve = build_reserve_capacity_market(network, area_requirements, &x)?;
            let da_lp = energy_only_da_problem(network, &reserve, &x, &forecast)?;
            let da = build_energy_only_da(network, &reserve, &x, &forecast)?;
            let bal = balancing_problem(network, &da, &reserve, &sample)?;
            Ok(vec![("reserve", res_lp), ("day_ahead", da_lp), ("balancing_w0", bal)])
        }
    }
}

#[cfg(test)]
mod tests;
