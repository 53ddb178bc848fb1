//! In-sample expected-cost evaluation of the market designs and the two
//! experiment sweeps: cost against wind penetration, and sequential-design
//! cost over a grid of tie capacity and transmission allocation X.

mod report;

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::markets::{
    build_stochastic, clear_det_coopt, clear_sequential, CostBreakdown, Design, MarketError,
    MarketOutcome,
};
use crate::system::{scale_wind_penetration, Network, SystemError};
use crate::uncertainty::{
    network_marginals, network_requirements, sample_scenarios, CopulaSpec, JointSample,
    ReserveRequirements, ScenarioSet, UncertaintyError,
};

pub use report::{write_report, ReportFiles};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Uncertainty(#[from] UncertaintyError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for EvalError {
    fn from(e: std::io::Error) -> Self {
        EvalError::Io(e.to_string())
    }
}

/// Everything that determines a design run besides the design itself.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunDigest {
    pub network: String,
    pub scenario_seed: Option<u64>,
    pub scenarios: usize,
    /// Per-line transmission allocation.
    pub x: Vec<f64>,
    /// Per-line capacity, MW.
    pub line_capacity: Vec<f64>,
    /// Installed wind over total demand.
    pub penetration: f64,
    /// SHA-256 over the fields above.
    pub hash: String,
}

impl RunDigest {
    pub fn new(network: &Network, scenarios: &ScenarioSet) -> Self {
        let demand = network.total_demand();
        let mut d = RunDigest {
            network: network.digest(),
            scenario_seed: scenarios.seed(),
            scenarios: scenarios.len(),
            x: network.lines.iter().map(|l| l.x_share).collect(),
            line_capacity: network.lines.iter().map(|l| l.f_max).collect(),
            penetration: if demand > 0.0 {
                network.total_wind_capacity() / demand
            } else {
                0.0
            },
            hash: String::new(),
        };
        let json = serde_json::to_vec(&d).expect("digest serializes");
        d.hash = hex::encode(Sha256::digest(&json));
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignRun {
    pub design: Design,
    pub digest: RunDigest,
    pub costs: CostBreakdown,
    /// Left out of serialized output so reports stay reproducible.
    #[serde(skip)]
    pub wall_ms: f64,
}

/// Requirements used by the deterministic designs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalParams {
    pub requirements: ReserveRequirements,
}

/// Runs one design's full market sequence on `scenarios`.
pub fn run_design(
    network: &Network,
    scenarios: &ScenarioSet,
    design: Design,
    params: &EvalParams,
) -> Result<MarketOutcome, MarketError> {
    let req = &params.requirements;
    if req.areas.len() != network.areas.len() {
        return Err(MarketError::InvalidInput(format!(
            "{} area requirements for {} areas",
            req.areas.len(),
            network.areas.len()
        )));
    }
    match design {
        Design::Stochastic => build_stochastic(network, scenarios),
        Design::DetCoopt => clear_det_coopt(network, scenarios, req.system),
        Design::Sequential => clear_sequential(network, scenarios, &req.areas),
    }
}

/// Expected cost of `design`, with balancing evaluated on the same scenarios
/// the design was cleared against.
pub fn evaluate_design(
    network: &Network,
    scenarios: &ScenarioSet,
    design: Design,
    params: &EvalParams,
) -> Result<DesignRun, MarketError> {
    let start = Instant::now();
    let outcome = run_design(network, scenarios, design, params)?;
    Ok(DesignRun {
        design,
        digest: RunDigest::new(network, scenarios),
        costs: outcome.costs,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Sampling and execution settings shared by the sweeps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSettings {
    pub seed: u64,
    pub scenarios: usize,
    /// Latent correlation between every pair of farms.
    pub rho: f64,
    /// Reliability level of the reserve requirements.
    pub xi: f64,
    /// Joint draws behind the empirical requirement quantiles.
    pub requirement_samples: usize,
    /// Wind capacity of the first area relative to each other area.
    pub area_ratio: f64,
    /// Worker threads; 0 uses one per core. Not serialized, since results
    /// do not depend on it.
    #[serde(skip)]
    pub workers: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            seed: 1,
            scenarios: 100,
            rho: 0.35,
            xi: 0.99,
            requirement_samples: 100_000,
            area_ratio: 2.0,
            workers: 0,
        }
    }
}

/// Scenario draws and the large joint sample, generated once per sweep and
/// rescaled to each installed capacity.
pub struct UncertaintyModel {
    scenarios: ScenarioSet,
    joint: JointSample,
    xi: f64,
}

impl UncertaintyModel {
    pub fn new(network: &Network, settings: &SweepSettings) -> Result<Self, EvalError> {
        let marginals = network_marginals(network)?;
        let copula = CopulaSpec::uniform(marginals.len(), settings.rho)?;
        let caps: Vec<f64> = network.wind_farms.iter().map(|w| w.capacity).collect();
        let scenarios = sample_scenarios(&marginals, &caps, &copula, settings.scenarios, settings.seed)?;
        let joint = JointSample::portfolio_draws(
            &marginals,
            &copula,
            settings.requirement_samples,
            settings.seed,
        )?;
        Ok(UncertaintyModel {
            scenarios,
            joint,
            xi: settings.xi,
        })
    }

    /// Scenarios and requirements at `network`'s installed wind capacities.
    pub fn at(&self, network: &Network) -> Result<(ScenarioSet, ReserveRequirements), EvalError> {
        let caps: Vec<f64> = network.wind_farms.iter().map(|w| w.capacity).collect();
        let ids = network.wind_farms.iter().map(|w| w.id.clone()).collect();
        let scenarios = self.scenarios.with_capacities(&caps)?.with_farm_ids(ids);
        let requirements = network_requirements(network, &self.joint, self.xi)?;
        Ok((scenarios, requirements))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepKind {
    #[serde(rename = "penetration")]
    Penetration,
    #[serde(rename = "x-capacity")]
    XCapacity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

/// One design evaluated at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub design: Design,
    /// Axis values, in the order of `SweepResult::axes`.
    pub point: Vec<f64>,
    /// Index of the point in each axis.
    pub index: Vec<usize>,
    pub run: Option<DesignRun>,
    /// Stage-labelled failure when the design could not be cleared.
    pub error: Option<String>,
}

impl SweepCell {
    /// Expected total cost, `+inf` for failed cells.
    pub fn total(&self) -> f64 {
        self.run.as_ref().map_or(f64::INFINITY, |r| r.costs.total)
    }
}

/// Least-cost X for one tie capacity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocusPoint {
    pub capacity: f64,
    pub x: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub axes: Vec<Axis>,
    pub designs: Vec<Design>,
    pub cells: Vec<SweepCell>,
    /// Only filled for the X-capacity sweep.
    pub locus: Vec<LocusPoint>,
    pub settings: SweepSettings,
    pub network_digest: String,
    /// SHA-256 of the case file bytes, when the network came from a file.
    pub case_sha256: Option<String>,
    /// Requirements per point of the first axis.
    pub requirements: Vec<ReserveRequirements>,
    pub wall_ms: f64,
}

impl SweepResult {
    pub fn cell(&self, design: Design, index: &[usize]) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.design == design && c.index == index)
    }

    pub fn failures(&self) -> impl Iterator<Item = &SweepCell> {
        self.cells.iter().filter(|c| c.run.is_none())
    }
}

/// Least-cost X per capacity from a capacity-major cost matrix. Ties go to
/// the smaller X and non-finite costs are skipped; a capacity with no
/// finite cost has no locus point.
pub fn least_cost_locus(capacity_grid: &[f64], x_grid: &[f64], totals: &[f64]) -> Vec<LocusPoint> {
    assert_eq!(totals.len(), capacity_grid.len() * x_grid.len(), "cost matrix shape");
    let mut locus = Vec::new();
    for (c, &capacity) in capacity_grid.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (k, &total) in totals[c * x_grid.len()..(c + 1) * x_grid.len()].iter().enumerate() {
            let better = match best {
                None => true,
                Some((bk, b)) => total < b || (total == b && x_grid[k] < x_grid[bk]),
            };
            if total.is_finite() && better {
                best = Some((k, total));
            }
        }
        if let Some((k, total)) = best {
            locus.push(LocusPoint {
                capacity,
                x: x_grid[k],
                total,
            });
        }
    }
    locus
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, EvalError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| EvalError::InvalidInput(format!("cannot start worker pool: {e}")))
}

fn run_cell(
    network: &Network,
    scenarios: &ScenarioSet,
    design: Design,
    params: &EvalParams,
    point: Vec<f64>,
    index: Vec<usize>,
) -> SweepCell {
    match evaluate_design(network, scenarios, design, params) {
        Ok(run) => SweepCell {
            design,
            point,
            index,
            run: Some(run),
            error: None,
        },
        Err(e) => SweepCell {
            design,
            point,
            index,
            run: None,
            error: Some(e.to_string()),
        },
    }
}

/// The default penetration grid 0, 0.05, ..., 0.65.
pub fn default_penetration_grid() -> Vec<f64> {
    (0..=13).map(|k| k as f64 / 20.0).collect()
}

/// Expected cost of each design as installed wind grows. Every point
/// reuses the same normalized draws, rescaled to its capacities.
pub fn sweep_penetration(
    network: &Network,
    designs: &[Design],
    grid: &[f64],
    settings: &SweepSettings,
) -> Result<SweepResult, EvalError> {
    if grid.is_empty() || grid.iter().any(|p| !(0.0..=0.7).contains(p)) {
        return Err(EvalError::InvalidInput(
            "penetration grid must be non-empty and within [0, 0.7]".into(),
        ));
    }
    if designs.is_empty() {
        return Err(EvalError::InvalidInput("at least one design is required".into()));
    }
    let start = Instant::now();
    let model = UncertaintyModel::new(network, settings)?;
    let mut points = Vec::with_capacity(grid.len());
    for &pen in grid {
        let net = scale_wind_penetration(network, pen, settings.area_ratio)?;
        let (scenarios, requirements) = model.at(&net)?;
        points.push((net, scenarios, requirements));
    }
    let jobs: Vec<(usize, Design)> = (0..grid.len())
        .flat_map(|k| designs.iter().map(move |&d| (k, d)))
        .collect();
    let cells = pool(settings.workers)?.install(|| {
        jobs.par_iter()
            .map(|&(k, design)| {
                let (net, scenarios, requirements) = &points[k];
                let params = EvalParams {
                    requirements: requirements.clone(),
                };
                run_cell(net, scenarios, design, &params, vec![grid[k]], vec![k])
            })
            .collect()
    });
    Ok(SweepResult {
        kind: SweepKind::Penetration,
        axes: vec![Axis {
            name: "penetration".into(),
            values: grid.to_vec(),
        }],
        designs: designs.to_vec(),
        cells,
        locus: Vec::new(),
        settings: settings.clone(),
        network_digest: network.digest(),
        case_sha256: None,
        requirements: points.into_iter().map(|p| p.2).collect(),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Sequential-design cost over tie capacity and X at one penetration, with
/// the least-cost X per capacity. Ties go to the smaller X; failed cells
/// count as `+inf`.
pub fn sweep_x_capacity(
    network: &Network,
    x_grid: &[f64],
    capacity_grid: &[f64],
    penetration: f64,
    settings: &SweepSettings,
) -> Result<SweepResult, EvalError> {
    if x_grid.is_empty() || x_grid.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(EvalError::InvalidInput("X grid must be non-empty and within [0, 1]".into()));
    }
    if capacity_grid.is_empty() || capacity_grid.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
        return Err(EvalError::InvalidInput("capacity grid must be non-empty and positive".into()));
    }
    let start = Instant::now();
    let scaled = scale_wind_penetration(network, penetration, settings.area_ratio)?;
    let model = UncertaintyModel::new(&scaled, settings)?;
    let (scenarios, requirements) = model.at(&scaled)?;
    let params = EvalParams {
        requirements: requirements.clone(),
    };
    let jobs: Vec<(usize, usize)> = (0..capacity_grid.len())
        .flat_map(|c| (0..x_grid.len()).map(move |x| (c, x)))
        .collect();
    let cells: Vec<SweepCell> = pool(settings.workers)?.install(|| {
        jobs.par_iter()
            .map(|&(c, x)| {
                let net = scaled.with_dc_capacity(capacity_grid[c]).with_x(x_grid[x]);
                run_cell(
                    &net,
                    &scenarios,
                    Design::Sequential,
                    &params,
                    vec![capacity_grid[c], x_grid[x]],
                    vec![c, x],
                )
            })
            .collect()
    });
    let totals: Vec<f64> = cells.iter().map(SweepCell::total).collect();
    let locus = least_cost_locus(capacity_grid, x_grid, &totals);
    Ok(SweepResult {
        kind: SweepKind::XCapacity,
        axes: vec![
            Axis {
                name: "capacity".into(),
                values: capacity_grid.to_vec(),
            },
            Axis {
                name: "x".into(),
                values: x_grid.to_vec(),
            },
        ],
        designs: vec![Design::Sequential],
        cells,
        locus,
        settings: settings.clone(),
        network_digest: network.digest(),
        case_sha256: None,
        requirements: vec![requirements],
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}
