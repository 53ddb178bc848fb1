//! Wind-power uncertainty: Beta marginals, a Gaussian copula for spatial
//! dependence, scenario sets and quantile-based reserve requirements.

mod sampling;
mod special;

use serde::Serialize;
use thiserror::Error;

use crate::system::Network;

pub use sampling::{
    portfolio_cdf, sample_scenarios, CopulaSpec, EmpiricalCdf, JointSample, ScenarioSet,
};
pub use special::{std_normal_cdf, std_normal_inv};

#[derive(Debug, Error, PartialEq)]
pub enum UncertaintyError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("correlation matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for UncertaintyError {
    fn from(e: std::io::Error) -> Self {
        UncertaintyError::Io(e.to_string())
    }
}

/// Beta law of a wind farm's output normalized by its capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaMarginal {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaMarginal {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, UncertaintyError> {
        if alpha.is_finite() && alpha > 0.0 && beta.is_finite() && beta > 0.0 {
            Ok(BetaMarginal { alpha, beta })
        } else {
            Err(UncertaintyError::Domain(format!(
                "Beta parameters must be positive, got ({alpha}, {beta})"
            )))
        }
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn cdf(&self, x: f64) -> Result<f64, UncertaintyError> {
        beta_cdf(self, x)
    }

    pub fn inv_cdf(&self, p: f64) -> Result<f64, UncertaintyError> {
        beta_inv_cdf(self, p)
    }
}

/// Regularized incomplete beta I_x(alpha, beta).
pub fn beta_cdf(marginal: &BetaMarginal, x: f64) -> Result<f64, UncertaintyError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(UncertaintyError::Domain(format!("beta_cdf needs x in [0,1], got {x}")));
    }
    Ok(special::regularized_beta(marginal.alpha, marginal.beta, x))
}

pub fn beta_inv_cdf(marginal: &BetaMarginal, p: f64) -> Result<f64, UncertaintyError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(UncertaintyError::Domain(format!(
            "beta_inv_cdf needs p in [0,1], got {p}"
        )));
    }
    Ok(special::inverse_regularized_beta(marginal.alpha, marginal.beta, p))
}

/// Forecast used by the deterministic designs: the Beta mean times capacity.
pub fn conditional_mean_forecast(marginal: &BetaMarginal, capacity: f64) -> f64 {
    marginal.mean() * capacity
}

/// A distribution of normalized wind output on [0, 1].
pub trait WindDistribution {
    fn mean(&self) -> f64;
    fn quantile(&self, p: f64) -> f64;
}

impl WindDistribution for BetaMarginal {
    fn mean(&self) -> f64 {
        BetaMarginal::mean(self)
    }

    fn quantile(&self, p: f64) -> f64 {
        special::inverse_regularized_beta(self.alpha, self.beta, p)
    }
}

/// All probability on a single normalized output level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMass(pub f64);

impl WindDistribution for PointMass {
    fn mean(&self) -> f64 {
        self.0
    }

    fn quantile(&self, _p: f64) -> f64 {
        self.0
    }
}

/// Quantile levels (upper, lower) for a reliability level `xi`, placed
/// symmetrically around the median.
pub fn reliability_levels(xi: f64) -> Result<(f64, f64), UncertaintyError> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(UncertaintyError::Domain(format!("reliability level {xi} not in (0,1)")));
    }
    let lower = (1.0 - xi) / 2.0;
    Ok((lower + xi, lower))
}

/// Up and down requirement for one scope, in MW.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Requirement {
    pub up: f64,
    pub down: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReserveRequirements {
    pub xi: f64,
    pub alpha_upper: f64,
    pub alpha_lower: f64,
    pub system: Requirement,
    /// One entry per network area.
    pub areas: Vec<Requirement>,
}

impl ReserveRequirements {
    /// Requirements of zero everywhere, for runs without wind uncertainty.
    pub fn zero(xi: f64, areas: usize) -> Result<Self, UncertaintyError> {
        let (alpha_upper, alpha_lower) = reliability_levels(xi)?;
        Ok(ReserveRequirements {
            xi,
            alpha_upper,
            alpha_lower,
            system: Requirement::default(),
            areas: vec![Requirement::default(); areas],
        })
    }
}

/// Up requirement `(mean - F^-1(lower)) * capacity` and down requirement
/// `(F^-1(upper) - mean) * capacity`.
pub fn reserve_requirements(
    dist: &impl WindDistribution,
    capacity: f64,
    xi: f64,
) -> Result<Requirement, UncertaintyError> {
    let (upper, lower) = reliability_levels(xi)?;
    if !(capacity.is_finite() && capacity >= 0.0) {
        return Err(UncertaintyError::Domain(format!("capacity {capacity} must be >= 0")));
    }
    let mean = dist.mean();
    Ok(Requirement {
        up: ((mean - dist.quantile(lower)) * capacity).max(0.0),
        down: ((dist.quantile(upper) - mean) * capacity).max(0.0),
    })
}

/// System-wide and per-area requirements from the empirical portfolio
/// distributions of a joint sample.
pub fn network_requirements(
    network: &Network,
    joint: &JointSample,
    xi: f64,
) -> Result<ReserveRequirements, UncertaintyError> {
    let (alpha_upper, alpha_lower) = reliability_levels(xi)?;
    let capacities: Vec<f64> = network.wind_farms.iter().map(|w| w.capacity).collect();
    let all: Vec<usize> = (0..capacities.len()).collect();
    let scope = |farms: &[usize]| -> Result<Requirement, UncertaintyError> {
        let cdf = joint.portfolio(&capacities, farms)?;
        reserve_requirements(&cdf, cdf.capacity(), xi)
    };
    let system = scope(&all)?;
    let areas = (0..network.areas.len())
        .map(|a| {
            let farms: Vec<usize> = all
                .iter()
                .copied()
                .filter(|&j| network.farm_area(j) == a)
                .collect();
            scope(&farms)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ReserveRequirements {
        xi,
        alpha_upper,
        alpha_lower,
        system,
        areas,
    })
}

/// Beta marginals of the network's wind farms in declaration order.
pub fn network_marginals(network: &Network) -> Result<Vec<BetaMarginal>, UncertaintyError> {
    network
        .wind_farms
        .iter()
        .map(|w| BetaMarginal::new(w.alpha, w.beta))
        .collect()
}
