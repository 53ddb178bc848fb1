//! Power-system data model: areas, buses, dispatchable units, wind farms and
//! AC/HVDC lines.

mod case;
mod reduce;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use case::{load_system, parse_system, ParseError};
pub use reduce::two_zone_reduction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Technology {
    Nuclear,
    Coal,
    #[serde(rename = "OCGT")]
    Ocgt,
    #[serde(rename = "IGCC")]
    Igcc,
    #[serde(rename = "CCGT")]
    Ccgt,
    Other,
}

impl FromStr for Technology {
    type Err = SystemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nuclear" => Ok(Technology::Nuclear),
            "coal" => Ok(Technology::Coal),
            "ocgt" => Ok(Technology::Ocgt),
            "igcc" => Ok(Technology::Igcc),
            "ccgt" => Ok(Technology::Ccgt),
            "other" => Ok(Technology::Other),
            _ => Err(SystemError::UnknownTechnology(s.to_string())),
        }
    }
}

impl fmt::Display for Technology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Technology::Nuclear => "Nuclear",
            Technology::Coal => "Coal",
            Technology::Ocgt => "OCGT",
            Technology::Igcc => "IGCC",
            Technology::Ccgt => "CCGT",
            Technology::Other => "Other",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum LineKind {
    #[serde(rename = "AC")]
    Ac,
    #[serde(rename = "DC")]
    Dc,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Area {
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bus {
    pub id: String,
    pub area: usize,
    /// MW
    pub demand: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispatchableUnit {
    pub id: String,
    pub bus: usize,
    pub technology: Technology,
    /// Capacity in MW; minimum output is zero.
    pub p_max: f64,
    /// Energy offer in $/MWh, used in both day-ahead and balancing stages.
    pub cost: f64,
    pub reserve_up_max: f64,
    pub reserve_down_max: f64,
    pub reserve_up_cost: f64,
    pub reserve_down_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindFarm {
    pub id: String,
    pub bus: usize,
    /// Installed capacity in MW.
    pub capacity: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Line {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub kind: LineKind,
    pub f_max: f64,
    /// Per-unit susceptance magnitude; zero on DC lines.
    pub susceptance: f64,
    /// Share of the capacity set aside for cross-border reserve exchange.
    pub x_share: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReservePolicy {
    Baseline,
    Penalizing,
}

impl FromStr for ReservePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(ReservePolicy::Baseline),
            "penalizing" => Ok(ReservePolicy::Penalizing),
            _ => Err(format!("unknown reserve policy `{s}`")),
        }
    }
}

impl ReservePolicy {
    /// (share of capacity offered as reserve, reserve price as share of the
    /// energy offer) for a technology.
    pub fn terms(self, tech: Technology) -> (f64, f64) {
        match (self, tech) {
            (ReservePolicy::Baseline, Technology::Ocgt) => (1.0, 0.25),
            (ReservePolicy::Baseline, Technology::Igcc) => (0.40, 0.10),
            (ReservePolicy::Baseline, Technology::Ccgt) => (0.25, 0.05),
            (ReservePolicy::Penalizing, Technology::Ocgt) => (0.50, 0.15),
            (ReservePolicy::Penalizing, Technology::Igcc) => (0.40, 0.30),
            (ReservePolicy::Penalizing, Technology::Ccgt) => (0.40, 0.30),
            (_, Technology::Nuclear | Technology::Coal | Technology::Other) => (0.0, 0.0),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SystemError {
    #[error("unknown technology `{0}`")]
    UnknownTechnology(String),
    #[error("area `{0}` has no wind farm")]
    NoWindFarmInArea(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{}", format_violations(.0))]
    Validation(Vec<String>),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("cannot read case file: {0}")]
    Io(String),
}

fn format_violations(v: &[String]) -> String {
    format!("case validation failed:\n  - {}", v.join("\n  - "))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Network {
    pub name: String,
    pub areas: Vec<Area>,
    pub buses: Vec<Bus>,
    pub units: Vec<DispatchableUnit>,
    pub wind_farms: Vec<WindFarm>,
    pub lines: Vec<Line>,
    pub reference_bus: usize,
    /// Value of lost load, $/MWh.
    pub voll: f64,
}

impl Network {
    /// Line-to-bus incidence: -1 where the line leaves, +1 where it enters.
    pub fn incidence(&self, line: usize, bus: usize) -> f64 {
        let l = &self.lines[line];
        if l.from == bus {
            -1.0
        } else if l.to == bus {
            1.0
        } else {
            0.0
        }
    }

    /// Dense incidence matrix indexed `[line][bus]`.
    pub fn incidence_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.lines.len())
            .map(|l| (0..self.buses.len()).map(|n| self.incidence(l, n)).collect())
            .collect()
    }

    pub fn total_demand(&self) -> f64 {
        self.buses.iter().map(|b| b.demand).sum()
    }

    pub fn total_unit_capacity(&self) -> f64 {
        self.units.iter().map(|u| u.p_max).sum()
    }

    pub fn total_wind_capacity(&self) -> f64 {
        self.wind_farms.iter().map(|w| w.capacity).sum()
    }

    pub fn unit_area(&self, unit: usize) -> usize {
        self.buses[self.units[unit].bus].area
    }

    pub fn farm_area(&self, farm: usize) -> usize {
        self.buses[self.wind_farms[farm].bus].area
    }

    /// Indices of the lines joining areas `a` and `b` in either direction.
    pub fn lines_between(&self, a: usize, b: usize) -> Vec<usize> {
        self.lines
            .iter()
            .enumerate()
            .filter(|(_, l)| {
                let (fa, ta) = (self.buses[l.from].area, self.buses[l.to].area);
                (fa == a && ta == b) || (fa == b && ta == a)
            })
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        let n = self.buses.len();
        if n == 0 {
            return true;
        }
        let mut adj = vec![Vec::new(); n];
        for l in &self.lines {
            adj[l.from].push(l.to);
            adj[l.to].push(l.from);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(b) = queue.pop_front() {
            for &c in &adj[b] {
                if !seen[c] {
                    seen[c] = true;
                    queue.push_back(c);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Every violated invariant, in a stable order.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let nb = self.buses.len();
        let na = self.areas.len();
        let mut check_unique = |kind: &str, ids: Vec<&str>| {
            let mut sorted = ids.clone();
            sorted.sort_unstable();
            for w in sorted.windows(2) {
                if w[0] == w[1] {
                    v.push(format!("duplicate {kind} id `{}`", w[0]));
                }
            }
        };
        check_unique("area", self.areas.iter().map(|a| a.id.as_str()).collect());
        check_unique("bus", self.buses.iter().map(|b| b.id.as_str()).collect());
        check_unique("unit", self.units.iter().map(|u| u.id.as_str()).collect());
        check_unique("wind farm", self.wind_farms.iter().map(|w| w.id.as_str()).collect());
        check_unique("line", self.lines.iter().map(|l| l.id.as_str()).collect());

        if nb == 0 {
            v.push("network has no buses".into());
        }
        for b in &self.buses {
            if !(b.demand.is_finite() && b.demand >= 0.0) {
                v.push(format!("bus `{}`: demand {} must be finite and >= 0", b.id, b.demand));
            }
            if b.area >= na {
                v.push(format!("bus `{}`: unknown area", b.id));
            }
        }
        for u in &self.units {
            let tag = format!("unit `{}`", u.id);
            if u.bus >= nb {
                v.push(format!("{tag}: unknown bus"));
            }
            if !(u.p_max.is_finite() && u.p_max >= 0.0) {
                v.push(format!("{tag}: p_max {} must be finite and >= 0", u.p_max));
            }
            for (name, r) in [("reserve_up_max", u.reserve_up_max), ("reserve_down_max", u.reserve_down_max)] {
                if !(r.is_finite() && r >= 0.0 && r <= u.p_max) {
                    v.push(format!("{tag}: {name} {r} out of [0, p_max]"));
                }
            }
            for (name, c) in [
                ("cost", u.cost),
                ("reserve_up_cost", u.reserve_up_cost),
                ("reserve_down_cost", u.reserve_down_cost),
            ] {
                if !(c.is_finite() && c >= 0.0) {
                    v.push(format!("{tag}: {name} {c} must be finite and >= 0"));
                }
            }
        }
        for w in &self.wind_farms {
            let tag = format!("wind farm `{}`", w.id);
            if w.bus >= nb {
                v.push(format!("{tag}: unknown bus"));
            }
            if !(w.capacity.is_finite() && w.capacity >= 0.0) {
                v.push(format!("{tag}: capacity {} must be finite and >= 0", w.capacity));
            }
            if !(w.alpha.is_finite() && w.alpha > 0.0 && w.beta.is_finite() && w.beta > 0.0) {
                v.push(format!("{tag}: Beta parameters must be > 0"));
            }
        }
        for l in &self.lines {
            let tag = format!("line `{}`", l.id);
            if l.from >= nb || l.to >= nb {
                v.push(format!("{tag}: unknown bus"));
            } else if l.from == l.to {
                v.push(format!("{tag}: from and to bus coincide"));
            }
            if !(l.f_max.is_finite() && l.f_max >= 0.0) {
                v.push(format!("{tag}: f_max {} must be finite and >= 0", l.f_max));
            }
            if l.kind == LineKind::Ac && !(l.susceptance.is_finite() && l.susceptance > 0.0) {
                v.push(format!("{tag}: AC susceptance must be > 0"));
            }
            if !(0.0..=1.0).contains(&l.x_share) {
                v.push(format!("{tag}: X out of [0,1] ({})", l.x_share));
            }
        }
        if self.reference_bus >= nb {
            v.push("reference bus does not exist".into());
        }
        if !(self.voll.is_finite() && self.voll > 0.0) {
            v.push(format!("voll {} must be finite and > 0", self.voll));
        }
        let indices_ok = self.lines.iter().all(|l| l.from < nb && l.to < nb);
        if indices_ok && nb > 0 && !self.is_connected() {
            v.push("network not connected".into());
        }
        v
    }

    pub fn validate(&self) -> Result<(), SystemError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(SystemError::Validation(v))
        }
    }

    /// SHA-256 of the canonical JSON rendering of the network.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("network serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Sets every DC line's capacity to `mw`.
    pub fn with_dc_capacity(&self, mw: f64) -> Network {
        let mut net = self.clone();
        for l in net.lines.iter_mut().filter(|l| l.kind == LineKind::Dc) {
            l.f_max = mw;
        }
        net
    }

    /// Multiplies every line capacity by `factor`.
    pub fn with_line_capacity_scale(&self, factor: f64) -> Network {
        let mut net = self.clone();
        for l in &mut net.lines {
            l.f_max *= factor;
        }
        net
    }

    /// Overrides the reserve allocation share of every line.
    pub fn with_x(&self, x: f64) -> Network {
        let mut net = self.clone();
        for l in &mut net.lines {
            l.x_share = x;
        }
        net
    }

    pub fn with_voll(&self, voll: f64) -> Network {
        Network {
            voll,
            ..self.clone()
        }
    }
}

/// Rewrites every unit's reserve quantities and prices from its technology.
/// Nuclear, coal and untagged units offer no reserve. Applying a policy twice
/// gives the same network.
pub fn apply_reserve_offer_policy(network: &Network, policy: ReservePolicy) -> Network {
    let mut net = network.clone();
    for u in &mut net.units {
        let (share, price) = policy.terms(u.technology);
        u.reserve_up_max = share * u.p_max;
        u.reserve_down_max = share * u.p_max;
        u.reserve_up_cost = price * u.cost;
        u.reserve_down_cost = price * u.cost;
    }
    net
}

/// Sets installed wind capacity to `penetration` times total demand, split
/// `ratio : 1 : 1 ...` between the areas in declaration order. Within an area
/// capacity goes to its farms in proportion to their current capacities, or
/// evenly when they are all zero.
pub fn scale_wind_penetration(
    network: &Network,
    penetration: f64,
    ratio: f64,
) -> Result<Network, SystemError> {
    if !(penetration.is_finite() && penetration >= 0.0) {
        return Err(SystemError::InvalidArgument(format!(
            "penetration {penetration} must be >= 0"
        )));
    }
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(SystemError::InvalidArgument(format!("area ratio {ratio} must be > 0")));
    }
    let total = penetration * network.total_demand();
    let weights: Vec<f64> = (0..network.areas.len())
        .map(|a| if a == 0 { ratio } else { 1.0 })
        .collect();
    let weight_sum: f64 = weights.iter().sum();
    let mut net = network.clone();
    for (a, area) in network.areas.iter().enumerate() {
        let farms: Vec<usize> = (0..net.wind_farms.len())
            .filter(|&j| network.farm_area(j) == a)
            .collect();
        if farms.is_empty() {
            return Err(SystemError::NoWindFarmInArea(area.id.clone()));
        }
        let area_cap = total * weights[a] / weight_sum;
        let current: f64 = farms.iter().map(|&j| network.wind_farms[j].capacity).sum();
        for &j in &farms {
            let share = if current > 0.0 {
                network.wind_farms[j].capacity / current
            } else {
                1.0 / farms.len() as f64
            };
            net.wind_farms[j].capacity = area_cap * share;
        }
    }
    Ok(net)
}
