//! JSON case files.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use super::{
    Area, Bus, DispatchableUnit, Line, LineKind, Network, SystemError, Technology, WindFarm,
};

/// Syntax or schema error with its 1-based position in the file.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("{path}:{line}:{column}: {message}")]
pub struct ParseError {
    pub path: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCase {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    description: Option<String>,
    voll: f64,
    reference_bus: String,
    areas: Vec<RawArea>,
    buses: Vec<RawBus>,
    units: Vec<RawUnit>,
    #[serde(default)]
    wind_farms: Vec<RawWind>,
    lines: Vec<RawLine>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArea {
    id: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBus {
    id: String,
    area: String,
    #[serde(default)]
    demand: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUnit {
    id: String,
    bus: String,
    technology: String,
    p_max: f64,
    cost: f64,
    #[serde(default)]
    reserve_up_max: f64,
    #[serde(default)]
    reserve_down_max: f64,
    #[serde(default)]
    reserve_up_cost: f64,
    #[serde(default)]
    reserve_down_cost: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWind {
    id: String,
    bus: String,
    capacity: f64,
    alpha: f64,
    beta: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLine {
    id: String,
    from: String,
    to: String,
    kind: String,
    f_max: f64,
    #[serde(default)]
    susceptance: f64,
    #[serde(default)]
    x: f64,
}

/// Reads and validates a case file.
pub fn load_system(path: impl AsRef<Path>) -> Result<Network, SystemError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| SystemError::Io(format!("{}: {e}", path.display())))?;
    parse_system(&text, &path.display().to_string())
}

/// Parses case-file text; `origin` labels error positions.
pub fn parse_system(text: &str, origin: &str) -> Result<Network, SystemError> {
    let raw: RawCase = serde_json::from_str(text).map_err(|e| ParseError {
        path: origin.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let _ = raw.description;
    let mut problems = Vec::new();

    let area_index: HashMap<&str, usize> = raw
        .areas
        .iter()
        .enumerate()
        .map(|(i, a)| (a.id.as_str(), i))
        .collect();
    let bus_index: HashMap<&str, usize> = raw
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| (b.id.as_str(), i))
        .collect();
    // unresolved references become usize::MAX so validation flags them
    let resolve_bus = |owner: &str, id: &str, problems: &mut Vec<String>| {
        bus_index.get(id).copied().unwrap_or_else(|| {
            problems.push(format!("{owner}: bus `{id}` does not exist"));
            usize::MAX
        })
    };

    let buses = raw
        .buses
        .iter()
        .map(|b| Bus {
            id: b.id.clone(),
            area: area_index.get(b.area.as_str()).copied().unwrap_or_else(|| {
                problems.push(format!("bus `{}`: area `{}` does not exist", b.id, b.area));
                usize::MAX
            }),
            demand: b.demand,
        })
        .collect();
    let units = raw
        .units
        .iter()
        .map(|u| DispatchableUnit {
            id: u.id.clone(),
            bus: resolve_bus(&format!("unit `{}`", u.id), &u.bus, &mut problems),
            technology: u.technology.parse().unwrap_or_else(|e: SystemError| {
                problems.push(format!("unit `{}`: {e}", u.id));
                Technology::Other
            }),
            p_max: u.p_max,
            cost: u.cost,
            reserve_up_max: u.reserve_up_max,
            reserve_down_max: u.reserve_down_max,
            reserve_up_cost: u.reserve_up_cost,
            reserve_down_cost: u.reserve_down_cost,
        })
        .collect();
    let wind_farms = raw
        .wind_farms
        .iter()
        .map(|w| WindFarm {
            id: w.id.clone(),
            bus: resolve_bus(&format!("wind farm `{}`", w.id), &w.bus, &mut problems),
            capacity: w.capacity,
            alpha: w.alpha,
            beta: w.beta,
        })
        .collect();
    let lines = raw
        .lines
        .iter()
        .map(|l| {
            let owner = format!("line `{}`", l.id);
            let kind = match l.kind.to_ascii_uppercase().as_str() {
                "AC" => LineKind::Ac,
                "DC" => LineKind::Dc,
                other => {
                    problems.push(format!("{owner}: kind `{other}` is neither AC nor DC"));
                    LineKind::Dc
                }
            };
            Line {
                id: l.id.clone(),
                from: resolve_bus(&owner, &l.from, &mut problems),
                to: resolve_bus(&owner, &l.to, &mut problems),
                kind,
                f_max: l.f_max,
                susceptance: if kind == LineKind::Ac { l.susceptance } else { 0.0 },
                x_share: l.x,
            }
        })
        .collect();
    let reference_bus = resolve_bus("reference_bus", &raw.reference_bus, &mut problems);

    let network = Network {
        name: raw.name.unwrap_or_default(),
        areas: raw.areas.into_iter().map(|a| Area { id: a.id }).collect(),
        buses,
        units,
        wind_farms,
        lines,
        reference_bus,
        voll: raw.voll,
    };
    // unresolved references were already reported; skip the index checks
    // that would repeat them
    if problems.is_empty() {
        problems = network.violations();
    } else {
        problems.extend(
            network
                .violations()
                .into_iter()
                .filter(|p| !p.contains("unknown") && !p.contains("not connected") && !p.contains("reference bus")),
        );
    }
    if problems.is_empty() {
        Ok(network)
    } else {
        Err(SystemError::Validation(problems))
    }
}
