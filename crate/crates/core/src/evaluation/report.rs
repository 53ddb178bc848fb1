use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::format::sig9;
use crate::lp::{FEASIBILITY_TOL, OPTIMALITY_TOL};
use crate::uncertainty::ReserveRequirements;

use super::{EvalError, SweepKind, SweepResult, SweepSettings};

/// Paths written by [`write_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub costs: PathBuf,
    pub locus: PathBuf,
    pub meta: PathBuf,
    pub timing: PathBuf,
}

#[derive(Serialize)]
struct Failure<'a> {
    design: &'a str,
    point: &'a [f64],
    error: &'a str,
}

#[derive(Serialize)]
struct Tolerances {
    lp_feasibility: f64,
    lp_optimality: f64,
    dominance_relative: f64,
    decomposition_absolute: f64,
}

#[derive(Serialize)]
struct Runtime {
    total_ms: f64,
    cells_ms: Vec<f64>,
}

#[derive(Serialize)]
struct Meta<'a> {
    kind: SweepKind,
    scenario_seed: u64,
    settings: &'a SweepSettings,
    axes: Vec<(&'a str, &'a [f64])>,
    designs: Vec<&'a str>,
    network_digest: &'a str,
    case_sha256: Option<&'a str>,
    run_digests: Vec<&'a str>,
    requirements: &'a [ReserveRequirements],
    tolerances: Tolerances,
    failures: Vec<Failure<'a>>,
}

fn costs_csv(result: &SweepResult) -> String {
    let mut out = String::from("design");
    for axis in &result.axes {
        out.push(',');
        out.push_str(&axis.name);
    }
    out.push_str(",status,da_energy,reserve_capacity,expected_balancing,total\n");
    for cell in &result.cells {
        out.push_str(cell.design.name());
        for v in &cell.point {
            out.push(',');
            out.push_str(&sig9(*v));
        }
        match &cell.run {
            Some(run) => {
                let c = &run.costs;
                out.push_str(&format!(
                    ",ok,{},{},{},{}\n",
                    sig9(c.da_energy),
                    sig9(c.reserve_capacity),
                    sig9(c.expected_balancing),
                    sig9(c.total)
                ));
            }
            None => out.push_str(",failed,,,,inf\n"),
        }
    }
    out
}

fn locus_csv(result: &SweepResult) -> String {
    let mut out = String::from("capacity,x,total\n");
    for p in &result.locus {
        out.push_str(&format!("{},{},{}\n", sig9(p.capacity), sig9(p.x), sig9(p.total)));
    }
    out
}

/// Writes `costs.csv`, `locus.csv`, `meta.json` and `timing.json` into
/// `dir`, creating it if needed. Everything but `timing.json` depends only
/// on the sweep inputs and is byte-identical across reruns.
pub fn write_report(result: &SweepResult, dir: impl AsRef<Path>) -> Result<ReportFiles, EvalError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let files = ReportFiles {
        costs: dir.join("costs.csv"),
        locus: dir.join("locus.csv"),
        meta: dir.join("meta.json"),
        timing: dir.join("timing.json"),
    };
    fs::write(&files.costs, costs_csv(result))?;
    fs::write(&files.locus, locus_csv(result))?;

    let cells_ms: Vec<f64> = result
        .cells
        .iter()
        .map(|c| c.run.as_ref().map_or(0.0, |r| r.wall_ms))
        .collect();
    let meta = Meta {
        kind: result.kind,
        scenario_seed: result.settings.seed,
        settings: &result.settings,
        axes: result.axes.iter().map(|a| (a.name.as_str(), a.values.as_slice())).collect(),
        designs: result.designs.iter().map(|d| d.name()).collect(),
        network_digest: &result.network_digest,
        case_sha256: result.case_sha256.as_deref(),
        run_digests: result
            .cells
            .iter()
            .filter_map(|c| c.run.as_ref().map(|r| r.digest.hash.as_str()))
            .collect(),
        requirements: &result.requirements,
        tolerances: Tolerances {
            lp_feasibility: FEASIBILITY_TOL,
            lp_optimality: OPTIMALITY_TOL,
            dominance_relative: 1e-6,
            decomposition_absolute: 1e-6,
        },
        failures: result
            .failures()
            .map(|c| Failure {
                design: c.design.name(),
                point: &c.point,
                error: c.error.as_deref().unwrap_or(""),
            })
            .collect(),
    };
    write_json(&files.meta, &meta)?;
    let timing = Runtime {
        total_ms: result.wall_ms,
        cells_ms,
    };
    write_json(&files.timing, &timing)?;
    Ok(files)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), EvalError> {
    let json = serde_json::to_string_pretty(value).map_err(|e| EvalError::Io(e.to_string()))?;
    fs::write(path, json + "\n")?;
    Ok(())
}
