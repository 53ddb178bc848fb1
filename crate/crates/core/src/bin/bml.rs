//! `bml`: scenario generation, market clearing, design evaluation, sweeps
//! and MPS export from the command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
//! Diagnostics go to stderr; stdout only lists the files written.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bml_core::evaluation::{
    evaluate_design, default_penetration_grid, sweep_penetration, sweep_x_capacity, write_report,
    EvalParams, RunDigest, SweepResult, SweepSettings, UncertaintyModel,
};
use bml_core::lp::export_mps;
use bml_core::markets::{design_problems, Design};
use bml_core::system::{
    apply_reserve_offer_policy, load_system, scale_wind_penetration, Network, ReservePolicy,
};
use bml_core::uncertainty::{network_marginals, sample_scenarios, CopulaSpec};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "bml", version, about = "Energy and reserve market clearing under wind uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw wind scenarios for a case and write them as CSV.
    ScenarioGen {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        sample: SampleArgs,
        /// Output CSV; a `.meta` sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Clear one market design and write the full outcome as JSON.
    Clear {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        sample: SampleArgs,
        #[arg(long)]
        design: Design,
        #[arg(long)]
        out: PathBuf,
    },
    /// Expected cost of one or all designs, written as JSON.
    Evaluate {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        sample: SampleArgs,
        /// Repeat to select several; all designs when omitted.
        #[arg(long)]
        design: Vec<Design>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a parameter sweep and write a report directory.
    Sweep {
        #[command(subcommand)]
        kind: SweepCommand,
    },
    /// Write the LPs of a design as MPS files, one per stage.
    ExportMps {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        sample: SampleArgs,
        #[arg(long)]
        design: Design,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum SweepCommand {
    /// Expected cost of each design against wind penetration.
    Penetration {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        sample: SampleArgs,
        /// Repeat to select several; all designs when omitted.
        #[arg(long)]
        design: Vec<Design>,
        /// Largest penetration of the grid (at most 0.7).
        #[arg(long, default_value_t = 0.65)]
        max: f64,
        /// Grid step.
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sequential-design cost over tie capacity and transmission allocation X.
    XCapacity {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        sample: SampleArgs,
        /// X grid step over [0, 1].
        #[arg(long, default_value_t = 0.05)]
        x_step: f64,
        /// Comma-separated tie capacities in MW.
        #[arg(long, value_delimiter = ',', default_value = "50,100,150,200,250,300,350,400,450,500")]
        capacities: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Case file and overrides. Flags take precedence over case-file values.
#[derive(Args, Clone)]
struct CaseArgs {
    /// Case file (JSON).
    #[arg(long)]
    case: PathBuf,
    /// Value of lost load, $/MWh.
    #[arg(long)]
    voll: Option<f64>,
    /// Transmission allocation X for every line.
    #[arg(long)]
    x: Option<f64>,
    /// Reserve offer policy: baseline or penalizing. Keeps the case-file
    /// offers when omitted, except in the X-capacity sweep, which defaults
    /// to penalizing.
    #[arg(long)]
    policy: Option<ReservePolicy>,
    /// Capacity of every HVDC line, MW.
    #[arg(long)]
    hvdc_capacity: Option<f64>,
    /// Installed wind over total demand; keeps case capacities when omitted.
    /// The X-capacity sweep defaults to 0.24.
    #[arg(long)]
    penetration: Option<f64>,
    /// Wind capacity of the first area relative to each other area.
    #[arg(long, default_value_t = 2.0)]
    ratio: f64,
}

#[derive(Args, Clone)]
struct SampleArgs {
    /// Number of equiprobable scenarios.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    /// Random seed; falls back to BML_SEED.
    #[arg(long, env = "BML_SEED")]
    seed: u64,
    /// Latent correlation between farms.
    #[arg(long, default_value_t = 0.35)]
    rho: f64,
    /// Reliability level of the reserve requirements.
    #[arg(long, default_value_t = 0.99)]
    xi: f64,
    /// Joint draws behind the requirement quantiles.
    #[arg(long, default_value_t = 100_000)]
    requirement_samples: usize,
    /// Worker threads; 0 uses one per core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

type CliResult<T> = Result<T, Failure>;

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(msg.to_string())
}

fn runtime(msg: impl std::fmt::Display) -> Failure {
    Failure::Runtime(msg.to_string())
}

fn check_range(name: &str, v: f64, lo: f64, hi: f64) -> CliResult<()> {
    if v.is_finite() && (lo..=hi).contains(&v) {
        Ok(())
    } else {
        Err(usage(format!("--{name} {v} must lie in [{lo}, {hi}]")))
    }
}

impl SampleArgs {
    fn settings(&self, ratio: f64) -> CliResult<SweepSettings> {
        check_range("rho", self.rho, -0.99, 0.99)?;
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return Err(usage(format!("--xi {} must lie in (0, 1)", self.xi)));
        }
        if self.requirement_samples < 10_000 {
            return Err(usage("--requirement-samples must be at least 10000"));
        }
        Ok(SweepSettings {
            seed: self.seed,
            scenarios: self.n as usize,
            rho: self.rho,
            xi: self.xi,
            requirement_samples: self.requirement_samples,
            area_ratio: ratio,
            workers: self.workers,
        })
    }
}

struct LoadedCase {
    network: Network,
    sha256: String,
}

impl CaseArgs {
    /// Loads the case and applies every override except penetration.
    fn load(&self, default_policy: Option<ReservePolicy>) -> CliResult<LoadedCase> {
        let bytes = fs::read(&self.case)
            .map_err(|e| usage(format!("cannot read {}: {e}", self.case.display())))?;
        let sha256 = hex::encode(Sha256::digest(&bytes));
        let mut network = load_system(&self.case).map_err(usage)?;
        if let Some(voll) = self.voll {
            if !(voll.is_finite() && voll > 0.0) {
                return Err(usage(format!("--voll {voll} must be positive")));
            }
            network = network.with_voll(voll);
        }
        if let Some(x) = self.x {
            check_range("x", x, 0.0, 1.0)?;
            network = network.with_x(x);
        }
        if let Some(policy) = self.policy.or(default_policy) {
            network = apply_reserve_offer_policy(&network, policy);
        }
        if let Some(cap) = self.hvdc_capacity {
            if !(cap.is_finite() && cap > 0.0) {
                return Err(usage(format!("--hvdc-capacity {cap} must be positive")));
            }
            network = network.with_dc_capacity(cap);
        }
        if !(self.ratio.is_finite() && self.ratio > 0.0) {
            return Err(usage(format!("--ratio {} must be positive", self.ratio)));
        }
        Ok(LoadedCase { network, sha256 })
    }

    fn scaled(&self, network: &Network) -> CliResult<Network> {
        match self.penetration {
            Some(p) => {
                check_range("penetration", p, 0.0, 0.7)?;
                scale_wind_penetration(network, p, self.ratio).map_err(usage)
            }
            None => Ok(network.clone()),
        }
    }
}

fn init_workers(workers: usize) {
    // Only fails when the pool already exists, which is harmless here.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let json = serde_json::to_string_pretty(value).map_err(runtime)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, json + "\n").map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn designs_or_all(designs: &[Design]) -> Vec<Design> {
    if designs.is_empty() {
        Design::ALL.to_vec()
    } else {
        let mut d = designs.to_vec();
        d.sort();
        d.dedup();
        d
    }
}

fn scenario_gen(case: &CaseArgs, sample: &SampleArgs, out: &Path) -> CliResult<Vec<PathBuf>> {
    let loaded = case.load(None)?;
    let net = case.scaled(&loaded.network)?;
    let settings = sample.settings(case.ratio)?;
    let marginals = network_marginals(&net).map_err(usage)?;
    let copula = CopulaSpec::uniform(marginals.len(), settings.rho).map_err(usage)?;
    let caps: Vec<f64> = net.wind_farms.iter().map(|w| w.capacity).collect();
    let ids = net.wind_farms.iter().map(|w| w.id.clone()).collect();
    init_workers(sample.workers);
    let scenarios = sample_scenarios(&marginals, &caps, &copula, settings.scenarios, settings.seed)
        .map_err(runtime)?
        .with_farm_ids(ids);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    }
    scenarios.write_csv(out).map_err(runtime)?;
    let mut meta = out.as_os_str().to_owned();
    meta.push(".meta");
    Ok(vec![out.to_path_buf(), PathBuf::from(meta)])
}

struct Prepared {
    loaded: LoadedCase,
    network: Network,
    model: UncertaintyModel,
    settings: SweepSettings,
}

fn prepare(case: &CaseArgs, sample: &SampleArgs) -> CliResult<Prepared> {
    let loaded = case.load(None)?;
    let network = case.scaled(&loaded.network)?;
    let settings = sample.settings(case.ratio)?;
    init_workers(sample.workers);
    let model = UncertaintyModel::new(&network, &settings).map_err(usage)?;
    Ok(Prepared {
        loaded,
        network,
        model,
        settings,
    })
}

#[derive(Serialize)]
struct ClearReport<'a, T: Serialize> {
    design: Design,
    case_sha256: &'a str,
    seed: u64,
    digest: RunDigest,
    requirements: &'a bml_core::uncertainty::ReserveRequirements,
    outcome: T,
}

fn clear(case: &CaseArgs, sample: &SampleArgs, design: Design, out: &Path) -> CliResult<Vec<PathBuf>> {
    let p = prepare(case, sample)?;
    let (scenarios, requirements) = p.model.at(&p.network).map_err(runtime)?;
    let params = EvalParams {
        requirements: requirements.clone(),
    };
    let outcome = bml_core::evaluation::run_design(&p.network, &scenarios, design, &params)
        .map_err(|e| runtime(format!("{design}: {e}")))?;
    let report = ClearReport {
        design,
        case_sha256: &p.loaded.sha256,
        seed: p.settings.seed,
        digest: RunDigest::new(&p.network, &scenarios),
        requirements: &requirements,
        outcome,
    };
    write_json(out, &report)?;
    Ok(vec![out.to_path_buf()])
}

#[derive(Serialize)]
struct EvaluatedDesign {
    design: Design,
    run: Option<bml_core::evaluation::DesignRun>,
    error: Option<String>,
}

#[derive(Serialize)]
struct EvaluateReport<'a> {
    case_sha256: &'a str,
    seed: u64,
    requirements: &'a bml_core::uncertainty::ReserveRequirements,
    designs: Vec<EvaluatedDesign>,
}

fn evaluate(case: &CaseArgs, sample: &SampleArgs, designs: &[Design], out: &Path) -> CliResult<Vec<PathBuf>> {
    let p = prepare(case, sample)?;
    let (scenarios, requirements) = p.model.at(&p.network).map_err(runtime)?;
    let params = EvalParams {
        requirements: requirements.clone(),
    };
    let mut failed = Vec::new();
    let mut entries = Vec::new();
    for design in designs_or_all(designs) {
        match evaluate_design(&p.network, &scenarios, design, &params) {
            Ok(run) => {
                eprintln!("{design}: total {:.6} ({:.0} ms)", run.costs.total, run.wall_ms);
                entries.push(EvaluatedDesign {
                    design,
                    run: Some(run),
                    error: None,
                });
            }
            Err(e) => {
                failed.push(format!("{design}: {e}"));
                entries.push(EvaluatedDesign {
                    design,
                    run: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let report = EvaluateReport {
        case_sha256: &p.loaded.sha256,
        seed: p.settings.seed,
        requirements: &requirements,
        designs: entries,
    };
    write_json(out, &report)?;
    finish_partial(vec![out.to_path_buf()], failed)
}

/// Prints the written paths, then fails if any part of the run failed.
fn finish_partial(paths: Vec<PathBuf>, failed: Vec<String>) -> CliResult<Vec<PathBuf>> {
    if failed.is_empty() {
        return Ok(paths);
    }
    for p in &paths {
        println!("{}", p.display());
    }
    Err(runtime(format!(
        "{} of the runs failed:\n  {}",
        failed.len(),
        failed.join("\n  ")
    )))
}

fn report_sweep(mut result: SweepResult, sha256: String, out: &Path) -> CliResult<Vec<PathBuf>> {
    result.case_sha256 = Some(sha256);
    let files = write_report(&result, out).map_err(runtime)?;
    eprintln!("sweep finished in {:.1} s", result.wall_ms / 1e3);
    let failed: Vec<String> = result
        .failures()
        .map(|c| format!("{} at {:?}: {}", c.design, c.point, c.error.as_deref().unwrap_or("")))
        .collect();
    finish_partial(vec![files.costs, files.locus, files.meta, files.timing], failed)
}

fn grid(step: f64, max: f64) -> Vec<f64> {
    let count = (max / step + 1e-9).floor() as usize;
    (0..=count).map(|k| (k as f64 * step * 1e9).round() / 1e9).collect()
}

fn sweep(kind: &SweepCommand) -> CliResult<Vec<PathBuf>> {
    match kind {
        SweepCommand::Penetration {
            case,
            sample,
            design,
            max,
            step,
            out,
        } => {
            if case.penetration.is_some() {
                return Err(usage("--penetration does not apply to the penetration sweep; use --max"));
            }
            check_range("max", *max, 0.0, 0.7)?;
            if !(step.is_finite() && *step > 0.0) {
                return Err(usage("--step must be positive"));
            }
            let loaded = case.load(None)?;
            let settings = sample.settings(case.ratio)?;
            let grid = if (*max - 0.65).abs() < 1e-12 && (*step - 0.05).abs() < 1e-12 {
                default_penetration_grid()
            } else {
                grid(*step, *max)
            };
            let result = sweep_penetration(&loaded.network, &designs_or_all(design), &grid, &settings)
                .map_err(runtime)?;
            report_sweep(result, loaded.sha256, out)
        }
        SweepCommand::XCapacity {
            case,
            sample,
            x_step,
            capacities,
            out,
        } => {
            if !(x_step.is_finite() && *x_step > 0.0 && *x_step <= 1.0) {
                return Err(usage("--x-step must lie in (0, 1]"));
            }
            if case.x.is_some() || case.hvdc_capacity.is_some() {
                return Err(usage("--x and --hvdc-capacity are swept; use --x-step and --capacities"));
            }
            if capacities.is_empty() || capacities.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
                return Err(usage("--capacities must be positive"));
            }
            let penetration = case.penetration.unwrap_or(0.24);
            check_range("penetration", penetration, 0.0, 0.7)?;
            let loaded = case.load(Some(ReservePolicy::Penalizing))?;
            let settings = sample.settings(case.ratio)?;
            let result = sweep_x_capacity(&loaded.network, &grid(*x_step, 1.0), capacities, penetration, &settings)
                .map_err(runtime)?;
            report_sweep(result, loaded.sha256, out)
        }
    }
}

fn export(case: &CaseArgs, sample: &SampleArgs, design: Design, out: &Path) -> CliResult<Vec<PathBuf>> {
    let p = prepare(case, sample)?;
    let (scenarios, requirements) = p.model.at(&p.network).map_err(runtime)?;
    let problems = design_problems(&p.network, &scenarios, design, requirements.system, &requirements.areas)
        .map_err(|e| runtime(format!("{design}: {e}")))?;
    fs::create_dir_all(out).map_err(|e| runtime(format!("{}: {e}", out.display())))?;
    let mut paths = Vec::new();
    for (stage, lp) in problems {
        let path = out.join(format!("{}_{stage}.mps", design.name().replace('-', "_")));
        export_mps(&lp, &path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        paths.push(path);
    }
    Ok(paths)
}

fn run(cli: &Cli) -> CliResult<Vec<PathBuf>> {
    match &cli.command {
        Command::ScenarioGen { case, sample, out } => scenario_gen(case, sample, out),
        Command::Clear {
            case,
            sample,
            design,
            out,
        } => clear(case, sample, *design, out),
        Command::Evaluate {
            case,
            sample,
            design,
            out,
        } => evaluate(case, sample, design, out),
        Command::Sweep { kind } => sweep(kind),
        Command::ExportMps {
            case,
            sample,
            design,
            out,
        } => export(case, sample, *design, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
