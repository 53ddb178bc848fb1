//! Helpers shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use bml_core::lp::{LpProblem, Sense, VarId};
use bml_core::system::{load_system, Network};
use bml_core::uncertainty::ScenarioSet;
use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg64Mcg;

pub fn case_path(name: &str) -> String {
    format!("{}/../../cases/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn load_case(name: &str) -> Network {
    load_system(case_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// A random LP with at most 8 bounded variables and at most 8 rows.
/// Integer data keeps vertex enumeration well conditioned.
pub fn random_lp(seed: u64) -> LpProblem {
    let mut rng = Pcg64Mcg::seed_from_u64(seed);
    let n = rng.random_range(1..=8usize);
    let m = rng.random_range(0..=8usize);
    let mut lp = LpProblem::new(format!("random_{seed}"));
    let vars: Vec<VarId> = (0..n)
        .map(|_| {
            let lo = rng.random_range(-5..=3) as f64;
            let width = rng.random_range(0..=8) as f64;
            let cost = rng.random_range(-9..=9) as f64;
            lp.add_variable(lo, lo + width, cost).unwrap()
        })
        .collect();
    for _ in 0..m {
        let mut terms: Vec<(VarId, f64)> = Vec::new();
        for &v in &vars {
            if rng.random_bool(0.7) {
                terms.push((v, rng.random_range(-5..=5) as f64));
            }
        }
        let sense = match rng.random_range(0..3) {
            0 => Sense::Le,
            1 => Sense::Ge,
            _ => Sense::Eq,
        };
        let rhs = rng.random_range(-12..=12) as f64;
        lp.add_constraint(&terms, sense, rhs).unwrap();
    }
    lp
}

/// Equiprobable single-farm scenarios for the micro case.
pub fn micro_scenarios(net: &Network, values: &[f64]) -> ScenarioSet {
    let caps = net.wind_farms.iter().map(|w| w.capacity).collect();
    let ids = net.wind_farms.iter().map(|w| w.id.clone()).collect();
    let rows = values.iter().map(|&v| vec![v]).collect();
    let probs = vec![1.0 / values.len() as f64; values.len()];
    ScenarioSet::from_realizations(ids, caps, rows, probs).unwrap()
}

/// Cheapest way to absorb a real-time imbalance `d` (positive when wind
/// falls short) at a single bus: producers `(price, cap)` and absorbers
/// `(credit, cap)` trade until price meets credit.
pub fn single_bus_recourse(d: f64, producers: &[(f64, f64); 3], absorbers: &[(f64, f64); 3]) -> f64 {
    let mut supply = [(f64::NEG_INFINITY, (-d).max(0.0)); 4];
    supply[1..].copy_from_slice(producers);
    supply.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut demand = [(f64::INFINITY, d.max(0.0)); 4];
    demand[1..].copy_from_slice(absorbers);
    demand.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut i, mut j) = (0, 0);
    let (mut s_left, mut d_left) = (supply[0].1, demand[0].1);
    let mut cost = 0.0;
    let mut forced_supply = supply[0].1;
    let mut forced_demand = demand[0].1;
    while i < supply.len() && j < demand.len() && supply[i].0 < demand[j].0 {
        let q = s_left.min(d_left);
        if supply[i].0.is_finite() {
            cost += supply[i].0 * q;
        }
        if demand[j].0.is_finite() {
            cost -= demand[j].0 * q;
        }
        if i == 0 {
            forced_supply -= q;
        }
        if j == 0 {
            forced_demand -= q;
        }
        s_left -= q;
        d_left -= q;
        if s_left <= 0.0 {
            i += 1;
            s_left = supply.get(i).map_or(0.0, |s| s.1);
        }
        if d_left <= 0.0 {
            j += 1;
            d_left = demand.get(j).map_or(0.0, |s| s.1);
        }
    }
    if forced_supply > 1e-9 || forced_demand > 1e-9 {
        f64::INFINITY
    } else {
        cost
    }
}

fn steps(max: f64, step: f64) -> impl Iterator<Item = f64> {
    let count = (max.max(0.0) / step + 1e-9).floor() as usize;
    (0..=count).map(move |k| k as f64 * step)
}

/// Exhaustive search for the micro case's stochastic optimum.
///
/// Day-ahead energy (units and wind) runs over a 1 MW grid and reserve
/// capacity over a 5 MW grid; every MW quantity of the case is a multiple
/// of 10. Grid points are feasible, so the result bounds the LP optimum
/// from above and meets it when an optimal vertex lies on the grid. For each first-stage
/// candidate, every scenario's regulation, shedding and spillage is solved
/// exactly as a single-bus trade; the link (200 MW) can carry at most
/// 150 MW here and never binds.
pub fn micro_brute_force(net: &Network, scenarios: &ScenarioSet) -> f64 {
    assert_eq!(net.units.len(), 2);
    assert_eq!(net.wind_farms.len(), 1);
    let (a, b) = (&net.units[0], &net.units[1]);
    let demand = net.total_demand();
    let wind_cap = net.wind_farms[0].capacity;
    let line_cap: f64 = net.lines.iter().map(|l| l.f_max).fold(f64::INFINITY, f64::min);
    assert!(a.p_max.max(b.p_max) + wind_cap <= line_cap, "link could bind");
    let realized: Vec<f64> = (0..scenarios.len()).map(|w| scenarios.value(w, 0)).collect();
    let probs = scenarios.probabilities().to_vec();

    let mut best = f64::INFINITY;
    for p_wind in steps(wind_cap, 1.0) {
        for p_a in steps(a.p_max, 1.0) {
            let p_b = demand - p_a - p_wind;
            if p_b < 0.0 || p_b > b.p_max {
                continue;
            }
            let energy = a.cost * p_a + b.cost * p_b;
            for up_a in steps(a.reserve_up_max.min(a.p_max - p_a), 5.0) {
                for up_b in steps(b.reserve_up_max.min(b.p_max - p_b), 5.0) {
                    for dn_a in steps(a.reserve_down_max.min(p_a), 5.0) {
                        for dn_b in steps(b.reserve_down_max.min(p_b), 5.0) {
                            let mut total = energy
                                + a.reserve_up_cost * up_a
                                + b.reserve_up_cost * up_b
                                + a.reserve_down_cost * dn_a
                                + b.reserve_down_cost * dn_b;
                            let producers = [(a.cost, up_a), (b.cost, up_b), (net.voll, demand)];
                            for (w, &mw) in realized.iter().enumerate() {
                                let absorbers = [(a.cost, dn_a), (b.cost, dn_b), (0.0, mw)];
                                total += probs[w]
                                    * single_bus_recourse(p_wind - mw, &producers, &absorbers);
                            }
                            best = best.min(total);
                        }
                    }
                }
            }
        }
    }
    best
}

