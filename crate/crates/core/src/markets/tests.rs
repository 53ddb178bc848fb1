use super::*;
use crate::system::{load_system, Network};
use crate::uncertainty::{reserve_requirements, BetaMarginal, Requirement, ScenarioSet};

fn micro() -> Network {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../cases/micro.json");
    load_system(path).expect("micro case loads")
}

fn scenarios(net: &Network, values: &[f64]) -> ScenarioSet {
    let caps: Vec<f64> = net.wind_farms.iter().map(|w| w.capacity).collect();
    let ids = net.wind_farms.iter().map(|w| w.id.clone()).collect();
    let rows = values.iter().map(|&v| vec![v]).collect();
    let probs = vec![1.0 / values.len() as f64; values.len()];
    ScenarioSet::from_realizations(ids, caps, rows, probs).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn da_residual(net: &Network, da: &DaSchedule) -> f64 {
    (0..net.buses.len())
        .map(|n| {
            let gen: f64 = network::units_at(net, n).map(|i| da.p[i]).sum::<f64>()
                + network::farms_at(net, n).map(|j| da.p_wind[j]).sum::<f64>();
            (gen - network::flow_sum(net, n, &da.flow) - net.buses[n].demand).abs()
        })
        .fold(0.0, f64::max)
}

fn rt_residual(net: &Network, da: &DaSchedule, b: &BalancingOutcome, realized: &[f64]) -> f64 {
    (0..net.buses.len())
        .map(|n| {
            let reg: f64 = network::units_at(net, n).map(|i| b.r_up[i] - b.r_down[i]).sum();
            let wind: f64 = network::farms_at(net, n)
                .map(|j| realized[j] - da.p_wind[j] - b.spill[j])
                .sum();
            let flows = network::flow_sum(net, n, &da.flow) - network::flow_sum(net, n, &b.flow);
            (reg + b.shed[n] + wind + flows).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn det_coopt_without_requirements_is_merit_order() {
    let net = micro();
    let forecast = mean_forecast(&net).unwrap();
    assert!(close(forecast[0], 35.0, 1e-12));
    let (da, reserve) =
        build_det_cooptimization(&net, Requirement::default(), &forecast).unwrap();
    // wind 35 first, then A fills the remaining 45 MW before B
    assert!(close(da.p_wind[0], 35.0, 1e-9));
    assert!(close(da.p[0], 45.0, 1e-9));
    assert!(da.p[1].abs() < 1e-9);
    assert!(close(da.energy_cost, 450.0, 1e-9));
    assert!(reserve.cost.abs() < 1e-9);
    assert!(close(da.flow[0].abs(), 80.0, 1e-9));
    assert!(da_residual(&net, &da) < 1e-6);
}

#[test]
fn det_coopt_rejects_unreachable_requirement() {
    let net = micro();
    let forecast = mean_forecast(&net).unwrap();
    let err = build_det_cooptimization(&net, Requirement { up: 200.0, down: 0.0 }, &forecast)
        .unwrap_err();
    match err {
        MarketError::InfeasibleRequirements {
            direction,
            required,
            available,
            ..
        } => {
            assert_eq!(direction, Direction::Up);
            assert_eq!(required, 200.0);
            assert_eq!(available, 100.0);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn det_coopt_covers_requirement_exactly() {
    let net = micro();
    let w = &net.wind_farms[0];
    let req = reserve_requirements(&BetaMarginal::new(w.alpha, w.beta).unwrap(), w.capacity, 0.99)
        .unwrap();
    assert!(req.up > 0.0 && req.down > 0.0);
    let forecast = mean_forecast(&net).unwrap();
    let (da, reserve) = build_det_cooptimization(&net, req, &forecast).unwrap();
    let up: f64 = reserve.up.iter().sum();
    let down: f64 = reserve.down.iter().sum();
    // positive reserve prices make the coverage rows bind
    assert!(close(up, req.up, 1e-7), "{up} vs {}", req.up);
    assert!(close(down, req.down, 1e-7), "{down} vs {}", req.down);
    for (i, u) in net.units.iter().enumerate() {
        assert!(da.p[i] + reserve.up[i] <= u.p_max + 1e-7);
        assert!(da.p[i] - reserve.down[i] >= -1e-7);
    }
    let lp = det_cooptimization_problem(&net, req, &forecast).unwrap();
    let sol = lp.solve().unwrap();
    let row = lp.constraints().iter().position(|c| c.name == "reqUP").unwrap();
    assert!(sol.dual[row].abs() > 1e-9);
}

#[test]
fn balancing_covers_shortfall_with_up_regulation() {
    let net = micro();
    let (da, _) = build_det_cooptimization(&net, Requirement::default(), &[35.0]).unwrap();
    let mut reserve = ReserveSchedule::none(2);
    reserve.up[0] = 50.0;
    let b = build_balancing(&net, &da, &reserve, &[0.0]).unwrap();
    assert!(close(b.r_up[0], 35.0, 1e-9));
    assert!(close(b.cost, 350.0, 1e-9));
    assert!(b.shed.iter().all(|s| s.abs() < 1e-9));
    assert!(rt_residual(&net, &da, &b, &[0.0]) < 1e-6);
}

#[test]
fn balancing_at_schedule_costs_nothing() {
    let net = micro();
    let (da, reserve) = build_det_cooptimization(&net, Requirement { up: 20.0, down: 20.0 }, &[35.0])
        .unwrap();
    let b = build_balancing(&net, &da, &reserve, &[35.0]).unwrap();
    assert!(b.cost.abs() < 1e-9);
    for v in b.r_up.iter().chain(&b.r_down).chain(&b.spill).chain(&b.shed) {
        assert!(v.abs() < 1e-9);
    }
}

#[test]
fn surplus_without_down_reserve_is_spilled() {
    let net = micro();
    let (da, _) = build_det_cooptimization(&net, Requirement::default(), &[35.0]).unwrap();
    let b = build_balancing(&net, &da, &ReserveSchedule::none(2), &[50.0]).unwrap();
    assert!(close(b.spill[0], 15.0, 1e-9));
    assert!(b.cost.abs() < 1e-9);
}

#[test]
fn shortfall_without_reserve_is_shed() {
    let net = micro();
    let (da, _) = build_det_cooptimization(&net, Requirement::default(), &[35.0]).unwrap();
    let b = build_balancing(&net, &da, &ReserveSchedule::none(2), &[10.0]).unwrap();
    assert!(close(b.shed[1], 25.0, 1e-9));
    assert!(close(b.cost, 25.0 * net.voll, 1e-9));
}

#[test]
fn reserve_market_picks_cheapest_units_with_full_allocation() {
    let net = micro();
    let reqs = [Requirement { up: 40.0, down: 0.0 }, Requirement { up: 40.0, down: 0.0 }];
    let r = build_reserve_capacity_market(&net, &reqs, &[1.0]).unwrap();
    // A offers 50 MW at $1, B the remaining 30 MW at $3
    assert!(close(r.cost, 50.0 * 1.0 + 30.0 * 3.0, 1e-9));
    assert!(close(r.up[0], 50.0, 1e-9));
    assert!(close(r.up[1], 30.0, 1e-9));
    match &r.allocation {
        ReserveAllocation::ByArea { up, cross_border, .. } => {
            for a in 0..2 {
                let covered: f64 = (0..2).map(|i| up[i][a]).sum();
                assert!(covered >= 40.0 - 1e-9);
            }
            assert!(cross_border.iter().all(|c| close(c.limit, 200.0, 1e-12)));
        }
        ReserveAllocation::Pooled => panic!("expected area allocation"),
    }
}

#[test]
fn cross_border_reserve_limited_by_allocated_capacity() {
    let net = micro();
    let reqs = [Requirement::default(), Requirement { up: 60.0, down: 0.0 }];
    let r = build_reserve_capacity_market(&net, &reqs, &[0.15]).unwrap();
    let ReserveAllocation::ByArea { cross_border, .. } = &r.allocation else {
        panic!("expected area allocation");
    };
    for c in cross_border {
        assert!(close(c.limit, 30.0, 1e-12));
        assert!(c.up <= 30.0 + 1e-9 && c.down <= 30.0 + 1e-9);
    }
    // 30 MW from A at $1 across the border, 30 MW from B at $3
    assert!(close(r.cost, 30.0 + 90.0, 1e-9));
}

#[test]
fn zero_allocation_keeps_reserve_local() {
    let net = micro();
    let reqs = [Requirement { up: 10.0, down: 5.0 }, Requirement { up: 40.0, down: 20.0 }];
    let r = build_reserve_capacity_market(&net, &reqs, &[0.0]).unwrap();
    let ReserveAllocation::ByArea { up, down, cross_border } = &r.allocation else {
        panic!("expected area allocation");
    };
    assert!(up[0][1].abs() < 1e-9 && up[1][0].abs() < 1e-9);
    assert!(down[0][1].abs() < 1e-9 && down[1][0].abs() < 1e-9);
    assert!(cross_border.iter().all(|c| c.up.abs() < 1e-9 && c.down.abs() < 1e-9));

    let short = [Requirement::default(), Requirement { up: 60.0, down: 0.0 }];
    match build_reserve_capacity_market(&net, &short, &[0.0]).unwrap_err() {
        MarketError::InfeasibleRequirements { cause, scope, .. } => {
            assert!(cause.contains("X*f_max"), "{cause}");
            assert!(scope.contains("a2"));
        }
        other => panic!("unexpected {other:?}"),
    }
    let too_much = [Requirement::default(), Requirement { up: 120.0, down: 0.0 }];
    match build_reserve_capacity_market(&net, &too_much, &[1.0]).unwrap_err() {
        MarketError::InfeasibleRequirements { cause, .. } => {
            assert!(cause.contains("unit reserve offers"), "{cause}")
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn energy_only_respects_allocated_tie_capacity() {
    let net = micro();
    let none = ReserveSchedule::none(2);
    let autarky = build_energy_only_da(&net, &none, &[1.0], &[35.0]).unwrap();
    assert!(autarky.flow[0].abs() < 1e-9);
    assert!(close(autarky.p[1], 80.0, 1e-9));
    assert!(close(autarky.energy_cost, 2400.0, 1e-9));

    let big = net.with_dc_capacity(60.0);
    let partial = build_energy_only_da(&big, &none, &[0.5], &[35.0]).unwrap();
    assert!(partial.flow[0].abs() <= 30.0 + 1e-9);
    // the 30 MW that fit through the link come from free wind
    assert!(close(partial.energy_cost, 50.0 * 30.0, 1e-9));

    let full = build_energy_only_da(&net, &none, &[0.15], &[35.0]).unwrap();
    assert!(full.flow[0].abs() <= 170.0 + 1e-9);
    assert!(da_residual(&net, &full) < 1e-6);
}

#[test]
fn energy_only_keeps_headroom_and_footroom() {
    let net = micro();
    let reqs = [Requirement { up: 10.0, down: 10.0 }, Requirement { up: 10.0, down: 10.0 }];
    let reserve = build_reserve_capacity_market(&net, &reqs, &[1.0]).unwrap();
    let da = build_energy_only_da(&net, &reserve, &[0.0], &[35.0]).unwrap();
    for (i, u) in net.units.iter().enumerate() {
        assert!(da.p[i] <= u.p_max - reserve.up[i] + 1e-9);
        assert!(da.p[i] >= reserve.down[i] - 1e-9);
    }
    // bus 1 has no load, so autarky cannot keep A above its footroom
    assert!(matches!(
        build_energy_only_da(&net, &reserve, &[1.0], &[35.0]),
        Err(MarketError::Infeasible { stage: Stage::EnergyOnlyDayAhead, .. })
    ));
}

#[test]
fn stochastic_zero_wind_is_merit_order() {
    let mut net = micro();
    net.wind_farms[0].capacity = 0.0;
    let set = scenarios(&net, &[0.0]);
    let out = build_stochastic(&net, &set).unwrap();
    assert!(close(out.costs.total, 800.0, 1e-9));
    assert!(close(out.costs.da_energy, out.costs.total, 1e-12));
    let b = &out.balancing[0];
    for v in b.r_up.iter().chain(&b.r_down).chain(&b.spill).chain(&b.shed) {
        assert!(v.abs() < 1e-9);
    }
}

#[test]
fn stochastic_two_scenarios_hand_optimum() {
    let net = micro();
    let set = scenarios(&net, &[50.0, 0.0]);
    let out = build_stochastic(&net, &set).unwrap();
    // Expected wind is 25 MW, so A covers 55 MW in expectation at $10 and
    // 50 MW of reserve at $1 is bought in one direction or the other.
    assert!(close(out.costs.total, 600.0, 1e-9), "{:?}", out.costs);
    let lp = stochastic_problem(&net, &set).unwrap();
    let sol = lp.solve().unwrap();
    assert!(close(sol.objective, out.costs.total, 1e-9));
    assert!(da_residual(&net, &out.da) < 1e-6);
    for (w, b) in out.balancing.iter().enumerate() {
        assert!(rt_residual(&net, &out.da, b, &set.realization(w)) < 1e-6);
        for i in 0..2 {
            assert!(b.r_up[i] <= out.reserve.up[i] + 1e-7);
            assert!(b.r_down[i] <= out.reserve.down[i] + 1e-7);
        }
    }
}

#[test]
fn stochastic_with_certain_mean_matches_deterministic() {
    let net = micro();
    let set = scenarios(&net, &[35.0, 35.0, 35.0]);
    let out = build_stochastic(&net, &set).unwrap();
    let (da, _) = build_det_cooptimization(&net, Requirement::default(), &[35.0]).unwrap();
    assert!(out.costs.expected_balancing.abs() < 1e-9);
    assert!(close(out.costs.total, da.energy_cost, 1e-9));
}

#[test]
fn stochastic_names_carry_scenario_suffix() {
    let net = micro();
    let lp = stochastic_problem(&net, &scenarios(&net, &[50.0, 0.0])).unwrap();
    let names: Vec<&str> = lp.variables().iter().map(|v| v.name.as_str()).collect();
    for want in ["p_i0", "pW_j0", "RUP_i1", "rUP_i0_w1", "rDN_i1_w0", "spill_j0_w0", "shed_n1_w1", "fRT_l0_w1"] {
        assert!(names.contains(&want), "missing {want}");
    }
}

#[test]
fn stochastic_dominates_deterministic_designs() {
    let net = micro();
    let set = scenarios(&net, &[50.0, 40.0, 30.0, 10.0, 0.0]);
    let w = &net.wind_farms[0];
    let req = reserve_requirements(&BetaMarginal::new(w.alpha, w.beta).unwrap(), w.capacity, 0.99)
        .unwrap();
    let stoch = build_stochastic(&net, &set).unwrap();
    let det = clear_det_coopt(&net, &set, req).unwrap();
    let seq = clear_sequential(&net.with_x(0.15), &set, &[req, Requirement::default()]).unwrap();
    for other in [&det, &seq] {
        assert!(
            stoch.costs.total <= other.costs.total * (1.0 + 1e-6) + 1e-9,
            "{} {} > {}",
            other.design,
            stoch.costs.total,
            other.costs.total
        );
        let c = other.costs;
        assert!(close(c.da_energy + c.reserve_capacity + c.expected_balancing, c.total, 1e-12));
    }
}

#[test]
fn stochastic_cost_non_increasing_in_capacity() {
    let net = micro();
    let set = scenarios(&net, &[50.0, 20.0, 0.0]);
    let mut last = f64::INFINITY;
    for cap in [10.0, 40.0, 80.0, 200.0] {
        let total = build_stochastic(&net.with_dc_capacity(cap), &set).unwrap().costs.total;
        assert!(total <= last * (1.0 + 1e-6), "{cap}: {total} > {last}");
        last = total;
    }
}

#[test]
fn bad_inputs_are_reported() {
    let net = micro();
    assert!(matches!(
        build_energy_only_da(&net, &ReserveSchedule::none(2), &[1.5], &[35.0]),
        Err(MarketError::InvalidInput(_))
    ));
    assert!(matches!(
        build_reserve_capacity_market(&net, &[Requirement::default()], &[0.0]),
        Err(MarketError::InvalidInput(_))
    ));
    assert!(matches!(
        build_det_cooptimization(&net, Requirement::default(), &[]),
        Err(MarketError::InvalidInput(_))
    ));
    assert_eq!("det-coopt".parse::<Design>().unwrap(), Design::DetCoopt);
    assert!("nodal".parse::<Design>().is_err());
}
