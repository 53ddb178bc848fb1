mod common;

use std::time::Instant;

use bml_core::markets::build_stochastic;

#[test]
fn stochastic_optimum_matches_exhaustive_search() {
    let net = common::load_case("micro.json");
    for values in [vec![50.0, 0.0], vec![40.0, 30.0, 0.0], vec![50.0, 20.0]] {
        let set = common::micro_scenarios(&net, &values);
        let start = Instant::now();
        let lp = build_stochastic(&net, &set).unwrap().costs.total;
        let solve_time = start.elapsed();
        let oracle = common::micro_brute_force(&net, &set);
        assert!(lp <= oracle + 1e-9, "{values:?}: LP {lp} above a feasible grid point {oracle}");
        assert!(((lp - oracle) / oracle).abs() <= 1e-4, "{values:?}: LP {lp} vs grid {oracle}");
        assert!(solve_time.as_secs_f64() < 5.0);
    }
}

#[test]
fn recourse_trades_in_merit_order() {
    // 35 MW short, 50 MW of $10 up-regulation available
    let none = (0.0, 0.0);
    let shed = (1000.0, 80.0);
    assert_eq!(common::single_bus_recourse(35.0, &[(10.0, 50.0), shed, none], &[none; 3]), 350.0);
    // 15 MW surplus spilled for free
    assert_eq!(common::single_bus_recourse(-15.0, &[shed, none, none], &[(0.0, 50.0), none, none]), 0.0);
    // cheap up and expensive down trade against each other
    assert_eq!(common::single_bus_recourse(0.0, &[(10.0, 5.0), none, none], &[(30.0, 5.0), none, none]), -100.0);
    assert!(common::single_bus_recourse(10.0, &[(10.0, 5.0), none, none], &[none; 3]).is_infinite());
}
