//! Solver outputs checked against the monolithic LP and the subset-enumeration
//! oracle on small instances.

mod common;

use common::tiny_instance;
use hetnet::balancer::{rate_balance, BalancerConfig};
use hetnet::baselines::{fixed_assoc_minimize, reuse1_minimize};
use hetnet::energymin::{initial_weights, minimize_energy, solve_weighted_l1, EnergyConfig};
use hetnet::netmodel::build_rate_table;
use hetnet::oracle::{direct_lp, exhaustive_min_power, DirectProblem};
use hetnet::patterns::reuse1;
use hetnet::{DemandProfile, RadioConfig};

#[test]
fn weighted_solve_matches_direct_lp() {
    for seed in 0..12 {
        let inst = tiny_instance(seed, 2 + (seed % 3) as usize, 3 + (seed % 4) as usize, 0.5);
        let topo = &inst.scenario.topology;
        let bal = rate_balance(&inst.rates, &inst.demand, &BalancerConfig::default()).unwrap();
        let w = initial_weights(topo);
        let cfg = EnergyConfig::default();
        let ours = solve_weighted_l1(&w, &inst.rates, &inst.demand, &bal.allocation, &cfg).unwrap();
        let lp = direct_lp(
            DirectProblem::Weighted { weights: w.values(), demand: inst.demand.demands() },
            &inst.rates,
        )
        .unwrap();
        assert!(lp.is_optimal());
        let rel = (ours.objective - lp.value).abs() / lp.value.abs().max(1.0);
        assert!(rel <= 1e-6, "seed {seed}: cutting plane {} vs LP {}", ours.objective, lp.value);
        assert!(ours.dual_bound <= ours.objective * (1.0 + 1e-9) + 1e-9);
    }
}

#[test]
fn energy_never_beats_subset_oracle() {
    for seed in 0..10 {
        let load = [0.1, 0.4, 0.7][(seed % 3) as usize];
        let inst = tiny_instance(seed, 2 + (seed % 3) as usize, 4 + (seed % 3) as usize, load);
        let topo = &inst.scenario.topology;
        let report = minimize_energy(topo, &inst.rates, &inst.demand, &EnergyConfig::default()).unwrap();
        assert!(report.feasible);
        let best = exhaustive_min_power(topo, &inst.rates, &inst.demand, &inst.patterns).unwrap();
        assert!(
            report.p_tot_w >= best.p_tot_w * (1.0 - 1e-6),
            "seed {seed}: heuristic {} below optimum {}",
            report.p_tot_w,
            best.p_tot_w
        );
    }
}

#[test]
fn all_ones_association_is_unrestricted() {
    for seed in 0..6 {
        let inst = tiny_instance(seed, 3, 5, 0.3);
        let topo = &inst.scenario.topology;
        let cfg = EnergyConfig::default();
        let free = minimize_energy(topo, &inst.rates, &inst.demand, &cfg).unwrap();
        let ones = vec![vec![1u8; topo.len()]; inst.demand.len()];
        let fixed = fixed_assoc_minimize(topo, &inst.rates, &ones, &inst.demand, &cfg).unwrap();
        assert!((free.p_tot_w - fixed.p_tot_w).abs() <= 1e-9 * free.p_tot_w.max(1.0));
        assert_eq!(free.active_cells, fixed.active_cells);
    }
}

#[test]
fn larger_pattern_set_never_costs_more_at_optimum() {
    let radio = RadioConfig::default();
    for seed in 0..6 {
        let inst = tiny_instance(seed, 2, 4, 0.2);
        let topo = &inst.scenario.topology;
        let only_all_on = reuse1(topo.len()).unwrap();
        let rates_r1 = build_rate_table(topo, &inst.scenario.gains, &radio, &only_all_on).unwrap();
        let full = exhaustive_min_power(topo, &inst.rates, &inst.demand, &inst.patterns).unwrap();
        let Ok(r1) = exhaustive_min_power(topo, &rates_r1, &inst.demand, &only_all_on) else {
            continue;
        };
        assert!(full.p_tot_w <= r1.p_tot_w * (1.0 + 1e-9), "seed {seed}");
    }
}

#[test]
fn reuse1_uses_one_pattern_and_costs_at_least_the_optimum() {
    let inst = tiny_instance(3, 3, 6, 0.2);
    let topo = &inst.scenario.topology;
    let radio = RadioConfig::default();
    let report = reuse1_minimize(topo, &inst.scenario.gains, &radio, &inst.demand, &EnergyConfig::default()).unwrap();
    assert!(report.feasible);
    assert_eq!(report.active_patterns, 1);
    let best = exhaustive_min_power(topo, &inst.rates, &inst.demand, &inst.patterns).unwrap();
    assert!(report.p_tot_w >= best.p_tot_w * (1.0 - 1e-9));
}

#[test]
fn zero_demand_costs_nothing() {
    let inst = tiny_instance(1, 2, 3, 0.5);
    let zero = DemandProfile::uniform(3, 0.0).unwrap();
    let report = minimize_energy(&inst.scenario.topology, &inst.rates, &zero, &EnergyConfig::default()).unwrap();
    assert!(report.feasible);
    assert_eq!(report.p_tot_w, 0.0);
    assert!(report.active_cells.is_empty());
}
