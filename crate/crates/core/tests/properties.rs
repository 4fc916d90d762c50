//! Randomized invariants of the model, the solvers and the association rules.

mod common;

use common::tiny_instance;
use hetnet::balancer::{rate_balance, BalancerConfig};
use hetnet::baselines::{fit_biases, fixed_assoc_minimize, re_associate, BiasFitConfig, BiasVector, RsrpTable};
use hetnet::energymin::{minimize_energy, EnergyConfig};
use hetnet::netmodel::{build_rate_table, generate_scenario, path_loss, total_power, CellKind, LayoutParams};
use hetnet::oracle::exhaustive_min_power;
use hetnet::patterns::{cluster_patterns, enumerate_all, ClusterMap, PatternSet, Provenance};
use hetnet::{DemandProfile, RadioConfig};
use proptest::prelude::*;

fn demands(points: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e4f64..1e6, points)
}

fn rsrp_rows() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..6, 1usize..15).prop_flat_map(|(b, k)| prop::collection::vec(prop::collection::vec(-130.0f64..-60.0, k), b))
}

/// Count of association entries that differ from the reference.
fn mismatches(s: &[Vec<u8>], reference: &[Vec<u8>]) -> f64 {
    s.iter().zip(reference).map(|(a, b)| a.iter().zip(b).filter(|(x, y)| x != y).count() as f64).sum()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn balancing_bracket_holds_every_iteration(seed in 0u64..10_000, picos in 1usize..4, d in demands(5)) {
        let inst = tiny_instance(seed, picos, d.len(), 1.0);
        let demand = DemandProfile::new(d).unwrap();
        let out = rate_balance(&inst.rates, &demand, &BalancerConfig::default()).unwrap();
        for step in &out.trace {
            prop_assert!(step.g <= step.z + 1e-9 * (1.0 + step.z.abs()));
        }
        // Weak duality, closed at termination.
        prop_assert!(out.r_sum_star <= out.dual_bound * (1.0 + 1e-9) + 1e-6);
        prop_assert!((out.r_sum_star - out.dual_bound).abs() <= 1e-6 * out.dual_bound.max(1.0));
    }

    #[test]
    fn balanced_rate_scales_with_rates_not_demands(seed in 0u64..10_000, d in demands(4), c in 0.1f64..10.0) {
        let inst = tiny_instance(seed, 2, d.len(), 1.0);
        let demand = DemandProfile::new(d).unwrap();
        let cfg = BalancerConfig::default();
        let base = rate_balance(&inst.rates, &demand, &cfg).unwrap().r_sum_star;
        let faster = rate_balance(&inst.rates.scaled(c), &demand, &cfg).unwrap().r_sum_star;
        let busier = rate_balance(&inst.rates, &demand.scaled(c).unwrap(), &cfg).unwrap().r_sum_star;
        prop_assert!((faster - c * base).abs() <= 1e-6 * c * base);
        prop_assert!((busier - base).abs() <= 1e-6 * base);
    }

    #[test]
    fn energy_iterates_meet_demand(seed in 0u64..10_000, picos in 1usize..4, points in 2usize..6, load in 0.05f64..0.9) {
        let inst = tiny_instance(seed, picos, points, load);
        let topo = &inst.scenario.topology;
        let report = minimize_energy(topo, &inst.rates, &inst.demand, &EnergyConfig::default()).unwrap();
        prop_assert!(report.feasible);
        for (r, d) in report.point_rates.iter().zip(inst.demand.demands()) {
            prop_assert!(*r >= d * (1.0 - 1e-6));
        }
        prop_assert!(report.active_patterns <= report.final_inner_cuts);
        prop_assert_eq!(report.p_tot_w, total_power(&report.rho, topo).unwrap());
    }

    #[test]
    fn all_ones_association_reproduces_joint_run(seed in 0u64..10_000, points in 2usize..6, load in 0.05f64..0.9) {
        let inst = tiny_instance(seed, 2, points, load);
        let topo = &inst.scenario.topology;
        let cfg = EnergyConfig::default();
        let free = minimize_energy(topo, &inst.rates, &inst.demand, &cfg).unwrap();
        let ones = vec![vec![1u8; topo.len()]; points];
        let fixed = fixed_assoc_minimize(topo, &inst.rates, &ones, &inst.demand, &cfg).unwrap();
        prop_assert_eq!(free, fixed);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn extra_patterns_never_raise_the_optimum(seed in 0u64..10_000, keep in prop::collection::vec(any::<bool>(), 7), load in 0.05f64..0.5) {
        let inst = tiny_instance(seed, 2, 3, load);
        let topo = &inst.scenario.topology;
        let all = enumerate_all(topo.len()).unwrap();
        let masks: Vec<u64> = all.masks().iter().zip(&keep).filter(|(_, k)| **k).map(|(m, _)| *m).collect();
        prop_assume!(!masks.is_empty());
        let subset = PatternSet::from_masks(topo.len(), masks, Provenance::Custom).unwrap();
        let sub_rates = build_rate_table(topo, &inst.scenario.gains, &RadioConfig::default(), &subset).unwrap();
        let full = exhaustive_min_power(topo, &inst.rates, &inst.demand, &all).unwrap();
        if let Ok(restricted) = exhaustive_min_power(topo, &sub_rates, &inst.demand, &subset) {
            prop_assert!(full.p_tot_w <= restricted.p_tot_w * (1.0 + 1e-9));
        }
    }

    #[test]
    fn generation_is_a_function_of_the_seed(seed in any::<u64>(), picos in 1usize..5, points in 1usize..20) {
        let layout = LayoutParams::new(1, picos, points);
        let radio = RadioConfig::default();
        let a = generate_scenario(seed, &layout, &radio).unwrap();
        let b = generate_scenario(seed, &layout, &radio).unwrap();
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn common_bias_shift_keeps_association(rows in rsrp_rows(), eta in prop::collection::vec(0.0f64..40.0, 6), shift in 0u32..20) {
        let cells = rows.len();
        let rsrp = RsrpTable::from_rows(rows).unwrap();
        let eta = &eta[..cells];
        let base = re_associate(&rsrp, &BiasVector::new(eta.to_vec()).unwrap()).unwrap();
        let moved = re_associate(&rsrp, &BiasVector::new(eta.iter().map(|v| v + shift as f64).collect()).unwrap()).unwrap();
        prop_assert_eq!(base, moved);
    }

    #[test]
    fn path_loss_grows_with_distance(a in 0.001f64..2.0, b in 0.001f64..2.0) {
        prop_assume!(a < b);
        for kind in [CellKind::Macro, CellKind::Pico] {
            prop_assert!(path_loss(kind, a).unwrap() < path_loss(kind, b).unwrap());
        }
    }

    #[test]
    fn power_is_monotone_in_usage(seed in 0u64..1000, rho in prop::collection::vec(0.0f64..1.0, 4), cell in 0usize..4, bump in 0.0f64..1.0) {
        let layout = LayoutParams::new(1, 3, 1);
        let topo = generate_scenario(seed, &layout, &RadioConfig::default()).unwrap().topology;
        let mut more = rho.clone();
        more[cell] = (more[cell] + bump).min(1.0);
        prop_assert!(total_power(&more, &topo).unwrap() >= total_power(&rho, &topo).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn bias_fit_never_worse_than_zero_biases(rows in rsrp_rows(), eta in prop::collection::vec(0.0f64..30.0, 6), flips in prop::collection::vec(any::<bool>(), 15)) {
        let cells = rows.len();
        let rsrp = RsrpTable::from_rows(rows).unwrap();
        // Reference: a biased association with some rows moved to cell 0.
        let mut reference = re_associate(&rsrp, &BiasVector::new(eta[..cells].to_vec()).unwrap()).unwrap();
        for (row, flip) in reference.iter_mut().zip(&flips) {
            if *flip {
                row.iter_mut().for_each(|v| *v = 0);
                row[0] = 1;
            }
        }
        let cfg = BiasFitConfig { orders: 2, grid_step_db: 1.0, ..BiasFitConfig::default() };
        let fit = fit_biases(&reference, &rsrp, &cfg).unwrap();
        let start = re_associate(&rsrp, &BiasVector::zeros(cells)).unwrap();
        prop_assert!(fit.error <= mismatches(&start, &reference));
        let got = re_associate(&rsrp, &fit.eta).unwrap();
        prop_assert_eq!(fit.error, mismatches(&got, &reference));
    }
}

#[test]
fn singleton_clusters_give_every_pattern() {
    for cells in 1..=6 {
        let singles = cluster_patterns(&ClusterMap::singletons(cells).unwrap()).unwrap();
        let mut a = singles.masks().to_vec();
        let mut b = enumerate_all(cells).unwrap().masks().to_vec();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
    }
}
