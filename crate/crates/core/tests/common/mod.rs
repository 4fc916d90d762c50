#![allow(dead_code)]

use hetnet::balancer::{rate_balance, BalancerConfig};
use hetnet::netmodel::{build_rate_table, generate_scenario, LayoutParams, Scenario};
use hetnet::patterns::{enumerate_all, PatternSet};
use hetnet::{DemandProfile, RadioConfig, RateTable};

pub struct Instance {
    pub scenario: Scenario,
    pub patterns: PatternSet,
    pub rates: RateTable,
    pub demand: DemandProfile,
}

/// One macro with `picos` picos and `points` test points, all patterns.
/// Demand is uniform at `load` times the balanced per-point capacity.
pub fn tiny_instance(seed: u64, picos: usize, points: usize, load: f64) -> Instance {
    let mut layout = LayoutParams::new(1, picos, points);
    layout.isd_m = 500.0;
    let radio = RadioConfig::default();
    let scenario = generate_scenario(seed, &layout, &radio).expect("layout");
    let patterns = enumerate_all(scenario.topology.len()).expect("patterns");
    let rates = build_rate_table(&scenario.topology, &scenario.gains, &radio, &patterns).expect("rates");
    let unit = DemandProfile::uniform(points, 1.0).unwrap();
    let cap = rate_balance(&rates, &unit, &BalancerConfig::default()).expect("balance").r_sum_star;
    let demand = DemandProfile::uniform(points, load * cap / points as f64).unwrap();
    Instance { scenario, patterns, rates, demand }
}
