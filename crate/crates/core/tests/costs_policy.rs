//! Cost and policy anchors plus their algebraic properties.

use heatdiff_core::costs::{
    apply_policies, levelised_cost, CostDistribution, CostInputs, LearningEntry, LearningState, TechPolicy,
};
use heatdiff_core::scenario::{build_subsidy_series, build_tax_series, preset_scenario};
use heatdiff_core::synthetic::base_dataset;
use heatdiff_core::tech::{TechClass, Technology};
use proptest::prelude::*;

fn gas_boiler() -> Technology {
    Technology {
        id: "gas".into(),
        class: TechClass::FossilGas,
        conversion_efficiency: 0.9,
        lifetime: 20.0,
        learning_rate: 0.0,
        fuel: "gas".into(),
        carbon_content: 0.202,
        renewable_subsidy_eligible: false,
    }
}

fn gas_costs() -> CostInputs {
    CostInputs {
        ic: CostDistribution::new(434.0, 100.0),
        mr: CostDistribution::new(9.0, 2.0),
        fuel_price: CostDistribution::new(0.05, 0.01),
        cf: 0.2,
    }
}

#[test]
fn fifty_euro_tax_raises_gas_by_about_a_cent() {
    let tech = gas_boiler();
    let base = gas_costs();
    let taxed = apply_policies(&base, &tech, &TechPolicy { carbon_tax: 50.0, ..Default::default() }).unwrap();
    assert!((taxed.fuel_price.mean - base.fuel_price.mean - 0.0101).abs() < 1e-12);
    assert_eq!(taxed.ic, base.ic);
}

#[test]
fn tax_paths_quadruple_by_2050() {
    for (start, end) in [(50.0, 200.0), (100.0, 400.0)] {
        let s = build_tax_series(start);
        assert_eq!(s.at(2020).unwrap(), start);
        assert!((s.at(2050).unwrap() - end).abs() < 1e-9);
        assert!((s.at(2035).unwrap() - (start + end) / 2.0).abs() < 1e-9);
    }
}

#[test]
fn subsidy_holds_then_phases_out() {
    let s = build_subsidy_series(0.5).unwrap();
    assert_eq!(s.at(2020).unwrap(), 0.5);
    assert_eq!(s.at(2030).unwrap(), 0.5);
    assert!((s.at(2040).unwrap() - 0.25).abs() < 1e-12);
    assert_eq!(s.at(2050).unwrap(), 0.0);
    assert!(build_subsidy_series(1.5).is_err());
}

#[test]
fn one_doubling_at_thirty_percent_learning() {
    let mut state = LearningState::new(
        vec![LearningEntry { cumulative: 1e6, reference: 1e6, reference_ic: 1400.0, learning_rate: 0.3 }],
        0.1,
    )
    .unwrap();
    let ic = state.learning_update(0, 1e6).unwrap();
    assert!((ic - 980.0).abs() < 1e-9, "{ic}");
    assert!(state.learning_update(0, -1.0).is_err());
}

#[test]
fn learning_floor_bounds_the_cost() {
    let mut state = LearningState::new(
        vec![LearningEntry { cumulative: 1.0, reference: 1.0, reference_ic: 1000.0, learning_rate: 0.5 }],
        0.1,
    )
    .unwrap();
    let ic = state.learning_update(0, 1e12).unwrap();
    assert_eq!(ic, 100.0);
}

#[test]
fn constant_running_cost_passes_through() {
    let tech = gas_boiler();
    let costs = CostInputs { ic: CostDistribution::new(0.0, 0.0), ..gas_costs() };
    let lcoh = levelised_cost(&tech, &costs, 0.09).unwrap();
    let expected = 9.0 / (0.2 * 8766.0) + 0.05 / 0.9;
    assert!((lcoh - expected).abs() < 1e-15);
}

#[test]
fn subsidy_applies_only_to_eligible_technologies() {
    let dataset = base_dataset();
    let spec = preset_scenario("f", &dataset.kick_start_regions()).unwrap();
    let policy = spec.schedule.at("north", 2025);
    for tech in &dataset.technologies {
        let rate = policy.subsidy_rate(tech);
        if tech.renewable_subsidy_eligible {
            assert!(rate > 0.0, "{}", tech.id);
        } else {
            assert_eq!(rate, 0.0, "{}", tech.id);
        }
    }
}

fn lcoh_with_tax(tax: f64) -> f64 {
    let tech = gas_boiler();
    let costs = apply_policies(&gas_costs(), &tech, &TechPolicy { carbon_tax: tax, ..Default::default() }).unwrap();
    levelised_cost(&tech, &costs, 0.09).unwrap()
}

proptest! {
    #[test]
    fn carbon_tax_effects_add_up(a in 0.0..500.0f64, b in 0.0..500.0f64) {
        let zero = lcoh_with_tax(0.0);
        let joint = lcoh_with_tax(a + b) - zero;
        let separate = (lcoh_with_tax(a) - zero) + (lcoh_with_tax(b) - zero);
        prop_assert!((joint - separate).abs() < 1e-12);
    }

    #[test]
    fn learning_depends_only_on_cumulative_capacity(
        parts in prop::collection::vec(0.0..1e6f64, 1..10),
        lr in 0.0..0.5f64,
    ) {
        let entry = LearningEntry { cumulative: 1e5, reference: 1e5, reference_ic: 800.0, learning_rate: lr };
        let mut stepwise = LearningState::new(vec![entry], 0.0).unwrap();
        for p in &parts {
            stepwise.learning_update(0, *p).unwrap();
        }
        let mut once = LearningState::new(vec![entry], 0.0).unwrap();
        once.learning_update(0, parts.iter().sum()).unwrap();
        let a = stepwise.investment_cost(0);
        let b = once.investment_cost(0);
        prop_assert!((a - b).abs() <= 1e-9 * b.max(1.0));
    }

    #[test]
    fn investment_cost_never_rises(first in 0.0..1e6f64, second in 0.0..1e6f64, lr in 0.0..0.5f64) {
        let entry = LearningEntry { cumulative: 1e5, reference: 1e5, reference_ic: 800.0, learning_rate: lr };
        let mut state = LearningState::new(vec![entry], 0.1).unwrap();
        let a = state.learning_update(0, first).unwrap();
        let b = state.learning_update(0, second).unwrap();
        prop_assert!(b <= a);
    }
}
