//! Directional behaviour of presets and parameter perturbations on the
//! synthetic dataset.

use std::path::Path;

use heatdiff_core::accounting::{cumulative_direct_emissions, cumulative_indirect_emissions};
use heatdiff_core::dynamics::run::{simulate_run, RunConfig};
use heatdiff_core::io::dataset::load_dataset;
use heatdiff_core::scenario::{preset_scenario, sensitivity_suite, PowerVariant, PRESET_IDS};

fn dataset() -> heatdiff_core::io::dataset::Dataset {
    load_dataset(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic")).unwrap()
}

#[test]
fn higher_tax_path_emits_less() {
    let d = dataset();
    let g = d.gammas.clone().unwrap();
    let kick = d.kick_start_regions();
    let cfg = RunConfig::default();
    let low = simulate_run(&d, &preset_scenario("d", &kick).unwrap(), &g, &cfg).unwrap();
    let high = simulate_run(&d, &preset_scenario("e", &kick).unwrap(), &g, &cfg).unwrap();
    assert!(cumulative_direct_emissions(&high, 2020, 2050) < cumulative_direct_emissions(&low, 2020, 2050));
}

#[test]
fn electrification_shifts_emissions_to_the_grid() {
    let d = dataset();
    let g = d.gammas.clone().unwrap();
    let kick = d.kick_start_regions();
    let cfg = RunConfig::default();
    let h = simulate_run(&d, &preset_scenario("h", &kick).unwrap(), &g, &cfg).unwrap();
    let j = simulate_run(&d, &preset_scenario("j", &kick).unwrap(), &g, &cfg).unwrap();
    assert!(
        cumulative_indirect_emissions(&j, PowerVariant::PowerBaseline, 2020, 2050)
            > cumulative_indirect_emissions(&h, PowerVariant::PowerBaseline, 2020, 2050)
    );
    assert!(cumulative_direct_emissions(&j, 2020, 2050) < cumulative_direct_emissions(&h, 2020, 2050));
}

#[test]
fn baseline_emits_most() {
    let d = dataset();
    let g = d.gammas.clone().unwrap();
    let kick = d.kick_start_regions();
    let cfg = RunConfig::default();
    let totals: Vec<(String, f64)> = PRESET_IDS
        .iter()
        .map(|id| {
            let run = simulate_run(&d, &preset_scenario(id, &kick).unwrap(), &g, &cfg).unwrap();
            (id.to_string(), cumulative_direct_emissions(&run, 2020, 2050))
        })
        .collect();
    let a = totals[0].1;
    for (id, total) in &totals[1..] {
        assert!(*total <= a, "{id} emits {total} > baseline {a}");
    }
}

#[test]
fn costlier_capital_and_weaker_intangibles_raise_emissions() {
    let d = dataset();
    let g = d.gammas.clone().unwrap();
    let kick = d.kick_start_regions();
    let specs: Vec<_> = ["a", "d", "h"].iter().map(|id| preset_scenario(id, &kick).unwrap()).collect();
    let table = sensitivity_suite(&d, &specs, &g, &RunConfig::default()).unwrap();
    let discount = table.columns.iter().position(|c| c == "discount_up").unwrap();
    let intangibles = table.columns.iter().position(|c| c == "intangibles_half").unwrap();
    for row in &table.rows {
        assert!(row.deviations_pct[discount] >= 0.0, "{}: {:?}", row.scenario, row.deviations_pct);
        assert!(row.deviations_pct[intangibles] >= 0.0, "{}: {:?}", row.scenario, row.deviations_pct);
    }
    let csv = table.to_csv();
    assert!(csv.starts_with("scenario,"));
    assert_eq!(csv.lines().count(), 1 + specs.len());
}

#[test]
fn runs_are_deterministic_across_thread_counts() {
    let d = dataset();
    let g = d.gammas.clone().unwrap();
    let spec = preset_scenario("i", &d.kick_start_regions()).unwrap();
    let run_in = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_run(&d, &spec, &g, &RunConfig::default()).unwrap().to_json().unwrap())
    };
    let one = run_in(1);
    assert_eq!(one, run_in(4));
    assert_eq!(one, run_in(3));
}
