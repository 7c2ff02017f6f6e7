//! Money and emission accounting on synthetic runs, and result export.

use std::path::Path;
use std::sync::OnceLock;

use heatdiff_core::accounting::{
    compare_runs, cumulative_money, cumulative_scrapped, EmissionFactors, TABLE1_HEADER, TABLE3_HEADER,
};
use heatdiff_core::dynamics::run::{simulate_run, RunConfig};
use heatdiff_core::io::dataset::{load_dataset, Dataset};
use heatdiff_core::io::export::{export_results, import_run, ExportFormat};
use heatdiff_core::io::result::RunResult;
use heatdiff_core::scenario::preset_scenario;

fn dataset() -> &'static Dataset {
    static D: OnceLock<Dataset> = OnceLock::new();
    D.get_or_init(|| load_dataset(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic")).unwrap())
}

fn run(id: &str) -> RunResult {
    let d = dataset();
    let spec = preset_scenario(id, &d.kick_start_regions()).unwrap();
    simulate_run(d, &spec, d.gammas.as_ref().unwrap(), &RunConfig::default()).unwrap()
}

#[test]
fn tax_revenue_matches_reintegrated_fuel_use() {
    let r = run("d");
    let factors = EmissionFactors::from_dataset(dataset());
    let schedule = &r.metadata.scenario.schedule;
    let mut checked = 0;
    for region in &r.regions {
        for y in &region.years {
            let tax = schedule.at(&region.region, y.year).carbon_tax;
            let expected: f64 = r
                .fuels
                .iter()
                .zip(&y.final_kwh)
                .map(|(fuel, kwh)| kwh * tax * factors.carbon.get(fuel).copied().unwrap_or(0.0) / 1000.0)
                .sum();
            let got = y.money.tax_eur;
            assert!(
                (got - expected).abs() <= 1e-9 * expected.abs().max(1.0),
                "{} {}: {got} vs {expected}",
                region.region,
                y.year
            );
            if expected > 0.0 {
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn no_policy_means_no_tax_and_no_subsidy() {
    let r = run("a");
    let m = cumulative_money(&r, 2015, 2050);
    assert_eq!(m.tax_eur, 0.0);
    assert_eq!(m.subsidy_eur, 0.0);
    assert!(m.invest_eur > 0.0 && m.energy_eur > 0.0);
}

#[test]
fn self_comparison_is_all_zero() {
    let r = run("h");
    let row = compare_runs(&r, &r, 2020, 2050).unwrap();
    let line = row.csv_line();
    for field in line.split(',').skip(2) {
        let v: f64 = field.parse().unwrap_or(0.0);
        assert_eq!(v, 0.0, "{line}");
    }
}

#[test]
fn report_headers() {
    assert_eq!(TABLE1_HEADER, "scenario,heating_gt,elec_decarb_gt,elec_baseline_gt,total_decarb_gt,total_baseline_gt");
    assert!(TABLE3_HEADER.split(',').any(|c| c == "eur_per_tco2"));
}

#[test]
fn structured_export_round_trips_byte_for_byte() {
    let r = run("i");
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    export_results(&r, &first, ExportFormat::Structured).unwrap();
    let back = import_run(&first).unwrap();
    assert_eq!(back, r);
    export_results(&back, &second, ExportFormat::Structured).unwrap();
    assert_eq!(
        std::fs::read(first.join("run.json")).unwrap(),
        std::fs::read(second.join("run.json")).unwrap()
    );
}

#[test]
fn csv_bundle_has_every_report() {
    let r = run("e");
    let dir = tempfile::tempdir().unwrap();
    let files = export_results(&r, dir.path(), ExportFormat::Csv).unwrap();
    let names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    for expected in ["shares.csv", "demand.csv", "fuel.csv", "emissions.csv", "money.csv", "table1.csv", "metadata.json"] {
        assert!(names.iter().any(|n| n == expected), "{expected} missing from {names:?}");
    }
    let table1 = std::fs::read_to_string(dir.path().join("table1.csv")).unwrap();
    let mut lines = table1.lines();
    assert_eq!(lines.next(), Some(TABLE1_HEADER));
    assert!(lines.next().unwrap().starts_with("e,"));
    let shares = std::fs::read_to_string(dir.path().join("shares.csv")).unwrap();
    let rows = shares.lines().count() - 1;
    assert_eq!(rows, r.regions.len() * r.years.len() * r.technologies.len());
}

#[test]
fn scrapping_is_reported_and_can_be_switched_off() {
    let d = dataset();
    let spec = preset_scenario("i", &d.kick_start_regions()).unwrap();
    let gammas = d.gammas.as_ref().unwrap();
    let on = simulate_run(d, &spec, gammas, &RunConfig::default()).unwrap();
    let off_cfg = RunConfig { scrapping_enabled: false, ..RunConfig::default() };
    let off = simulate_run(d, &spec, gammas, &off_cfg).unwrap();
    assert!(cumulative_scrapped(&on, 2020, 2050) > 0.0);
    assert_eq!(cumulative_scrapped(&off, 2020, 2050), 0.0);
}

#[test]
fn district_heat_stays_absent_where_there_is_no_network() {
    let d = dataset();
    let south = d.region_index("south").unwrap();
    assert!(!d.district_heat_present(south));
    let k = d.tech_index("district_heat").unwrap();
    for id in ["a", "h", "i", "j"] {
        let r = run(id);
        let region = r.region("south").unwrap();
        assert!(region.years.iter().all(|y| y.shares[k] == 0.0), "{id}");
    }
}

#[test]
fn direct_emissions_follow_fuel_use() {
    let r = run("j");
    let factors = EmissionFactors::from_dataset(dataset());
    for region in &r.regions {
        for y in &region.years {
            let direct: f64 = r
                .fuels
                .iter()
                .zip(&y.final_kwh)
                .map(|(fuel, kwh)| kwh * factors.carbon.get(fuel).copied().unwrap_or(0.0))
                .sum();
            assert!((direct - y.direct_kg).abs() <= 1e-9 * direct.max(1.0));
        }
    }
}
