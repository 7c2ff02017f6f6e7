//! Baseline demand of the shipped synthetic regions, pinned to a golden file.
//! Set HEATDIFF_BLESS=1 to rewrite it after an intended change.

use std::fmt::Write as _;
use std::path::Path;

use heatdiff_core::demand::{demand_trajectory, DemandVariant};
use heatdiff_core::io::dataset::load_dataset;

const GOLDEN: &str = "tests/golden/demand_baseline.csv";

fn baseline_csv() -> String {
    let dataset = load_dataset(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic")).unwrap();
    let mut out = String::from("region,year,ue_total_kwh,water_fraction\n");
    for region in &dataset.regions {
        let t = demand_trajectory(&region.demand, &DemandVariant::baseline(), 2015).unwrap();
        for year in 2015..=2050 {
            let _ = writeln!(out, "{},{year},{},{}", region.id, t.ue_total.at(year).unwrap(), t.water_fraction.at(year).unwrap());
        }
    }
    out
}

#[test]
fn baseline_demand_matches_golden() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(GOLDEN);
    let current = baseline_csv();
    if std::env::var_os("HEATDIFF_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &current).unwrap();
        return;
    }
    let pinned = std::fs::read_to_string(&path).unwrap();
    assert_eq!(current, pinned, "demand drifted from {GOLDEN}");
}

#[test]
fn north_2015_by_hand() {
    // drivers.csv north 2015: pop 20281685.611213446, 46.75 m2, 3403.168191284836 HDD,
    // 95 kJ/m2/HDD, income 33295.34738705337, water 800 kWh at half-saturation 10000
    let pop: f64 = 20_281_685.611_213_446;
    let space = pop * 46.75 * 3403.168_191_284_836 * 95.0 / 3600.0;
    let water = 800.0 * 33_295.347_387_053_37 / (33_295.347_387_053_37 + 10_000.0) * pop;
    assert!((space - 85_151_083_684.348).abs() < 1.0);
    assert!((water - 12_477_752_160.913).abs() < 1.0);

    let csv = baseline_csv();
    let row = csv.lines().find(|l| l.starts_with("north,2015,")).unwrap();
    let fields: Vec<f64> = row.split(',').skip(2).map(|f| f.parse().unwrap()).collect();
    assert!((fields[0] - (space + water)).abs() <= 1e-9 * fields[0]);
    assert!((fields[1] - water / (space + water)).abs() < 1e-12);
}
