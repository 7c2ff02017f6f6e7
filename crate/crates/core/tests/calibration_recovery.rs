//! γ recovery from model-generated histories, slope estimation, and the
//! interactive calibration session.

use std::sync::Arc;

use heatdiff_core::calibration::{
    auto_calibrate, auto_calibrate_all, historical_trend, project_region, CalibrationOptions, CalibrationSession,
    PROJECTION_YEARS,
};
use heatdiff_core::costs::GammaProvenance;
use heatdiff_core::dynamics::run::RunConfig;
use heatdiff_core::io::dataset::{load_dataset, ShareHistory};
use heatdiff_core::series::TimeSeries;
use heatdiff_core::synthetic::{base_dataset, generate_history, linear_history, truth_gammas, HANDOVER, HISTORY_FROM};
use heatdiff_core::Error;
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn shipped() -> heatdiff_core::io::dataset::Dataset {
    load_dataset(&std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic")).unwrap()
}

#[test]
fn known_gamma_is_recovered_up_to_gauge() {
    let config = RunConfig::default();
    let mut dataset = base_dataset();
    let truth = truth_gammas(&dataset).unwrap();
    generate_history(&mut dataset, &truth, HANDOVER, &config).unwrap();
    linear_history(&mut dataset, &truth, HISTORY_FROM, HANDOVER, &config).unwrap();

    let (fitted, results) = auto_calibrate_all(&dataset, &config, &CalibrationOptions::default()).unwrap();
    for result in &results {
        let d = &result.diagnostics;
        assert!(d.converged, "{}: max residual {}", result.region, d.max_residual);
        assert!(d.max_residual <= 1e-4);

        let region = dataset.region_index(&result.region).unwrap();
        let shares = dataset.regions[region].history.at(HANDOVER).unwrap();
        let gauge = dataset.tech_index(d.gauge.as_deref().unwrap()).unwrap();
        let want = &truth.slice(&result.region).unwrap().values;
        let got = &fitted.slice(&result.region).unwrap().values;
        let offset = got[gauge] - want[gauge];
        for k in (0..shares.len()).filter(|&k| shares[k] > 0.0) {
            let err_cents = 100.0 * (got[k] - want[k] - offset).abs();
            assert!(err_cents <= 0.1, "{} {}: off by {err_cents} ct/kWh", result.region, dataset.technologies[k].id);
        }
    }
}

#[test]
fn single_technology_region_gets_zero_gamma() {
    let mut dataset = base_dataset();
    let n = dataset.technologies.len();
    let gas = dataset.tech_index("gas").unwrap();
    let only_gas: Vec<f64> = (0..n).map(|k| if k == gas { 1.0 } else { 0.0 }).collect();
    let years: Vec<i32> = (HISTORY_FROM..=HANDOVER).collect();
    dataset.regions[0].history = ShareHistory { shares: vec![only_gas; years.len()], years };
    let result = auto_calibrate(&dataset, 0, &RunConfig::default(), &CalibrationOptions::default()).unwrap();
    assert!(result.gamma.values.iter().all(|g| *g == 0.0), "{:?}", result.gamma.values);
    assert!(result.diagnostics.converged);
    assert_eq!(result.gamma.provenance[gas], GammaProvenance::Calibrated);
}

/// With Normal noise the OLS slope error is Student-t distributed, so about
/// P(|t_3| < 1) = 0.609 of five-point estimates fall within one standard error.
#[test]
fn noisy_slope_is_recovered_within_its_standard_error() {
    let noise = Normal::new(0.0, 0.004).unwrap();
    let mut rng = StdRng::seed_from_u64(42);
    let trials = 4000;
    let mut within_one = 0;
    let mut within_three = 0;
    for _ in 0..trials {
        let series = TimeSeries::from_fn(2008, 2015, |y| 0.2 + 0.012 * f64::from(y - 2008) + noise.sample(&mut rng));
        let est = historical_trend(&series, 2015, 5).unwrap();
        assert_eq!(est.points, 5);
        let z = (est.slope - 0.012).abs() / est.std_error;
        within_one += usize::from(z <= 1.0);
        within_three += usize::from(z <= 3.0);
    }
    let one = within_one as f64 / f64::from(trials);
    let three = within_three as f64 / f64::from(trials);
    assert!((one - 0.609).abs() < 0.03, "coverage at one standard error {one}");
    assert!((three - 0.942).abs() < 0.02, "coverage at three standard errors {three}");
}

#[test]
fn calibrated_gamma_reproduces_handover_slopes() {
    let dataset = shipped();
    let gammas = dataset.gammas.clone().unwrap();
    let options = CalibrationOptions::default();
    for (r, region) in dataset.regions.iter().enumerate() {
        let gamma = &gammas.slice(&region.id).unwrap().values;
        let p = project_region(&dataset, r, gamma, &RunConfig::default(), &options, PROJECTION_YEARS).unwrap();
        assert!(p.within_tolerance(), "{}: {:?}", region.id, p.residuals);
    }
}

fn session() -> CalibrationSession {
    let dataset = Arc::new(shipped());
    let gamma = dataset.gammas.as_ref().unwrap().slice("north").unwrap().clone();
    CalibrationSession::new(dataset, "north", gamma, RunConfig::default(), CalibrationOptions::default()).unwrap()
}

#[test]
fn overriding_with_the_auto_value_changes_nothing() {
    let mut s = session();
    s.auto_calibrate().unwrap();
    let auto = s.projection().clone();
    let k = s.projection().technologies.iter().position(|t| t == "gas").unwrap();
    let value = s.gamma().values[k];
    let after = s.apply_gamma_override("gas", value).unwrap().clone();
    assert_eq!(after, auto);
    assert_eq!(s.gamma().provenance[k], GammaProvenance::Manual);
}

#[test]
fn large_positive_gamma_lowers_the_projected_slope() {
    let mut s = session();
    for tech in ["gas", "hp_air_water", "biomass_boiler"] {
        let k = s.projection().technologies.iter().position(|t| t == tech).unwrap();
        let before = s.projection().model_slopes[k];
        let original = s.gamma().values[k];
        let after = s.apply_gamma_override(tech, original + 0.5).unwrap().model_slopes[k];
        assert!(after < before, "{tech}: {before} -> {after}");
        s.apply_gamma_override(tech, original).unwrap();
    }
}

#[test]
fn override_then_revert_is_bit_identical() {
    let mut s = session();
    let original = s.projection().clone();
    let k = original.technologies.iter().position(|t| t == "oil").unwrap();
    let value = s.gamma().values[k];
    s.apply_gamma_override("oil", value - 0.03).unwrap();
    assert_ne!(s.projection(), &original);
    s.apply_gamma_override("oil", value).unwrap();
    assert_eq!(s.projection(), &original);
    let a: Vec<u64> = s.projection().shares.iter().flatten().map(|v| v.to_bits()).collect();
    let b: Vec<u64> = original.shares.iter().flatten().map(|v| v.to_bits()).collect();
    assert_eq!(a, b);
}

#[test]
fn closed_session_rejects_edits() {
    let mut s = session();
    s.close();
    assert!(matches!(s.apply_gamma_override("gas", 0.0), Err(Error::Session(_))));
    assert!(matches!(s.auto_calibrate(), Err(Error::Session(_))));
    assert!(matches!(session().apply_gamma_override("fusion", 0.0), Err(_)));
}
