//! Desk-scale synthetic dataset: three regions, thirteen technologies,
//! drivers to 2050.
//!
//! Technology costs follow published appliance averages. Share histories for
//! 2008–2015 are produced by the model itself under known intangibles
//! ([`truth_gammas`]), so calibration can be checked against them.

use std::collections::BTreeMap;
use std::path::Path;

use crate::calibration::{auto_calibrate_all, CalibrationOptions};
use crate::choice::ClassMask;
use crate::costs::{CostDistribution, GammaProvenance, GammaSlice, GammaVector};
use crate::demand::{DemandDrivers, DemandSource, DemandVariant, RegionDemandInputs, WaterDemandParams};
use crate::dynamics::run::{ModelParams, RegionModel, RunConfig};
use crate::io::dataset::{load_dataset, Dataset, FuelPrice, GridIntensity, Region, RegionTech, ShareHistory, TechCosts};
use crate::scenario::{preset_scenario, PolicyAtT, PRESET_IDS};
use crate::series::TimeSeries;
use crate::tech::{TechClass, Technology, DISTRICT_HEAT, ELECTRICITY};
use crate::Result;

pub const DATASET_ID: &str = "synthetic";
pub const HISTORY_FROM: i32 = 2008;
pub const HANDOVER: i32 = 2015;
pub const LAST_YEAR: i32 = 2050;
const DT: f64 = 0.0625;

struct TechRow {
    id: &'static str,
    class: TechClass,
    ce: f64,
    learning_rate: f64,
    fuel: &'static str,
    ic: f64,
    mr: f64,
    eligible: bool,
    /// Intangible as a fraction of LCOH in the generating model.
    gamma_pct: f64,
}

const fn row(
    id: &'static str,
    class: TechClass,
    ce: f64,
    learning_rate: f64,
    fuel: &'static str,
    ic: f64,
    mr: f64,
    eligible: bool,
    gamma_pct: f64,
) -> TechRow {
    TechRow { id, class, ce, learning_rate, fuel, ic, mr, eligible, gamma_pct }
}

use TechClass::*;

const TECHS: [TechRow; 13] = [
    row("oil", FossilOil, 0.75, 0.0, "oil", 471.0, 19.0, false, -0.12),
    row("oil_cond", FossilOil, 0.86, 0.10, "oil", 512.0, 20.0, false, -0.13),
    row("gas", FossilGas, 0.75, 0.0, "gas", 391.0, 8.0, false, -0.13),
    row("gas_cond", FossilGas, 0.90, 0.10, "gas", 434.0, 9.0, false, -0.20),
    row("biomass_stove", TraditionalBiomass, 0.50, 0.0, "biomass", 440.0, 0.1, false, -0.11),
    row("biomass_boiler", ModernBiomass, 0.85, 0.10, "biomass", 523.0, 2.0, true, 0.37),
    row("coal", FossilCoal, 0.75, 0.0, "coal", 247.0, 5.0, false, 0.84),
    row("district_heat", DistrictHeat, 0.98, 0.0, DISTRICT_HEAT, 265.0, 16.0, false, -0.15),
    row("direct_electric", DirectElectric, 1.00, 0.0, ELECTRICITY, 538.0, 0.5, false, -0.27),
    row("hp_ground", HeatPump, 3.50, 0.30, ELECTRICITY, 1400.0, 14.0, true, -0.07),
    row("hp_air_water", HeatPump, 2.60, 0.30, ELECTRICITY, 750.0, 15.0, true, -0.08),
    row("hp_air_air", HeatPump, 2.60, 0.30, ELECTRICITY, 510.0, 51.0, true, -0.05),
    row("solar_thermal", SolarThermal, 1.00, 0.10, "solar", 773.0, 8.0, true, -0.08),
];

/// kgCO2 per kWh of fuel burnt on site.
fn carbon(fuel: &str) -> f64 {
    match fuel {
        "oil" => 0.267,
        "gas" => 0.202,
        "coal" => 0.341,
        _ => 0.0,
    }
}

struct RegionSpec {
    id: &'static str,
    kick_start: bool,
    /// Heating capacity factor and solar capacity factor.
    cf: f64,
    solar_cf: f64,
    ic_factor: f64,
    hp_ce: f64,
    stove_ce: f64,
    prices: [(&'static str, f64); 7],
    shares_2008: [f64; 13],
    population: (f64, f64),
    floor: (f64, f64),
    hdd: (f64, f64),
    intensity: f64,
    income: (f64, f64),
    grid: (f64, f64),
}

const REGIONS: [RegionSpec; 3] = [
    RegionSpec {
        id: "north",
        kick_start: false,
        cf: 0.22,
        solar_cf: 0.08,
        ic_factor: 1.0,
        hp_ce: 2.5,
        stove_ce: 0.5,
        prices: [
            ("oil", 0.065),
            ("gas", 0.055),
            ("biomass", 0.025),
            ("coal", 0.020),
            (DISTRICT_HEAT, 0.055),
            (ELECTRICITY, 0.100),
            ("solar", 0.0),
        ],
        shares_2008: [0.12, 0.06, 0.18, 0.16, 0.02, 0.07, 0.01, 0.16, 0.08, 0.03, 0.05, 0.02, 0.04],
        population: (20.0e6, 0.002),
        floor: (45.0, 0.25),
        hdd: (3500.0, -0.004),
        intensity: 95.0,
        income: (30_000.0, 0.015),
        grid: (0.35, 0.26),
    },
    RegionSpec {
        id: "east",
        kick_start: true,
        cf: 0.22,
        solar_cf: 0.09,
        ic_factor: 0.6,
        hp_ce: 2.6,
        stove_ce: 0.3,
        prices: [
            ("oil", 0.050),
            ("gas", 0.025),
            ("biomass", 0.010),
            ("coal", 0.010),
            (DISTRICT_HEAT, 0.030),
            (ELECTRICITY, 0.060),
            ("solar", 0.0),
        ],
        shares_2008: [0.04, 0.0, 0.40, 0.05, 0.06, 0.0, 0.10, 0.25, 0.10, 0.0, 0.0, 0.0, 0.0],
        population: (40.0e6, -0.003),
        floor: (25.0, 0.35),
        hdd: (3200.0, -0.004),
        intensity: 150.0,
        income: (8_000.0, 0.03),
        grid: (0.80, 0.65),
    },
    RegionSpec {
        id: "south",
        kick_start: false,
        cf: 0.12,
        solar_cf: 0.14,
        ic_factor: 0.9,
        hp_ce: 2.7,
        stove_ce: 0.5,
        prices: [
            ("oil", 0.060),
            ("gas", 0.050),
            ("biomass", 0.008),
            ("coal", 0.012),
            (DISTRICT_HEAT, 0.050),
            (ELECTRICITY, 0.080),
            ("solar", 0.0),
        ],
        shares_2008: [0.10, 0.02, 0.12, 0.05, 0.30, 0.04, 0.08, 0.0, 0.12, 0.0, 0.03, 0.06, 0.08],
        population: (30.0e6, 0.005),
        floor: (35.0, 0.25),
        hdd: (1200.0, -0.006),
        intensity: 110.0,
        income: (20_000.0, 0.015),
        grid: (0.40, 0.30),
    },
];

fn technologies() -> (Vec<Technology>, Vec<TechCosts>) {
    TECHS
        .iter()
        .map(|t| {
            let tech = Technology {
                id: t.id.into(),
                class: t.class,
                conversion_efficiency: t.ce,
                lifetime: 20.0,
                learning_rate: t.learning_rate,
                fuel: t.fuel.into(),
                carbon_content: carbon(t.fuel),
                renewable_subsidy_eligible: t.eligible,
            };
            let costs = TechCosts {
                ic: CostDistribution::new(t.ic, t.ic / 3.0),
                mr: CostDistribution::new(t.mr, t.mr / 3.0),
            };
            (tech, costs)
        })
        .unzip()
}

fn growth(start: (f64, f64), year: i32) -> f64 {
    start.0 * (1.0 + start.1).powi(year - HISTORY_FROM)
}

fn region(spec: &RegionSpec) -> Region {
    let techs = TECHS
        .iter()
        .map(|t| {
            let (cf, ce) = match t.class {
                SolarThermal => (spec.solar_cf, None),
                HeatPump if t.id == "hp_air_water" || t.id == "hp_air_air" => (spec.cf, Some(spec.hp_ce)),
                TraditionalBiomass => (spec.cf, Some(spec.stove_ce)),
                _ => (spec.cf, None),
            };
            RegionTech { cf, ce, ic_factor: spec.ic_factor }
        })
        .collect();
    let fuel_prices: BTreeMap<String, FuelPrice> = spec
        .prices
        .iter()
        .map(|&(fuel, price)| {
            let rel = if fuel == "biomass" { 0.30 } else { 0.15 };
            let fp = FuelPrice {
                price: TimeSeries::constant(HANDOVER, HANDOVER, price),
                sd: TimeSeries::constant(HANDOVER, HANDOVER, price * rel),
            };
            (fuel.to_string(), fp)
        })
        .collect();
    let years: Vec<i32> = (HISTORY_FROM..=LAST_YEAR).collect();
    let drivers = DemandDrivers {
        population: years.iter().map(|&y| growth(spec.population, y)).collect(),
        floor_per_capita: years.iter().map(|&y| spec.floor.0 + spec.floor.1 * f64::from(y - HISTORY_FROM)).collect(),
        hdd: years.iter().map(|&y| growth(spec.hdd, y)).collect(),
        heating_intensity: vec![spec.intensity; years.len()],
        income: years.iter().map(|&y| growth(spec.income, y)).collect(),
        new_build_fraction: years.iter().map(|&y| (0.01 * f64::from(y - HISTORY_FROM)).min(1.0)).collect(),
        years,
    };
    let water = WaterDemandParams { saturation_level: 800.0, half_saturation_income: 10_000.0 };
    // grid falls to zero by 2040 under the 1.5 °C path and by 30 % under the baseline
    let (g0, g_base) = spec.grid;
    let decarbonisation = TimeSeries::from_fn(HISTORY_FROM, LAST_YEAR, |y| {
        if y <= 2020 {
            g0
        } else {
            (g0 * (1.0 - f64::from(y - 2020) / 20.0)).max(0.0)
        }
    });
    let baseline = TimeSeries::from_fn(HISTORY_FROM, LAST_YEAR, |y| {
        if y <= 2020 {
            g0
        } else {
            g0 + (g_base - g0) * f64::from(y - 2020) / 30.0
        }
    });
    Region {
        id: spec.id.into(),
        kick_start_eligible: spec.kick_start,
        techs,
        fuel_prices,
        history: ShareHistory { years: vec![HISTORY_FROM], shares: vec![spec.shares_2008.to_vec()] },
        demand: DemandSource::Drivers(RegionDemandInputs { drivers, water }),
        grid: GridIntensity { decarbonisation, baseline },
    }
}

/// Costs, drivers and 2008 shares only; no generated history, no γ.
pub fn base_dataset() -> Dataset {
    let (technologies, costs) = technologies();
    Dataset {
        id: DATASET_ID.into(),
        hash: String::new(),
        technologies,
        costs,
        regions: REGIONS.iter().map(region).collect(),
        class_mask: ClassMask::comfort(),
        gammas: None,
    }
}

/// Generating intangibles: a fixed fraction of each technology's levelised
/// cost in the handover year.
pub fn truth_gammas(dataset: &Dataset) -> Result<GammaVector> {
    let params = ModelParams::default();
    let n = dataset.technologies.len();
    let mut out = GammaVector::default();
    for (r, reg) in dataset.regions.iter().enumerate() {
        let model = RegionModel::new(dataset, r, &DemandVariant::baseline(), HISTORY_FROM, &vec![0.0; n], &params, true)?;
        let lcoh = model.levelised_costs(HANDOVER, &vec![1.0; n])?;
        let values = TECHS.iter().zip(&lcoh).map(|(t, l)| t.gamma_pct * l).collect();
        out.regions.insert(
            reg.id.clone(),
            GammaSlice { values, provenance: vec![GammaProvenance::Manual; n] },
        );
    }
    Ok(out)
}

/// Replaces each region's history with a zero-policy model run from its
/// first observed year to `to`, sampled yearly.
pub fn generate_history(dataset: &mut Dataset, gammas: &GammaVector, to: i32, config: &RunConfig) -> Result<()> {
    let n = dataset.technologies.len();
    let ones = vec![1.0; n];
    let none = PolicyAtT::default();
    let steps = config.steps_per_year()?;
    let mut histories = Vec::with_capacity(dataset.regions.len());
    for (r, reg) in dataset.regions.iter().enumerate() {
        let gamma = &gammas
            .slice(&reg.id)
            .ok_or_else(|| crate::Error::validation(format!("no gamma for region {}", reg.id)))?
            .values;
        let from = reg.history.years[0];
        let model = RegionModel::new(dataset, r, &DemandVariant::baseline(), from, gamma, &config.params, config.scrapping_enabled)?;
        let mut shares = reg.history.shares[0].clone();
        let mut history = ShareHistory { years: vec![from], shares: vec![shares.clone()] };
        for year in from..to {
            for s in 0..steps {
                let t = f64::from(year) + s as f64 * config.dt;
                shares = model.advance(&shares, t, config.dt, &none, &ones)?;
            }
            history.years.push(year + 1);
            history.shares.push(shares.clone());
        }
        histories.push(history);
    }
    for (reg, h) in dataset.regions.iter_mut().zip(histories) {
        reg.history = h;
    }
    Ok(())
}

/// Replaces each region's history with the straight line through its
/// `handover` shares along the model's zero-policy share rates there, back
/// to `from`. Its least-squares slope equals the model slope exactly.
pub fn linear_history(dataset: &mut Dataset, gammas: &GammaVector, from: i32, handover: i32, config: &RunConfig) -> Result<()> {
    let n = dataset.technologies.len();
    let mut histories = Vec::with_capacity(dataset.regions.len());
    for (r, reg) in dataset.regions.iter().enumerate() {
        let gamma = &gammas
            .slice(&reg.id)
            .ok_or_else(|| crate::Error::validation(format!("no gamma for region {}", reg.id)))?
            .values;
        let anchor = reg
            .history
            .at(handover)
            .ok_or_else(|| crate::Error::validation(format!("region {}: no shares in {handover}", reg.id)))?
            .to_vec();
        let model = RegionModel::new(dataset, r, &DemandVariant::baseline(), handover, gamma, &config.params, config.scrapping_enabled)?;
        let rates = model.share_rates(&anchor, handover, &PolicyAtT::default(), &vec![1.0; n])?;
        let years: Vec<i32> = (from..=handover).collect();
        let shares: Vec<Vec<f64>> = years
            .iter()
            .map(|&y| anchor.iter().zip(&rates).map(|(s, v)| s + v * f64::from(y - handover)).collect())
            .collect();
        if let Some(bad) = shares.iter().flatten().find(|s| **s < 0.0) {
            return Err(crate::Error::validation(format!(
                "region {}: linear history goes negative ({bad}); shorten the window",
                reg.id
            )));
        }
        histories.push(ShareHistory { years, shares });
    }
    for (reg, h) in dataset.regions.iter_mut().zip(histories) {
        reg.history = h;
    }
    Ok(())
}

fn generating_config() -> RunConfig {
    RunConfig { from: HANDOVER, to: LAST_YEAR, dt: DT, ..RunConfig::default() }
}

/// The shipped dataset: generated history plus auto-calibrated γ.
pub fn synthetic_dataset() -> Result<Dataset> {
    let mut dataset = base_dataset();
    let truth = truth_gammas(&dataset)?;
    generate_history(&mut dataset, &truth, HANDOVER, &generating_config())?;
    let (gammas, _) = auto_calibrate_all(&dataset, &RunConfig::default(), &CalibrationOptions::default())?;
    dataset.gammas = Some(gammas);
    Ok(dataset)
}

/// Writes the synthetic dataset into `dir` and reloads it, which fills in
/// the id and hash.
pub fn write_synthetic(dir: &Path) -> Result<Dataset> {
    synthetic_dataset()?.write(dir)?;
    load_dataset(dir)
}

/// Writes `<id>.json` for every preset, using the dataset's kick-start flags.
pub fn write_presets(dataset: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let kick = dataset.kick_start_regions();
    for id in PRESET_IDS {
        let spec = preset_scenario(id, &kick)?;
        let mut text = serde_json::to_string_pretty(&spec)?;
        text.push('\n');
        std::fs::write(dir.join(format!("{id}.json")), text)?;
    }
    Ok(())
}
