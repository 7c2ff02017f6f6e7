//! Final energy, emissions, capacity and money accounts, and the
//! cumulative tables built from run results.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::io::dataset::{Dataset, GridIntensity};
use crate::io::result::{Money, RunResult};
use crate::scenario::PowerVariant;
use crate::series::TimeSeries;
use crate::{Error, Result, HOURS_PER_YEAR};

/// Reporting window of the cumulative tables.
pub const TABLE_FROM: i32 = 2020;
pub const TABLE_TO: i32 = 2050;

/// Final energy needed to deliver `ue` kWh of useful heat.
pub fn useful_to_final(ue: f64, ce: f64) -> Result<f64> {
    if !(ce > 0.0) {
        return Err(Error::DivisionByZero("conversion efficiency"));
    }
    Ok(ue / ce)
}

/// On-site carbon content per fuel, kgCO2/kWh.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EmissionFactors {
    pub carbon: BTreeMap<String, f64>,
}

impl EmissionFactors {
    pub fn from_dataset(dataset: &Dataset) -> Self {
        Self {
            carbon: dataset
                .technologies
                .iter()
                .map(|t| (t.fuel.clone(), t.carbon_content))
                .collect(),
        }
    }
}

/// On-site CO2 in kg from fuel use in kWh.
pub fn direct_emissions<'a>(fuel_use: impl IntoIterator<Item = (&'a str, f64)>, factors: &EmissionFactors) -> Result<f64> {
    let mut total = 0.0;
    for (fuel, kwh) in fuel_use {
        let c = factors
            .carbon
            .get(fuel)
            .ok_or_else(|| Error::validation(format!("unknown fuel `{fuel}`")))?;
        total += kwh * c;
    }
    Ok(total)
}

/// CO2 in kg from generating `electricity_kwh` in `year`.
pub fn indirect_emissions(electricity_kwh: f64, grid: &GridIntensity, variant: PowerVariant, year: i32) -> Result<f64> {
    Ok(electricity_kwh * grid.series(variant).at(year)?)
}

/// Capacity in kW needed to deliver `ue` kWh/year at each capacity factor.
pub fn capacity_stock(ue: &[f64], cf: &[f64]) -> Result<Vec<f64>> {
    ue.iter()
        .zip(cf)
        .map(|(u, c)| {
            if !(*c > 0.0) {
                Err(Error::DivisionByZero("capacity factor"))
            } else {
                Ok(u / (HOURS_PER_YEAR * c))
            }
        })
        .collect()
}

/// Generation capacity in kW behind an annual electricity demand.
pub fn required_generation_capacity(electricity_kwh: f64, grid_capacity_factor: f64) -> Result<f64> {
    if !(grid_capacity_factor > 0.0) {
        return Err(Error::DivisionByZero("grid capacity factor"));
    }
    Ok(electricity_kwh / (HOURS_PER_YEAR * grid_capacity_factor))
}

fn in_window(year: i32, from: i32, to: i32) -> bool {
    year >= from && year <= to
}

/// Direct CO2 in kg summed over regions and the years `from..=to`.
pub fn cumulative_direct_emissions(run: &RunResult, from: i32, to: i32) -> f64 {
    run.regions
        .iter()
        .flat_map(|r| r.years.iter())
        .filter(|y| in_window(y.year, from, to))
        .map(|y| y.direct_kg)
        .sum()
}

/// Indirect CO2 in kg for one grid variant over `from..=to`.
pub fn cumulative_indirect_emissions(run: &RunResult, variant: PowerVariant, from: i32, to: i32) -> f64 {
    run.regions
        .iter()
        .flat_map(|r| r.years.iter())
        .filter(|y| in_window(y.year, from, to))
        .map(|y| y.indirect_kg(variant))
        .sum()
}

/// Capacity scrapped prematurely over `from..=to`, kW.
pub fn cumulative_scrapped(run: &RunResult, from: i32, to: i32) -> f64 {
    run.regions
        .iter()
        .flat_map(|r| r.years.iter())
        .filter(|y| in_window(y.year, from, to))
        .map(|y| y.scrapped_kw.iter().sum::<f64>())
        .sum()
}

/// Money account of one region as annual series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoneyAccount {
    pub invest_expenses: TimeSeries,
    pub energy_expenses: TimeSeries,
    pub tax_revenue: TimeSeries,
    pub subsidy_outlay: TimeSeries,
}

impl MoneyAccount {
    /// Sum over `from..=to`.
    pub fn cumulative(&self, from: i32, to: i32) -> Money {
        let sum = |s: &TimeSeries| -> f64 {
            s.years
                .iter()
                .zip(&s.values)
                .filter(|(y, _)| in_window(**y, from, to))
                .map(|(_, v)| v)
                .sum()
        };
        Money {
            invest_eur: sum(&self.invest_expenses),
            energy_eur: sum(&self.energy_expenses),
            tax_eur: sum(&self.tax_revenue),
            subsidy_eur: sum(&self.subsidy_outlay),
        }
    }
}

pub fn expenditure_accounts(run: &RunResult) -> BTreeMap<String, MoneyAccount> {
    run.regions
        .iter()
        .map(|r| {
            let series = |f: fn(&Money) -> f64| TimeSeries {
                years: r.years.iter().map(|y| y.year).collect(),
                values: r.years.iter().map(|y| f(&y.money)).collect(),
            };
            (
                r.region.clone(),
                MoneyAccount {
                    invest_expenses: series(|m| m.invest_eur),
                    energy_expenses: series(|m| m.energy_eur),
                    tax_revenue: series(|m| m.tax_eur),
                    subsidy_outlay: series(|m| m.subsidy_eur),
                },
            )
        })
        .collect()
}

/// All-region money totals over `from..=to`.
pub fn cumulative_money(run: &RunResult, from: i32, to: i32) -> Money {
    let mut total = Money::default();
    for account in expenditure_accounts(run).values() {
        total.add(&account.cumulative(from, to));
    }
    total
}

/// Cumulative CO2 of one run, GtCO2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub scenario: String,
    pub heating_gt: f64,
    pub elec_decarb_gt: f64,
    pub elec_baseline_gt: f64,
    pub total_decarb_gt: f64,
    pub total_baseline_gt: f64,
}

pub const TABLE1_HEADER: &str = "scenario,heating_gt,elec_decarb_gt,elec_baseline_gt,total_decarb_gt,total_baseline_gt";

const KG_PER_GT: f64 = 1e12;

pub fn table1_row(run: &RunResult, from: i32, to: i32) -> Table1Row {
    let heating = cumulative_direct_emissions(run, from, to) / KG_PER_GT;
    let decarb = cumulative_indirect_emissions(run, PowerVariant::Decarbonisation15C, from, to) / KG_PER_GT;
    let baseline = cumulative_indirect_emissions(run, PowerVariant::PowerBaseline, from, to) / KG_PER_GT;
    Table1Row {
        scenario: run.metadata.scenario_id.clone(),
        heating_gt: heating,
        elec_decarb_gt: decarb,
        elec_baseline_gt: baseline,
        total_decarb_gt: heating + decarb,
        total_baseline_gt: heating + baseline,
    }
}

impl Table1Row {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.scenario, self.heating_gt, self.elec_decarb_gt, self.elec_baseline_gt, self.total_decarb_gt, self.total_baseline_gt
        )
    }
}

/// Cumulative changes of a run against a reference run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table3Row {
    pub scenario: String,
    pub reference: String,
    /// Billion euros.
    pub invest_delta_beur: f64,
    pub energy_delta_beur: f64,
    pub tax_delta_beur: f64,
    pub subsidy_delta_beur: f64,
    /// Change in tax revenue minus subsidy outlay.
    pub net_revenue_delta_beur: f64,
    /// Change in household spending: investment + energy + tax − subsidy.
    pub household_delta_beur: f64,
    /// Reduction in direct plus indirect CO2 under the run's grid variant, MtCO2.
    pub co2_reduction_mt: f64,
    /// Change in investment and energy expenses per tonne of net reduction;
    /// empty when the run does not reduce emissions.
    pub eur_per_tco2: Option<f64>,
}

pub const TABLE3_HEADER: &str = "scenario,reference,invest_delta_beur,energy_delta_beur,tax_delta_beur,subsidy_delta_beur,net_revenue_delta_beur,household_delta_beur,co2_reduction_mt,eur_per_tco2";

impl Table3Row {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.scenario,
            self.reference,
            self.invest_delta_beur,
            self.energy_delta_beur,
            self.tax_delta_beur,
            self.subsidy_delta_beur,
            self.net_revenue_delta_beur,
            self.household_delta_beur,
            self.co2_reduction_mt,
            self.eur_per_tco2.map(|v| v.to_string()).unwrap_or_default()
        )
    }
}

fn total_emissions_kg(run: &RunResult, from: i32, to: i32) -> f64 {
    cumulative_direct_emissions(run, from, to)
        + cumulative_indirect_emissions(run, run.metadata.power_variant, from, to)
}

/// Differences `run − reference` over `from..=to`.
pub fn compare_runs(run: &RunResult, reference: &RunResult, from: i32, to: i32) -> Result<Table3Row> {
    fn regions(r: &RunResult) -> Vec<&str> {
        let mut ids: Vec<&str> = r.regions.iter().map(|x| x.region.as_str()).collect();
        ids.sort_unstable();
        ids
    }
    if regions(run) != regions(reference) {
        return Err(Error::validation(format!(
            "runs {} and {} cover different regions",
            run.metadata.scenario_id, reference.metadata.scenario_id
        )));
    }
    const EUR_PER_BEUR: f64 = 1e9;
    let a = cumulative_money(run, from, to);
    let b = cumulative_money(reference, from, to);
    let invest = a.invest_eur - b.invest_eur;
    let energy = a.energy_eur - b.energy_eur;
    let tax = a.tax_eur - b.tax_eur;
    let subsidy = a.subsidy_eur - b.subsidy_eur;
    let reduction_kg = total_emissions_kg(reference, from, to) - total_emissions_kg(run, from, to);
    let reduction_t = reduction_kg / 1000.0;
    Ok(Table3Row {
        scenario: run.metadata.scenario_id.clone(),
        reference: reference.metadata.scenario_id.clone(),
        invest_delta_beur: invest / EUR_PER_BEUR,
        energy_delta_beur: energy / EUR_PER_BEUR,
        tax_delta_beur: tax / EUR_PER_BEUR,
        subsidy_delta_beur: subsidy / EUR_PER_BEUR,
        net_revenue_delta_beur: (tax - subsidy) / EUR_PER_BEUR,
        household_delta_beur: (invest + energy + tax - subsidy) / EUR_PER_BEUR,
        co2_reduction_mt: reduction_t / 1e6,
        eur_per_tco2: (reduction_t > 0.0).then(|| (invest + energy) / reduction_t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn final_energy() {
        assert!((useful_to_final(900.0, 0.9).unwrap() - 1000.0).abs() < 1e-12);
        assert_eq!(useful_to_final(123.0, 1.0).unwrap(), 123.0);
        assert_eq!(useful_to_final(350.0, 3.5).unwrap(), 100.0);
        assert!(useful_to_final(1.0, 0.0).is_err());
    }

    #[test]
    fn direct() {
        let f = EmissionFactors {
            carbon: [("gas", 0.202), ("electricity", 0.0)].into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        };
        assert!((direct_emissions([("gas", 1000.0)], &f).unwrap() - 202.0).abs() < 1e-12);
        assert_eq!(direct_emissions([("electricity", 5000.0)], &f).unwrap(), 0.0);
        assert!(direct_emissions([("peat", 1.0)], &f).is_err());
    }

    #[test]
    fn indirect() {
        let grid = GridIntensity {
            decarbonisation: TimeSeries::from_fn(2030, 2045, |y| if y >= 2040 { 0.0 } else { 0.3 }),
            baseline: TimeSeries::constant(2030, 2045, 0.4),
        };
        assert_eq!(indirect_emissions(1e6, &grid, PowerVariant::Decarbonisation15C, 2041).unwrap(), 0.0);
        assert_eq!(indirect_emissions(0.0, &grid, PowerVariant::PowerBaseline, 2035).unwrap(), 0.0);
        // 1 PWh at 0.4 kg/kWh is 0.4 Gt
        let kg = indirect_emissions(1e12, &grid, PowerVariant::PowerBaseline, 2035).unwrap();
        assert!((kg / KG_PER_GT - 0.4).abs() < 1e-12);
        let err = indirect_emissions(1.0, &grid, PowerVariant::PowerBaseline, 2050).unwrap_err();
        assert!(err.is_validation());
    }

    #[test]
    fn capacity() {
        assert_eq!(capacity_stock(&[8766.0], &[1.0]).unwrap(), vec![1.0]);
        let full = capacity_stock(&[1000.0], &[0.4]).unwrap()[0];
        let half = capacity_stock(&[1000.0], &[0.2]).unwrap()[0];
        assert!((half - 2.0 * full).abs() < 1e-12);
        assert!(capacity_stock(&[1.0], &[0.0]).is_err());
        // 9 PWh/y at CF 0.45 needs roughly 2.3 TW
        let kw = required_generation_capacity(9e12, 0.45).unwrap();
        assert!((2.0e9..=2.4e9).contains(&kw));
    }
}
