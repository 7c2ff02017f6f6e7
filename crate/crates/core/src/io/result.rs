//! Self-describing run output and the report views derived from it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::costs::GammaVector;
use crate::dynamics::run::RunConfig;
use crate::scenario::{PowerVariant, ScenarioSpec};
use crate::series::TimeSeries;
use crate::Result;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub scenario_id: String,
    pub scenario: ScenarioSpec,
    pub dataset_id: String,
    pub dataset_hash: String,
    pub config: RunConfig,
    pub code_version: String,
    pub power_variant: PowerVariant,
    pub notes: Vec<String>,
}

/// Undiscounted money flows of one region-year, constant euros.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Money {
    /// Capacity built times its pre-subsidy investment cost.
    pub invest_eur: f64,
    /// Fuel bought at pre-tax prices.
    pub energy_eur: f64,
    pub tax_eur: f64,
    pub subsidy_eur: f64,
}

impl Money {
    pub fn net_revenue(&self) -> f64 {
        self.tax_eur - self.subsidy_eur
    }

    pub fn add(&mut self, other: &Money) {
        self.invest_eur += other.invest_eur;
        self.energy_eur += other.energy_eur;
        self.tax_eur += other.tax_eur;
        self.subsidy_eur += other.subsidy_eur;
    }
}

/// One region-year. Shares, demand level and capacity stock are taken at
/// the start of the year; energy, emissions, money and capacity
/// additions/scrapping are totals over the year.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionYear {
    pub year: i32,
    pub shares: Vec<f64>,
    /// kWh/year.
    pub ue_total_kwh: f64,
    pub water_fraction: f64,
    /// kWh of useful heat per technology.
    pub ue_kwh: Vec<f64>,
    /// kWh of final energy per fuel, in `RunResult::fuels` order.
    pub final_kwh: Vec<f64>,
    pub capacity_kw: Vec<f64>,
    pub built_kw: Vec<f64>,
    pub scrapped_kw: Vec<f64>,
    pub direct_kg: f64,
    pub indirect_decarb_kg: f64,
    pub indirect_baseline_kg: f64,
    pub money: Money,
}

impl RegionYear {
    pub fn indirect_kg(&self, variant: PowerVariant) -> f64 {
        match variant {
            PowerVariant::Decarbonisation15C => self.indirect_decarb_kg,
            PowerVariant::PowerBaseline => self.indirect_baseline_kg,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionResult {
    pub region: String,
    pub years: Vec<RegionYear>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub schema_version: u32,
    pub metadata: RunMetadata,
    pub technologies: Vec<String>,
    pub fuels: Vec<String>,
    pub years: Vec<i32>,
    pub regions: Vec<RegionResult>,
    pub gammas: GammaVector,
}

fn series(years: &[i32], values: impl Iterator<Item = f64>) -> TimeSeries {
    TimeSeries { years: years.to_vec(), values: values.collect() }
}

/// Shares per region and technology.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharesReport {
    pub technologies: Vec<String>,
    pub regions: BTreeMap<String, BTreeMap<String, TimeSeries>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmissionSeries {
    pub direct_kg: TimeSeries,
    pub indirect_decarb_kg: TimeSeries,
    pub indirect_baseline_kg: TimeSeries,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmissionsReport {
    pub regions: BTreeMap<String, EmissionSeries>,
    pub total: EmissionSeries,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoneySeries {
    pub invest_eur: TimeSeries,
    pub energy_eur: TimeSeries,
    pub tax_eur: TimeSeries,
    pub subsidy_eur: TimeSeries,
    pub net_revenue_eur: TimeSeries,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoneyReport {
    pub regions: BTreeMap<String, MoneySeries>,
    pub total: MoneySeries,
}

impl RunResult {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn region(&self, id: &str) -> Option<&RegionResult> {
        self.regions.iter().find(|r| r.region == id)
    }

    pub fn shares_report(&self) -> SharesReport {
        let regions = self
            .regions
            .iter()
            .map(|r| {
                let by_tech = self
                    .technologies
                    .iter()
                    .enumerate()
                    .map(|(k, t)| (t.clone(), series(&self.years, r.years.iter().map(|y| y.shares[k]))))
                    .collect();
                (r.region.clone(), by_tech)
            })
            .collect();
        SharesReport { technologies: self.technologies.clone(), regions }
    }

    pub fn emissions_report(&self) -> EmissionsReport {
        let of = |rows: &dyn Fn(usize) -> (f64, f64, f64)| EmissionSeries {
            direct_kg: series(&self.years, (0..self.years.len()).map(|k| rows(k).0)),
            indirect_decarb_kg: series(&self.years, (0..self.years.len()).map(|k| rows(k).1)),
            indirect_baseline_kg: series(&self.years, (0..self.years.len()).map(|k| rows(k).2)),
        };
        let regions = self
            .regions
            .iter()
            .map(|r| {
                let rows = |k: usize| {
                    let y = &r.years[k];
                    (y.direct_kg, y.indirect_decarb_kg, y.indirect_baseline_kg)
                };
                (r.region.clone(), of(&rows))
            })
            .collect();
        let total_rows = |k: usize| {
            self.regions.iter().fold((0.0, 0.0, 0.0), |acc, r| {
                let y = &r.years[k];
                (acc.0 + y.direct_kg, acc.1 + y.indirect_decarb_kg, acc.2 + y.indirect_baseline_kg)
            })
        };
        EmissionsReport { regions, total: of(&total_rows) }
    }

    pub fn money_report(&self) -> MoneyReport {
        let of = |rows: &dyn Fn(usize) -> Money| {
            let n = self.years.len();
            MoneySeries {
                invest_eur: series(&self.years, (0..n).map(|k| rows(k).invest_eur)),
                energy_eur: series(&self.years, (0..n).map(|k| rows(k).energy_eur)),
                tax_eur: series(&self.years, (0..n).map(|k| rows(k).tax_eur)),
                subsidy_eur: series(&self.years, (0..n).map(|k| rows(k).subsidy_eur)),
                net_revenue_eur: series(&self.years, (0..n).map(|k| rows(k).net_revenue())),
            }
        };
        let regions = self
            .regions
            .iter()
            .map(|r| (r.region.clone(), of(&|k: usize| r.years[k].money)))
            .collect();
        let total_rows = |k: usize| {
            let mut m = Money::default();
            for r in &self.regions {
                m.add(&r.years[k].money);
            }
            m
        };
        MoneyReport { regions, total: of(&total_rows) }
    }
}
