//! Useful-energy demand for space and water heating.
//!
//! Space heat is the product of population, floor area per capita, heating
//! degree days and heating intensity. Water heat saturates with income.
//! The demand variants differ in how heating intensity converges over time.

use serde::{Deserialize, Serialize};

use crate::series::TimeSeries;
use crate::{Error, Result, KJ_PER_KWH};

/// Lower and upper sanity bounds on heating intensity, kJ/m²/HDD.
pub const INTENSITY_BAND: (f64, f64) = (10.0, 300.0);

/// Annual demand drivers for one region on a shared year grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandDrivers {
    pub years: Vec<i32>,
    /// persons
    pub population: Vec<f64>,
    /// m² per person
    pub floor_per_capita: Vec<f64>,
    /// heating degree days per year
    pub hdd: Vec<f64>,
    /// kJ of useful heat per m² per HDD
    pub heating_intensity: Vec<f64>,
    /// currency per person per year
    pub income: Vec<f64>,
    /// Share of the building stock built after the new-build standard took effect.
    pub new_build_fraction: Vec<f64>,
}

impl DemandDrivers {
    pub fn validate(&self) -> Result<()> {
        let n = self.years.len();
        if n == 0 {
            return Err(Error::validation("demand drivers are empty"));
        }
        let columns: [(&str, &[f64]); 6] = [
            ("population", &self.population),
            ("floor_per_capita", &self.floor_per_capita),
            ("hdd", &self.hdd),
            ("heating_intensity", &self.heating_intensity),
            ("income", &self.income),
            ("new_build_fraction", &self.new_build_fraction),
        ];
        for (name, col) in columns {
            if col.len() != n {
                return Err(Error::validation(format!(
                    "driver series {name} has {} values for {n} years",
                    col.len()
                )));
            }
        }
        if self.years.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(Error::validation("driver years must be consecutive"));
        }
        for (name, col) in &columns[..5] {
            if let Some(v) = col.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(Error::validation(format!(
                    "driver {name} must be strictly positive, got {v}"
                )));
            }
        }
        if let Some(v) = self
            .heating_intensity
            .iter()
            .find(|v| !(INTENSITY_BAND.0..=INTENSITY_BAND.1).contains(*v))
        {
            return Err(Error::validation(format!(
                "heating intensity {v} kJ/m²/HDD outside [{}, {}]",
                INTENSITY_BAND.0, INTENSITY_BAND.1
            )));
        }
        if let Some(v) = self
            .new_build_fraction
            .iter()
            .find(|v| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::validation(format!(
                "new-build fraction {v} outside [0, 1]"
            )));
        }
        Ok(())
    }

    fn index(&self, year: i32) -> Result<usize> {
        self.years.binary_search(&year).map_err(|_| Error::OffGrid {
            year,
            first: self.years.first().copied().unwrap_or(0),
            last: self.years.last().copied().unwrap_or(-1),
        })
    }
}

/// Useful space-heat demand in kWh/year for one grid year.
pub fn space_heat_demand(drivers: &DemandDrivers, year: i32) -> Result<f64> {
    let idx = drivers.index(year)?;
    let factors = [
        drivers.population[idx],
        drivers.floor_per_capita[idx],
        drivers.hdd[idx],
        drivers.heating_intensity[idx],
    ];
    if let Some(v) = factors.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::validation(format!(
            "non-positive demand driver {v} in {year}"
        )));
    }
    Ok(factors.iter().product::<f64>() / KJ_PER_KWH)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaterDemandParams {
    /// kWh of useful heat per person per year at full saturation.
    pub saturation_level: f64,
    /// Income at which per-person demand reaches half the saturation level.
    pub half_saturation_income: f64,
}

impl WaterDemandParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.saturation_level >= 0.0) {
            return Err(Error::validation("water saturation level must be >= 0"));
        }
        if !(self.half_saturation_income > 0.0) {
            return Err(Error::validation("half-saturation income must be > 0"));
        }
        Ok(())
    }
}

/// Useful water-heat demand, kWh/year: `sat * income / (income + k)` per person.
pub fn water_heat_demand(params: &WaterDemandParams, income: f64, population: f64) -> Result<f64> {
    if !(income >= 0.0) {
        return Err(Error::validation(format!("income {income} must be >= 0")));
    }
    params.validate()?;
    if income.is_infinite() {
        return Ok(params.saturation_level * population);
    }
    let per_person = params.saturation_level * income / (income + params.half_saturation_income);
    Ok(per_person * population)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandVariantKind {
    /// Intensity converges to 90 kJ/m²/HDD by 2100.
    Baseline90by2100,
    /// As the baseline, plus better-insulated new buildings.
    Insulation19,
    /// New-build insulation plus retrofits: 45 kJ/m²/HDD by 2050.
    Retrofit45by2050,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandVariant {
    pub kind: DemandVariantKind,
    /// Maximum reduction of space-heat demand in new buildings.
    pub new_build_reduction: f64,
    pub target_intensity: f64,
    pub target_year: i32,
}

impl DemandVariant {
    pub fn baseline() -> Self {
        Self {
            kind: DemandVariantKind::Baseline90by2100,
            new_build_reduction: 0.0,
            target_intensity: 90.0,
            target_year: 2100,
        }
    }

    pub fn insulation() -> Self {
        Self {
            kind: DemandVariantKind::Insulation19,
            new_build_reduction: 0.35,
            target_intensity: 90.0,
            target_year: 2100,
        }
    }

    pub fn retrofit() -> Self {
        Self {
            kind: DemandVariantKind::Retrofit45by2050,
            new_build_reduction: 0.35,
            target_intensity: 45.0,
            target_year: 2050,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.new_build_reduction) {
            return Err(Error::validation(format!(
                "new_build_reduction {} outside [0, 1]",
                self.new_build_reduction
            )));
        }
        let pinned = match self.kind {
            DemandVariantKind::Baseline90by2100 => Some((90.0, 2100)),
            DemandVariantKind::Retrofit45by2050 => Some((45.0, 2050)),
            DemandVariantKind::Insulation19 => None,
        };
        if let Some((intensity, year)) = pinned {
            if self.target_intensity != intensity || self.target_year != year {
                return Err(Error::validation(format!(
                    "{:?} requires target {intensity} kJ/m²/HDD by {year}",
                    self.kind
                )));
            }
        }
        if !(self.target_intensity > 0.0) {
            return Err(Error::validation("target intensity must be > 0"));
        }
        Ok(())
    }
}

/// Heating intensity from `start_year` to `end_year`, moving linearly to the
/// variant's target and never rising above the starting level.
pub fn intensity_path(
    variant: &DemandVariant,
    start_intensity: f64,
    start_year: i32,
    end_year: i32,
) -> Result<TimeSeries> {
    if start_year >= end_year {
        return Err(Error::validation(format!(
            "intensity path needs start_year < end_year ({start_year} >= {end_year})"
        )));
    }
    variant.validate()?;
    if !(start_intensity > 0.0) {
        return Err(Error::validation("start intensity must be > 0"));
    }
    let target = variant.target_intensity;
    let span = (variant.target_year - start_year) as f64;
    Ok(TimeSeries::from_fn(start_year, end_year, |y| {
        if start_intensity <= target {
            start_intensity
        } else if y >= variant.target_year || span <= 0.0 {
            target
        } else {
            start_intensity + (target - start_intensity) * (y - start_year) as f64 / span
        }
    }))
}

/// Driver-based demand inputs of one region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionDemandInputs {
    pub drivers: DemandDrivers,
    pub water: WaterDemandParams,
}

/// Total useful demand and its water-heating fraction, per year.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandTrajectory {
    /// kWh of useful heat per year.
    pub ue_total: TimeSeries,
    pub water_fraction: TimeSeries,
}

impl DemandTrajectory {
    pub fn validate(&self) -> Result<()> {
        if self.ue_total.years != self.water_fraction.years {
            return Err(Error::validation("demand and water-fraction grids differ"));
        }
        if let Some(v) = self.ue_total.values.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::validation(format!("total useful demand {v} must be > 0")));
        }
        if let Some(v) = self
            .water_fraction
            .values
            .iter()
            .find(|v| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::validation(format!("water fraction {v} outside [0, 1]")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandSource {
    Drivers(RegionDemandInputs),
    /// Ingested trajectory, used verbatim for every variant.
    Trajectory(DemandTrajectory),
}

/// Total useful demand per year for a variant. The intensity path starts at
/// `base_year`; earlier years use the driver intensities unchanged.
pub fn demand_trajectory(
    source: &DemandSource,
    variant: &DemandVariant,
    base_year: i32,
) -> Result<DemandTrajectory> {
    let inputs = match source {
        DemandSource::Trajectory(t) => {
            t.validate()?;
            return Ok(t.clone());
        }
        DemandSource::Drivers(inputs) => inputs,
    };
    let drivers = &inputs.drivers;
    drivers.validate()?;
    inputs.water.validate()?;
    let base_idx = drivers.index(base_year)?;
    let last_year = *drivers.years.last().expect("validated non-empty");
    let path = if base_year < last_year {
        Some(intensity_path(
            variant,
            drivers.heating_intensity[base_idx],
            base_year,
            last_year,
        )?)
    } else {
        None
    };

    let mut ue = Vec::with_capacity(drivers.years.len());
    let mut wf = Vec::with_capacity(drivers.years.len());
    for (idx, &year) in drivers.years.iter().enumerate() {
        let intensity = match &path {
            Some(p) if year >= base_year => p.at(year)?,
            _ => drivers.heating_intensity[idx],
        };
        let space = drivers.population[idx]
            * drivers.floor_per_capita[idx]
            * drivers.hdd[idx]
            * intensity
            / KJ_PER_KWH
            * (1.0 - variant.new_build_reduction * drivers.new_build_fraction[idx]);
        let water = water_heat_demand(&inputs.water, drivers.income[idx], drivers.population[idx])?;
        let total = space + water;
        ue.push(total);
        wf.push(if total > 0.0 { water / total } else { 0.0 });
    }
    Ok(DemandTrajectory {
        ue_total: TimeSeries::new(drivers.years.clone(), ue)?,
        water_fraction: TimeSeries::new(drivers.years.clone(), wf)?,
    })
}
