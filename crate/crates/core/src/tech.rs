//! Static technology descriptors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Fuel id of grid electricity; the only fuel with indirect emissions.
pub const ELECTRICITY: &str = "electricity";
/// Fuel id of heat networks.
pub const DISTRICT_HEAT: &str = "district_heat";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TechClass {
    FossilCoal,
    FossilOil,
    FossilGas,
    TraditionalBiomass,
    ModernBiomass,
    DistrictHeat,
    DirectElectric,
    HeatPump,
    SolarThermal,
}

impl TechClass {
    pub const ALL: [TechClass; 9] = [
        TechClass::FossilCoal,
        TechClass::FossilOil,
        TechClass::FossilGas,
        TechClass::TraditionalBiomass,
        TechClass::ModernBiomass,
        TechClass::DistrictHeat,
        TechClass::DirectElectric,
        TechClass::HeatPump,
        TechClass::SolarThermal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TechClass::FossilCoal => "fossil_coal",
            TechClass::FossilOil => "fossil_oil",
            TechClass::FossilGas => "fossil_gas",
            TechClass::TraditionalBiomass => "traditional_biomass",
            TechClass::ModernBiomass => "modern_biomass",
            TechClass::DistrictHeat => "district_heat",
            TechClass::DirectElectric => "direct_electric",
            TechClass::HeatPump => "heat_pump",
            TechClass::SolarThermal => "solar_thermal",
        }
    }

    pub fn is_fossil(self) -> bool {
        matches!(
            self,
            TechClass::FossilCoal | TechClass::FossilOil | TechClass::FossilGas
        )
    }

    /// Modern renewables: the default kick-start targets.
    pub fn is_renewable(self) -> bool {
        matches!(
            self,
            TechClass::ModernBiomass | TechClass::HeatPump | TechClass::SolarThermal
        )
    }

    /// Classes households with a modern system will not switch back to.
    pub fn is_low_comfort(self) -> bool {
        matches!(self, TechClass::FossilCoal | TechClass::TraditionalBiomass)
    }

    /// Working systems of these classes may be scrapped before end of life.
    pub fn is_scrap_incumbent(self) -> bool {
        self.is_fossil() || self == TechClass::TraditionalBiomass
    }

    /// Classes a household may scrap towards.
    pub fn is_scrap_candidate(self) -> bool {
        self.is_renewable()
    }

    pub fn uses_electricity(self) -> bool {
        matches!(self, TechClass::DirectElectric | TechClass::HeatPump)
    }
}

impl fmt::Display for TechClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TechClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TechClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| Error::validation(format!("unknown technology class `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Technology {
    pub id: String,
    pub class: TechClass,
    /// Useful heat out per unit of fuel in; above 1 for heat pumps.
    pub conversion_efficiency: f64,
    /// Average lifetime in years.
    pub lifetime: f64,
    /// Fractional investment-cost reduction per doubling of cumulative capacity.
    pub learning_rate: f64,
    pub fuel: String,
    /// kgCO2 per kWh of fuel burnt on site.
    pub carbon_content: f64,
    pub renewable_subsidy_eligible: bool,
}

impl Technology {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::validation(format!("technology {}: {msg}", self.id)));
        if !(self.conversion_efficiency > 0.0 && self.conversion_efficiency.is_finite()) {
            return fail(format!("efficiency {} must be > 0", self.conversion_efficiency));
        }
        if !(self.lifetime > 0.0 && self.lifetime.is_finite()) {
            return fail(format!("lifetime {} must be > 0", self.lifetime));
        }
        if !(0.0..=0.5).contains(&self.learning_rate) {
            return fail(format!("learning rate {} outside [0, 0.5]", self.learning_rate));
        }
        if !(self.carbon_content >= 0.0) {
            return fail(format!("carbon content {} must be >= 0", self.carbon_content));
        }
        Ok(())
    }

    pub fn uses_electricity(&self) -> bool {
        self.fuel == ELECTRICITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_names_round_trip() {
        for class in TechClass::ALL {
            assert_eq!(class.as_str().parse::<TechClass>().unwrap(), class);
        }
        assert!("nuclear".parse::<TechClass>().is_err());
    }

    #[test]
    fn validation_catches_bad_descriptors() {
        let mut t = Technology {
            id: "x".into(),
            class: TechClass::HeatPump,
            conversion_efficiency: 3.5,
            lifetime: 20.0,
            learning_rate: 0.3,
            fuel: ELECTRICITY.into(),
            carbon_content: 0.0,
            renewable_subsidy_eligible: true,
        };
        assert!(t.validate().is_ok());
        t.learning_rate = 0.6;
        assert!(t.validate().is_err());
        t.learning_rate = 0.1;
        t.conversion_efficiency = 0.0;
        assert!(t.validate().is_err());
    }
}
