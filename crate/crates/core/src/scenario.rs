//! Policy schedules, the preset scenarios a–j and the sensitivity harness.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accounting::cumulative_direct_emissions;
use crate::costs::{GammaVector, TechPolicy};
use crate::demand::DemandVariant;
use crate::dynamics::run::{simulate_run, FuelPriceTrend, ModelParams, RunConfig};
use crate::io::dataset::Dataset;
use crate::series::TimeSeries;
use crate::tech::{TechClass, Technology};
use crate::{Error, Result};

pub const POLICY_START: i32 = 2020;
pub const POLICY_END: i32 = 2050;
pub const PRESET_IDS: [&str; 10] = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"];

/// Grid-intensity path used for indirect emissions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum PowerVariant {
    /// Power sector reaches zero emissions by 2040.
    #[default]
    #[serde(rename = "decarbonisation_15c")]
    Decarbonisation15C,
    #[serde(rename = "power_baseline")]
    PowerBaseline,
}

impl PowerVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            PowerVariant::Decarbonisation15C => "decarbonisation_15c",
            PowerVariant::PowerBaseline => "power_baseline",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "decarbonisation_15c" => Ok(PowerVariant::Decarbonisation15C),
            "power_baseline" => Ok(PowerVariant::PowerBaseline),
            other => Err(Error::validation(format!("unknown power variant `{other}`"))),
        }
    }
}

impl fmt::Display for PowerVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Carbon tax in €/tCO2. `regions: None` applies everywhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxComponent {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<Vec<String>>,
    pub series: TimeSeries,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SubsidyTarget {
    /// Technologies flagged as eligible for renewable subsidies.
    RenewableEligible,
    Classes { classes: Vec<TechClass> },
}

impl SubsidyTarget {
    pub fn covers(&self, tech: &Technology) -> bool {
        match self {
            SubsidyTarget::RenewableEligible => tech.renewable_subsidy_eligible,
            SubsidyTarget::Classes { classes } => classes.contains(&tech.class),
        }
    }
}

/// Fractional investment-cost subsidy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsidyComponent {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<Vec<String>>,
    pub target: SubsidyTarget,
    pub series: TimeSeries,
}

/// €/kWh off the electricity price of electric heating.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectricitySubsidy {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<Vec<String>>,
    pub series: TimeSeries,
}

/// Regulated seeding: one percentage point of the dominant fossil
/// technology's share per year goes to the eligible classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KickStart {
    pub region: String,
    pub start_year: i32,
    pub duration_years: i32,
    pub classes: Vec<TechClass>,
}

impl KickStart {
    pub fn is_active(&self, year: i32) -> bool {
        year >= self.start_year && year < self.start_year + self.duration_years
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySchedule {
    #[serde(default)]
    pub carbon_tax: Vec<TaxComponent>,
    #[serde(default)]
    pub subsidies: Vec<SubsidyComponent>,
    #[serde(default)]
    pub electricity_subsidy: Vec<ElectricitySubsidy>,
    #[serde(default)]
    pub kick_start: Vec<KickStart>,
}

fn in_scope(regions: &Option<Vec<String>>, region: &str) -> bool {
    regions.as_ref().is_none_or(|r| r.iter().any(|x| x == region))
}

/// Policy levels of one region in one year.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolicyAtT {
    pub carbon_tax: f64,
    pub subsidies: Vec<(SubsidyTarget, f64)>,
    pub electricity_subsidy: f64,
    /// Eligible classes of an active kick-start, if any.
    pub kick_start: Option<Vec<TechClass>>,
}

impl PolicyAtT {
    /// Combined subsidy rate of a technology, capped at full coverage.
    pub fn subsidy_rate(&self, tech: &Technology) -> f64 {
        let total: f64 = self
            .subsidies
            .iter()
            .filter(|(target, _)| target.covers(tech))
            .map(|(_, rate)| rate)
            .sum();
        total.min(1.0)
    }

    pub fn for_tech(&self, tech: &Technology) -> TechPolicy {
        TechPolicy {
            carbon_tax: self.carbon_tax,
            ic_subsidy: self.subsidy_rate(tech),
            electricity_subsidy: if tech.uses_electricity() { self.electricity_subsidy } else { 0.0 },
        }
    }
}

impl PolicySchedule {
    pub fn is_empty(&self) -> bool {
        self.carbon_tax.is_empty()
            && self.subsidies.is_empty()
            && self.electricity_subsidy.is_empty()
            && self.kick_start.is_empty()
    }

    /// Policy in force for `region` during calendar year `year`.
    pub fn at(&self, region: &str, year: i32) -> PolicyAtT {
        let carbon_tax = self
            .carbon_tax
            .iter()
            .filter(|c| in_scope(&c.regions, region))
            .map(|c| c.series.policy_value(year))
            .sum();
        let subsidies = self
            .subsidies
            .iter()
            .filter(|c| in_scope(&c.regions, region))
            .map(|c| (c.target.clone(), c.series.policy_value(year)))
            .filter(|(_, rate)| *rate > 0.0)
            .collect();
        let electricity_subsidy = self
            .electricity_subsidy
            .iter()
            .filter(|c| in_scope(&c.regions, region))
            .map(|c| c.series.policy_value(year))
            .sum();
        let mut classes: Vec<TechClass> = Vec::new();
        for k in self.kick_start.iter().filter(|k| k.region == region && k.is_active(year)) {
            for c in &k.classes {
                if !classes.contains(c) {
                    classes.push(*c);
                }
            }
        }
        classes.sort();
        PolicyAtT {
            carbon_tax,
            subsidies,
            electricity_subsidy,
            kick_start: (!classes.is_empty()).then_some(classes),
        }
    }

    /// Component-wise union: taxes add, subsidies and kick-starts accumulate.
    pub fn merge(&self, other: &PolicySchedule) -> PolicySchedule {
        let mut out = self.clone();
        out.carbon_tax.extend(other.carbon_tax.iter().cloned());
        out.subsidies.extend(other.subsidies.iter().cloned());
        out.electricity_subsidy.extend(other.electricity_subsidy.iter().cloned());
        out.kick_start.extend(other.kick_start.iter().cloned());
        out
    }

    /// Every region name the schedule refers to.
    pub fn referenced_regions(&self) -> Vec<&str> {
        let scoped = self
            .carbon_tax
            .iter()
            .filter_map(|c| c.regions.as_ref())
            .chain(self.subsidies.iter().filter_map(|c| c.regions.as_ref()))
            .chain(self.electricity_subsidy.iter().filter_map(|c| c.regions.as_ref()))
            .flatten()
            .map(String::as_str);
        let mut out: Vec<&str> = scoped
            .chain(self.kick_start.iter().map(|k| k.region.as_str()))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// A validation problem in a scenario, located by a JSON-style path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub id: String,
    pub demand_variant: DemandVariant,
    #[serde(default)]
    pub schedule: PolicySchedule,
    #[serde(default)]
    pub power_variant: PowerVariant,
    #[serde(default)]
    pub notes: String,
}

fn check_series(path: &str, s: &TimeSeries, max: Option<f64>, errors: &mut Vec<FieldError>) {
    let mut push = |p: String, m: String| errors.push(FieldError { path: p, message: m });
    if s.years.len() != s.values.len() {
        push(
            path.to_string(),
            format!("{} years but {} values", s.years.len(), s.values.len()),
        );
        return;
    }
    if s.years.is_empty() {
        push(format!("{path}.years"), "series is empty".into());
    }
    if s.years.windows(2).any(|w| w[1] <= w[0]) {
        push(format!("{path}.years"), "years must be strictly increasing".into());
    }
    for (k, v) in s.values.iter().enumerate() {
        let bad_max = max.is_some_and(|m| *v > m);
        if !v.is_finite() || *v < 0.0 || bad_max {
            let bound = max.map_or(String::from("must be finite and >= 0"), |m| {
                format!("must lie in [0, {m}]")
            });
            push(format!("{path}.values[{k}]"), format!("{v} {bound}"));
        }
    }
}

impl ScenarioSpec {
    /// All structural problems, with field paths.
    pub fn field_errors(&self) -> Vec<FieldError> {
        let mut errors = Vec::new();
        if self.id.trim().is_empty() {
            errors.push(FieldError { path: "id".into(), message: "must not be empty".into() });
        }
        if let Err(e) = self.demand_variant.validate() {
            errors.push(FieldError { path: "demand_variant".into(), message: e.to_string() });
        }
        let s = &self.schedule;
        for (k, c) in s.carbon_tax.iter().enumerate() {
            check_series(&format!("schedule.carbon_tax[{k}].series"), &c.series, None, &mut errors);
        }
        for (k, c) in s.subsidies.iter().enumerate() {
            check_series(&format!("schedule.subsidies[{k}].series"), &c.series, Some(1.0), &mut errors);
            if let SubsidyTarget::Classes { classes } = &c.target {
                if classes.is_empty() {
                    errors.push(FieldError {
                        path: format!("schedule.subsidies[{k}].target.classes"),
                        message: "must name at least one class".into(),
                    });
                }
            }
        }
        for (k, c) in s.electricity_subsidy.iter().enumerate() {
            check_series(&format!("schedule.electricity_subsidy[{k}].series"), &c.series, None, &mut errors);
        }
        for (k, ks) in s.kick_start.iter().enumerate() {
            if !(5..=10).contains(&ks.duration_years) {
                errors.push(FieldError {
                    path: format!("schedule.kick_start[{k}].duration_years"),
                    message: format!("{} outside [5, 10]", ks.duration_years),
                });
            }
            if ks.classes.is_empty() {
                errors.push(FieldError {
                    path: format!("schedule.kick_start[{k}].classes"),
                    message: "must name at least one class".into(),
                });
            }
        }
        errors
    }

    pub fn validate(&self) -> Result<()> {
        let errors = self.field_errors();
        if errors.is_empty() {
            Ok(())
        } else {
            let joined: Vec<String> = errors.iter().map(ToString::to_string).collect();
            Err(Error::validation(joined.join("; ")))
        }
    }

    /// Checks that every referenced region exists.
    pub fn validate_regions(&self, known: &[&str]) -> Result<()> {
        let unknown: Vec<&str> = self
            .schedule
            .referenced_regions()
            .into_iter()
            .filter(|r| !known.contains(r))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::validation(format!(
                "scenario {} refers to unknown region(s): {}",
                self.id,
                unknown.join(", ")
            )))
        }
    }
}

/// Carbon tax rising linearly by 10% of its starting value per year.
pub fn build_tax_series(start_value: f64) -> TimeSeries {
    TimeSeries::from_fn(POLICY_START, POLICY_END, |y| {
        start_value * (1.0 + 0.10 * f64::from(y - POLICY_START))
    })
}

/// Subsidy rate held until 2030 and phased out linearly to zero in 2050.
pub fn build_subsidy_series(rate: f64) -> Result<TimeSeries> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::validation(format!("subsidy rate {rate} outside [0, 1]")));
    }
    const HOLD_UNTIL: i32 = 2030;
    Ok(TimeSeries::from_fn(POLICY_START, POLICY_END, |y| {
        if y <= HOLD_UNTIL {
            rate
        } else {
            rate * f64::from(POLICY_END - y) / f64::from(POLICY_END - HOLD_UNTIL)
        }
    }))
}

fn tax(start_value: f64) -> PolicySchedule {
    PolicySchedule {
        carbon_tax: vec![TaxComponent { regions: None, series: build_tax_series(start_value) }],
        ..Default::default()
    }
}

fn renewable_subsidy(rate: f64) -> PolicySchedule {
    PolicySchedule {
        subsidies: vec![SubsidyComponent {
            regions: None,
            target: SubsidyTarget::RenewableEligible,
            series: build_subsidy_series(rate).expect("preset rates are valid"),
        }],
        ..Default::default()
    }
}

/// Kick-start window and classes used by preset i.
pub const KICK_START_YEARS: i32 = 10;
pub const KICK_START_CLASSES: [TechClass; 3] =
    [TechClass::HeatPump, TechClass::SolarThermal, TechClass::ModernBiomass];

/// The preset scenario `id` (a–j). `kick_start_regions` are the dataset's
/// flagged low-renewable regions, used by preset i.
pub fn preset_scenario(id: &str, kick_start_regions: &[String]) -> Result<ScenarioSpec> {
    let retrofit = DemandVariant::retrofit();
    let spec = |demand_variant, schedule, notes: &str| ScenarioSpec {
        id: id.to_string(),
        demand_variant,
        schedule,
        power_variant: PowerVariant::Decarbonisation15C,
        notes: notes.to_string(),
    };
    Ok(match id {
        "a" => spec(DemandVariant::baseline(), PolicySchedule::default(), "baseline, no new policy"),
        "b" => spec(DemandVariant::insulation(), PolicySchedule::default(), "new-build insulation"),
        "c" => spec(retrofit, PolicySchedule::default(), "insulation and retrofits"),
        "d" => spec(retrofit, tax(50.0), "c + carbon tax 50-200 EUR/tCO2"),
        "e" => spec(retrofit, tax(100.0), "c + carbon tax 100-400 EUR/tCO2"),
        "f" => spec(retrofit, renewable_subsidy(0.25), "c + 25% renewable subsidy"),
        "g" => spec(retrofit, renewable_subsidy(0.50), "c + 50% renewable subsidy"),
        "h" => spec(retrofit, tax(50.0).merge(&renewable_subsidy(0.50)), "c + tax 50 + 50% subsidy"),
        "i" => {
            let mut schedule = tax(50.0).merge(&renewable_subsidy(0.50));
            schedule.kick_start = kick_start_regions
                .iter()
                .map(|region| KickStart {
                    region: region.clone(),
                    start_year: POLICY_START,
                    duration_years: KICK_START_YEARS,
                    classes: KICK_START_CLASSES.to_vec(),
                })
                .collect();
            spec(retrofit, schedule, "h + kick-start in flagged regions")
        }
        "j" => {
            let mut schedule = tax(100.0);
            schedule.electricity_subsidy.push(ElectricitySubsidy {
                regions: None,
                series: TimeSeries::constant(POLICY_START, POLICY_END, 0.05),
            });
            schedule.subsidies.push(SubsidyComponent {
                regions: None,
                target: SubsidyTarget::Classes {
                    classes: vec![TechClass::DirectElectric, TechClass::HeatPump],
                },
                series: TimeSeries::constant(POLICY_START, POLICY_END, 0.30),
            });
            spec(retrofit, schedule, "e + electricity subsidy 0.05 EUR/kWh + 30% on electric systems")
        }
        other => {
            return Err(Error::validation(format!(
                "unknown preset `{other}` (expected one of a-j)"
            )))
        }
    })
}

/// One-at-a-time perturbations of the sensitivity table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    FuelUp,
    FuelDown,
    LearningHalf,
    DiscountUp,
    IntangiblesHalf,
}

impl Perturbation {
    pub const ALL: [Perturbation; 5] = [
        Perturbation::FuelUp,
        Perturbation::FuelDown,
        Perturbation::LearningHalf,
        Perturbation::DiscountUp,
        Perturbation::IntangiblesHalf,
    ];

    pub fn column(self) -> &'static str {
        match self {
            Perturbation::FuelUp => "fuel_up",
            Perturbation::FuelDown => "fuel_down",
            Perturbation::LearningHalf => "learning_half",
            Perturbation::DiscountUp => "discount_up",
            Perturbation::IntangiblesHalf => "intangibles_half",
        }
    }

    pub fn apply(self, params: &ModelParams) -> ModelParams {
        let mut p = params.clone();
        match self {
            Perturbation::FuelUp | Perturbation::FuelDown => {
                let sign = if self == Perturbation::FuelUp { 1.0 } else { -1.0 };
                p.fuel_price_trend = Some(FuelPriceTrend { annual_change: 0.01 * sign, from_year: 2018 });
            }
            Perturbation::LearningHalf => p.learning_rate_scale *= 0.5,
            Perturbation::DiscountUp => p.behaviour.discount_rate *= 1.5,
            Perturbation::IntangiblesHalf => p.gamma_scale *= 0.5,
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub scenario: String,
    /// Cumulative direct emissions of the unperturbed run, kgCO2.
    pub base_cumulative_kg: f64,
    /// Percent deviation per perturbation, in `SensitivityTable::columns` order.
    pub deviations_pct: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityTable {
    pub columns: Vec<String>,
    pub from_year: i32,
    pub to_year: i32,
    pub rows: Vec<SensitivityRow>,
}

impl SensitivityTable {
    pub fn to_csv(&self) -> String {
        let mut out = format!("scenario,base_cumulative_kg,{}\n", self.columns.join(","));
        for row in &self.rows {
            out.push_str(&row.scenario);
            out.push(',');
            out.push_str(&row.base_cumulative_kg.to_string());
            for d in &row.deviations_pct {
                out.push(',');
                out.push_str(&d.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Runs every scenario unperturbed and under each perturbation, and reports
/// the % deviation of cumulative direct CO2 over `[config.from, config.to]`.
pub fn sensitivity_suite(
    dataset: &Dataset,
    scenarios: &[ScenarioSpec],
    gammas: &GammaVector,
    config: &RunConfig,
) -> Result<SensitivityTable> {
    let mut variants: Vec<Option<Perturbation>> = vec![None];
    variants.extend(Perturbation::ALL.map(Some));
    let jobs: Vec<(usize, Option<Perturbation>)> = (0..scenarios.len())
        .flat_map(|s| variants.iter().map(move |v| (s, *v)))
        .collect();
    let totals = jobs
        .par_iter()
        .map(|&(s, perturbation)| {
            let mut cfg = config.clone();
            if let Some(p) = perturbation {
                cfg.params = p.apply(&config.params);
            }
            let run = simulate_run(dataset, &scenarios[s], gammas, &cfg)?;
            Ok(cumulative_direct_emissions(&run, config.from, config.to))
        })
        .collect::<Result<Vec<f64>>>()?;

    let width = variants.len();
    let rows = scenarios
        .iter()
        .enumerate()
        .map(|(s, spec)| {
            let chunk = &totals[s * width..(s + 1) * width];
            let base = chunk[0];
            let deviations_pct = chunk[1..]
                .iter()
                .map(|v| if base == 0.0 { 0.0 } else { 100.0 * (v - base) / base })
                .collect();
            SensitivityRow { scenario: spec.id.clone(), base_cumulative_kg: base, deviations_pct }
        })
        .collect();
    Ok(SensitivityTable {
        columns: Perturbation::ALL.iter().map(|p| p.column().to_string()).collect(),
        from_year: config.from,
        to_year: config.to,
        rows,
    })
}
