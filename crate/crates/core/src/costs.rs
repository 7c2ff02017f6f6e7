//! Levelised and generalised cost of heating, policy adjustments to cost
//! components, and learning-by-doing on investment costs.
//!
//! All per-kW figures are turned into per-kWh of useful heat through the
//! annual full-load hours `HOURS_PER_YEAR * CF`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::tech::Technology;
use crate::{Error, Result, HOURS_PER_YEAR};

/// Mean and standard deviation of a cost component across households.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostDistribution {
    pub mean: f64,
    pub sd: f64,
}

impl CostDistribution {
    pub const fn new(mean: f64, sd: f64) -> Self {
        Self { mean, sd }
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        if !(self.sd >= 0.0) || !self.mean.is_finite() || !self.sd.is_finite() {
            return Err(Error::validation(format!(
                "{what}: invalid distribution (mean {}, sd {})",
                self.mean, self.sd
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostInputs {
    /// Upfront investment incl. installation, €/kW_th.
    pub ic: CostDistribution,
    /// Maintenance and repair, €/kW_th/year.
    pub mr: CostDistribution,
    /// €/kWh of fuel.
    pub fuel_price: CostDistribution,
    /// Capacity factor in (0, 1].
    pub cf: f64,
}

impl CostInputs {
    pub fn validate(&self) -> Result<()> {
        for (name, d) in [("ic", self.ic), ("mr", self.mr), ("fuel_price", self.fuel_price)] {
            d.validate(name)?;
            if d.mean < 0.0 {
                return Err(Error::validation(format!("{name} mean {} < 0", d.mean)));
            }
        }
        if !(self.cf > 0.0 && self.cf <= 1.0) {
            return Err(Error::validation(format!("capacity factor {} outside (0, 1]", self.cf)));
        }
        Ok(())
    }

    fn full_load_hours(&self) -> Result<f64> {
        if !(self.cf > 0.0) {
            return Err(Error::DivisionByZero("capacity factor"));
        }
        Ok(HOURS_PER_YEAR * self.cf)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviourParams {
    /// Household discount rate, fraction per year.
    pub discount_rate: f64,
    /// Payback threshold for premature replacement, years.
    pub payback_threshold: CostDistribution,
}

impl Default for BehaviourParams {
    fn default() -> Self {
        Self {
            discount_rate: 0.09,
            payback_threshold: CostDistribution::new(3.0, 1.0),
        }
    }
}

impl BehaviourParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.discount_rate > 0.0) {
            return Err(Error::validation("discount rate must be > 0"));
        }
        if !(self.payback_threshold.mean > 0.0) {
            return Err(Error::validation("payback threshold mean must be > 0"));
        }
        self.payback_threshold.validate("payback threshold")
    }
}

fn lifetime_periods(tech: &Technology) -> Result<i32> {
    let n = tech.lifetime.round();
    if !(n >= 1.0) {
        return Err(Error::validation(format!(
            "technology {}: lifetime {} must be at least one year",
            tech.id, tech.lifetime
        )));
    }
    Ok(n as i32)
}

fn efficiency(tech: &Technology) -> Result<f64> {
    if !(tech.conversion_efficiency > 0.0) {
        return Err(Error::DivisionByZero("conversion efficiency"));
    }
    Ok(tech.conversion_efficiency)
}

/// Sum of discount factors over t = 0..=n.
fn discount_sum(r: f64, n: i32) -> f64 {
    (0..=n).map(|t| (1.0 + r).powi(-t)).sum()
}

/// Levelised cost of heating, €/kWh_th.
///
/// Capital is paid once at t = 0; maintenance and fuel accrue in every period
/// of the same t = 0..=τ grid used for the discounted output in the
/// denominator, so a constant running cost passes through unchanged.
pub fn levelised_cost(tech: &Technology, costs: &CostInputs, r: f64) -> Result<f64> {
    let hours = costs.full_load_hours()?;
    let n = lifetime_periods(tech)?;
    let ce = efficiency(tech)?;
    if !(r > -1.0) {
        return Err(Error::validation(format!("discount rate {r} must be > -1")));
    }
    let capital = costs.ic.mean / hours;
    let running = costs.mr.mean / hours + costs.fuel_price.mean / ce;
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for t in 0..=n {
        let d = (1.0 + r).powi(-t);
        let cost = if t == 0 { capital + running } else { running };
        numerator += cost * d;
        denominator += d;
    }
    Ok(numerator / denominator)
}

/// Standard deviation of the levelised cost: quadrature of the component
/// spreads, each in the same per-kWh_th normalisation as its LCOH term.
pub fn cost_spread(tech: &Technology, costs: &CostInputs, r: f64) -> Result<f64> {
    let hours = costs.full_load_hours()?;
    let n = lifetime_periods(tech)?;
    let ce = efficiency(tech)?;
    let ic = costs.ic.sd / hours / discount_sum(r, n);
    let mr = costs.mr.sd / hours;
    let fc = costs.fuel_price.sd / ce;
    Ok((ic * ic + mr * mr + fc * fc).sqrt())
}

/// GCOH = LCOH + γ. The intangible shifts the location only.
pub fn generalised_cost(lcoh: f64, spread: f64, gamma: f64) -> CostDistribution {
    CostDistribution::new(lcoh + gamma, spread)
}

/// Policy levers resolved for one technology at one point in time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TechPolicy {
    /// €/tCO2 on the fuel's carbon content.
    pub carbon_tax: f64,
    /// Fractional reduction of the investment cost.
    pub ic_subsidy: f64,
    /// €/kWh off the electricity price (electric technologies only).
    pub electricity_subsidy: f64,
}

impl TechPolicy {
    pub fn is_neutral(&self) -> bool {
        self.carbon_tax == 0.0 && self.ic_subsidy == 0.0 && self.electricity_subsidy == 0.0
    }
}

/// Cost inputs as households see them under the given policy.
pub fn apply_policies(costs: &CostInputs, tech: &Technology, policy: &TechPolicy) -> Result<CostInputs> {
    if !(0.0..=1.0).contains(&policy.ic_subsidy) {
        return Err(Error::validation(format!(
            "subsidy rate {} outside [0, 1]",
            policy.ic_subsidy
        )));
    }
    if !(policy.carbon_tax >= 0.0) || !(policy.electricity_subsidy >= 0.0) {
        return Err(Error::validation("policy levels must be >= 0"));
    }
    let mut out = *costs;
    out.fuel_price.mean += policy.carbon_tax * tech.carbon_content / 1000.0;
    if tech.uses_electricity() && policy.electricity_subsidy > 0.0 {
        out.fuel_price.mean = (out.fuel_price.mean - policy.electricity_subsidy).max(0.0);
    }
    let keep = 1.0 - policy.ic_subsidy;
    out.ic.mean *= keep;
    out.ic.sd *= keep;
    Ok(out)
}

/// Running cost of keeping a working system, €/kWh_th: no capital, no discounting.
pub fn marginal_running_cost(tech: &Technology, costs: &CostInputs) -> Result<f64> {
    let hours = costs.full_load_hours()?;
    Ok(costs.mr.mean / hours + costs.fuel_price.mean / efficiency(tech)?)
}

/// Spread of the marginal running cost.
pub fn running_cost_spread(tech: &Technology, costs: &CostInputs) -> Result<f64> {
    let hours = costs.full_load_hours()?;
    let mr = costs.mr.sd / hours;
    let fc = costs.fuel_price.sd / efficiency(tech)?;
    Ok((mr * mr + fc * fc).sqrt())
}

/// Investment cost spread over one year of full-load output, €/kWh_th.
pub fn investment_per_kwh(costs: &CostInputs) -> Result<CostDistribution> {
    let hours = costs.full_load_hours()?;
    Ok(CostDistribution::new(costs.ic.mean / hours, costs.ic.sd / hours))
}

/// `MC + IC/b`: the running cost a candidate must undercut for a household to
/// scrap a working system within `b` years.
pub fn payback_threshold_cost(mc: f64, ic_per_kwh: f64, b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::validation(format!("payback threshold {b} must be > 0")));
    }
    Ok(mc + ic_per_kwh / b)
}

/// Payback cost of a candidate technology with (already subsidised) costs.
pub fn payback_cost(tech: &Technology, costs: &CostInputs, b: f64) -> Result<f64> {
    let mc = marginal_running_cost(tech, costs)?;
    payback_threshold_cost(mc, investment_per_kwh(costs)?.mean, b)
}

/// Distribution of the payback cost with household spread in running cost,
/// investment cost and payback threshold; the threshold's spread enters to
/// first order.
pub fn payback_distribution(
    mc: CostDistribution,
    ic_per_kwh: CostDistribution,
    b: CostDistribution,
) -> Result<CostDistribution> {
    let mean = payback_threshold_cost(mc.mean, ic_per_kwh.mean, b.mean)?;
    let from_ic = ic_per_kwh.sd / b.mean;
    let from_b = ic_per_kwh.mean * b.sd / (b.mean * b.mean);
    let sd = (mc.sd * mc.sd + from_ic * from_ic + from_b * from_b).sqrt();
    Ok(CostDistribution::new(mean, sd))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaProvenance {
    Calibrated,
    Manual,
    Zero,
}

impl GammaProvenance {
    pub fn as_str(self) -> &'static str {
        match self {
            GammaProvenance::Calibrated => "calibrated",
            GammaProvenance::Manual => "manual",
            GammaProvenance::Zero => "zero",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "calibrated" => Ok(GammaProvenance::Calibrated),
            "manual" => Ok(GammaProvenance::Manual),
            "zero" => Ok(GammaProvenance::Zero),
            other => Err(Error::validation(format!("unknown gamma provenance `{other}`"))),
        }
    }
}

/// Intangible cost terms of one region, €/kWh_th, in technology order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaSlice {
    pub values: Vec<f64>,
    pub provenance: Vec<GammaProvenance>,
}

impl GammaSlice {
    pub fn zero(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
            provenance: vec![GammaProvenance::Zero; n],
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.values.len() != n || self.provenance.len() != n {
            return Err(Error::validation(format!(
                "gamma slice has {} entries for {n} technologies",
                self.values.len()
            )));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::validation(format!("gamma {v} is not finite")));
        }
        Ok(())
    }
}

/// Intangibles for every region.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GammaVector {
    pub regions: BTreeMap<String, GammaSlice>,
}

impl GammaVector {
    pub fn zero<'a>(regions: impl IntoIterator<Item = &'a str>, n_tech: usize) -> Self {
        Self {
            regions: regions
                .into_iter()
                .map(|r| (r.to_string(), GammaSlice::zero(n_tech)))
                .collect(),
        }
    }

    pub fn slice(&self, region: &str) -> Option<&GammaSlice> {
        self.regions.get(region)
    }
}

/// Learning-curve state of one technology.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningEntry {
    /// Cumulative global capacity, kW_th.
    pub cumulative: f64,
    /// Cumulative capacity at the reference point.
    pub reference: f64,
    /// Reference investment cost, €/kW_th.
    pub reference_ic: f64,
    pub learning_rate: f64,
}

impl LearningEntry {
    /// Learning exponent: IC falls by `1 - LR` per doubling.
    pub fn exponent(&self) -> f64 {
        (1.0 / (1.0 - self.learning_rate)).log2()
    }
}

/// Global learning pool: one entry per technology, updated once per step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningState {
    pub entries: Vec<LearningEntry>,
    /// Lowest attainable fraction of the reference investment cost.
    pub floor: f64,
}

impl LearningState {
    pub fn new(entries: Vec<LearningEntry>, floor: f64) -> Result<Self> {
        for e in &entries {
            if !(e.reference > 0.0) || e.cumulative < e.reference {
                return Err(Error::validation(format!(
                    "learning state needs W >= W0 > 0 (W {}, W0 {})",
                    e.cumulative, e.reference
                )));
            }
            if !(0.0..=0.5).contains(&e.learning_rate) {
                return Err(Error::validation(format!(
                    "learning rate {} outside [0, 0.5]",
                    e.learning_rate
                )));
            }
        }
        if !(0.0..=1.0).contains(&floor) {
            return Err(Error::validation(format!("learning floor {floor} outside [0, 1]")));
        }
        Ok(Self { entries, floor })
    }

    /// Current investment cost relative to the reference cost.
    pub fn multiplier(&self, tech: usize) -> f64 {
        let e = &self.entries[tech];
        let raw = (e.cumulative / e.reference).powf(-e.exponent());
        raw.max(self.floor)
    }

    pub fn multipliers(&self) -> Vec<f64> {
        (0..self.entries.len()).map(|k| self.multiplier(k)).collect()
    }

    pub fn investment_cost(&self, tech: usize) -> f64 {
        self.entries[tech].reference_ic * self.multiplier(tech)
    }

    /// Adds newly built capacity and returns the updated mean investment cost.
    /// Decommissioning never reduces cumulative capacity.
    pub fn learning_update(&mut self, tech: usize, new_capacity: f64) -> Result<f64> {
        if !(new_capacity >= 0.0) {
            return Err(Error::validation(format!(
                "capacity addition {new_capacity} must be >= 0"
            )));
        }
        self.entries[tech].cumulative += new_capacity;
        Ok(self.investment_cost(tech))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tech::{TechClass, ELECTRICITY};

    fn tech(ce: f64, lifetime: f64, carbon: f64) -> Technology {
        Technology {
            id: "t".into(),
            class: TechClass::FossilGas,
            conversion_efficiency: ce,
            lifetime,
            learning_rate: 0.0,
            fuel: "gas".into(),
            carbon_content: carbon,
            renewable_subsidy_eligible: false,
        }
    }

    fn inputs(ic: f64, mr: f64, fc: f64, cf: f64) -> CostInputs {
        CostInputs {
            ic: CostDistribution::new(ic, 0.0),
            mr: CostDistribution::new(mr, 0.0),
            fuel_price: CostDistribution::new(fc, 0.0),
            cf,
        }
    }

    #[test]
    fn zero_costs_give_zero_lcoh() {
        let l = levelised_cost(&tech(0.9, 20.0, 0.2), &inputs(0.0, 0.0, 0.0, 0.3), 0.09).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn constant_fuel_term_passes_through() {
        for r in [0.01, 0.09, 0.3] {
            for tau in [5.0, 20.0, 40.0] {
                let l = levelised_cost(&tech(0.9, tau, 0.0), &inputs(0.0, 0.0, 0.09, 0.5), r).unwrap();
                assert!((l - 0.10).abs() < 1e-15, "r={r} tau={tau}: {l}");
            }
        }
    }

    #[test]
    fn lcoh_errors() {
        let t = tech(0.9, 20.0, 0.0);
        assert!(matches!(
            levelised_cost(&t, &inputs(1.0, 1.0, 1.0, 0.0), 0.09),
            Err(Error::DivisionByZero(_))
        ));
        assert!(matches!(
            levelised_cost(&tech(0.9, 0.0, 0.0), &inputs(1.0, 1.0, 1.0, 0.2), 0.09),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn spread_single_fuel_term() {
        let mut c = inputs(400.0, 10.0, 0.08, 0.2);
        c.fuel_price.sd = 0.012;
        let s = cost_spread(&tech(0.75, 20.0, 0.0), &c, 0.09).unwrap();
        assert!((s - 0.012 / 0.75).abs() < 1e-15);
        assert_eq!(cost_spread(&tech(0.75, 20.0, 0.0), &inputs(1.0, 1.0, 1.0, 0.2), 0.09).unwrap(), 0.0);
    }

    #[test]
    fn generalised_cost_shifts_location_only() {
        let g = generalised_cost(0.118, 0.016, -0.032);
        assert!((g.mean - 0.086).abs() < 1e-15);
        assert_eq!(g.sd, 0.016);
        assert_eq!(generalised_cost(0.1, 0.02, 0.0), CostDistribution::new(0.1, 0.02));
    }

    #[test]
    fn carbon_tax_on_gas() {
        let gas = tech(0.9, 20.0, 0.202);
        let base = inputs(434.0, 9.0, 0.07, 0.2);
        let taxed = apply_policies(&base, &gas, &TechPolicy { carbon_tax: 50.0, ..Default::default() }).unwrap();
        assert!((taxed.fuel_price.mean - base.fuel_price.mean - 0.0101).abs() < 1e-15);
        assert_eq!(taxed.fuel_price.sd, base.fuel_price.sd);
        assert_eq!(apply_policies(&base, &gas, &TechPolicy::default()).unwrap(), base);
    }

    #[test]
    fn subsidy_scales_ic_and_its_sd() {
        let mut hp = tech(3.5, 20.0, 0.0);
        hp.fuel = ELECTRICITY.into();
        let mut base = inputs(1400.0, 14.0, 0.2, 0.2);
        base.ic.sd = 1400.0 / 3.0;
        let sub = apply_policies(&base, &hp, &TechPolicy { ic_subsidy: 0.5, ..Default::default() }).unwrap();
        assert_eq!(sub.ic.mean, 700.0);
        assert!((sub.ic.sd / sub.ic.mean - 1.0 / 3.0).abs() < 1e-15);
        assert!(apply_policies(&base, &hp, &TechPolicy { ic_subsidy: 1.5, ..Default::default() }).is_err());

        let cheap = apply_policies(&base, &hp, &TechPolicy { electricity_subsidy: 0.05, ..Default::default() }).unwrap();
        assert!((cheap.fuel_price.mean - 0.15).abs() < 1e-15);
        let floor = apply_policies(&base, &hp, &TechPolicy { electricity_subsidy: 0.5, ..Default::default() }).unwrap();
        assert_eq!(floor.fuel_price.mean, 0.0);
    }

    #[test]
    fn marginal_running_cost_cases() {
        let t = tech(1.0, 20.0, 0.0);
        assert_eq!(marginal_running_cost(&t, &inputs(500.0, 0.0, 0.10, 0.3)).unwrap(), 0.10);
        assert_eq!(marginal_running_cost(&t, &inputs(0.0, 0.0, 0.0, 0.3)).unwrap(), 0.0);
        assert!(marginal_running_cost(&t, &inputs(0.0, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn taxed_oil_running_cost_difference() {
        let oil = tech(0.75, 20.0, 0.266);
        let base = inputs(471.0, 19.0, 0.08, 0.2);
        let taxed = apply_policies(&base, &oil, &TechPolicy { carbon_tax: 100.0, ..Default::default() }).unwrap();
        let diff = marginal_running_cost(&oil, &taxed).unwrap() - marginal_running_cost(&oil, &base).unwrap();
        let expected = 100.0 * 0.266 / 1000.0 / 0.75;
        assert!(diff > 0.0);
        assert!((diff - expected).abs() < 1e-15);
    }

    #[test]
    fn payback_threshold_examples() {
        let pb = payback_threshold_cost(4.0, 20.0, 3.0).unwrap();
        assert!((pb - 32.0 / 3.0).abs() < 1e-12);
        assert!(!(10.0 > pb), "an incumbent at 10 must not scrap");
        assert!((payback_threshold_cost(4.0, 20.0, 1e12).unwrap() - 4.0).abs() < 1e-10);
        for b in [0.5, 3.0, 15.0] {
            assert_eq!(payback_threshold_cost(4.0, 0.0, b).unwrap(), 4.0);
        }
        assert!(payback_threshold_cost(4.0, 20.0, 0.0).is_err());
        assert!(payback_threshold_cost(4.0, 20.0, -1.0).is_err());
    }

    #[test]
    fn payback_distribution_propagates_threshold_spread() {
        let d = payback_distribution(
            CostDistribution::new(0.05, 0.0),
            CostDistribution::new(0.3, 0.0),
            CostDistribution::new(3.0, 1.0),
        )
        .unwrap();
        assert!((d.mean - 0.15).abs() < 1e-15);
        assert!((d.sd - 0.3 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn learning_examples() {
        let entry = |lr| LearningEntry { cumulative: 100.0, reference: 100.0, reference_ic: 1400.0, learning_rate: lr };
        let mut s = LearningState::new(vec![entry(0.30), entry(0.0), entry(0.10)], 0.1).unwrap();
        let ic = s.learning_update(0, 100.0).unwrap();
        assert!((ic - 980.0).abs() < 1e-9);
        assert_eq!(s.learning_update(1, 1e9).unwrap(), 1400.0);
        s.learning_update(2, 300.0).unwrap();
        assert!((s.multiplier(2) - 0.81).abs() < 1e-12);
        assert!(s.learning_update(0, -1.0).is_err());
        s.learning_update(0, 1e12).unwrap();
        assert_eq!(s.multiplier(0), 0.1);
    }
}
