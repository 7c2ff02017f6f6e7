//! The multi-region simulation loop.
//!
//! Each step evaluates every region against the start-of-step learning state
//! (in parallel), then feeds the capacity built everywhere into the global
//! learning pool.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::choice::{preference_matrix, scrap_matrix, PreferenceMatrix, ScrapMatrix, SubstitutionMask};
use crate::costs::{
    apply_policies, cost_spread, generalised_cost, investment_per_kwh, levelised_cost, marginal_running_cost,
    payback_distribution, running_cost_spread, BehaviourParams, CostDistribution, CostInputs, GammaVector,
    LearningEntry, LearningState, TechPolicy,
};
use crate::demand::{demand_trajectory, DemandTrajectory, DemandVariant};
use crate::dynamics::{share_rates, step_shares, RegionState, StepInputs};
use crate::io::dataset::Dataset;
use crate::io::result::{Money, RegionResult, RegionYear, RunMetadata, RunResult, SCHEMA_VERSION};
use crate::scenario::{PolicyAtT, ScenarioSpec};
use crate::tech::{TechClass, Technology, DISTRICT_HEAT, ELECTRICITY};
use crate::{Error, Result, HOURS_PER_YEAR};

/// Linear fuel-price drift used by the sensitivity runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuelPriceTrend {
    /// Fraction of the base price added per year.
    pub annual_change: f64,
    pub from_year: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub behaviour: BehaviourParams,
    /// Scrapping decisions recur once per `factor × lifetime` years.
    pub scrap_lifetime_factor: f64,
    /// Lowest investment cost reachable through learning, as a fraction of the start cost.
    pub learning_floor: f64,
    pub learning_rate_scale: f64,
    pub gamma_scale: f64,
    pub fuel_price_trend: Option<FuelPriceTrend>,
    /// Capacity factor used to size generation for electric heating.
    pub grid_capacity_factor: f64,
    /// Upstream emissions of district heat, kgCO2/kWh delivered.
    pub district_upstream_kg_per_kwh: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            behaviour: BehaviourParams::default(),
            scrap_lifetime_factor: 1.0,
            learning_floor: 0.1,
            learning_rate_scale: 1.0,
            gamma_scale: 1.0,
            fuel_price_trend: None,
            grid_capacity_factor: 0.45,
            district_upstream_kg_per_kwh: 0.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        self.behaviour.validate()?;
        if !(self.scrap_lifetime_factor > 0.0) {
            return Err(Error::validation("scrap_lifetime_factor must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.learning_floor) {
            return Err(Error::validation("learning_floor must lie in [0, 1]"));
        }
        if !(self.learning_rate_scale >= 0.0) || !self.gamma_scale.is_finite() {
            return Err(Error::validation("learning_rate_scale must be >= 0 and gamma_scale finite"));
        }
        if !(self.grid_capacity_factor > 0.0 && self.grid_capacity_factor <= 1.0) {
            return Err(Error::validation("grid_capacity_factor must lie in (0, 1]"));
        }
        if !(self.district_upstream_kg_per_kwh >= 0.0) {
            return Err(Error::validation("district_upstream_kg_per_kwh must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub from: i32,
    pub to: i32,
    /// Years per step; must divide one year.
    pub dt: f64,
    pub scrapping_enabled: bool,
    pub params: ModelParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            from: 2015,
            to: 2050,
            dt: 0.25,
            scrapping_enabled: true,
            params: ModelParams::default(),
        }
    }
}

impl RunConfig {
    pub fn steps_per_year(&self) -> Result<usize> {
        let per_year = 1.0 / self.dt;
        let rounded = per_year.round();
        if !(self.dt > 0.0) || rounded < 1.0 || (per_year - rounded).abs() > 1e-9 {
            return Err(Error::validation(format!("dt {} must divide one year", self.dt)));
        }
        Ok(rounded as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.from > self.to {
            return Err(Error::validation(format!("from {} is after to {}", self.from, self.to)));
        }
        self.steps_per_year()?;
        self.params.validate()
    }
}

/// Progress of a run: emitted once per region and simulated year.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub region: String,
    pub year: i32,
    pub completed_years: usize,
    pub total_years: usize,
}

/// Static per-region inputs of the choice and share model.
pub struct RegionModel<'a> {
    dataset: &'a Dataset,
    index: usize,
    techs: Vec<Technology>,
    classes: Vec<TechClass>,
    lifetimes: Vec<f64>,
    scrap_rates: Vec<f64>,
    mask: SubstitutionMask,
    district_allowed: bool,
    params: &'a ModelParams,
    demand: DemandTrajectory,
    gamma: Vec<f64>,
    scrapping: bool,
}

/// Costs and matrices of one region at one point in time.
pub struct Evaluation {
    /// Cost inputs before policy.
    pub costs: Vec<CostInputs>,
    pub policies: Vec<TechPolicy>,
    pub gcoh: Vec<CostDistribution>,
    pub preferences: PreferenceMatrix,
    pub scrap: Option<ScrapMatrix>,
}

/// Totals of one region over one step.
#[derive(Clone, Debug, Default)]
pub struct StepTotals {
    pub ue_kwh: Vec<f64>,
    /// Final energy per technology.
    pub final_kwh: Vec<f64>,
    pub built_kw: Vec<f64>,
    pub scrapped_kw: Vec<f64>,
    pub direct_kg: f64,
    pub indirect_decarb_kg: f64,
    pub indirect_baseline_kg: f64,
    pub money: Money,
}

impl<'a> RegionModel<'a> {
    pub fn new(
        dataset: &'a Dataset,
        index: usize,
        variant: &DemandVariant,
        base_year: i32,
        gamma: &[f64],
        params: &'a ModelParams,
        scrapping: bool,
    ) -> Result<Self> {
        let techs = dataset.region_technologies(index);
        if gamma.len() != techs.len() {
            return Err(Error::validation(format!(
                "region {}: {} gamma values for {} technologies",
                dataset.regions[index].id,
                gamma.len(),
                techs.len()
            )));
        }
        let classes: Vec<TechClass> = techs.iter().map(|t| t.class).collect();
        let lifetimes: Vec<f64> = techs.iter().map(|t| t.lifetime).collect();
        let scrap_rates = lifetimes.iter().map(|l| 1.0 / (params.scrap_lifetime_factor * l)).collect();
        let demand = demand_trajectory(&dataset.regions[index].demand, variant, base_year)?;
        Ok(Self {
            dataset,
            index,
            mask: dataset.class_mask.expand(&classes),
            district_allowed: dataset.district_heat_present(index),
            techs,
            classes,
            lifetimes,
            scrap_rates,
            params,
            demand,
            gamma: gamma.iter().map(|g| g * params.gamma_scale).collect(),
            scrapping,
        })
    }

    pub fn id(&self) -> &str {
        &self.dataset.regions[self.index].id
    }

    /// Replaces the intangible terms (before `gamma_scale`).
    pub fn set_gamma(&mut self, gamma: &[f64]) {
        debug_assert_eq!(gamma.len(), self.gamma.len());
        for (g, v) in self.gamma.iter_mut().zip(gamma) {
            *g = v * self.params.gamma_scale;
        }
    }

    pub fn technologies(&self) -> &[Technology] {
        &self.techs
    }

    pub fn ue_total(&self, t: f64) -> f64 {
        self.demand.ue_total.interpolate(t)
    }

    pub fn water_fraction(&self, t: f64) -> f64 {
        self.demand.water_fraction.interpolate(t)
    }

    fn trend_factor(&self, year: i32) -> f64 {
        match self.params.fuel_price_trend {
            Some(trend) if year > trend.from_year => {
                (1.0 + trend.annual_change * f64::from(year - trend.from_year)).max(0.0)
            }
            _ => 1.0,
        }
    }

    /// Pre-tax fuel price of technology `k` in `year`.
    pub fn fuel_price(&self, k: usize, year: i32) -> CostDistribution {
        let p = &self.dataset.regions[self.index].fuel_prices[&self.techs[k].fuel];
        let factor = self.trend_factor(year);
        let y = f64::from(year);
        CostDistribution::new(p.price.interpolate(y) * factor, p.sd.interpolate(y) * factor)
    }

    /// Pre-policy cost inputs with investment cost scaled by `multiplier`.
    pub fn cost_inputs(&self, k: usize, year: i32, multiplier: f64) -> CostInputs {
        let base = &self.dataset.costs[k];
        let rt = &self.dataset.regions[self.index].techs[k];
        let scale = rt.ic_factor * multiplier;
        CostInputs {
            ic: CostDistribution::new(base.ic.mean * scale, base.ic.sd * scale),
            mr: base.mr,
            fuel_price: self.fuel_price(k, year),
            cf: rt.cf,
        }
    }

    /// Levelised cost per technology without policy.
    pub fn levelised_costs(&self, year: i32, multipliers: &[f64]) -> Result<Vec<f64>> {
        (0..self.techs.len())
            .map(|k| {
                levelised_cost(
                    &self.techs[k],
                    &self.cost_inputs(k, year, multipliers[k]),
                    self.params.behaviour.discount_rate,
                )
            })
            .collect()
    }

    fn available(&self, shares: &[f64], policy: &PolicyAtT) -> Vec<bool> {
        (0..self.techs.len())
            .map(|k| {
                let class = self.classes[k];
                if class == TechClass::DistrictHeat && !self.district_allowed {
                    return false;
                }
                shares[k] > 0.0 || policy.kick_start.as_ref().is_some_and(|c| c.contains(&class))
            })
            .collect()
    }

    pub fn evaluate(&self, shares: &[f64], year: i32, policy: &PolicyAtT, multipliers: &[f64]) -> Result<Evaluation> {
        let n = self.techs.len();
        let r = self.params.behaviour.discount_rate;
        let mut costs = Vec::with_capacity(n);
        let mut policies = Vec::with_capacity(n);
        let mut taxed = Vec::with_capacity(n);
        let mut gcoh = Vec::with_capacity(n);
        for k in 0..n {
            let tech = &self.techs[k];
            let base = self.cost_inputs(k, year, multipliers[k]);
            let p = policy.for_tech(tech);
            let c = apply_policies(&base, tech, &p)?;
            let lcoh = levelised_cost(tech, &c, r)?;
            gcoh.push(generalised_cost(lcoh, cost_spread(tech, &c, r)?, self.gamma[k]));
            costs.push(base);
            policies.push(p);
            taxed.push(c);
        }
        let available = self.available(shares, policy);
        let preferences = preference_matrix(&gcoh, &self.mask, &available);
        let scrap = if self.scrapping {
            let b = self.params.behaviour.payback_threshold;
            let mut mc = Vec::with_capacity(n);
            let mut pb = Vec::with_capacity(n);
            for k in 0..n {
                let tech = &self.techs[k];
                let m = CostDistribution::new(
                    marginal_running_cost(tech, &taxed[k])?,
                    running_cost_spread(tech, &taxed[k])?,
                );
                pb.push(payback_distribution(m, investment_per_kwh(&taxed[k])?, b)?);
                mc.push(m);
            }
            Some(scrap_matrix(&mc, &pb, &self.classes, &self.mask, &available))
        } else {
            None
        };
        Ok(Evaluation { costs, policies, gcoh, preferences, scrap })
    }

    fn step_inputs<'b>(&'b self, eval: &'b Evaluation, policy: &'b PolicyAtT, t: f64) -> StepInputs<'b> {
        StepInputs {
            preferences: &eval.preferences,
            scrap: eval.scrap.as_ref(),
            lifetimes: &self.lifetimes,
            scrap_rates: &self.scrap_rates,
            classes: &self.classes,
            kick_start: policy.kick_start.as_deref(),
            water_fraction: self.water_fraction(t),
            district_allowed: self.district_allowed,
        }
    }

    /// Instantaneous share change per year from replacement and scrapping.
    pub fn share_rates(&self, shares: &[f64], year: i32, policy: &PolicyAtT, multipliers: &[f64]) -> Result<Vec<f64>> {
        let eval = self.evaluate(shares, year, policy, multipliers)?;
        Ok(share_rates(shares, &self.step_inputs(&eval, policy, f64::from(year))))
    }

    /// Advances shares from `t` to `t + dt` without accounting.
    pub fn advance(&self, shares: &[f64], t: f64, dt: f64, policy: &PolicyAtT, multipliers: &[f64]) -> Result<Vec<f64>> {
        let year = t.floor() as i32;
        let eval = self.evaluate(shares, year, policy, multipliers)?;
        let state = RegionState { shares: shares.to_vec(), ue_total: self.ue_total(t), water_fraction: self.water_fraction(t), year: t };
        let (next, _) = step_shares(&state, &self.step_inputs(&eval, policy, t), dt)?;
        Ok(next.shares)
    }

    /// One accounted step.
    pub fn step(
        &self,
        shares: &[f64],
        t: f64,
        dt: f64,
        policy: &PolicyAtT,
        multipliers: &[f64],
    ) -> Result<(Vec<f64>, StepTotals)> {
        let n = self.techs.len();
        let year = t.floor() as i32;
        let eval = self.evaluate(shares, year, policy, multipliers)?;
        let ue_now = self.ue_total(t);
        let ue_next = self.ue_total(t + dt);
        let state = RegionState { shares: shares.to_vec(), ue_total: ue_now, water_fraction: self.water_fraction(t), year: t };
        let (next, report) = step_shares(&state, &self.step_inputs(&eval, policy, t), dt)?;
        let scrapped_share = report.scrapped_out();

        let region = &self.dataset.regions[self.index];
        let decarb = region.grid.decarbonisation.at(year)?;
        let baseline = region.grid.baseline.at(year)?;

        let mut out = StepTotals {
            ue_kwh: vec![0.0; n],
            final_kwh: vec![0.0; n],
            built_kw: vec![0.0; n],
            scrapped_kw: vec![0.0; n],
            ..Default::default()
        };
        for k in 0..n {
            let tech = &self.techs[k];
            let c = &eval.costs[k];
            let full_load = HOURS_PER_YEAR * c.cf;
            let ue = shares[k] * ue_now * dt;
            let fuel = ue / tech.conversion_efficiency;
            let cap_now = shares[k] * ue_now / full_load;
            let cap_next = next.shares[k] * ue_next / full_load;
            let built = (cap_next - cap_now).max(0.0) + cap_now * dt / tech.lifetime;
            out.ue_kwh[k] = ue;
            out.final_kwh[k] = fuel;
            out.built_kw[k] = built;
            out.scrapped_kw[k] = scrapped_share[k] * ue_now / full_load;

            let p = &eval.policies[k];
            let price = c.fuel_price.mean;
            out.money.invest_eur += built * c.ic.mean;
            out.money.energy_eur += fuel * price;
            out.money.tax_eur += fuel * p.carbon_tax * tech.carbon_content / 1000.0;
            out.money.subsidy_eur += built * c.ic.mean * p.ic_subsidy + fuel * p.electricity_subsidy.min(price);

            out.direct_kg += fuel * tech.carbon_content;
            if tech.fuel == DISTRICT_HEAT {
                out.direct_kg += fuel * self.params.district_upstream_kg_per_kwh;
            }
            if tech.fuel == ELECTRICITY {
                out.indirect_decarb_kg += fuel * decarb;
                out.indirect_baseline_kg += fuel * baseline;
            }
        }
        Ok((next.shares, out))
    }
}

/// Learning pool at the start of a run: reference capacity is the global
/// stock in the start year.
pub fn initial_learning(models: &[RegionModel<'_>], shares: &[Vec<f64>], from: i32, params: &ModelParams) -> Result<LearningState> {
    let dataset = models[0].dataset;
    let n = dataset.technologies.len();
    let mut stock = vec![0.0; n];
    for (m, s) in models.iter().zip(shares) {
        let ue = m.ue_total(f64::from(from));
        for k in 0..n {
            stock[k] += s[k] * ue / (HOURS_PER_YEAR * dataset.regions[m.index].techs[k].cf);
        }
    }
    let entries = (0..n)
        .map(|k| {
            // a technology absent everywhere still needs a finite reference
            let reference = stock[k].max(1.0);
            LearningEntry {
                cumulative: reference,
                reference,
                reference_ic: dataset.costs[k].ic.mean,
                learning_rate: dataset.technologies[k].learning_rate * params.learning_rate_scale,
            }
        })
        .collect();
    LearningState::new(entries, params.learning_floor)
}

/// Starting shares of every region from the observed history.
pub fn initial_shares(dataset: &Dataset, year: i32) -> Result<Vec<Vec<f64>>> {
    dataset
        .regions
        .iter()
        .map(|r| {
            r.history
                .at(year)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| Error::validation(format!("region {}: no observed shares in {year}", r.id)))
        })
        .collect()
}

/// Gamma values of every region, in dataset region order.
pub fn region_gammas(dataset: &Dataset, gammas: &GammaVector) -> Result<Vec<Vec<f64>>> {
    let n = dataset.technologies.len();
    dataset
        .regions
        .iter()
        .map(|r| {
            let slice = gammas
                .slice(&r.id)
                .ok_or_else(|| Error::validation(format!("no gamma values for region {}", r.id)))?;
            slice.validate(n)?;
            Ok(slice.values.clone())
        })
        .collect()
}

pub fn simulate_run(dataset: &Dataset, scenario: &ScenarioSpec, gammas: &GammaVector, config: &RunConfig) -> Result<RunResult> {
    simulate_run_with(dataset, scenario, gammas, config, &|_| {})
}

/// Runs a scenario, reporting progress through `observer`.
pub fn simulate_run_with(
    dataset: &Dataset,
    scenario: &ScenarioSpec,
    gammas: &GammaVector,
    config: &RunConfig,
    observer: &(dyn Fn(&Progress) + Sync),
) -> Result<RunResult> {
    config.validate()?;
    scenario.validate()?;
    scenario.validate_regions(&dataset.region_ids())?;
    let horizon = dataset.horizon_violations(config.from, config.to);
    if !horizon.is_empty() {
        return Err(Error::Dataset(horizon));
    }
    let steps_per_year = config.steps_per_year()?;
    let dt = config.dt;
    let gamma_rows = region_gammas(dataset, gammas)?;
    let models = (0..dataset.regions.len())
        .map(|r| {
            RegionModel::new(
                dataset,
                r,
                &scenario.demand_variant,
                config.from,
                &gamma_rows[r],
                &config.params,
                config.scrapping_enabled,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut shares = initial_shares(dataset, config.from)?;
    let mut learning = initial_learning(&models, &shares, config.from, &config.params)?;
    let fuels = dataset.fuels();
    let fuel_of: Vec<usize> = dataset
        .technologies
        .iter()
        .map(|t| fuels.iter().position(|f| *f == t.fuel).expect("fuel listed"))
        .collect();
    let n = dataset.technologies.len();
    let total_years = (config.to - config.from + 1) as usize;
    let mut regions: Vec<RegionResult> = dataset
        .regions
        .iter()
        .map(|r| RegionResult { region: r.id.clone(), years: Vec::with_capacity(total_years) })
        .collect();

    for (year_idx, year) in (config.from..=config.to).enumerate() {
        let policies: Vec<PolicyAtT> = dataset.regions.iter().map(|r| scenario.schedule.at(&r.id, year)).collect();
        let mut rows: Vec<RegionYear> = models
            .iter()
            .zip(&shares)
            .map(|(m, s)| {
                let t = f64::from(year);
                let ue_total = m.ue_total(t);
                let dataset_region = &dataset.regions[m.index];
                RegionYear {
                    year,
                    shares: s.clone(),
                    ue_total_kwh: ue_total,
                    water_fraction: m.water_fraction(t),
                    ue_kwh: vec![0.0; n],
                    final_kwh: vec![0.0; fuels.len()],
                    capacity_kw: (0..n)
                        .map(|k| s[k] * ue_total / (HOURS_PER_YEAR * dataset_region.techs[k].cf))
                        .collect(),
                    built_kw: vec![0.0; n],
                    scrapped_kw: vec![0.0; n],
                    direct_kg: 0.0,
                    indirect_decarb_kg: 0.0,
                    indirect_baseline_kg: 0.0,
                    money: Money::default(),
                }
            })
            .collect();

        for step in 0..steps_per_year {
            let t = f64::from(year) + step as f64 * dt;
            let multipliers = learning.multipliers();
            let outcomes = models
                .par_iter()
                .zip(shares.par_iter())
                .zip(policies.par_iter())
                .map(|((m, s), p)| m.step(s, t, dt, p, &multipliers).map_err(|e| e.in_run(m.id(), year)))
                .collect::<Result<Vec<_>>>()?;
            let mut additions = vec![0.0; n];
            for (r, (next, totals)) in outcomes.into_iter().enumerate() {
                let row = &mut rows[r];
                for k in 0..n {
                    row.ue_kwh[k] += totals.ue_kwh[k];
                    row.final_kwh[fuel_of[k]] += totals.final_kwh[k];
                    row.built_kw[k] += totals.built_kw[k];
                    row.scrapped_kw[k] += totals.scrapped_kw[k];
                    additions[k] += totals.built_kw[k];
                }
                row.direct_kg += totals.direct_kg;
                row.indirect_decarb_kg += totals.indirect_decarb_kg;
                row.indirect_baseline_kg += totals.indirect_baseline_kg;
                row.money.add(&totals.money);
                shares[r] = next;
            }
            for (k, add) in additions.into_iter().enumerate() {
                learning.learning_update(k, add)?;
            }
        }
        for (region, row) in regions.iter_mut().zip(rows) {
            observer(&Progress {
                region: region.region.clone(),
                year,
                completed_years: year_idx + 1,
                total_years,
            });
            region.years.push(row);
        }
    }

    let mut notes = Vec::new();
    if config.params.district_upstream_kg_per_kwh == 0.0 {
        notes.push("district heat carries no upstream plant emissions in direct CO2".to_string());
    }
    let used: GammaVector = GammaVector {
        regions: dataset
            .regions
            .iter()
            .map(|r| (r.id.clone(), gammas.regions[&r.id].clone()))
            .collect(),
    };
    Ok(RunResult {
        schema_version: SCHEMA_VERSION,
        metadata: RunMetadata {
            scenario_id: scenario.id.clone(),
            scenario: scenario.clone(),
            dataset_id: dataset.id.clone(),
            dataset_hash: dataset.hash.clone(),
            config: config.clone(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            power_variant: scenario.power_variant,
            notes,
        },
        technologies: dataset.technologies.iter().map(|t| t.id.clone()).collect(),
        fuels,
        years: (config.from..=config.to).collect(),
        regions,
        gammas: used,
    })
}
