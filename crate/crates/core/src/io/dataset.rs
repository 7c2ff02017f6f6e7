//! Dataset directory: CSV files, loading with full violation reports, and
//! writing back out.
//!
//! | file | columns |
//! |------|---------|
//! | `technologies.csv` | `tech_id,class,ce,lifetime_y,learning_rate,fuel,carbon_kg_per_kwh,ic_eur_per_kw,ic_sd,mr_eur_per_kw_a,mr_sd,subsidy_eligible` |
//! | `regions.csv` | `region,kick_start_eligible` |
//! | `region_tech.csv` | `region,tech_id,cf,ce,ic_factor` (`ce` may be empty) |
//! | `fuel_prices.csv` | `region,fuel,year,price_eur_per_kwh,sd` |
//! | `shares.csv` | `region,tech_id,year,share` |
//! | `drivers.csv` | `region,year,population,m2_per_cap,hdd,intensity_kj,income,new_build_frac,water_sat_kwh,water_half_sat_income` |
//! | `demand_trajectories.csv` | `region,year,ue_total_kwh,water_fraction` |
//! | `grid_intensity.csv` | `region,year,variant,kg_per_kwh` |
//! | `mask.csv` | `from_class,to_class,allowed` (optional, default: all allowed) |
//! | `gammas.csv` | `region,tech_id,gamma_cent_per_kwh,provenance` (optional) |
//!
//! Each region needs either driver rows or trajectory rows.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use csv::StringRecord;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::choice::ClassMask;
use crate::costs::{CostDistribution, GammaProvenance, GammaSlice, GammaVector};
use crate::demand::{DemandDrivers, DemandSource, DemandTrajectory, RegionDemandInputs, WaterDemandParams};
use crate::io::parse_decimal;
use crate::scenario::PowerVariant;
use crate::series::TimeSeries;
use crate::tech::{TechClass, Technology, ELECTRICITY};
use crate::{Error, Result, Violation, ViolationKind};

pub const TECHNOLOGIES: &str = "technologies.csv";
pub const REGIONS: &str = "regions.csv";
pub const REGION_TECH: &str = "region_tech.csv";
pub const FUEL_PRICES: &str = "fuel_prices.csv";
pub const SHARES: &str = "shares.csv";
pub const DRIVERS: &str = "drivers.csv";
pub const TRAJECTORIES: &str = "demand_trajectories.csv";
pub const GRID: &str = "grid_intensity.csv";
pub const MASK: &str = "mask.csv";
pub const GAMMAS: &str = "gammas.csv";

const DATA_FILES: [&str; 10] = [
    TECHNOLOGIES,
    REGIONS,
    REGION_TECH,
    FUEL_PRICES,
    SHARES,
    DRIVERS,
    TRAJECTORIES,
    GRID,
    MASK,
    GAMMAS,
];

/// Tolerance on historical shares summing to one.
pub const SHARE_SUM_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TechCosts {
    /// €/kW_th.
    pub ic: CostDistribution,
    /// €/kW_th/year.
    pub mr: CostDistribution,
}

/// Region-specific technology parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionTech {
    pub cf: f64,
    /// Overrides the technology's conversion efficiency in this region.
    pub ce: Option<f64>,
    /// Multiplier on the global investment cost.
    pub ic_factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuelPrice {
    /// €/kWh.
    pub price: TimeSeries,
    pub sd: TimeSeries,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridIntensity {
    /// kgCO2/kWh_el.
    pub decarbonisation: TimeSeries,
    pub baseline: TimeSeries,
}

impl GridIntensity {
    pub fn series(&self, variant: PowerVariant) -> &TimeSeries {
        match variant {
            PowerVariant::Decarbonisation15C => &self.decarbonisation,
            PowerVariant::PowerBaseline => &self.baseline,
        }
    }
}

/// Observed shares, one row per year in technology order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ShareHistory {
    pub years: Vec<i32>,
    pub shares: Vec<Vec<f64>>,
}

impl ShareHistory {
    pub fn at(&self, year: i32) -> Option<&[f64]> {
        self.years
            .binary_search(&year)
            .ok()
            .map(|idx| self.shares[idx].as_slice())
    }

    pub fn series(&self, tech: usize) -> TimeSeries {
        TimeSeries {
            years: self.years.clone(),
            values: self.shares.iter().map(|row| row[tech]).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: String,
    pub kick_start_eligible: bool,
    /// One entry per dataset technology.
    pub techs: Vec<RegionTech>,
    pub fuel_prices: BTreeMap<String, FuelPrice>,
    pub history: ShareHistory,
    pub demand: DemandSource,
    pub grid: GridIntensity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub id: String,
    /// sha256 over the dataset files.
    pub hash: String,
    pub technologies: Vec<Technology>,
    pub costs: Vec<TechCosts>,
    pub regions: Vec<Region>,
    pub class_mask: ClassMask,
    pub gammas: Option<GammaVector>,
}

impl Dataset {
    pub fn region_index(&self, id: &str) -> Result<usize> {
        self.regions
            .iter()
            .position(|r| r.id == id)
            .ok_or_else(|| Error::validation(format!("unknown region `{id}`")))
    }

    pub fn tech_index(&self, id: &str) -> Result<usize> {
        self.technologies
            .iter()
            .position(|t| t.id == id)
            .ok_or_else(|| Error::validation(format!("unknown technology `{id}`")))
    }

    pub fn region_ids(&self) -> Vec<&str> {
        self.regions.iter().map(|r| r.id.as_str()).collect()
    }

    pub fn kick_start_regions(&self) -> Vec<String> {
        self.regions
            .iter()
            .filter(|r| r.kick_start_eligible)
            .map(|r| r.id.clone())
            .collect()
    }

    /// Technologies with this region's efficiency overrides applied.
    pub fn region_technologies(&self, region: usize) -> Vec<Technology> {
        self.technologies
            .iter()
            .zip(&self.regions[region].techs)
            .map(|(t, rt)| {
                let mut t = t.clone();
                if let Some(ce) = rt.ce {
                    t.conversion_efficiency = ce;
                }
                t
            })
            .collect()
    }

    /// True when the region has (had) a heat network.
    pub fn district_heat_present(&self, region: usize) -> bool {
        let r = &self.regions[region];
        self.technologies
            .iter()
            .enumerate()
            .filter(|(_, t)| t.class == TechClass::DistrictHeat)
            .any(|(k, _)| r.history.shares.iter().any(|row| row[k] > 0.0))
    }

    /// Fuel ids in first-use technology order.
    pub fn fuels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in &self.technologies {
            if !out.contains(&t.fuel) {
                out.push(t.fuel.clone());
            }
        }
        out
    }

    /// Problems that would stop a run over `from..=to`.
    pub fn horizon_violations(&self, from: i32, to: i32) -> Vec<Violation> {
        let mut v = Vec::new();
        if from > to {
            v.push(violation("", None, ViolationKind::Integrity, format!("start year {from} after end year {to}")));
            return v;
        }
        for r in &self.regions {
            if r.history.at(from).is_none() {
                v.push(violation(
                    SHARES,
                    None,
                    ViolationKind::Integrity,
                    format!("region {}: no observed shares for start year {from}", r.id),
                ));
            }
            let (file, first, last) = match &r.demand {
                DemandSource::Drivers(d) => (DRIVERS, d.drivers.years.first(), d.drivers.years.last()),
                DemandSource::Trajectory(t) => (TRAJECTORIES, t.ue_total.years.first(), t.ue_total.years.last()),
            };
            if first.is_none_or(|&f| f > from) || last.is_none_or(|&l| l < to) {
                v.push(violation(
                    file,
                    None,
                    ViolationKind::Integrity,
                    format!("region {}: demand does not cover {from}..={to}", r.id),
                ));
            }
            for variant in [PowerVariant::Decarbonisation15C, PowerVariant::PowerBaseline] {
                let s = r.grid.series(variant);
                if let Some(y) = (from..=to).find(|&y| s.get(y).is_none()) {
                    v.push(violation(
                        GRID,
                        None,
                        ViolationKind::Integrity,
                        format!("region {}: {variant} grid intensity missing for {y}", r.id),
                    ));
                }
            }
        }
        v
    }

    /// Structural checks on an in-memory dataset.
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let n = self.technologies.len();
        for t in &self.technologies {
            if let Err(e) = t.validate() {
                v.push(violation(TECHNOLOGIES, None, ViolationKind::Unit, e.to_string()));
            }
        }
        if self.costs.len() != n {
            v.push(violation(TECHNOLOGIES, None, ViolationKind::Schema, "cost rows do not match technologies"));
        }
        for r in &self.regions {
            if r.techs.len() != n {
                v.push(violation(
                    REGION_TECH,
                    None,
                    ViolationKind::Integrity,
                    format!("region {} has {} technology rows for {n} technologies", r.id, r.techs.len()),
                ));
            }
            for (year, row) in r.history.years.iter().zip(&r.history.shares) {
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > SHARE_SUM_TOL || row.iter().any(|s| *s < 0.0) {
                    v.push(violation(
                        SHARES,
                        None,
                        ViolationKind::Integrity,
                        format!("region {} year {year}: shares sum to {sum}", r.id),
                    ));
                }
            }
        }
        v
    }

    /// Writes the dataset as CSV files into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut s = String::from(
            "tech_id,class,ce,lifetime_y,learning_rate,fuel,carbon_kg_per_kwh,ic_eur_per_kw,ic_sd,mr_eur_per_kw_a,mr_sd,subsidy_eligible\n",
        );
        for (t, c) in self.technologies.iter().zip(&self.costs) {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                t.id,
                t.class,
                t.conversion_efficiency,
                t.lifetime,
                t.learning_rate,
                t.fuel,
                t.carbon_content,
                c.ic.mean,
                c.ic.sd,
                c.mr.mean,
                c.mr.sd,
                t.renewable_subsidy_eligible
            );
        }
        fs::write(dir.join(TECHNOLOGIES), s)?;

        let mut s = String::from("region,kick_start_eligible\n");
        for r in &self.regions {
            let _ = writeln!(s, "{},{}", r.id, r.kick_start_eligible);
        }
        fs::write(dir.join(REGIONS), s)?;

        let mut s = String::from("region,tech_id,cf,ce,ic_factor\n");
        for r in &self.regions {
            for (t, rt) in self.technologies.iter().zip(&r.techs) {
                let ce = rt.ce.map(|c| c.to_string()).unwrap_or_default();
                let _ = writeln!(s, "{},{},{},{},{}", r.id, t.id, rt.cf, ce, rt.ic_factor);
            }
        }
        fs::write(dir.join(REGION_TECH), s)?;

        let mut s = String::from("region,fuel,year,price_eur_per_kwh,sd\n");
        for r in &self.regions {
            for (fuel, p) in &r.fuel_prices {
                for (k, year) in p.price.years.iter().enumerate() {
                    let _ = writeln!(s, "{},{},{},{},{}", r.id, fuel, year, p.price.values[k], p.sd.values[k]);
                }
            }
        }
        fs::write(dir.join(FUEL_PRICES), s)?;

        let mut s = String::from("region,tech_id,year,share\n");
        for r in &self.regions {
            for (year, row) in r.history.years.iter().zip(&r.history.shares) {
                for (t, share) in self.technologies.iter().zip(row) {
                    let _ = writeln!(s, "{},{},{},{}", r.id, t.id, year, share);
                }
            }
        }
        fs::write(dir.join(SHARES), s)?;

        let mut drivers = String::from(
            "region,year,population,m2_per_cap,hdd,intensity_kj,income,new_build_frac,water_sat_kwh,water_half_sat_income\n",
        );
        let mut trajectories = String::from("region,year,ue_total_kwh,water_fraction\n");
        let (mut any_drivers, mut any_trajectories) = (false, false);
        for r in &self.regions {
            match &r.demand {
                DemandSource::Drivers(inp) => {
                    any_drivers = true;
                    let d = &inp.drivers;
                    for k in 0..d.years.len() {
                        let _ = writeln!(
                            drivers,
                            "{},{},{},{},{},{},{},{},{},{}",
                            r.id,
                            d.years[k],
                            d.population[k],
                            d.floor_per_capita[k],
                            d.hdd[k],
                            d.heating_intensity[k],
                            d.income[k],
                            d.new_build_fraction[k],
                            inp.water.saturation_level,
                            inp.water.half_saturation_income
                        );
                    }
                }
                DemandSource::Trajectory(t) => {
                    any_trajectories = true;
                    for k in 0..t.ue_total.years.len() {
                        let _ = writeln!(
                            trajectories,
                            "{},{},{},{}",
                            r.id, t.ue_total.years[k], t.ue_total.values[k], t.water_fraction.values[k]
                        );
                    }
                }
            }
        }
        if any_drivers {
            fs::write(dir.join(DRIVERS), drivers)?;
        }
        if any_trajectories {
            fs::write(dir.join(TRAJECTORIES), trajectories)?;
        }

        let mut s = String::from("region,year,variant,kg_per_kwh\n");
        for r in &self.regions {
            for variant in [PowerVariant::Decarbonisation15C, PowerVariant::PowerBaseline] {
                let series = r.grid.series(variant);
                for (year, v) in series.years.iter().zip(&series.values) {
                    let _ = writeln!(s, "{},{},{},{}", r.id, year, variant, v);
                }
            }
        }
        fs::write(dir.join(GRID), s)?;

        let mut s = String::from("from_class,to_class,allowed\n");
        for (from, to, allowed) in self.class_mask.rules() {
            let _ = writeln!(s, "{from},{to},{allowed}");
        }
        fs::write(dir.join(MASK), s)?;

        if let Some(g) = &self.gammas {
            fs::write(dir.join(GAMMAS), gammas_csv(self, g))?;
        }
        Ok(())
    }
}

/// Gamma CSV text for `gammas`, in ¢/kWh.
pub fn gammas_csv(dataset: &Dataset, gammas: &GammaVector) -> String {
    let mut s = String::from("region,tech_id,gamma_cent_per_kwh,provenance\n");
    for (region, slice) in &gammas.regions {
        for (k, t) in dataset.technologies.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                region,
                t.id,
                slice.values[k] * 100.0,
                slice.provenance[k].as_str()
            );
        }
    }
    s
}

fn violation(file: &str, row: Option<usize>, kind: ViolationKind, message: impl Into<String>) -> Violation {
    Violation { file: file.to_string(), row, kind, message: message.into() }
}

struct Sink(Vec<Violation>);

impl Sink {
    fn push(&mut self, file: &str, row: Option<usize>, kind: ViolationKind, message: impl Into<String>) {
        self.0.push(violation(file, row, kind, message));
    }
}

struct Table {
    file: &'static str,
    columns: BTreeMap<String, usize>,
    rows: Vec<StringRecord>,
}

struct Row<'a> {
    table: &'a Table,
    /// 1-based data row.
    line: usize,
    record: &'a StringRecord,
}

impl Row<'_> {
    fn text(&self, col: &str) -> &str {
        self.table
            .columns
            .get(col)
            .and_then(|&i| self.record.get(i))
            .map(str::trim)
            .unwrap_or("")
    }

    fn number(&self, col: &str, sink: &mut Sink) -> Option<f64> {
        let raw = self.text(col);
        let v = parse_decimal(raw);
        if v.is_none() {
            sink.push(self.table.file, Some(self.line), ViolationKind::Schema, format!("column {col}: `{raw}` is not a number"));
        }
        v
    }

    fn optional_number(&self, col: &str, sink: &mut Sink) -> Option<Option<f64>> {
        if self.text(col).is_empty() {
            Some(None)
        } else {
            self.number(col, sink).map(Some)
        }
    }

    fn year(&self, col: &str, sink: &mut Sink) -> Option<i32> {
        let raw = self.text(col);
        let v = raw.parse::<i32>().ok();
        if v.is_none() {
            sink.push(self.table.file, Some(self.line), ViolationKind::Schema, format!("column {col}: `{raw}` is not a year"));
        }
        v
    }

    fn flag(&self, col: &str, sink: &mut Sink) -> Option<bool> {
        let raw = self.text(col);
        let v = match raw.to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => Some(true),
            "false" | "0" | "no" => Some(false),
            _ => None,
        };
        if v.is_none() {
            sink.push(self.table.file, Some(self.line), ViolationKind::Schema, format!("column {col}: `{raw}` is not a boolean"));
        }
        v
    }

    fn fail(&self, sink: &mut Sink, kind: ViolationKind, message: impl Into<String>) {
        sink.push(self.table.file, Some(self.line), kind, message);
    }
}

impl Table {
    fn rows(&self) -> impl Iterator<Item = Row<'_>> {
        self.rows
            .iter()
            .enumerate()
            .map(move |(k, record)| Row { table: self, line: k + 1, record })
    }
}

fn read_table(dir: &Path, file: &'static str, required: &[&str], optional: bool, sink: &mut Sink) -> Option<Table> {
    let path = dir.join(file);
    if !path.exists() {
        if !optional {
            sink.push(file, None, ViolationKind::Schema, "required file is missing");
        }
        return None;
    }
    let mut reader = match csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(&path) {
        Ok(r) => r,
        Err(e) => {
            sink.push(file, None, ViolationKind::Schema, e.to_string());
            return None;
        }
    };
    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) => {
            sink.push(file, None, ViolationKind::Schema, e.to_string());
            return None;
        }
    };
    let columns: BTreeMap<String, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().to_string(), i))
        .collect();
    let missing: Vec<&str> = required.iter().copied().filter(|c| !columns.contains_key(*c)).collect();
    if !missing.is_empty() {
        sink.push(file, None, ViolationKind::Schema, format!("missing column(s): {}", missing.join(", ")));
        return None;
    }
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        match record {
            Ok(r) => rows.push(r),
            Err(e) => sink.push(file, Some(k + 1), ViolationKind::Schema, e.to_string()),
        }
    }
    Some(Table { file, columns, rows })
}

fn dataset_hash(dir: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    for file in DATA_FILES {
        let path = dir.join(file);
        if path.exists() {
            hasher.update(file.as_bytes());
            hasher.update([0u8]);
            hasher.update(fs::read(&path)?);
            hasher.update([0u8]);
        }
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Collects `(year, value)` pairs into a contiguous series, reporting gaps
/// and duplicates.
fn build_series(mut points: Vec<(i32, f64)>, file: &str, what: &str, sink: &mut Sink) -> Option<TimeSeries> {
    points.sort_by_key(|p| p.0);
    if points.windows(2).any(|w| w[0].0 == w[1].0) {
        sink.push(file, None, ViolationKind::Integrity, format!("{what}: duplicate years"));
        return None;
    }
    if points.windows(2).any(|w| w[1].0 != w[0].0 + 1) {
        sink.push(file, None, ViolationKind::Integrity, format!("{what}: gap in year grid"));
        return None;
    }
    let (years, values) = points.into_iter().unzip();
    Some(TimeSeries { years, values })
}

/// Loads and validates a dataset directory. Either returns a dataset that
/// passes every check, or every violation found.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let mut sink = Sink(Vec::new());
    let id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("dataset")
        .to_string();

    // technologies
    let mut technologies = Vec::new();
    let mut costs = Vec::new();
    if let Some(table) = read_table(
        dir,
        TECHNOLOGIES,
        &[
            "tech_id", "class", "ce", "lifetime_y", "learning_rate", "fuel", "carbon_kg_per_kwh",
            "ic_eur_per_kw", "ic_sd", "mr_eur_per_kw_a", "mr_sd", "subsidy_eligible",
        ],
        false,
        &mut sink,
    ) {
        for row in table.rows() {
            let tech_id = row.text("tech_id").to_string();
            if tech_id.is_empty() {
                row.fail(&mut sink, ViolationKind::Schema, "empty tech_id");
                continue;
            }
            if technologies.iter().any(|t: &Technology| t.id == tech_id) {
                row.fail(&mut sink, ViolationKind::Integrity, format!("duplicate technology {tech_id}"));
                continue;
            }
            let class = match row.text("class").parse::<TechClass>() {
                Ok(c) => Some(c),
                Err(e) => {
                    row.fail(&mut sink, ViolationKind::Schema, e.to_string());
                    None
                }
            };
            let nums = [
                row.number("ce", &mut sink),
                row.number("lifetime_y", &mut sink),
                row.number("learning_rate", &mut sink),
                row.number("carbon_kg_per_kwh", &mut sink),
                row.number("ic_eur_per_kw", &mut sink),
                row.number("ic_sd", &mut sink),
                row.number("mr_eur_per_kw_a", &mut sink),
                row.number("mr_sd", &mut sink),
            ];
            let eligible = row.flag("subsidy_eligible", &mut sink);
            let fuel = row.text("fuel").to_string();
            if fuel.is_empty() {
                row.fail(&mut sink, ViolationKind::Schema, "empty fuel");
            }
            let (Some(class), Some(eligible), [Some(ce), Some(life), Some(lr), Some(carbon), Some(ic), Some(ic_sd), Some(mr), Some(mr_sd)]) =
                (class, eligible, nums)
            else {
                continue;
            };
            let tech = Technology {
                id: tech_id,
                class,
                conversion_efficiency: ce,
                lifetime: life,
                learning_rate: lr,
                fuel,
                carbon_content: carbon,
                renewable_subsidy_eligible: eligible,
            };
            if let Err(e) = tech.validate() {
                row.fail(&mut sink, ViolationKind::Unit, e.to_string());
            }
            if [ic, ic_sd, mr, mr_sd].iter().any(|v| *v < 0.0) {
                row.fail(&mut sink, ViolationKind::Unit, "cost means and sds must be >= 0");
            }
            technologies.push(tech);
            costs.push(TechCosts {
                ic: CostDistribution::new(ic, ic_sd),
                mr: CostDistribution::new(mr, mr_sd),
            });
        }
        if technologies.is_empty() {
            sink.push(TECHNOLOGIES, None, ViolationKind::Integrity, "no technologies defined");
        }
    }
    let mut carbon_by_fuel: BTreeMap<&str, f64> = BTreeMap::new();
    for t in &technologies {
        match carbon_by_fuel.get(t.fuel.as_str()) {
            Some(c) if *c != t.carbon_content => sink.push(
                TECHNOLOGIES,
                None,
                ViolationKind::Integrity,
                format!("fuel {} has conflicting carbon contents {c} and {}", t.fuel, t.carbon_content),
            ),
            _ => {
                carbon_by_fuel.insert(&t.fuel, t.carbon_content);
            }
        }
    }
    if carbon_by_fuel.get(ELECTRICITY).is_some_and(|c| *c != 0.0) {
        sink.push(TECHNOLOGIES, None, ViolationKind::Unit, "electricity has no on-site emissions; carbon content must be 0");
    }
    let tech_ids: Vec<String> = technologies.iter().map(|t| t.id.clone()).collect();
    let n_tech = tech_ids.len();
    let tech_pos = |id: &str| tech_ids.iter().position(|t| t == id);

    // regions
    let mut region_ids: Vec<String> = Vec::new();
    let mut kick_flags: Vec<bool> = Vec::new();
    if let Some(table) = read_table(dir, REGIONS, &["region", "kick_start_eligible"], false, &mut sink) {
        for row in table.rows() {
            let id = row.text("region").to_string();
            if id.is_empty() {
                row.fail(&mut sink, ViolationKind::Schema, "empty region id");
                continue;
            }
            if region_ids.contains(&id) {
                row.fail(&mut sink, ViolationKind::Integrity, format!("duplicate region {id}"));
                continue;
            }
            let Some(flag) = row.flag("kick_start_eligible", &mut sink) else { continue };
            region_ids.push(id);
            kick_flags.push(flag);
        }
        if region_ids.is_empty() {
            sink.push(REGIONS, None, ViolationKind::Integrity, "no regions defined");
        }
    }
    let region_pos = |id: &str| region_ids.iter().position(|r| r == id);
    let n_region = region_ids.len();

    // region_tech
    let mut region_techs: Vec<Vec<Option<RegionTech>>> = vec![vec![None; n_tech]; n_region];
    if let Some(table) = read_table(dir, REGION_TECH, &["region", "tech_id", "cf", "ic_factor"], false, &mut sink) {
        for row in table.rows() {
            let (Some(r), Some(t)) = (region_pos(row.text("region")), tech_pos(row.text("tech_id"))) else {
                row.fail(&mut sink, ViolationKind::Integrity, format!(
                    "unknown region `{}` or technology `{}`",
                    row.text("region"),
                    row.text("tech_id")
                ));
                continue;
            };
            let cf = row.number("cf", &mut sink);
            let ce = row.optional_number("ce", &mut sink);
            let icf = row.number("ic_factor", &mut sink);
            let (Some(cf), Some(ce), Some(ic_factor)) = (cf, ce, icf) else { continue };
            if !(cf > 0.0 && cf <= 1.0) {
                row.fail(&mut sink, ViolationKind::Unit, format!("capacity factor {cf} outside (0, 1]"));
            }
            if ce.is_some_and(|c| !(c > 0.0)) {
                row.fail(&mut sink, ViolationKind::Unit, "conversion efficiency must be > 0");
            }
            if !(ic_factor > 0.0) {
                row.fail(&mut sink, ViolationKind::Unit, format!("ic_factor {ic_factor} must be > 0"));
            }
            if region_techs[r][t].is_some() {
                row.fail(&mut sink, ViolationKind::Integrity, "duplicate region/technology row");
            }
            region_techs[r][t] = Some(RegionTech { cf, ce, ic_factor });
        }
        for (r, row) in region_techs.iter().enumerate() {
            for (t, entry) in row.iter().enumerate() {
                if entry.is_none() {
                    sink.push(REGION_TECH, None, ViolationKind::Integrity, format!(
                        "region {} lacks parameters for technology {}",
                        region_ids[r], tech_ids[t]
                    ));
                }
            }
        }
    }

    // fuel prices
    let mut price_points: Vec<BTreeMap<String, Vec<(i32, f64, f64)>>> = vec![BTreeMap::new(); n_region];
    if let Some(table) = read_table(dir, FUEL_PRICES, &["region", "fuel", "year", "price_eur_per_kwh", "sd"], false, &mut sink) {
        for row in table.rows() {
            let Some(r) = region_pos(row.text("region")) else {
                row.fail(&mut sink, ViolationKind::Integrity, format!("unknown region `{}`", row.text("region")));
                continue;
            };
            let fuel = row.text("fuel").to_string();
            let year = row.year("year", &mut sink);
            let price = row.number("price_eur_per_kwh", &mut sink);
            let sd = row.number("sd", &mut sink);
            let (Some(year), Some(price), Some(sd)) = (year, price, sd) else { continue };
            if price < 0.0 || sd < 0.0 {
                row.fail(&mut sink, ViolationKind::Unit, "fuel price and sd must be >= 0");
            }
            price_points[r].entry(fuel).or_default().push((year, price, sd));
        }
    }
    let mut fuel_prices: Vec<BTreeMap<String, FuelPrice>> = vec![BTreeMap::new(); n_region];
    for (r, fuels) in price_points.into_iter().enumerate() {
        for (fuel, points) in fuels {
            let what = format!("region {} fuel {fuel}", region_ids[r]);
            let price = build_series(points.iter().map(|p| (p.0, p.1)).collect(), FUEL_PRICES, &what, &mut sink);
            let sd = build_series(points.iter().map(|p| (p.0, p.2)).collect(), FUEL_PRICES, &what, &mut sink);
            if let (Some(price), Some(sd)) = (price, sd) {
                fuel_prices[r].insert(fuel, FuelPrice { price, sd });
            }
        }
        for fuel in carbon_by_fuel.keys() {
            if !fuel_prices[r].contains_key(*fuel) {
                sink.push(FUEL_PRICES, None, ViolationKind::Integrity, format!(
                    "region {}: no price for fuel {fuel}",
                    region_ids[r]
                ));
            }
        }
    }

    // shares
    let mut share_points: Vec<BTreeMap<i32, Vec<Option<f64>>>> = vec![BTreeMap::new(); n_region];
    if let Some(table) = read_table(dir, SHARES, &["region", "tech_id", "year", "share"], false, &mut sink) {
        for row in table.rows() {
            let r = region_pos(row.text("region"));
            let t = tech_pos(row.text("tech_id"));
            if r.is_none() {
                row.fail(&mut sink, ViolationKind::Integrity, format!("unknown region `{}`", row.text("region")));
            }
            if t.is_none() {
                row.fail(&mut sink, ViolationKind::Integrity, format!("unknown technology `{}`", row.text("tech_id")));
            }
            let year = row.year("year", &mut sink);
            let share = row.number("share", &mut sink);
            let (Some(r), Some(t), Some(year), Some(share)) = (r, t, year, share) else { continue };
            if !(0.0..=1.0).contains(&share) {
                row.fail(&mut sink, ViolationKind::Unit, format!("share {share} outside [0, 1]"));
            }
            let slot = share_points[r].entry(year).or_insert_with(|| vec![None; n_tech]);
            if slot[t].is_some() {
                row.fail(&mut sink, ViolationKind::Integrity, "duplicate share row");
            }
            slot[t] = Some(share);
        }
    }
    let mut histories = Vec::with_capacity(n_region);
    for (r, points) in share_points.into_iter().enumerate() {
        let mut history = ShareHistory::default();
        let years: Vec<i32> = points.keys().copied().collect();
        if years.is_empty() {
            sink.push(SHARES, None, ViolationKind::Integrity, format!("region {}: no share rows", region_ids[r]));
        } else if years.windows(2).any(|w| w[1] != w[0] + 1) {
            sink.push(SHARES, None, ViolationKind::Integrity, format!("region {}: gap in share years", region_ids[r]));
        }
        for (year, row) in points {
            let shares: Vec<f64> = row.iter().map(|s| s.unwrap_or(0.0)).collect();
            let sum: f64 = shares.iter().sum();
            if (sum - 1.0).abs() > SHARE_SUM_TOL {
                sink.push(SHARES, None, ViolationKind::Integrity, format!(
                    "region {} year {year}: shares sum to {sum}",
                    region_ids[r]
                ));
            }
            history.years.push(year);
            history.shares.push(shares);
        }
        histories.push(history);
    }

    // demand
    let mut demand: Vec<Option<DemandSource>> = vec![None; n_region];
    if let Some(table) = read_table(
        dir,
        DRIVERS,
        &[
            "region", "year", "population", "m2_per_cap", "hdd", "intensity_kj", "income",
            "new_build_frac", "water_sat_kwh", "water_half_sat_income",
        ],
        true,
        &mut sink,
    ) {
        let mut rows_by_region: Vec<Vec<(i32, [f64; 8])>> = vec![Vec::new(); n_region];
        for row in table.rows() {
            let Some(r) = region_pos(row.text("region")) else {
                row.fail(&mut sink, ViolationKind::Integrity, format!("unknown region `{}`", row.text("region")));
                continue;
            };
            let year = row.year("year", &mut sink);
            let cols = ["population", "m2_per_cap", "hdd", "intensity_kj", "income", "new_build_frac", "water_sat_kwh", "water_half_sat_income"];
            let vals: Vec<Option<f64>> = cols.iter().map(|c| row.number(c, &mut sink)).collect();
            let (Some(year), true) = (year, vals.iter().all(Option::is_some)) else { continue };
            let v: Vec<f64> = vals.into_iter().flatten().collect();
            if !(crate::demand::INTENSITY_BAND.0..=crate::demand::INTENSITY_BAND.1).contains(&v[3]) {
                row.fail(&mut sink, ViolationKind::Unit, format!("heating intensity {} kJ/m²/HDD outside the sanity band", v[3]));
            }
            rows_by_region[r].push((year, [v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]]));
        }
        for (r, mut rows) in rows_by_region.into_iter().enumerate() {
            if rows.is_empty() {
                continue;
            }
            rows.sort_by_key(|x| x.0);
            let water = WaterDemandParams { saturation_level: rows[0].1[6], half_saturation_income: rows[0].1[7] };
            if rows.iter().any(|x| x.1[6] != water.saturation_level || x.1[7] != water.half_saturation_income) {
                sink.push(DRIVERS, None, ViolationKind::Integrity, format!(
                    "region {}: water parameters must be constant",
                    region_ids[r]
                ));
            }
            let col = |i: usize| rows.iter().map(|x| x.1[i]).collect::<Vec<f64>>();
            let drivers = DemandDrivers {
                years: rows.iter().map(|x| x.0).collect(),
                population: col(0),
                floor_per_capita: col(1),
                hdd: col(2),
                heating_intensity: col(3),
                income: col(4),
                new_build_fraction: col(5),
            };
            if let Err(e) = drivers.validate().and_then(|_| water.validate()) {
                sink.push(DRIVERS, None, ViolationKind::Unit, format!("region {}: {e}", region_ids[r]));
            }
            demand[r] = Some(DemandSource::Drivers(RegionDemandInputs { drivers, water }));
        }
    }
    if let Some(table) = read_table(dir, TRAJECTORIES, &["region", "year", "ue_total_kwh", "water_fraction"], true, &mut sink) {
        let mut points: Vec<Vec<(i32, f64, f64)>> = vec![Vec::new(); n_region];
        for row in table.rows() {
            let Some(r) = region_pos(row.text("region")) else {
                row.fail(&mut sink, ViolationKind::Integrity, format!("unknown region `{}`", row.text("region")));
                continue;
            };
            let year = row.year("year", &mut sink);
            let ue = row.number("ue_total_kwh", &mut sink);
            let wf = row.number("water_fraction", &mut sink);
            let (Some(year), Some(ue), Some(wf)) = (year, ue, wf) else { continue };
            points[r].push((year, ue, wf));
        }
        for (r, p) in points.into_iter().enumerate() {
            if p.is_empty() {
                continue;
            }
            if demand[r].is_some() {
                sink.push(TRAJECTORIES, None, ViolationKind::Integrity, format!(
                    "region {} has both drivers and a trajectory",
                    region_ids[r]
                ));
                continue;
            }
            let what = format!("region {}", region_ids[r]);
            let ue = build_series(p.iter().map(|x| (x.0, x.1)).collect(), TRAJECTORIES, &what, &mut sink);
            let wf = build_series(p.iter().map(|x| (x.0, x.2)).collect(), TRAJECTORIES, &what, &mut sink);
            if let (Some(ue_total), Some(water_fraction)) = (ue, wf) {
                let t = DemandTrajectory { ue_total, water_fraction };
                if let Err(e) = t.validate() {
                    sink.push(TRAJECTORIES, None, ViolationKind::Unit, format!("{what}: {e}"));
                }
                demand[r] = Some(DemandSource::Trajectory(t));
            }
        }
    }
    for (r, d) in demand.iter().enumerate() {
        if d.is_none() {
            sink.push(DRIVERS, None, ViolationKind::Integrity, format!(
                "region {}: no demand drivers or trajectory",
                region_ids[r]
            ));
        }
    }

    // grid
    let mut grid_points: Vec<[Vec<(i32, f64)>; 2]> = vec![[Vec::new(), Vec::new()]; n_region];
    if let Some(table) = read_table(dir, GRID, &["region", "year", "variant", "kg_per_kwh"], false, &mut sink) {
        for row in table.rows() {
            let Some(r) = region_pos(row.text("region")) else {
                row.fail(&mut sink, ViolationKind::Integrity, format!("unknown region `{}`", row.text("region")));
                continue;
            };
            let variant = match PowerVariant::parse(row.text("variant")) {
                Ok(v) => Some(v),
                Err(e) => {
                    row.fail(&mut sink, ViolationKind::Schema, e.to_string());
                    None
                }
            };
            let year = row.year("year", &mut sink);
            let kg = row.number("kg_per_kwh", &mut sink);
            let (Some(variant), Some(year), Some(kg)) = (variant, year, kg) else { continue };
            if kg < 0.0 {
                row.fail(&mut sink, ViolationKind::Unit, format!("grid intensity {kg} must be >= 0"));
            }
            let slot = match variant {
                PowerVariant::Decarbonisation15C => 0,
                PowerVariant::PowerBaseline => 1,
            };
            grid_points[r][slot].push((year, kg));
        }
    }
    let mut grids = Vec::with_capacity(n_region);
    for (r, [decarb, base]) in grid_points.into_iter().enumerate() {
        let mut series = |points: Vec<(i32, f64)>, variant: PowerVariant| {
            let what = format!("region {} {variant}", region_ids[r]);
            if points.is_empty() {
                sink.push(GRID, None, ViolationKind::Integrity, format!("{what}: no grid intensity rows"));
                return None;
            }
            build_series(points, GRID, &what, &mut sink)
        };
        let d = series(decarb, PowerVariant::Decarbonisation15C);
        let b = series(base, PowerVariant::PowerBaseline);
        grids.push(d.zip(b).map(|(decarbonisation, baseline)| GridIntensity { decarbonisation, baseline }));
    }

    // mask
    let mut class_mask = ClassMask::allow_all();
    if let Some(table) = read_table(dir, MASK, &["from_class", "to_class", "allowed"], true, &mut sink) {
        for row in table.rows() {
            let from = row.text("from_class").parse::<TechClass>();
            let to = row.text("to_class").parse::<TechClass>();
            let allowed = row.flag("allowed", &mut sink);
            match (from, to, allowed) {
                (Ok(f), Ok(t), Some(a)) => class_mask.set(f, t, a),
                (Err(e), _, _) | (_, Err(e), _) => row.fail(&mut sink, ViolationKind::Schema, e.to_string()),
                _ => {}
            }
        }
    }

    // gammas
    let mut gammas = None;
    if let Some(table) = read_table(dir, GAMMAS, &["region", "tech_id", "gamma_cent_per_kwh", "provenance"], true, &mut sink) {
        let mut g = GammaVector::zero(region_ids.iter().map(String::as_str), n_tech);
        for row in table.rows() {
            let (Some(r), Some(t)) = (region_pos(row.text("region")), tech_pos(row.text("tech_id"))) else {
                row.fail(&mut sink, ViolationKind::Integrity, format!(
                    "unknown region `{}` or technology `{}`",
                    row.text("region"),
                    row.text("tech_id")
                ));
                continue;
            };
            let value = row.number("gamma_cent_per_kwh", &mut sink);
            let provenance = match GammaProvenance::parse(row.text("provenance")) {
                Ok(p) => Some(p),
                Err(e) => {
                    row.fail(&mut sink, ViolationKind::Schema, e.to_string());
                    None
                }
            };
            let (Some(value), Some(provenance)) = (value, provenance) else { continue };
            let slice: &mut GammaSlice = g.regions.get_mut(&region_ids[r]).expect("region present");
            slice.values[t] = value / 100.0;
            slice.provenance[t] = provenance;
        }
        gammas = Some(g);
    }

    if !sink.0.is_empty() {
        return Err(Error::Dataset(sink.0));
    }

    let mut regions = Vec::with_capacity(n_region);
    for (r, id) in region_ids.into_iter().enumerate() {
        regions.push(Region {
            id,
            kick_start_eligible: kick_flags[r],
            techs: region_techs[r].iter().map(|t| t.expect("checked")).collect(),
            fuel_prices: std::mem::take(&mut fuel_prices[r]),
            history: std::mem::take(&mut histories[r]),
            demand: demand[r].take().expect("checked"),
            grid: grids[r].take().expect("checked"),
        });
    }
    let dataset = Dataset {
        id,
        hash: dataset_hash(dir)?,
        technologies,
        costs,
        regions,
        class_mask,
        gammas,
    };
    let extra = dataset.violations();
    if !extra.is_empty() {
        return Err(Error::Dataset(extra));
    }
    Ok(dataset)
}

/// Distinct classes present among the technologies.
pub fn classes_present(techs: &[Technology]) -> BTreeSet<TechClass> {
    techs.iter().map(|t| t.class).collect()
}
