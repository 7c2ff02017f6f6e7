//! Writing run results as a CSV bundle or a single JSON file, and reading
//! them back.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::accounting::{table1_row, TABLE1_HEADER, TABLE_FROM, TABLE_TO};
use crate::io::result::{RunResult, SCHEMA_VERSION};
use crate::{Error, Result};

pub const RUN_FILE: &str = "run.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    /// One CSV per report plus `metadata.json`.
    Csv,
    /// `run.json`, the full result.
    Structured,
}

pub fn shares_csv(run: &RunResult) -> String {
    let mut s = String::from("region,year,tech_id,share,ue_kwh,capacity_kw,built_kw,scrapped_kw\n");
    for r in &run.regions {
        for y in &r.years {
            for (k, tech) in run.technologies.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{}",
                    r.region, y.year, tech, y.shares[k], y.ue_kwh[k], y.capacity_kw[k], y.built_kw[k], y.scrapped_kw[k]
                );
            }
        }
    }
    s
}

pub fn demand_csv(run: &RunResult) -> String {
    let mut s = String::from("region,year,ue_total_kwh,water_fraction\n");
    for r in &run.regions {
        for y in &r.years {
            let _ = writeln!(s, "{},{},{},{}", r.region, y.year, y.ue_total_kwh, y.water_fraction);
        }
    }
    s
}

pub fn fuel_csv(run: &RunResult) -> String {
    let mut s = String::from("region,year,fuel,final_kwh\n");
    for r in &run.regions {
        for y in &r.years {
            for (k, fuel) in run.fuels.iter().enumerate() {
                let _ = writeln!(s, "{},{},{},{}", r.region, y.year, fuel, y.final_kwh[k]);
            }
        }
    }
    s
}

pub fn emissions_csv(run: &RunResult) -> String {
    let mut s = String::from("region,year,direct_kg,indirect_decarb_kg,indirect_baseline_kg\n");
    for r in &run.regions {
        for y in &r.years {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.region, y.year, y.direct_kg, y.indirect_decarb_kg, y.indirect_baseline_kg
            );
        }
    }
    s
}

pub fn money_csv(run: &RunResult) -> String {
    let mut s = String::from("region,year,invest_eur,energy_eur,tax_eur,subsidy_eur,net_revenue_eur\n");
    for r in &run.regions {
        for y in &r.years {
            let m = &y.money;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.region,
                y.year,
                m.invest_eur,
                m.energy_eur,
                m.tax_eur,
                m.subsidy_eur,
                m.net_revenue()
            );
        }
    }
    s
}

pub fn table1_csv(run: &RunResult) -> String {
    format!("{TABLE1_HEADER}\n{}\n", table1_row(run, TABLE_FROM, TABLE_TO).csv_line())
}

/// Writes `run` into `dir` and returns the files written.
pub fn export_results(run: &RunResult, dir: &Path, format: ExportFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let files: Vec<(&str, String)> = match format {
        ExportFormat::Structured => vec![(RUN_FILE, run.to_json()?)],
        ExportFormat::Csv => {
            let mut metadata = serde_json::to_string_pretty(&run.metadata)?;
            metadata.push('\n');
            vec![
                ("shares.csv", shares_csv(run)),
                ("demand.csv", demand_csv(run)),
                ("fuel.csv", fuel_csv(run)),
                ("emissions.csv", emissions_csv(run)),
                ("money.csv", money_csv(run)),
                ("table1.csv", table1_csv(run)),
                ("metadata.json", metadata),
            ]
        }
    };
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

/// Reads a run from `run.json` or a directory containing it.
pub fn import_run(path: &Path) -> Result<RunResult> {
    let file = if path.is_dir() { path.join(RUN_FILE) } else { path.to_path_buf() };
    let run = RunResult::from_json(&fs::read_to_string(&file)?)?;
    if run.schema_version != SCHEMA_VERSION {
        return Err(Error::validation(format!(
            "{}: schema version {} is not supported (expected {SCHEMA_VERSION})",
            file.display(),
            run.schema_version
        )));
    }
    Ok(run)
}
