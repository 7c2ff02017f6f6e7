use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, Context};
use heatdiff_core::accounting::{compare_runs, table1_row, TABLE1_HEADER, TABLE3_HEADER, TABLE_FROM, TABLE_TO};
use heatdiff_core::calibration::{auto_calibrate_all, CalibrationOptions};
use heatdiff_core::dynamics::run::RunConfig;
use heatdiff_core::io::dataset::load_dataset;
use heatdiff_core::io::export::import_run;
use heatdiff_core::io::result::RunResult;
use heatdiff_core::scenario::{preset_scenario, sensitivity_suite, ScenarioSpec, PRESET_IDS};
use heatdiff_core::synthetic::{write_presets, write_synthetic};
use heatdiff_core::Error;

use crate::{CompareArgs, Failure, SensitivityArgs, SynthArgs, ValidateArgs};

fn scenario(arg: &str, kick_start_regions: &[String]) -> Result<ScenarioSpec, Failure> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {arg}"))?;
        let spec: ScenarioSpec =
            serde_json::from_str(&text).map_err(|e| Failure::validation(anyhow!("{arg}: {e}")))?;
        spec.validate()?;
        return Ok(spec);
    }
    Ok(preset_scenario(arg, kick_start_regions)?)
}

pub fn sensitivity(args: SensitivityArgs) -> Result<(), Failure> {
    let dataset = load_dataset(&args.data)?;
    let kick = dataset.kick_start_regions();
    let names: Vec<String> = if args.base.iter().any(|b| b == "all") {
        PRESET_IDS.iter().map(|s| s.to_string()).collect()
    } else {
        args.base.clone()
    };
    let specs = names.iter().map(|n| scenario(n, &kick)).collect::<Result<Vec<_>, _>>()?;
    let config = RunConfig { from: args.from, to: args.to, dt: args.dt, ..RunConfig::default() };
    let gammas = match &dataset.gammas {
        Some(g) => g.clone(),
        None => auto_calibrate_all(&dataset, &config, &CalibrationOptions::default())?.0,
    };
    let table = sensitivity_suite(&dataset, &specs, &gammas, &config)?;
    std::fs::create_dir_all(&args.out)?;
    let csv = table.to_csv();
    std::fs::write(args.out.join("sensitivity.csv"), &csv)?;
    let mut json = serde_json::to_string_pretty(&table).context("cannot serialise the table")?;
    json.push('\n');
    std::fs::write(args.out.join("sensitivity.json"), json)?;
    print!("{csv}");
    println!("wrote {}", args.out.display());
    Ok(())
}

fn span(run: &RunResult) -> (i32, i32) {
    (run.years.first().copied().unwrap_or(i32::MAX), run.years.last().copied().unwrap_or(i32::MIN))
}

/// Per-year differences of total emissions, `run − reference`, over the common years.
fn emissions_delta(run: &RunResult, reference: &RunResult, from: i32, to: i32) -> String {
    let totals = |r: &RunResult, year: i32| {
        r.regions.iter().filter_map(|reg| reg.years.iter().find(|y| y.year == year)).fold([0.0; 3], |acc, y| {
            [acc[0] + y.direct_kg, acc[1] + y.indirect_decarb_kg, acc[2] + y.indirect_baseline_kg]
        })
    };
    let mut out = String::from("year,direct_kg_delta,indirect_decarb_kg_delta,indirect_baseline_kg_delta\n");
    for year in from..=to {
        let (a, b) = (totals(run, year), totals(reference, year));
        let _ = writeln!(out, "{year},{},{},{}", a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    }
    out
}

pub fn compare(args: CompareArgs) -> Result<(), Failure> {
    let [run_path, reference_path] = args.runs.as_slice() else {
        return Err(Failure::validation(anyhow!("give exactly two --run arguments: the scenario, then the reference")));
    };
    let run = import_run(run_path).with_context(|| format!("cannot load {}", run_path.display()))?;
    let reference = import_run(reference_path).with_context(|| format!("cannot load {}", reference_path.display()))?;
    let regions = |r: &RunResult| r.regions.iter().map(|x| x.region.clone()).collect::<Vec<_>>();
    if regions(&run) != regions(&reference) || run.technologies != reference.technologies {
        return Err(Failure::validation(anyhow!("the runs cover different regions or technologies")));
    }
    let (a, b) = (span(&run), span(&reference));
    let (first, last) = (a.0.max(b.0), a.1.min(b.1));
    if first > last {
        return Err(Failure::validation(anyhow!("the runs share no years ({}..={} vs {}..={})", a.0, a.1, b.0, b.1)));
    }
    if a != b {
        eprintln!("warning: horizons differ ({}..={} vs {}..={}); comparing {first}..={last}", a.0, a.1, b.0, b.1);
    }
    let (from, to) = (TABLE_FROM.max(first), TABLE_TO.min(last));
    if from > to {
        return Err(Failure::validation(anyhow!("no common years within {TABLE_FROM}..={TABLE_TO}")));
    }

    let row = compare_runs(&run, &reference, from, to)?;
    std::fs::create_dir_all(&args.out)?;
    let table3 = format!("{TABLE3_HEADER}\n{}\n", row.csv_line());
    std::fs::write(args.out.join("table3.csv"), &table3)?;
    let table1 = format!(
        "{TABLE1_HEADER}\n{}\n{}\n",
        table1_row(&run, from, to).csv_line(),
        table1_row(&reference, from, to).csv_line()
    );
    std::fs::write(args.out.join("table1.csv"), &table1)?;
    std::fs::write(args.out.join("emissions_delta.csv"), emissions_delta(&run, &reference, first, last))?;
    print!("{table3}");
    println!("wrote {}", args.out.display());
    Ok(())
}

pub fn validate(args: ValidateArgs) -> Result<(), Failure> {
    let dataset = load_dataset(&args.data)?;
    let horizon = dataset.horizon_violations(args.from, args.to);
    if !horizon.is_empty() {
        return Err(Error::Dataset(horizon).into());
    }
    println!(
        "{}: {} regions, {} technologies, covers {}..={}, gammas {}, hash {}",
        dataset.id,
        dataset.regions.len(),
        dataset.technologies.len(),
        args.from,
        args.to,
        if dataset.gammas.is_some() { "included" } else { "absent" },
        dataset.hash
    );
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<(), Failure> {
    let dataset = write_synthetic(&args.out)?;
    write_presets(&dataset, &args.presets)?;
    println!("wrote {} (hash {}) and presets in {}", args.out.display(), dataset.hash, args.presets.display());
    Ok(())
}
