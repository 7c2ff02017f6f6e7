//! The `heatdiff` binary: outputs, exit codes, and service-backed commands.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use heatdiff_core::dynamics::run::{simulate_run, RunConfig};
use heatdiff_core::io::dataset::load_dataset;
use heatdiff_core::scenario::preset_scenario;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn data() -> PathBuf {
    root().join("data/synthetic")
}

fn heatdiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatdiff")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A copy of the shipped dataset under a directory of the same name, so the
/// dataset id stays `synthetic`.
fn copy_data(parent: &Path) -> PathBuf {
    let dir = parent.join("synthetic");
    fs::create_dir_all(&dir).unwrap();
    for entry in fs::read_dir(data()).unwrap() {
        let path = entry.unwrap().path();
        fs::copy(&path, dir.join(path.file_name().unwrap())).unwrap();
    }
    dir
}

fn rewrite_shares(dir: &Path, mut f: impl FnMut(&str, &str, i32, f64) -> f64) {
    let path = dir.join("shares.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    let mut out = format!("{}\n", lines.next().unwrap());
    for line in lines {
        let p: Vec<&str> = line.split(',').collect();
        let v = f(p[0], p[1], p[2].parse().unwrap(), p[3].parse().unwrap());
        out.push_str(&format!("{},{},{},{v}\n", p[0], p[1], p[2]));
    }
    fs::write(path, out).unwrap();
}

struct Server(Child, String);

impl Server {
    fn start(data: &Path, runs: &Path) -> Self {
        let mut child = Command::new(env!("CARGO_BIN_EXE_heatdiff"))
            .args(["serve", "--data", s(data), "--port", "0", "--runs-dir", s(runs)])
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let url = line.trim().strip_prefix("listening on ").unwrap_or_else(|| panic!("{line}")).to_string();
        Server(child, url)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn simulate_writes_the_engine_run_and_a_csv_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("a");
    let run = heatdiff(&["simulate", "--data", s(&data()), "--scenario", "a", "--out", s(&out)]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));

    let dataset = load_dataset(&data()).unwrap();
    let spec = preset_scenario("a", &dataset.kick_start_regions()).unwrap();
    let engine = simulate_run(&dataset, &spec, dataset.gammas.as_ref().unwrap(), &RunConfig::default()).unwrap();
    assert_eq!(fs::read_to_string(out.join("run.json")).unwrap(), engine.to_json().unwrap());
    for file in ["shares.csv", "demand.csv", "fuel.csv", "emissions.csv", "money.csv", "table1.csv", "metadata.json"] {
        assert!(out.join(file).is_file(), "{file}");
    }
}

#[test]
fn scenario_files_and_horizon_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    let scenario = root().join("data/presets/d.json");
    let data = data();
    let args = ["simulate", "--data", s(&data), "--scenario", s(&scenario), "--to", "2030", "--dt", "0.5"];
    let run = heatdiff(&[&args[..], &["--no-scrapping", "--out", s(&out)]].concat());
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(json["metadata"]["scenario_id"], "d");
    assert_eq!(json["metadata"]["config"]["dt"], 0.5);
    assert_eq!(json["metadata"]["config"]["scrapping_enabled"], false);
    assert_eq!(json["years"].as_array().unwrap().len(), 16);
}

#[test]
fn bad_scenarios_exit_with_validation_status() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let run = heatdiff(&["simulate", "--data", s(&data()), "--scenario", "k", "--out", s(&out)]);
    assert_eq!(code(&run), 2);

    let mut spec: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root().join("data/presets/e.json")).unwrap()).unwrap();
    spec["schedule"]["carbon_tax"][0]["series"]["values"][0] = serde_json::json!(-1.0);
    let file = tmp.path().join("broken.json");
    fs::write(&file, spec.to_string()).unwrap();
    let run = heatdiff(&["simulate", "--data", s(&data()), "--scenario", s(&file), "--out", s(&out)]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("scenario.schedule.carbon_tax[0].series.values[0]"), "{}", stderr(&run));

    let run = heatdiff(&["simulate", "--data", s(&data()), "--scenario", "a", "--to", "2070", "--out", s(&out)]);
    assert_eq!(code(&run), 2, "{}", stderr(&run));
    assert!(!out.join("run.json").exists());
}

#[test]
fn validate_agrees_with_simulate() {
    let ok = heatdiff(&["validate", "--data", s(&data())]);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    assert_eq!(code(&heatdiff(&["validate", "--data", s(&data()), "--to", "2070"])), 2);

    let tmp = tempfile::tempdir().unwrap();
    let dir = copy_data(tmp.path());
    rewrite_shares(&dir, |r, t, y, v| if (r, t, y) == ("east", "gas", 2011) { v - 0.1 } else { v });
    let out = heatdiff(&["validate", "--data", s(&dir)]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("shares.csv") && err.contains("east") && err.contains("2011"), "{err}");
    let sim = heatdiff(&["simulate", "--data", s(&dir), "--scenario", "a", "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&sim), 2);
}

#[test]
fn calibrate_writes_gammas_and_reports_convergence() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("out/gammas.csv");
    let run = heatdiff(&["calibrate", "--data", s(&data()), "--out", s(&file)]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let written = fs::read_to_string(&file).unwrap();
    assert_eq!(written, fs::read_to_string(data().join("gammas.csv")).unwrap());

    let dir = copy_data(tmp.path());
    fs::remove_file(dir.join("gammas.csv")).unwrap();
    let run = heatdiff(&["calibrate", "--data", s(&dir), "--out", s(&file), "--region", "south"]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let fitted: Vec<String> = fs::read_to_string(&file).unwrap().lines().map(str::to_string).collect();
    assert!(fitted.iter().any(|l| l.starts_with("south,") && l.ends_with(",calibrated")));
    assert!(fitted.iter().filter(|l| l.starts_with("north,")).all(|l| l.ends_with(",0,zero")), "{fitted:?}");
}

#[test]
fn unattainable_trend_exits_with_non_convergence() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = copy_data(tmp.path());
    // heat pumps jump from 0.5 % to 7 % in two years, far faster than any γ can drive them
    let jump: HashMap<i32, f64> = [(2012, 0.002), (2013, 0.005), (2014, 0.02), (2015, 0.07)].into();
    let mut added = HashMap::new();
    rewrite_shares(&dir, |r, t, y, v| match (r, t) {
        ("north", "hp_air_water") => {
            let new = jump.get(&y).copied().unwrap_or(0.001);
            added.insert(y, new - v);
            new
        }
        _ => v,
    });
    rewrite_shares(&dir, |r, t, y, v| if (r, t) == ("north", "gas") { v - added[&y] } else { v });
    let file = tmp.path().join("g.csv");
    let run = heatdiff(&["calibrate", "--data", s(&dir), "--out", s(&file), "--region", "north"]);
    assert_eq!(code(&run), 3, "{}", stderr(&run));
    assert!(String::from_utf8_lossy(&run.stdout).contains("NOT converged"));
    assert!(file.is_file());
}

#[test]
fn compare_and_sensitivity_write_their_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let (e, d) = (tmp.path().join("e"), tmp.path().join("d"));
    for (id, out) in [("e", &e), ("d", &d)] {
        let run = heatdiff(&["simulate", "--data", s(&data()), "--scenario", id, "--out", s(out)]);
        assert_eq!(code(&run), 0, "{}", stderr(&run));
    }
    let cmp = tmp.path().join("cmp");
    let run = heatdiff(&["compare", "--run", s(&e), "--run", s(&d.join("run.json")), "--out", s(&cmp)]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let table3 = fs::read_to_string(cmp.join("table3.csv")).unwrap();
    let row: Vec<&str> = table3.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..2], ["e", "d"]);
    assert!(row[8].parse::<f64>().unwrap() > 0.0, "e reduces CO2 against d: {table3}");
    let delta = fs::read_to_string(cmp.join("emissions_delta.csv")).unwrap();
    assert_eq!(delta.lines().count(), 1 + 36);

    let same = tmp.path().join("same");
    assert_eq!(code(&heatdiff(&["compare", "--run", s(&d), "--run", s(&d), "--out", s(&same)])), 0);
    let zero = fs::read_to_string(same.join("table3.csv")).unwrap();
    assert!(zero.lines().nth(1).unwrap().split(',').skip(2).all(|v| v.is_empty() || v.parse::<f64>().unwrap() == 0.0));
    assert_eq!(code(&heatdiff(&["compare", "--run", s(&d), "--out", s(&same)])), 2);

    let sens = tmp.path().join("sens");
    let run = heatdiff(&["sensitivity", "--data", s(&data()), "--base", "a,h", "--out", s(&sens)]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let csv = fs::read_to_string(sens.join("sensitivity.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("scenario,base_cumulative_kg,"));
}

#[test]
fn simulate_through_a_running_server_matches_in_process() {
    let tmp = tempfile::tempdir().unwrap();
    let runs = tmp.path().join("runs");
    let server = Server::start(&data(), &runs);

    let local = tmp.path().join("local");
    let remote = tmp.path().join("remote");
    let base = ["simulate", "--scenario", "h", "--to", "2035"];
    let run = heatdiff(&[&base[..], &["--data", s(&data()), "--out", s(&local)]].concat());
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let run = heatdiff(&[&base[..], &["--server", &server.1, "--dataset", "synthetic", "--out", s(&remote)]].concat());
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let local_json = fs::read(local.join("run.json")).unwrap();
    assert_eq!(local_json, fs::read(remote.join("run.json")).unwrap());

    let stored: Vec<PathBuf> = fs::read_dir(&runs).unwrap().map(|e| e.unwrap().path().join("run.json")).collect();
    assert_eq!(stored.len(), 1);
    assert_eq!(fs::read(&stored[0]).unwrap(), local_json);

    let file = tmp.path().join("g.csv");
    let run = heatdiff(&["calibrate", "--server", &server.1, "--out", s(&file)]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    drop(server);

    let run = heatdiff(&["simulate", "--server", "http://127.0.0.1:9", "--scenario", "a", "--out", s(&remote)]);
    assert_eq!(code(&run), 1, "{}", stderr(&run));
}

#[test]
fn synth_regenerates_the_shipped_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("synthetic");
    let presets = tmp.path().join("presets");
    let run = heatdiff(&["synth", "--out", s(&out), "--presets", s(&presets)]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    for (fresh, shipped) in [(&out, data()), (&presets, root().join("data/presets"))] {
        for entry in fs::read_dir(&shipped).unwrap() {
            let name = entry.unwrap().file_name();
            assert_eq!(
                fs::read(fresh.join(&name)).unwrap(),
                fs::read(shipped.join(&name)).unwrap(),
                "{} differs",
                name.to_string_lossy()
            );
        }
    }
}
