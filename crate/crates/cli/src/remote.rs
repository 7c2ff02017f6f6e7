use std::io::IsTerminal;
use std::path::Path;
use std::time::Duration;

use anyhow::{anyhow, Context};
use heatdiff_api::{DatasetInfo, GammaSource, ReportKind, RunRequest, RunState};
use heatdiff_client::Client;
use heatdiff_core::accounting::{table1_row, TABLE1_HEADER, TABLE_FROM, TABLE_TO};
use heatdiff_core::dynamics::run::{ModelParams, RunConfig};
use heatdiff_core::io::dataset::load_dataset;
use heatdiff_core::io::export::{export_results, ExportFormat, RUN_FILE};
use heatdiff_core::io::result::RunResult;
use heatdiff_core::scenario::PRESET_IDS;
use heatdiff_service::{AppState, ServiceConfig};
use tokio::net::TcpListener;

use crate::{CalibrateArgs, Failure, ServeArgs, SimulateArgs, Target};

const POLL: Duration = Duration::from_millis(25);

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    Ok(tokio::runtime::Runtime::new().context("cannot start the async runtime")?)
}

/// Starts a service for `dir` on an ephemeral loopback port and returns its URL.
async fn in_process(dir: &Path) -> Result<String, Failure> {
    let dataset = load_dataset(dir)?;
    let state = AppState::new(vec![dataset], ServiceConfig::default())?;
    let listener = TcpListener::bind("127.0.0.1:0").await?;
    let url = format!("http://{}", listener.local_addr()?);
    tokio::spawn(heatdiff_service::serve(listener, state, std::future::pending()));
    Ok(url)
}

async fn connect(target: &Target) -> Result<(Client, DatasetInfo), Failure> {
    let url = match (&target.server, &target.data) {
        (Some(url), _) => url.clone(),
        (None, Some(dir)) => in_process(dir).await?,
        (None, None) => return Err(Failure::validation(anyhow!("give --data DIR or --server URL"))),
    };
    let client = Client::new(url);
    let datasets = client.datasets().await?;
    let wanted = target.dataset.clone().or_else(|| {
        target.data.as_ref().and_then(|d| d.file_name()).map(|n| n.to_string_lossy().into_owned())
    });
    let info = match wanted {
        Some(id) => datasets.into_iter().find(|d| d.id == id),
        None if datasets.len() == 1 => datasets.into_iter().next(),
        None => return Err(Failure::validation(anyhow!("the server has several datasets; pick one with --dataset"))),
    };
    let info = info.ok_or_else(|| Failure::validation(anyhow!("dataset not served by {}", client.base_url())))?;
    Ok((client, info))
}

fn scenario_request(arg: &str) -> Result<RunRequest, Failure> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {arg}"))?;
        let value = serde_json::from_str(&text)
            .map_err(|e| Failure::validation(anyhow!("{arg} is not valid JSON: {e}")))?;
        return Ok(RunRequest { scenario: Some(value), ..RunRequest::default() });
    }
    if PRESET_IDS.contains(&arg) {
        return Ok(RunRequest { preset: Some(arg.to_string()), ..RunRequest::default() });
    }
    Err(Failure::validation(anyhow!("{arg} is neither a scenario file nor a preset ({})", PRESET_IDS.join(", "))))
}

fn run_config(args: &SimulateArgs) -> Result<RunConfig, Failure> {
    let params = match &args.params {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str::<ModelParams>(&text)
                .map_err(|e| Failure::validation(anyhow!("{}: {e}", path.display())))?
        }
        None => ModelParams::default(),
    };
    Ok(RunConfig { from: args.from, to: args.to, dt: args.dt, scrapping_enabled: !args.no_scrapping, params })
}

pub fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let mut request = scenario_request(&args.scenario)?;
    request.config = Some(run_config(&args)?);
    runtime()?.block_on(async {
        let (client, dataset) = connect(&args.target).await?;
        let session = client.create_session(&dataset.id, args.gamma.map(GammaSource::from)).await?;
        let accepted = client.start_run(&session.id, &request).await?;
        let show = std::io::stderr().is_terminal();
        let status = loop {
            let status = client.status(&accepted.run_id).await?;
            if show {
                eprint!("\r{}: {}/{} region-years", status.scenario_id, status.completed_years, status.total_years);
            }
            if status.state != RunState::Running {
                break status;
            }
            tokio::time::sleep(POLL).await;
        };
        if show {
            eprintln!();
        }
        if let Some(error) = status.error {
            let validation = error.is_validation();
            let error = anyhow::Error::new(error).context(format!("run {} failed", accepted.run_id));
            return Err(if validation { Failure::validation(error) } else { error.into() });
        }

        let raw = client.results_raw(&accepted.run_id, ReportKind::Run).await?;
        let run = RunResult::from_json(&raw)?;
        std::fs::create_dir_all(&args.out)?;
        std::fs::write(args.out.join(RUN_FILE), &raw)?;
        export_results(&run, &args.out, ExportFormat::Csv)?;
        println!("scenario {} on {} ({}..={})", run.metadata.scenario_id, run.metadata.dataset_id, args.from, args.to);
        println!("{TABLE1_HEADER}\n{}", table1_row(&run, TABLE_FROM.max(args.from), TABLE_TO.min(args.to)).csv_line());
        println!("wrote {}", args.out.display());
        Ok(())
    })
}

pub fn calibrate(args: CalibrateArgs) -> Result<(), Failure> {
    runtime()?.block_on(async {
        let (client, dataset) = connect(&args.target).await?;
        let source = if dataset.has_gammas { GammaSource::Dataset } else { GammaSource::Zero };
        let session = client.create_session(&dataset.id, Some(source)).await?;
        let fitted = client.calibrate_auto(&session.id, args.region.as_deref()).await?;
        let csv = client.gammas_csv(&session.id).await?;
        if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&args.out, csv)?;
        for result in &fitted.results {
            let d = &result.diagnostics;
            let state = if d.converged { "converged" } else { "NOT converged" };
            println!(
                "{}: {state} after {} iterations, max slope residual {:.3e}/year, gauge {}",
                result.region,
                d.iterations,
                d.max_residual,
                d.gauge.as_deref().unwrap_or("-")
            );
            if !d.suspect.is_empty() {
                println!("  on the search bound: {}", d.suspect.join(", "));
            }
        }
        println!("wrote {}", args.out.display());
        if fitted.converged {
            Ok(())
        } else {
            let failed: Vec<&str> =
                fitted.results.iter().filter(|r| !r.diagnostics.converged).map(|r| r.region.as_str()).collect();
            Err(Failure::not_converged(anyhow!("calibration did not converge for {}", failed.join(", "))))
        }
    })
}

pub fn serve(args: ServeArgs) -> Result<(), Failure> {
    let mut datasets = Vec::with_capacity(args.data.len());
    for dir in &args.data {
        let dataset = load_dataset(dir)?;
        if datasets.iter().any(|d: &heatdiff_core::io::dataset::Dataset| d.id == dataset.id) {
            return Err(Failure::validation(anyhow!("two datasets share the id {}", dataset.id)));
        }
        datasets.push(dataset);
    }
    let config = ServiceConfig { session_ttl: Duration::from_secs(args.session_ttl), runs_dir: args.runs_dir.clone() };
    let state = AppState::new(datasets, config)?;
    runtime()?.block_on(async {
        let listener = TcpListener::bind((args.host.as_str(), args.port))
            .await
            .with_context(|| format!("cannot bind {}:{}", args.host, args.port))?;
        println!("listening on http://{}", listener.local_addr()?);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        heatdiff_service::serve(listener, state, shutdown).await?;
        Ok(())
    })
}
