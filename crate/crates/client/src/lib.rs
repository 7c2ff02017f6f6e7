//! Async client for the heatdiff HTTP service.

use std::time::Duration;

use heatdiff_api::{
    ApiError, AutoCalibrate, AutoCalibrated, CreateSession, DatasetInfo, GammaSource, GammaUpdate, RegionView,
    ReportKind, RunAccepted, RunRequest, RunState, RunStatus, SessionInfo,
};
use heatdiff_core::io::result::RunResult;
use reqwest::{Method, RequestBuilder, Response, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub use heatdiff_api as api;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("service answered {status}: {error}")]
    Api { status: StatusCode, error: ApiError },

    #[error("service answered {status} with an unreadable body: {body}")]
    Unexpected { status: StatusCode, body: String },

    #[error("cannot reach the service: {0}")]
    Transport(#[from] reqwest::Error),

    #[error("invalid run payload: {0}")]
    Payload(#[from] heatdiff_core::Error),
}

impl ClientError {
    /// The structured error body, when the service sent one.
    pub fn api(&self) -> Option<&ApiError> {
        match self {
            ClientError::Api { error, .. } => Some(error),
            _ => None,
        }
    }
}

pub type Result<T, E = ClientError> = std::result::Result<T, E>;

#[derive(Clone, Debug)]
pub struct Client {
    http: reqwest::Client,
    base: String,
}

impl Client {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self { http: reqwest::Client::new(), base: base_url.into().trim_end_matches('/').to_string() }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn request(&self, method: Method, path: &str) -> RequestBuilder {
        self.http.request(method, format!("{}{path}", self.base))
    }

    async fn send(builder: RequestBuilder) -> Result<Response> {
        let response = builder.send().await?;
        let status = response.status();
        if status.is_success() {
            return Ok(response);
        }
        let body = response.text().await?;
        Err(match serde_json::from_str::<ApiError>(&body) {
            Ok(error) => ClientError::Api { status, error },
            Err(_) => ClientError::Unexpected { status, body },
        })
    }

    async fn json<T: DeserializeOwned>(builder: RequestBuilder) -> Result<T> {
        Ok(Self::send(builder).await?.json().await?)
    }

    async fn with_body<B: Serialize, T: DeserializeOwned>(builder: RequestBuilder, body: &B) -> Result<T> {
        Self::json(builder.json(body)).await
    }

    pub async fn datasets(&self) -> Result<Vec<DatasetInfo>> {
        Self::json(self.request(Method::GET, "/datasets")).await
    }

    /// Opens a session. Without `gamma` the service uses the dataset's
    /// shipped gammas, or fits them when there are none.
    pub async fn create_session(&self, dataset: &str, gamma: Option<GammaSource>) -> Result<SessionInfo> {
        let path = match gamma {
            Some(g) => format!("/sessions?gamma={g}"),
            None => "/sessions".to_string(),
        };
        Self::with_body(self.request(Method::POST, &path), &CreateSession { dataset: dataset.into() }).await
    }

    pub async fn session(&self, session: &str) -> Result<SessionInfo> {
        Self::json(self.request(Method::GET, &format!("/sessions/{session}"))).await
    }

    pub async fn regions(&self, session: &str) -> Result<Vec<RegionView>> {
        Self::json(self.request(Method::GET, &format!("/sessions/{session}/regions"))).await
    }

    pub async fn calibrate_auto(&self, session: &str, region: Option<&str>) -> Result<AutoCalibrated> {
        let body = AutoCalibrate { region: region.map(str::to_string) };
        Self::with_body(self.request(Method::POST, &format!("/sessions/{session}/calibrate/auto")), &body).await
    }

    pub async fn update_gamma(&self, session: &str, region: &str, tech: &str, value: f64) -> Result<RegionView> {
        let body = GammaUpdate { region: region.into(), tech: tech.into(), value };
        Self::with_body(self.request(Method::PUT, &format!("/sessions/{session}/gamma")), &body).await
    }

    /// The session's γ as the CSV the CLI and datasets use.
    pub async fn gammas_csv(&self, session: &str) -> Result<String> {
        let builder = self.request(Method::GET, &format!("/sessions/{session}/gamma?format=csv"));
        Ok(Self::send(builder).await?.text().await?)
    }

    pub async fn start_run(&self, session: &str, request: &RunRequest) -> Result<RunAccepted> {
        Self::with_body(self.request(Method::POST, &format!("/sessions/{session}/runs")), request).await
    }

    pub async fn status(&self, run: &str) -> Result<RunStatus> {
        Self::json(self.request(Method::GET, &format!("/runs/{run}/status"))).await
    }

    /// Polls until the run has finished and returns its final status.
    pub async fn wait(&self, run: &str, every: Duration) -> Result<RunStatus> {
        loop {
            let status = self.status(run).await?;
            if status.state != RunState::Running {
                return Ok(status);
            }
            tokio::time::sleep(every).await;
        }
    }

    /// A report body exactly as the service sent it.
    pub async fn results_raw(&self, run: &str, report: ReportKind) -> Result<String> {
        let builder = self.request(Method::GET, &format!("/runs/{run}/results?report={}", report.as_str()));
        Ok(Self::send(builder).await?.text().await?)
    }

    pub async fn run_result(&self, run: &str) -> Result<RunResult> {
        Ok(RunResult::from_json(&self.results_raw(run, ReportKind::Run).await?)?)
    }
}
