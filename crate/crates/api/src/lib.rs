//! Request and response bodies of the heatdiff HTTP service.

use std::fmt;

use heatdiff_core::calibration::{CalibrationDiagnostics, CalibrationResult, Projection};
use heatdiff_core::costs::{GammaProvenance, GammaVector};
use heatdiff_core::dynamics::run::{Progress, RunConfig};
use heatdiff_core::scenario::FieldError;
use heatdiff_core::series::TimeSeries;
use heatdiff_core::Violation;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub id: String,
    pub hash: String,
    pub regions: Vec<String>,
    pub technologies: Vec<String>,
    pub kick_start_regions: Vec<String>,
    pub has_gammas: bool,
}

/// Where a new session takes its starting γ from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaSource {
    Zero,
    Auto,
    Dataset,
}

impl GammaSource {
    pub fn as_str(self) -> &'static str {
        match self {
            GammaSource::Zero => "zero",
            GammaSource::Auto => "auto",
            GammaSource::Dataset => "dataset",
        }
    }
}

impl fmt::Display for GammaSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub dataset: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: String,
    pub dataset: String,
    pub dataset_hash: String,
    pub gamma_source: GammaSource,
    pub regions: Vec<String>,
    pub technologies: Vec<String>,
    /// Idle seconds before the session expires.
    pub ttl_s: u64,
}

/// Projected shares of one technology next to its historical trend.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TechProjection {
    pub tech: String,
    pub gamma: f64,
    pub provenance: GammaProvenance,
    pub history: TimeSeries,
    pub projection: TimeSeries,
    pub model_slope: f64,
    pub historical_slope: f64,
    pub residual: f64,
    pub within_tolerance: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionView {
    pub region: String,
    pub handover: i32,
    pub tolerance: f64,
    pub within_tolerance: bool,
    pub technologies: Vec<TechProjection>,
    pub diagnostics: Option<CalibrationDiagnostics>,
}

impl RegionView {
    pub fn tech(&self, id: &str) -> Option<&TechProjection> {
        self.technologies.iter().find(|t| t.tech == id)
    }

    /// Projected shares by year, technology order, as the engine returns them.
    pub fn projection_rows(&self) -> Vec<Vec<f64>> {
        let Some(first) = self.technologies.first() else {
            return Vec::new();
        };
        (0..first.projection.len())
            .map(|i| self.technologies.iter().map(|t| t.projection.values[i]).collect())
            .collect()
    }
}

/// Builds the wire view of a projection. `history` holds one series per
/// technology, in projection order.
pub fn region_view(
    projection: &Projection,
    gamma: &heatdiff_core::costs::GammaSlice,
    history: Vec<TimeSeries>,
    diagnostics: Option<CalibrationDiagnostics>,
) -> RegionView {
    let technologies = projection
        .technologies
        .iter()
        .zip(history)
        .enumerate()
        .map(|(k, (tech, history))| TechProjection {
            tech: tech.clone(),
            gamma: gamma.values[k],
            provenance: gamma.provenance[k],
            history,
            projection: TimeSeries {
                years: projection.years.clone(),
                values: projection.shares.iter().map(|row| row[k]).collect(),
            },
            model_slope: projection.model_slopes[k],
            historical_slope: projection.historical_slopes[k],
            residual: projection.residuals[k],
            within_tolerance: projection.residuals[k].abs() <= projection.tolerance,
        })
        .collect();
    RegionView {
        region: projection.region.clone(),
        handover: projection.handover,
        tolerance: projection.tolerance,
        within_tolerance: projection.within_tolerance(),
        technologies,
        diagnostics,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutoCalibrate {
    /// Limits the fit to one region; all regions otherwise.
    #[serde(default)]
    pub region: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoCalibrated {
    pub results: Vec<CalibrationResult>,
    pub converged: bool,
    pub gammas: GammaVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaUpdate {
    pub region: String,
    pub tech: String,
    /// €/kWh of useful heat.
    pub value: f64,
}

/// Body of `POST /sessions/{id}/runs`: a preset id or a full scenario.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<RunConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunAccepted {
    pub run_id: String,
    pub scenario_id: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    Running,
    Completed,
    Failed,
}

impl RunState {
    pub fn is_finished(self) -> bool {
        self != RunState::Running
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStatus {
    pub run_id: String,
    pub scenario_id: String,
    pub state: RunState,
    pub completed_years: usize,
    pub total_years: usize,
    pub last: Option<Progress>,
    pub error: Option<ApiError>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Shares,
    Emissions,
    Money,
    /// The complete structured run, as written by the CLI.
    Run,
}

impl ReportKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReportKind::Shares => "shares",
            ReportKind::Emissions => "emissions",
            ReportKind::Money => "money",
            ReportKind::Run => "run",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    NotFound,
    Gone,
    Conflict,
    BadRequest,
    Validation,
    Dataset,
    Internal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub kind: ErrorKind,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub field_errors: Vec<FieldError>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}

impl ApiError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into(), field_errors: Vec::new(), violations: Vec::new() }
    }

    /// Input problems as opposed to missing resources or server faults.
    pub fn is_validation(&self) -> bool {
        matches!(self.kind, ErrorKind::Validation | ErrorKind::Dataset | ErrorKind::BadRequest)
    }
}

impl fmt::Display for ApiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)?;
        for e in &self.field_errors {
            write!(f, "\n  {e}")?;
        }
        for v in &self.violations {
            write!(f, "\n  {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ApiError {}
