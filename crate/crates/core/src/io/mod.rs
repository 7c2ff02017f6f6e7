//! Dataset ingestion, result types and exports.

pub mod dataset;
pub mod export;
pub mod result;

pub use dataset::{load_dataset, Dataset};
pub use export::{export_results, import_run, ExportFormat};
pub use result::RunResult;

/// Parses a decimal number, accepting a decimal comma ("0,25").
pub fn parse_decimal(s: &str) -> Option<f64> {
    let t = s.trim();
    if t.is_empty() {
        return None;
    }
    let normalized = if t.contains(',') && !t.contains('.') {
        t.replace(',', ".")
    } else {
        t.to_string()
    };
    normalized.parse::<f64>().ok().filter(|v| v.is_finite())
}
