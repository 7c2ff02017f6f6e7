use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dataset is invalid ({} violation(s)); first: {}", .0.len(), .0.first().map(ToString::to_string).unwrap_or_default())]
    Dataset(Vec<Violation>),

    #[error("year {year} is not on the grid {first}..={last}")]
    OffGrid { year: i32, first: i32, last: i32 },

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("simplex violated: {0}")]
    Simplex(String),

    #[error("session error: {0}")]
    Session(String),

    #[error("region {region}, year {year}: {source}")]
    InRun {
        region: String,
        year: i32,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn in_run(self, region: &str, year: i32) -> Self {
        match self {
            e @ Error::InRun { .. } => e,
            e => Error::InRun {
                region: region.to_string(),
                year,
                source: Box::new(e),
            },
        }
    }

    /// True for errors caused by bad input data rather than I/O or engine faults.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Validation(_) | Error::Dataset(_) | Error::OffGrid { .. } => true,
            Error::InRun { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Schema,
    Integrity,
    Unit,
}

/// One problem found while loading a dataset, with file and row context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub file: String,
    /// 1-based data row (header excluded), when the problem is tied to a row.
    pub row: Option<usize>,
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ViolationKind::Schema => "schema",
            ViolationKind::Integrity => "integrity",
            ViolationKind::Unit => "unit",
        };
        match self.row {
            Some(row) => write!(f, "{}:{}: {} violation: {}", self.file, row, kind, self.message),
            None => write!(f, "{}: {} violation: {}", self.file, kind, self.message),
        }
    }
}
