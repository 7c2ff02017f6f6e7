use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use heatdiff_api::{ApiError, ErrorKind};
use heatdiff_core::scenario::FieldError;
use heatdiff_core::Error;
use serde::de::DeserializeOwned;

/// An [`ApiError`] on its way out as an HTTP response.
#[derive(Debug)]
pub struct Failure(pub ApiError);

pub type Reply<T> = Result<T, Failure>;

impl Failure {
    pub fn not_found(what: impl Into<String>) -> Self {
        Failure(ApiError::new(ErrorKind::NotFound, what))
    }

    pub fn gone(what: impl Into<String>) -> Self {
        Failure(ApiError::new(ErrorKind::Gone, what))
    }

    pub fn conflict(what: impl Into<String>) -> Self {
        Failure(ApiError::new(ErrorKind::Conflict, what))
    }

    pub fn fields(message: impl Into<String>, field_errors: Vec<FieldError>) -> Self {
        Failure(ApiError { field_errors, ..ApiError::new(ErrorKind::Validation, message) })
    }

    pub fn field(path: &str, message: impl Into<String>) -> Self {
        let message = message.into();
        Self::fields(format!("{path}: {message}"), vec![FieldError { path: path.into(), message }])
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Failure(ApiError::new(ErrorKind::Internal, message))
    }
}

pub fn status_of(kind: ErrorKind) -> StatusCode {
    match kind {
        ErrorKind::NotFound => StatusCode::NOT_FOUND,
        ErrorKind::Gone => StatusCode::GONE,
        ErrorKind::Conflict => StatusCode::CONFLICT,
        ErrorKind::BadRequest => StatusCode::BAD_REQUEST,
        ErrorKind::Validation | ErrorKind::Dataset => StatusCode::UNPROCESSABLE_ENTITY,
        ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

pub fn api_error(e: &Error) -> ApiError {
    match e {
        Error::Dataset(v) => ApiError { violations: v.clone(), ..ApiError::new(ErrorKind::Dataset, e.to_string()) },
        Error::InRun { source, .. } if matches!(**source, Error::Dataset(_)) => {
            ApiError { message: e.to_string(), ..api_error(source) }
        }
        e if e.is_validation() => ApiError::new(ErrorKind::Validation, e.to_string()),
        Error::Session(_) => ApiError::new(ErrorKind::Gone, e.to_string()),
        e => ApiError::new(ErrorKind::Internal, e.to_string()),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(api_error(&e))
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        (status_of(self.0.kind), Json(self.0)).into_response()
    }
}

/// Decodes a JSON body. Syntax errors are 400; well-formed JSON of the wrong
/// shape is 422 with the offending path.
pub fn decode<T: DeserializeOwned>(body: &[u8]) -> Reply<T> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| json_failure("", e))
}

pub fn decode_value<T: DeserializeOwned>(prefix: &str, value: &serde_json::Value) -> Reply<T> {
    serde_path_to_error::deserialize(value).map_err(|e| json_failure(prefix, e))
}

fn json_failure(prefix: &str, e: serde_path_to_error::Error<serde_json::Error>) -> Failure {
    let inner = e.inner();
    if inner.is_syntax() || inner.is_eof() {
        return Failure(ApiError::new(ErrorKind::BadRequest, format!("malformed JSON: {inner}")));
    }
    let path = e.path().to_string();
    let path = match (prefix.is_empty(), path.as_str()) {
        (true, _) => path,
        (false, ".") => prefix.to_string(),
        (false, p) => format!("{prefix}.{p}"),
    };
    Failure::field(&path, inner.to_string())
}
