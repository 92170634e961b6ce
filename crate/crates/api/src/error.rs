use facetseg::kg::IngestReport;
use serde::Serialize;

/// A request failure with its HTTP status.
#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[error("{message}")]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    #[serde(rename = "error")]
    pub message: String,
    /// 1-based input line for malformed uploads.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    /// Partial ingestion report when some events were rejected.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<IngestReport>,
}

impl ApiError {
    pub fn new(status: u16, message: impl Into<String>) -> Self {
        Self { status, message: message.into(), line: None, report: None }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(400, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(404, message)
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(409, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(500, message)
    }

    pub fn at_line(mut self, line: usize) -> Self {
        self.line = Some(line);
        self
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
