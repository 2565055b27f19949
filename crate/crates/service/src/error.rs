use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use structsheet::address::AddressError;
use structsheet::refactor::RefactorError;
use structsheet::soundness::SoundnessError;
use structsheet::structure::StructureError;
use structsheet::workbook::{CsvError, LoadError, WorkbookError};
use structsheet::SessionError;

/// Error response: `{"error": {"code", "message"}}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    pub fn invalid(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }

    pub fn not_found(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"error": {"code": self.code, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

impl From<AddressError> for ApiError {
    fn from(e: AddressError) -> Self {
        let code = match e {
            AddressError::MalformedAddress(_) => "MalformedAddress",
            AddressError::OutOfBounds(_) => "OutOfBounds",
        };
        Self::invalid(code, e.to_string())
    }
}

impl From<WorkbookError> for ApiError {
    fn from(e: WorkbookError) -> Self {
        let code = match &e {
            WorkbookError::UnknownSheet(_) => "UnknownSheet",
            WorkbookError::DuplicateSheet(_) => "DuplicateSheet",
            WorkbookError::EmptySheetName => "EmptySheetName",
            WorkbookError::Address(a) => return a.clone().into(),
            WorkbookError::FormulaParse { .. } => "FormulaParse",
        };
        Self::invalid(code, e.to_string())
    }
}

impl From<StructureError> for ApiError {
    fn from(e: StructureError) -> Self {
        match e {
            StructureError::CrossSheetRef(_) => Self::invalid("CrossSheetRef", e.to_string()),
            StructureError::UnknownGroup(_) => Self::not_found("UnknownGroup", e.to_string()),
        }
    }
}

impl From<SoundnessError> for ApiError {
    fn from(e: SoundnessError) -> Self {
        let message = e.to_string();
        match e {
            SoundnessError::UnknownViolation(_) => Self::not_found("UnknownViolation", message),
            SoundnessError::UnknownCandidate(_) => Self::not_found("UnknownCandidate", message),
            SoundnessError::StaleCandidate(_) => Self::new(StatusCode::CONFLICT, "StaleCandidate", message),
            SoundnessError::MissingInput(_) => Self::invalid("MissingInput", message),
            SoundnessError::InvalidInput(_) => Self::invalid("InvalidInput", message),
            SoundnessError::Structure(s) => s.into(),
            SoundnessError::Workbook(w) => w.into(),
        }
    }
}

impl From<RefactorError> for ApiError {
    fn from(e: RefactorError) -> Self {
        let message = e.to_string();
        match e {
            RefactorError::UnknownGroup(_) => Self::not_found("UnknownGroup", message),
            RefactorError::InvalidSplitPoint(_) => Self::invalid("InvalidSplitPoint", message),
            RefactorError::NoSpace(_) => Self::invalid("NoSpace", message),
            RefactorError::Overlap(_) => Self::invalid("Overlap", message),
            RefactorError::OutOfBounds => Self::invalid("OutOfBounds", message),
            RefactorError::WouldEmptyGroup => Self::invalid("WouldEmptyGroup", message),
            RefactorError::StalePlan => Self::new(StatusCode::CONFLICT, "StalePlan", message),
            RefactorError::Structure(s) => s.into(),
            RefactorError::Workbook(w) => w.into(),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Workbook(e) => e.into(),
            SessionError::Structure(e) => e.into(),
            SessionError::Soundness(e) => e.into(),
            SessionError::Refactor(e) => e.into(),
            SessionError::NothingToUndo => Self::new(StatusCode::CONFLICT, "NothingToUndo", e.to_string()),
        }
    }
}

impl From<LoadError> for ApiError {
    fn from(e: LoadError) -> Self {
        Self::invalid("InvalidWorkbook", e.to_string())
    }
}

impl From<CsvError> for ApiError {
    fn from(e: CsvError) -> Self {
        Self::invalid("InvalidCsv", e.to_string())
    }
}
