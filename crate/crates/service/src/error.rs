use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use epiroom_core::Error as CoreError;
use serde::{Deserialize, Serialize};

/// Problem document returned for every rejected request. `code` is stable and
/// meant for programmatic handling; `detail` is for humans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    #[serde(rename = "type")]
    pub kind: String,
    pub title: String,
    pub status: u16,
    pub code: String,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub detail: String,
    pub field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, detail: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            detail: detail.into(),
            field: None,
        }
    }

    pub fn with_field(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }

    pub fn unknown_simulation(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "unknown_simulation",
            format!("no simulation with id `{id}`"),
        )
    }

    pub fn no_route(path: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("no endpoint at `{path}`"),
        )
    }

    pub fn malformed(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "malformed_request", detail)
    }

    pub fn validation(field: impl Into<String>, detail: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "validation_error", detail).with_field(field)
    }

    pub fn invalid_command(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_command", detail)
    }

    pub fn finished(id: &str) -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "simulation_finished",
            format!("simulation `{id}` has finished and accepts no further commands"),
        )
    }

    pub fn invalid_state(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "invalid_state", detail)
    }

    pub fn invalid_comparison(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_comparison", detail)
    }

    pub fn config_mismatch(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "config_mismatch", detail)
    }

    pub fn internal(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal_error", detail)
    }

    /// Map a core error raised while building a simulation. `section` is the
    /// request field the offending document came from.
    pub fn from_core(section: &str, err: CoreError) -> Self {
        match err {
            CoreError::Config(e) => {
                let field = if e.field.is_empty() || e.field.starts_with(section) {
                    e.field.clone()
                } else {
                    format!("{section}.{}", e.field)
                };
                Self::validation(field, e.reason)
            }
            CoreError::UnknownScenario(name) => {
                Self::validation(section, format!("unknown scenario `{name}`"))
            }
            e if e.is_validation() => Self::validation(section, e.to_string()),
            e => Self::internal(e.to_string()),
        }
    }

    pub fn problem(&self) -> Problem {
        Problem {
            kind: format!("urn:epiroom:problem:{}", self.code),
            title: self.status.canonical_reason().unwrap_or("error").to_string(),
            status: self.status.as_u16(),
            code: self.code.to_string(),
            detail: self.detail.clone(),
            field: self.field.clone(),
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.detail)
    }
}

impl std::error::Error for ApiError {}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::to_vec(&self.problem()).expect("problem serializes");
        (
            self.status,
            [(header::CONTENT_TYPE, "application/problem+json")],
            body,
        )
            .into_response()
    }
}

/// Parse a JSON body, reporting the path of the first offending field.
pub fn parse_body<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() {
            ApiError::malformed(inner.to_string())
        } else if path.is_empty() || path == "." {
            ApiError::validation("", inner.to_string())
        } else {
            ApiError::validation(path, inner.to_string())
        }
    })
}
