use thiserror::Error;

/// Errors surfaced by the orchestration stack.
///
/// Validation findings (see [`crate::topology::Violation`]) are data, not
/// errors; everything here aborts the operation that raised it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("schema violation in {context}: {message}")]
    Schema { context: String, message: String },

    #[error("unknown site {0}")]
    UnknownSite(String),

    #[error("unknown service {0}")]
    UnknownService(String),

    #[error("unknown dataflow {0}")]
    UnknownDataflow(String),

    #[error("no path between {src} and {dst}")]
    NoPath { src: String, dst: String },

    #[error("subnet pool exhausted at RSE {rse}")]
    PoolExhausted { rse: String },

    #[error("service {0} already holds a subnet in this pool")]
    DuplicateService(String),

    #[error("no endpoint with preference {preference} on RSE {rse}")]
    NoEndpointForPreference { rse: String, preference: String },

    #[error("service {service} is {state}; operation {op} not allowed")]
    IllegalState {
        service: String,
        state: String,
        op: String,
    },

    #[error("rules already installed for service {0}")]
    DuplicateInstall(String),

    #[error("event scheduled in the past: fire_at {fire_at} < now {now}")]
    EventInPast { fire_at: f64, now: f64 },

    #[error("cannot run to {target}: clock already at {now}")]
    ClockRegression { target: f64, now: f64 },

    #[error("scenario invalid: {0}")]
    Scenario(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn schema(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            context: context.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// HTTP-style status class for the API layer.
    pub fn status_code(&self) -> u16 {
        match self {
            Error::InvalidRequest(_) | Error::Schema { .. } | Error::Json { .. } => 400,
            Error::UnknownSite(_)
            | Error::UnknownService(_)
            | Error::UnknownDataflow(_)
            | Error::NoPath { .. } => 404,
            Error::PoolExhausted { .. }
            | Error::DuplicateService(_)
            | Error::IllegalState { .. }
            | Error::DuplicateInstall(_) => 409,
            _ => 500,
        }
    }
}
