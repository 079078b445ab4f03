use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by ingestion, estimation and scoring.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("value {value} is outside the domain of {kind}{}", point_suffix(.point_id))]
    Domain {
        value: f64,
        kind: &'static str,
        point_id: Option<String>,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("point {point_id} has {found} shadow models, expected {expected}")]
    RaggedRecord {
        point_id: String,
        expected: usize,
        found: usize,
    },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("parameter constraint violated: {0}")]
    Constraint(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("point {point_id} has no {} shadow observations", class_name(*.class))]
    MissingClass { point_id: String, class: u8 },
    #[error("unknown point id {0}")]
    UnknownPoint(String),
    #[error("io error: {0}")]
    Io(String),
}

fn point_suffix(point_id: &Option<String>) -> String {
    match point_id {
        Some(id) => format!(" (point {id})"),
        None => String::new(),
    }
}

fn class_name(class: u8) -> &'static str {
    if class == 1 {
        "IN"
    } else {
        "OUT"
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    pub(crate) fn domain(value: f64, kind: &'static str) -> Self {
        Error::Domain {
            value,
            kind,
            point_id: None,
        }
    }

    pub(crate) fn with_point(self, id: &str) -> Self {
        match self {
            Error::Domain {
                value,
                kind,
                point_id: None,
            } => Error::Domain {
                value,
                kind,
                point_id: Some(id.to_string()),
            },
            other => other,
        }
    }
}
