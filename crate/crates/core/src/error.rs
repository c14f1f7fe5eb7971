use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("time step {0} s outside (0, 0.1]")]
    InvalidTimeStep(f64),
    #[error("innovation covariance is singular after regularization")]
    SingularInnovation,
    #[error("covariance is singular after regularization")]
    SingularCovariance,
    #[error("event at t = {event} s precedes filter time {state} s")]
    OutOfOrder { event: f64, state: f64 },
    #[error("orientation measurement before any surface pose")]
    MissingSurfacePose,
    #[error("invalid {field}: {msg}")]
    Config { field: String, msg: String },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: record at t = {t} s is out of order")]
    StreamOrder { line: usize, t: f64 },
    #[error("trial {trial} (seed {seed}): {source}")]
    Trial {
        trial: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }

    /// Qualifies a config field name with the section it was read from.
    pub fn in_section(self, section: &str) -> Self {
        match self {
            Error::Config { field, msg } if !field.starts_with(section) => Error::Config {
                field: format!("{section}.{field}"),
                msg,
            },
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
