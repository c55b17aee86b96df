use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the planning library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: field `{field}` {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error(
        "end point unreachable: distance {distance:.6} m exceeds N*S_max = {budget:.6} m \
         (consecutive breaking points are limited to S_max = v_max*T/N)"
    )]
    Unreachable { distance: f64, budget: f64 },

    #[error("group {group} has no users at slot {slot}")]
    EmptyGroup { group: usize, slot: usize },

    #[error("non-positive coordinate {value} in GP expansion point ({what})")]
    NonPositiveCoordinate { what: String, value: f64 },

    #[error("non-positive coefficient {coef} in term {term} of `{constraint}`")]
    NonPositiveCoefficient {
        constraint: String,
        term: usize,
        coef: f64,
    },

    #[error("{family} subproblem infeasible after QoS relaxation (scale {scale})")]
    Infeasible { family: String, scale: f64 },

    #[error("objective bound violated: {value} > {bound}")]
    BoundViolated { value: f64, bound: f64 },

    #[error("{context}: {message}")]
    Format { context: String, message: String },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Format {
            context: context.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
