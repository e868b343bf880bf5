//! Crate-wide error type. Each module keeps its own error enum; this one
//! wraps them so the pipeline can report the originating module and a
//! machine-readable code.

use std::path::PathBuf;

use thiserror::Error;

use crate::geo::GeoError;
use crate::ingest::IngestError;
use crate::netbuild::NetError;
use crate::radiation::RadiationError;
use crate::sim::SimError;
use crate::stats::StatsError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Radiation(#[from] RadiationError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("config: {0}")]
    Config(String),
    #[error("{what} is empty")]
    EmptyInput { what: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Name of the module the error originated in.
    pub fn module(&self) -> &'static str {
        match self {
            Error::Ingest(_) | Error::EmptyInput { .. } => "ingest",
            Error::Geo(_) => "geo",
            Error::Net(_) => "netbuild",
            Error::Radiation(_) => "radiation",
            Error::Sim(_) => "sim",
            Error::Stats(_) => "stats",
            Error::Config(_) | Error::Io { .. } => "cli",
        }
    }

    /// Machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Ingest(e) => e.code(),
            Error::Geo(e) => e.code(),
            Error::Net(e) => e.code(),
            Error::Radiation(e) => e.code(),
            Error::Sim(e) => e.code(),
            Error::Stats(e) => e.code(),
            Error::Config(_) => "ConfigError",
            Error::EmptyInput { .. } => "EmptyInput",
            Error::Io { .. } => "IoError",
        }
    }

    /// Process exit status: 2 config, 3 input, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Ingest(_) | Error::EmptyInput { .. } | Error::Io { .. } => 3,
            Error::Geo(e) => match e {
                GeoError::Io(_) | GeoError::BadDump(_) => 3,
                _ => 4,
            },
            Error::Radiation(RadiationError::Io(_) | RadiationError::BadDump(_)) => 3,
            Error::Net(_) | Error::Radiation(_) | Error::Sim(_) | Error::Stats(_) => 4,
        }
    }
}
