use std::fmt;

use crate::segments::SegmentKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Threshold that a charge segment failed to reach.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissingThreshold {
    /// The cycle has no samples tagged with the segment's phase.
    NoPhaseSamples,
    VoltageLow,
    VoltageHigh,
    CurrentHigh,
    CurrentLow,
}

impl fmt::Display for MissingThreshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MissingThreshold::NoPhaseSamples => "no samples in the charge phase",
            MissingThreshold::VoltageLow => "V_l never reached",
            MissingThreshold::VoltageHigh => "V_h never reached",
            MissingThreshold::CurrentHigh => "I_h never reached",
            MissingThreshold::CurrentLow => "I_l never reached",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: u64, message: String },
    #[error("{path}: missing required column `{column}`")]
    MissingColumn { path: String, column: String },
    #[error("cell {cell}: cycle {cycle}: time goes backwards at line {line}")]
    NonMonotoneTime { cell: String, cycle: u32, line: u64 },
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("{segment} segment unavailable: {missing}")]
    SegmentUnavailable { segment: SegmentKind, missing: MissingThreshold },
    #[error("degenerate segment: {0}")]
    DegenerateSegment(String),
    #[error("degenerate series: {0}")]
    DegenerateSeries(String),
    #[error("feature `{name}`: {source}")]
    Feature {
        name: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("config: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("ensemble member {member} diverged: {message}")]
    Diverged { member: usize, message: String },
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse error class, mapped onto process exit codes by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        }
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Numerical(_) | Error::Diverged { .. } => ErrorKind::Numerical,
            Error::Feature { source, .. } | Error::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }

    pub fn in_feature(self, name: &'static str) -> Error {
        Error::Feature { name, source: Box::new(self) }
    }

    /// Strips feature/stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Feature { source, .. } | Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}
