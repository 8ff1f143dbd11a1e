//! Error classification for exit codes: numeric domain failures exit 1,
//! usage and file problems exit 2.

use std::fmt;

use docqs::bayesopt::BoError;
use docqs::binarize::BinarizeError;
use docqs::dataset::DatasetError;
use docqs::imaging::ImageError;
use docqs::metrics::MetricError;
use docqs::surrogates::SurrogateError;

#[derive(Debug)]
pub enum CliError {
    /// Convergence, conditioning or other numeric failures.
    Domain(String),
    /// Bad inputs, files or arguments.
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Usage(_) => 2,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Keep messages on one line for machine parsing.
        let (kind, msg) = match self {
            CliError::Domain(m) => ("domain", m),
            CliError::Usage(m) => ("usage", m),
        };
        write!(f, "{kind}: {}", msg.replace('\n', " "))
    }
}

impl From<ImageError> for CliError {
    fn from(e: ImageError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            // A constant feature column is a conditioning failure, not a
            // malformed input.
            DatasetError::ConstantColumn { .. } => CliError::Domain(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<SurrogateError> for CliError {
    fn from(e: SurrogateError) -> Self {
        match e {
            SurrogateError::Dataset(inner) => inner.into(),
            SurrogateError::Conditioning { .. }
            | SurrogateError::Convergence { .. }
            | SurrogateError::Divergence { .. }
            | SurrogateError::ConstantActual { .. }
            | SurrogateError::BadHyperparams(_)
            | SurrogateError::TooFewPoints { .. } => CliError::Domain(e.to_string()),
            SurrogateError::ModelFile { .. }
            | SurrogateError::VersionMismatch { .. }
            | SurrogateError::BadEvalInput { .. } => CliError::Usage(e.to_string()),
        }
    }
}

impl From<BoError> for CliError {
    fn from(e: BoError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<BinarizeError> for CliError {
    fn from(e: BinarizeError) -> Self {
        match e {
            BinarizeError::NoFeasiblePoint => CliError::Domain(e.to_string()),
            BinarizeError::Optimizer(inner) => inner.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}
