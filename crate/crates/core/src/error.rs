use thiserror::Error;

/// Errors raised anywhere in the separation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("empty sample set: {0}")]
    EmptySampleSet(String),

    #[error("insufficient angles: need {required} distinct angles (mod 180 deg), got {got}")]
    InsufficientAngles { required: usize, got: usize },

    #[error("singular matrix (|det| = {det:e})")]
    SingularMatrix { det: f64 },

    #[error("degenerate covariance: q1 = {q1}, q2 = {q2}; second principal component has no usable variance")]
    DegenerateCovariance { q1: f64, q2: f64 },

    #[error("ICA rotation is not identifiable: 4th-order harmonic amplitude {amplitude:e} is below the noise threshold {threshold:e}")]
    IcaUnidentifiable { amplitude: f64, threshold: f64 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Strips stage labels and returns the innermost error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 1 for configuration/IO problems, 2 for statistical degeneracy.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::DegenerateSignal(_)
            | Error::DegenerateCovariance { .. }
            | Error::IcaUnidentifiable { .. }
            | Error::SingularMatrix { .. } => 2,
            _ => 1,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
