use thiserror::Error;

/// Errors produced by tensor algebra, solvers and the pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("inverse transform of a non-symmetric spectrum: max imaginary residue {residue:.3e} exceeds {tolerance:.3e}")]
    SymmetryViolation { residue: f64, tolerance: f64 },

    #[error("joint kernel spectrum vanishes (|denominator| < {0:.1e}); deconvolution without a ridge is singular")]
    SingularSpectrum(f64),

    #[error("non-finite value encountered in {stage}")]
    NonFinite { stage: &'static str },

    #[error("gram matrix is not positive-definite (degenerate image, e.g. constant input)")]
    NotPositiveDefinite,

    #[error("lasso did not converge after {sweeps} coordinate sweeps")]
    NoConvergence { sweeps: usize },

    #[error("no neighbours within radius for sample(s) {indices:?}; increase r1")]
    NoNeighbors { indices: Vec<usize> },

    #[error("contraction direction is degenerate for sample {index} (fixed point of the neighbour average)")]
    DegenerateDirection { index: usize },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("frame {frame}: {source}")]
    Frame {
        frame: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("image codec: {0}")]
    Image(#[from] image::ImageError),

    #[error("{0}")]
    Format(String),
}

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Wrap an error with the frame index it occurred on.
    pub fn on_frame(self, frame: usize) -> Self {
        Error::Frame {
            frame,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
