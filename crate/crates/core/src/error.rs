use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("inclusion boundary is {gap:.4} from the cell boundary, minimum gap is {min:.4}")]
    ShapeTouchesBoundary { gap: f64, min: f64 },

    #[error("mesh generation failed: {0}")]
    MeshGenFailure(String),

    #[error("no lattice cell fits strictly inside the domain")]
    NoParticles,

    #[error("opposite periodic faces do not match: {0}")]
    NonMatchingFaces(String),

    #[error("viscosity is not positive definite: {0}")]
    SingularViscosity(String),

    #[error("strain loading has trace {trace:.3e}, periodic cells admit trace-free loadings only")]
    NonTraceFreeStrain { trace: f64 },

    #[error("linear solver diverged: {reason}")]
    SolverDiverged { reason: String, trace: Vec<f64> },

    #[error("Picard iteration stalled after {} iterations", trace.len())]
    PicardStalled { trace: Vec<f64> },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for numerical failures (as opposed to bad input or configuration).
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::SolverDiverged { .. } | Error::PicardStalled { .. } | Error::MeshGenFailure(_)
        )
    }
}
