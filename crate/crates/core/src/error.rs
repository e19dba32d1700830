//! Error type shared by all solvers in this crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An occupied voxel sits in the outermost cell layer, so the inclusion
    /// is not strictly inside the periodic cell.
    #[error("inclusion touches the cell boundary at voxel ({0}, {1}, {2})")]
    ShapeTouchesBoundary(usize, usize, usize),

    /// The occupied voxel set splits into several face-connected components.
    #[error("inclusion is not face-connected ({components} components)")]
    DisconnectedInclusion { components: usize },

    /// A Poisson source component has a mean that is too large relative to
    /// the field norm; such a source has no periodic potential.
    #[error("source component {component} has nonzero mean {mean:.3e} (|f| = {norm:.3e})")]
    NonZeroMeanSource { component: usize, mean: f64, norm: f64 },

    /// Conjugate gradients stopped before reaching the requested residual.
    #[error("conjugate gradients: no convergence after {iterations} iterations (relative residual {residual:.3e})")]
    CgNoConvergence { iterations: usize, residual: f64 },

    /// The inner Neumann solve of the divergence projector stalled.
    #[error("divergence projector solve failed after {iterations} iterations (relative residual {residual:.3e})")]
    ProjectorSolveFailure { iterations: usize, residual: f64 },

    /// The restarted eigensolver could not converge the requested number of
    /// modes within the restart budget.
    #[error("eigensolver stagnated: {converged_count} of {requested} modes converged")]
    LanczosStagnation { converged_count: usize, requested: usize },

    /// A lossless evaluation point coincides with a retained resonance.
    #[error("resonance singularity: mode {mode_index} is resonant at lambda/d = {lambda_over_d:.6}")]
    ResonanceSingularity { mode_index: usize, lambda_over_d: f64 },

    /// The divergence-free subspace is too large for the dense oracle path.
    #[error("divergence-free subspace dimension {dim} exceeds dense limit {max}")]
    SubspaceTooLarge { dim: usize, max: usize },

    /// No grid line in the requested direction stays clear of the inclusion.
    #[error("no grid line in direction {axis} avoids the inclusion")]
    NoClearPath { axis: usize },

    /// A voxel mask file could not be parsed.
    #[error("voxel file {path}: {reason}")]
    VoxelFile { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// A caller violated a documented precondition.
    #[error("{0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
