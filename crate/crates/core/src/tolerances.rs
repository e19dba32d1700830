//! Numerical tolerances used across the crate, collected in one place so the
//! solver contracts and the test suite pin the same values.

/// Exact discrete identities (div∘curl, curl∘grad, adjointness) are clean
/// floating-point cancellations; anything above this is a bug.
pub const EXACT_SEQUENCE: f64 = 1e-13;

/// Adjoint-pairing mismatch, relative to the product of the operand norms.
pub const ADJOINT_REL: f64 = 1e-12;

/// Relative residual of the spectral periodic Poisson solve.
pub const POISSON_RESIDUAL_REL: f64 = 1e-10;

/// Largest admissible source mean, relative to the source norm.
pub const SOURCE_MEAN_REL: f64 = 1e-12;

/// Relative residual target for the Dirichlet potential (chi) solves.
pub const CHI_CG_REL: f64 = 1e-10;

/// Residual target the divergence projector aims for; the solve is declared
/// failed only above `PROJECTOR_FAIL_REL`.
pub const PROJECTOR_TARGET_REL: f64 = 1e-13;
pub const PROJECTOR_FAIL_REL: f64 = 1e-11;

/// Absolute residual (in the unit-norm eigenvector scale) below which an
/// eigenpair is accepted.
pub const EIGEN_RESIDUAL: f64 = 1e-8;

/// Ritz-estimate threshold used for locking candidates during restarts;
/// tighter than `EIGEN_RESIDUAL` so the final verified residuals pass.
pub const EIGEN_LOCK_ESTIMATE: f64 = 1e-9;

/// Relative gap below which neighbouring eigenvalues are reported as one
/// degenerate multiplet.
pub const MULTIPLET_GAP_REL: f64 = 1e-3;

/// Relative eigenvalue threshold for the numerical rank of a multiplet
/// strength matrix.
pub const STRENGTH_RANK_REL: f64 = 1e-8;

/// Default strength cutoff: modes whose squared moment falls below this
/// fraction of the strongest moment are dropped from the series.
pub const STRENGTH_TOL_DEFAULT: f64 = 1e-6;

/// Proximity of `1 - eps_r * alpha * k0^2` to zero that counts as a lossless
/// resonance singularity.
pub const RESONANCE_SINGULARITY: f64 = 1e-9;

/// Bisection width (in lambda/d) for band-gap interval endpoints.
pub const GAP_BISECTION: f64 = 1e-4;

/// Maximum CG iterations, as a multiple of the grid resolution.
pub const CG_MAX_ITER_PER_N: usize = 50;

/// Restart budget of the eigensolver.
pub const MAX_RESTARTS: usize = 20;

/// Largest divergence-free subspace the dense oracle will factorize.
pub const DENSE_SUBSPACE_MAX: usize = 2000;
