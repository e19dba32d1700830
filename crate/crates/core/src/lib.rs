//! Homogenization of a periodic dielectric metamaterial cell.
//!
//! Given a compact inclusion inside the unit cell, this crate computes the
//! effective permittivity tensor from the classical potential cell problems,
//! the resonance eigenspectrum of the inclusion (divergence-free interior
//! vorticities of a compact self-adjoint cell operator), and the resulting
//! frequency-dependent effective permeability tensor with band-gap and
//! resonance analysis, together with independent validation oracles.

pub mod error;
pub mod grid;
pub mod io;
pub mod mask;
pub mod permeability;
pub mod permittivity;
pub mod poisson;
mod solvers;
pub mod spectrum;
pub mod tolerances;
pub mod validation;

pub use error::{Error, Result};
pub use grid::{CellField, EdgeField, FaceField, FieldScalar, GridSpec, NodalField};
pub use mask::{voxelize, Box3, CellMask, InclusionShape};
pub use permeability::{
    displacement_current, mu_eff, mu_eff_from_avg_u, mu_eff_from_current_moment, resonance_list,
    shape_magnetic_field, sweep, FrequencyPoint, GapInterval, ModeBasis, PermeabilityTensor,
    ResonanceInfo, SweepRow, SweepTable, TruncationRule,
};
pub use permittivity::{effective_permittivity, solve_all_chi, solve_chi, PermittivityTensor};
pub use poisson::{PoissonSolution, PoissonSolver};
pub use spectrum::{strength_vector, EigenMode, ModeCatalog, SpectrumDiagnostics, Z0Subspace};
pub use validation::{
    circulation, dense_oracle, identity_suite, CheckResult, CirculationResult, DenseOracleReport,
    IdentityReport,
};
