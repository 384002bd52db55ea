//! Numerical homogenization of periodic rigid-particle suspensions in Stokes flow with
//! random, velocity-dependent surface forces.
//!
//! The crate solves the unit-cell problems that define the effective viscosity, evaluates
//! the averaged surface force, solves the homogenized and the fine-scale problems, and
//! compares them through energies, norms and first-order correctors.

pub mod cell;
pub mod error;
pub mod fem;
pub mod forces;
pub mod geometry;
pub mod io;
pub mod macroscale;
pub mod micro;
pub mod quadrature;
pub mod sparse;
pub mod verify;

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use cell::{corrector_basis, effective_tensor, solve_cell, CellSolution, EffectiveTensor};
pub use error::{Error, Result};
pub use fem::{MixedField, RigidMotion, SolveOptions, Viscosity};
pub use forces::{AmplitudeLaw, BodyForce, Profile, RandomCellField, SurfaceForceModel, Weight};
pub use geometry::{
    build_cell_mesh, build_macro_mesh, build_perforated_mesh, BoxDomain, CellMesh, InclusionShape,
    MacroMesh, PerforatedMesh, ShapeKind,
};
pub use macroscale::{energy_star, solve_homogenized, HomogenizedProblem, PicardOptions};
pub use micro::{energy_micro, solve_micro, MicroProblem, MicroSolution};
pub use verify::{convergence_study, dilute_study, ConvergenceReport, DiluteConfig, DiluteReport, StudyConfig};
