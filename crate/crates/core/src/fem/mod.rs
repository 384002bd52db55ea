//! Quadratic-velocity / linear-pressure mixed elements with periodic, Dirichlet and
//! rigid-particle constraints.

mod assembly;
mod dofmap;
mod element;
mod field;
mod rigid;
mod solver;
mod space;
pub mod substructure;

pub use assembly::{Assembler, LocalSystem, SaddleSystem};
pub use dofmap::{ConstraintSpec, DofMap, Part, RigidMode};
pub use element::{divergence, load, pressure_mass, rule, stiffness, strain_vectors, Viscosity, DEV_VOIGT};
pub use field::{
    discrete_divergence, divergence_norm, element_hessian, error_norms, eval_element, frob2, h1_norm, h1_seminorm,
    integrate, l2_norm, nodal_load, strain, strain_norm, velocity_mean, MixedField, QuadPoint, SpaceFlags,
};
pub use rigid::RigidMotion;
pub use solver::{
    solve_saddle, CholeskySolver, DirectSolver, FactoredSaddle, SaddleSolution, SchurSolver, SolveOptions,
    SolverKind,
};
pub use space::{p2_gradients, p2_hessians, p2_values, ElementGeometry, P2Space, EDGE_PAIRS};

use crate::error::Result;
use crate::geometry::Mesh;

/// Assemble the constrained Stokes system for `viscosity` and an optional body force.
pub fn assemble_stokes(
    mesh: &Mesh,
    space: &P2Space,
    dofs: &DofMap,
    viscosity: Viscosity,
    body_force: Option<&dyn Fn([f64; 2]) -> [f64; 2]>,
) -> Result<SaddleSystem> {
    let mut a = Assembler::new(mesh, space, dofs, viscosity);
    a.body_force = body_force;
    a.assemble()
}

/// Solve an assembled system and expand it to a field with zero-mean pressure.
pub fn solve_stokes(mesh: &Mesh, dofs: &DofMap, sys: &SaddleSystem, opts: &SolveOptions) -> Result<MixedField> {
    let sol = solve_saddle(sys, opts)?;
    let mut f = MixedField::from_reduced(dofs, &sol.q, sol.residual);
    f.normalize_pressure(mesh);
    Ok(f)
}
