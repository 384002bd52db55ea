//! Unit-cell, macro and perforated meshes with periodic and particle bookkeeping.

mod cell_mesh;
mod locate;
mod mesh;
mod perforated;
mod periodic;
mod shape;
mod structured;

pub use cell_mesh::{build_cell_mesh, segments_per_side, CellMesh};
pub use locate::{barycentric, PointLocator};
pub use mesh::{dist, signed_area, BoundaryFacet, Mesh, Particle, Region};
pub use perforated::{build_perforated_mesh, lattice_indices, perforate, BoxDomain, PerforatedMesh};
pub use periodic::{periodic_dof_map, PeriodicMap};
pub use shape::{InclusionShape, ShapeKind, DEFAULT_MIN_GAP};
pub use structured::{linspace, structured_mesh};

use serde::{Deserialize, Serialize};

/// Structured triangulation of a box domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MacroMesh {
    pub mesh: Mesh,
    pub domain: BoxDomain,
    pub n: usize,
}

/// `n x n` squares over `domain`, each split in two.
pub fn build_macro_mesh(domain: &BoxDomain, n: usize) -> crate::Result<MacroMesh> {
    if n < 2 {
        return Err(crate::Error::InvalidInput(format!(
            "macro mesh needs at least 2 squares per side, got {n}"
        )));
    }
    let xs = linspace(domain.lo[0], domain.hi[0], n);
    let ys = linspace(domain.lo[1], domain.hi[1], n);
    let mut mesh = structured_mesh(&xs, &ys, domain.center());
    mesh.orient_ccw();
    Ok(MacroMesh {
        mesh,
        domain: *domain,
        n,
    })
}
