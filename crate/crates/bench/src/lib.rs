//! Fixtures shared by the solver benchmarks.

use susphom::fem::{assemble_stokes, ConstraintSpec, DofMap, P2Space, Part, SaddleSystem, Viscosity};
use susphom::forces::BodyForce;
use susphom::geometry::{build_macro_mesh, BoxDomain, Mesh};

/// Lid-free cavity: swirl-forced Stokes flow on an `n x n` unit-square mesh with no-slip walls.
pub fn cavity(n: usize) -> (Mesh, SaddleSystem) {
    let mesh = build_macro_mesh(&BoxDomain::unit_square(), n).expect("unit square meshes").mesh;
    let space = P2Space::new(&mesh);
    let zero = |_: [f64; 2]| [0.0, 0.0];
    let spec = ConstraintSpec {
        dirichlet: Some(&zero),
        pressure_nodes: Part::All,
        divergence_elements: Part::All,
        pin_pressure: true,
        ..Default::default()
    };
    let dofs = DofMap::build(&mesh, &space, &spec).expect("valid constraints");
    let force = BodyForce::Swirl { amplitude: 1.0 };
    let f = |x: [f64; 2]| force.eval(x);
    let sys = assemble_stokes(&mesh, &space, &dofs, Viscosity::Scalar(1.0), Some(&f)).expect("assembly");
    (mesh, sys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cavity_has_velocity_and_pressure_unknowns() {
        let (mesh, sys) = cavity(4);
        assert_eq!(mesh.n_triangles(), 32);
        assert!(sys.n_vel > 0 && sys.n() > sys.n_vel);
    }
}
