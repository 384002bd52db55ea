use std::f64::consts::PI;

use susphom::geometry::{
    build_cell_mesh, build_perforated_mesh, lattice_indices, periodic_dof_map, BoxDomain, InclusionShape, Region,
    ShapeKind,
};
use susphom::Error;

#[test]
fn lattice_sizes_on_the_unit_square() {
    let d = BoxDomain::unit_square();
    let quarter = lattice_indices(&d, 0.25).unwrap();
    let expected: Vec<[i64; 2]> = (1..=3).flat_map(|j| (1..=3).map(move |i| [i, j])).collect();
    assert_eq!(quarter, expected);
    assert_eq!(lattice_indices(&d, 0.125).unwrap().len(), 49);
    assert!(lattice_indices(&d, 2.0).unwrap().is_empty());
}

#[test]
fn oversized_cells_are_reported() {
    let r = build_perforated_mesh(&BoxDomain::unit_square(), &InclusionShape::disk(0.1), 2.0, 0.25);
    assert!(matches!(r, Err(Error::NoParticles)));
}

#[test]
fn large_inclusion_touches_the_cell() {
    let r = build_cell_mesh(&InclusionShape::disk(0.65), 0.1);
    assert!(matches!(r, Err(Error::ShapeTouchesBoundary { .. })));
    let strict = InclusionShape {
        min_gap: 0.07,
        ..InclusionShape::disk(0.6)
    };
    assert!(matches!(build_cell_mesh(&strict, 0.1), Err(Error::ShapeTouchesBoundary { .. })));
}

#[test]
fn disk_radius_and_perimeter() {
    let s = InclusionShape::disk(0.1);
    assert!((s.radius() - 0.17841).abs() < 5e-6);
    assert!((s.perimeter() - 1.12100).abs() < 5e-5);
}

#[test]
fn empty_inclusion_is_all_fluid() {
    let c = build_cell_mesh(&InclusionShape::disk(0.0), 0.125).unwrap();
    assert_eq!(c.mesh.n_rigid_triangles(), 0);
    assert!(!c.has_inclusion());
    assert!((c.mesh.total_area() - 1.0).abs() < 1e-14);
}

#[test]
fn cell_tags_partition_and_area_tracks_phi() {
    for kind in [ShapeKind::Disk, ShapeKind::Ellipse { aspect: 0.6 }, ShapeKind::RoundedSquare { corner_ratio: 0.5 }] {
        let h = 1.0 / 16.0;
        let c = build_cell_mesh(&InclusionShape::new(kind, 0.1), h).unwrap();
        let fluid = c.mesh.region_area(|r| r == Region::Fluid);
        assert!((fluid + c.mesh.rigid_area() - 1.0).abs() < 1e-13);
        assert!((c.measured_inclusion_area() - 0.1).abs() <= 2.0 * h * h, "{kind:?}");
        assert!(c.mesh.min_triangle_area() > 0.0);
    }
}

#[test]
fn inclusion_area_converges_at_second_order() {
    for kind in [ShapeKind::Disk, ShapeKind::Ellipse { aspect: 0.5 }] {
        let err = |h: f64| (build_cell_mesh(&InclusionShape::new(kind, 0.15), h).unwrap().measured_inclusion_area() - 0.15).abs();
        let (e1, e2) = (err(1.0 / 8.0), err(1.0 / 16.0));
        assert!(e1 / e2 >= 2.0, "{kind:?}: {e1} {e2}");
    }
}

#[test]
fn periodic_pairing_identifies_corners() {
    let c = build_cell_mesh(&InclusionShape::disk(0.1), 0.125).unwrap();
    let map = periodic_dof_map(&c.mesh).unwrap();
    let corner = c
        .mesh
        .vertices
        .iter()
        .position(|v| (v[0] + 0.5).abs() < 1e-14 && (v[1] + 0.5).abs() < 1e-14)
        .unwrap();
    assert!(map.is_master(corner));
    assert_eq!(map.slaves_of(corner).len(), 3);
    assert_eq!(map.mean_constraints, 2);
    for (v, &m) in map.master.iter().enumerate() {
        let (a, b) = (c.mesh.vertices[v], c.mesh.vertices[m]);
        let dx = (a[0] - b[0]).abs();
        let dy = (a[1] - b[1]).abs();
        assert!(dx < 1e-12 || (dx - 1.0).abs() < 1e-12);
        assert!(dy < 1e-12 || (dy - 1.0).abs() < 1e-12);
    }
}

#[test]
fn perforated_particles_are_disjoint_scaled_copies() {
    let shape = InclusionShape::disk(0.1);
    let pm = build_perforated_mesh(&BoxDomain::unit_square(), &shape, 0.125, 0.125).unwrap();
    assert_eq!(pm.n_particles(), 49);
    assert!((pm.mesh.total_area() - 1.0).abs() < 1e-12);
    let per = pm.rigid_area() / 49.0;
    assert!((per - 0.125 * 0.125 * pm.cell.measured_inclusion_area()).abs() < 1e-15);
    let r = shape.radius() * 0.125;
    for (i, p) in pm.mesh.particles.iter().enumerate() {
        let k = pm.lattice[i];
        assert_eq!(p.lattice, k);
        assert!((p.center[0] - 0.125 * k[0] as f64).abs() < 1e-12);
        for q in &pm.mesh.particles[i + 1..] {
            let d = (p.center[0] - q.center[0]).hypot(p.center[1] - q.center[1]);
            assert!(d > 2.0 * r);
        }
    }
    assert!((PI * r * r - per).abs() <= 2.0 * 0.125 * 0.125 * 0.125 * 0.125);
}
