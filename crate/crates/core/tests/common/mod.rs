//! Helpers shared by the integration tests.
#![allow(dead_code)]

use susphom::fem::{
    assemble_stokes, error_norms, solve_saddle, solve_stokes, ConstraintSpec, DofMap, P2Space, Part, SolveOptions,
    Viscosity,
};
use susphom::geometry::{build_macro_mesh, BoxDomain};
use susphom::sparse::dot;

fn x0(t: f64) -> f64 {
    t * t * (1.0 - t) * (1.0 - t)
}
fn x1(t: f64) -> f64 {
    2.0 * t - 6.0 * t * t + 4.0 * t * t * t
}
fn x2(t: f64) -> f64 {
    2.0 - 12.0 * t + 12.0 * t * t
}
fn x3(t: f64) -> f64 {
    -12.0 + 24.0 * t
}

pub fn exact(p: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
    let [x, y] = p;
    (
        [x0(x) * x1(y), -x1(x) * x0(y)],
        [[x1(x) * x1(y), x0(x) * x2(y)], [-x2(x) * x0(y), -x1(x) * x1(y)]],
    )
}

pub fn forcing(mu: f64) -> impl Fn([f64; 2]) -> [f64; 2] {
    move |p: [f64; 2]| {
        let [x, y] = p;
        let lap1 = x2(x) * x1(y) + x0(x) * x3(y);
        let lap2 = -(x3(x) * x0(y) + x1(x) * x2(y));
        [-mu * lap1 + y, -mu * lap2 + x]
    }
}

pub struct Run {
    pub h: f64,
    pub l2: f64,
    pub p_err: f64,
    /// Relative gap in the discrete energy identity `u.Ku = u.f`.
    pub energy_gap: f64,
}

/// Stokes on the unit square with a known polynomial solution, `n x n` squares.
pub fn manufactured(n: usize, mu: f64) -> Run {
    let mesh = build_macro_mesh(&BoxDomain::unit_square(), n).unwrap().mesh;
    let space = P2Space::new(&mesh);
    let zero = |_: [f64; 2]| [0.0, 0.0];
    let spec = ConstraintSpec {
        dirichlet: Some(&zero),
        pressure_nodes: Part::All,
        divergence_elements: Part::All,
        pin_pressure: true,
        ..Default::default()
    };
    let dofs = DofMap::build(&mesh, &space, &spec).unwrap();
    let f = forcing(mu);
    let sys = assemble_stokes(&mesh, &space, &dofs, Viscosity::Scalar(mu), Some(&f)).unwrap();
    let opts = SolveOptions {
        tol: 1e-11,
        ..Default::default()
    };
    let sol = solve_saddle(&sys, &opts).unwrap();
    let field = solve_stokes(&mesh, &dofs, &sys, &opts).unwrap();
    let (l2, _) = error_norms(&mesh, &space, &field.velocity, 8, exact);
    let p_err = susphom::fem::integrate(&mesh, &space, &field.velocity, 6, |_, _| true, |q| {
        let t = &mesh.triangles[q.triangle];
        let l = susphom::geometry::barycentric(mesh.triangle_coords(q.triangle), q.x);
        let ph: f64 = (0..3).map(|k| l[k] * field.pressure[t[k]]).sum();
        (ph - (q.x[0] * q.x[1] - 0.25)).powi(2)
    })
    .sqrt();
    let k = sys.velocity_block();
    let u = &sol.q[..sys.n_vel];
    let ku = k.mul_vec(u);
    let energy_gap = (dot(u, &ku) - dot(u, &sys.rhs[..sys.n_vel])).abs() / dot(u, &ku);
    Run {
        h: 1.0 / n as f64,
        l2,
        p_err,
        energy_gap,
    }
}
