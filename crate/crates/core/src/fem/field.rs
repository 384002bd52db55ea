use serde::{Deserialize, Serialize};

use super::dofmap::{DofMap, RigidMode};
use super::element::rule;
use super::space::{p2_gradients, p2_hessians, p2_values, ElementGeometry, P2Space};
use crate::geometry::{Mesh, Region};

/// Constraints a discrete field was computed under.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceFlags {
    pub dirichlet: bool,
    pub periodic: bool,
    pub rigid_per_particle: bool,
    pub rigid_strain: bool,
    pub zero_mean_pressure: bool,
    pub zero_mean_velocity: bool,
}

/// Quadratic velocity / linear pressure pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixedField {
    /// Per P2 node.
    pub velocity: Vec<[f64; 2]>,
    /// Per vertex; meaningful where `pressure_mask` is set.
    pub pressure: Vec<f64>,
    pub pressure_mask: Vec<bool>,
    pub flags: SpaceFlags,
    /// Relative algebraic residual of the solve that produced the field.
    pub residual: f64,
}

impl MixedField {
    pub fn zeros(space: &P2Space) -> Self {
        MixedField {
            velocity: vec![[0.0; 2]; space.n_nodes()],
            pressure: vec![0.0; space.n_vertices],
            pressure_mask: vec![true; space.n_vertices],
            flags: SpaceFlags::default(),
            residual: 0.0,
        }
    }

    /// Expand reduced unknowns under a constraint map.
    pub fn from_reduced(dofs: &DofMap, q: &[f64], residual: f64) -> Self {
        MixedField {
            velocity: dofs.expand_velocity(q),
            pressure: dofs.expand_pressure(q),
            pressure_mask: dofs.pressure_vertices(),
            flags: SpaceFlags {
                dirichlet: false,
                periodic: dofs.periodic,
                rigid_per_particle: dofs.rigid != RigidMode::Off,
                rigid_strain: matches!(dofs.rigid, RigidMode::Strain(_)),
                zero_mean_pressure: false,
                zero_mean_velocity: false,
            },
            residual,
        }
    }

    /// Nodal interpolant of `f`, with zero pressure.
    pub fn interpolate(space: &P2Space, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let mut m = MixedField::zeros(space);
        m.velocity = space.coords.iter().map(|&x| f(x)).collect();
        m
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = self.clone();
        m.velocity.iter_mut().for_each(|u| *u = [s * u[0], s * u[1]]);
        m.pressure.iter_mut().for_each(|p| *p *= s);
        m
    }

    pub fn axpy(&self, a: f64, other: &MixedField) -> Self {
        let mut m = self.clone();
        for (u, v) in m.velocity.iter_mut().zip(&other.velocity) {
            u[0] += a * v[0];
            u[1] += a * v[1];
        }
        for (p, q) in m.pressure.iter_mut().zip(&other.pressure) {
            *p += a * q;
        }
        m
    }

    /// Subtract the area-weighted mean pressure over elements that carry pressure.
    pub fn normalize_pressure(&mut self, mesh: &Mesh) {
        let mut num = 0.0;
        let mut den = 0.0;
        for (t, tri) in mesh.triangles.iter().enumerate() {
            if tri.iter().all(|&v| self.pressure_mask[v]) {
                let a = mesh.triangle_area(t);
                num += a * tri.iter().map(|&v| self.pressure[v]).sum::<f64>() / 3.0;
                den += a;
            }
        }
        if den > 0.0 {
            let mean = num / den;
            for (p, &m) in self.pressure.iter_mut().zip(&self.pressure_mask) {
                if m {
                    *p -= mean;
                }
            }
        }
        self.flags.zero_mean_pressure = true;
    }

    pub fn pressure_mean_and_norm(&self, mesh: &Mesh) -> (f64, f64) {
        let mut num = 0.0;
        let mut sq = 0.0;
        let mut den = 0.0;
        for (t, tri) in mesh.triangles.iter().enumerate() {
            if tri.iter().all(|&v| self.pressure_mask[v]) {
                let a = mesh.triangle_area(t);
                let p: Vec<f64> = tri.iter().map(|&v| self.pressure[v]).collect();
                num += a * (p[0] + p[1] + p[2]) / 3.0;
                // exact integral of a squared linear function
                sq += a / 6.0 * (p[0] * p[0] + p[1] * p[1] + p[2] * p[2] + p[0] * p[1] + p[1] * p[2] + p[2] * p[0]);
                den += a;
            }
        }
        (num / den.max(f64::MIN_POSITIVE), sq.sqrt())
    }

    /// Subtract the mean velocity over the whole mesh.
    pub fn normalize_velocity(&mut self, mesh: &Mesh, space: &P2Space) {
        let mean = velocity_mean(mesh, space, &self.velocity);
        for u in &mut self.velocity {
            u[0] -= mean[0];
            u[1] -= mean[1];
        }
        self.flags.zero_mean_velocity = true;
    }
}

/// Value and gradient `g[i][j] = d u_i / d x_j` of a nodal field at barycentric `l`.
pub fn eval_element(
    space: &P2Space,
    g: &ElementGeometry,
    t: usize,
    u: &[[f64; 2]],
    l: &[f64; 3],
) -> ([f64; 2], [[f64; 2]; 2]) {
    let nodes = &space.tri_nodes[t];
    let v = p2_values(l);
    let gr = p2_gradients(g, l);
    let mut val = [0.0; 2];
    let mut grad = [[0.0; 2]; 2];
    for a in 0..6 {
        let ua = u[nodes[a]];
        for i in 0..2 {
            val[i] += v[a] * ua[i];
            for j in 0..2 {
                grad[i][j] += gr[a][j] * ua[i];
            }
        }
    }
    (val, grad)
}

/// Constant second derivatives `h[i][j][k] = d^2 u_i / dx_j dx_k` on triangle `t`.
pub fn element_hessian(space: &P2Space, g: &ElementGeometry, t: usize, u: &[[f64; 2]]) -> [[[f64; 2]; 2]; 2] {
    let nodes = &space.tri_nodes[t];
    let hs = p2_hessians(g);
    let mut h = [[[0.0; 2]; 2]; 2];
    for a in 0..6 {
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    h[i][j][k] += hs[a][j][k] * u[nodes[a]][i];
                }
            }
        }
    }
    h
}

/// Quadrature point data passed to integrands.
pub struct QuadPoint {
    pub triangle: usize,
    pub region: Region,
    pub x: [f64; 2],
    pub weight: f64,
    pub u: [f64; 2],
    pub grad: [[f64; 2]; 2],
}

/// `sum over selected triangles of int f(point)`.
pub fn integrate(
    mesh: &Mesh,
    space: &P2Space,
    u: &[[f64; 2]],
    degree: usize,
    select: impl Fn(usize, Region) -> bool,
    f: impl Fn(&QuadPoint) -> f64,
) -> f64 {
    let r = rule(degree);
    let mut total = 0.0;
    for t in 0..mesh.n_triangles() {
        let region = mesh.regions[t];
        if !select(t, region) {
            continue;
        }
        let g = ElementGeometry::new(mesh.triangle_coords(t));
        let mut s = 0.0;
        for (l, &w) in r.points.iter().zip(&r.weights) {
            let (val, grad) = eval_element(space, &g, t, u, l);
            s += f(&QuadPoint {
                triangle: t,
                region,
                x: g.point(l),
                weight: w * g.area,
                u: val,
                grad,
            }) * w
                * g.area;
        }
        total += s;
    }
    total
}

pub fn strain(grad: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let off = 0.5 * (grad[0][1] + grad[1][0]);
    [[grad[0][0], off], [off, grad[1][1]]]
}

pub fn frob2(a: &[[f64; 2]; 2]) -> f64 {
    a[0][0] * a[0][0] + a[0][1] * a[0][1] + a[1][0] * a[1][0] + a[1][1] * a[1][1]
}

pub fn velocity_mean(mesh: &Mesh, space: &P2Space, u: &[[f64; 2]]) -> [f64; 2] {
    let area = mesh.total_area();
    let mx = integrate(mesh, space, u, 2, |_, _| true, |q| q.u[0]);
    let my = integrate(mesh, space, u, 2, |_, _| true, |q| q.u[1]);
    [mx / area, my / area]
}

pub fn l2_norm(mesh: &Mesh, space: &P2Space, u: &[[f64; 2]]) -> f64 {
    integrate(mesh, space, u, 4, |_, _| true, |q| q.u[0] * q.u[0] + q.u[1] * q.u[1]).sqrt()
}

pub fn h1_seminorm(mesh: &Mesh, space: &P2Space, u: &[[f64; 2]]) -> f64 {
    integrate(mesh, space, u, 2, |_, _| true, |q| frob2(&q.grad)).sqrt()
}

pub fn h1_norm(mesh: &Mesh, space: &P2Space, u: &[[f64; 2]]) -> f64 {
    integrate(mesh, space, u, 4, |_, _| true, |q| {
        q.u[0] * q.u[0] + q.u[1] * q.u[1] + frob2(&q.grad)
    })
    .sqrt()
}

/// `||e(u)||` over the triangles accepted by `select`.
pub fn strain_norm(mesh: &Mesh, space: &P2Space, u: &[[f64; 2]], select: impl Fn(usize, Region) -> bool) -> f64 {
    integrate(mesh, space, u, 2, select, |q| frob2(&strain(&q.grad))).sqrt()
}

pub fn divergence_norm(mesh: &Mesh, space: &P2Space, u: &[[f64; 2]], select: impl Fn(usize, Region) -> bool) -> f64 {
    integrate(mesh, space, u, 2, select, |q| (q.grad[0][0] + q.grad[1][1]).powi(2)).sqrt()
}

/// `||u - v||` in L2 and H1 against an exact field returning value and gradient.
pub fn error_norms(
    mesh: &Mesh,
    space: &P2Space,
    u: &[[f64; 2]],
    degree: usize,
    exact: impl Fn([f64; 2]) -> ([f64; 2], [[f64; 2]; 2]),
) -> (f64, f64) {
    let l2 = integrate(mesh, space, u, degree, |_, _| true, |q| {
        let (v, _) = exact(q.x);
        (q.u[0] - v[0]).powi(2) + (q.u[1] - v[1]).powi(2)
    });
    let semi = integrate(mesh, space, u, degree, |_, _| true, |q| {
        let (_, g) = exact(q.x);
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                s += (q.grad[i][j] - g[i][j]).powi(2);
            }
        }
        s
    });
    (l2.sqrt(), (l2 + semi).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{linspace, structured_mesh};

    #[test]
    fn quadratics_are_reproduced() {
        let g = linspace(0.0, 1.0, 3);
        let mesh = structured_mesh(&g, &g, [0.5, 0.5]);
        let space = P2Space::new(&mesh);
        let f = |x: [f64; 2]| [x[0] * x[0] - x[1], x[0] * x[1]];
        let m = MixedField::interpolate(&space, f);
        let (l2, h1) = error_norms(&mesh, &space, &m.velocity, 6, |x| {
            (f(x), [[2.0 * x[0], -1.0], [x[1], x[0]]])
        });
        assert!(l2 < 1e-14 && h1 < 1e-13);
        // int over unit square of (x^2 - y) = 1/3 - 1/2
        let mean = velocity_mean(&mesh, &space, &m.velocity);
        assert!((mean[0] + 1.0 / 6.0).abs() < 1e-14);
        assert!((mean[1] - 0.25).abs() < 1e-14);
    }
}

/// `-int q_v div u` for every vertex hat function `q_v`, over the selected triangles.
pub fn discrete_divergence(mesh: &Mesh, space: &P2Space, u: &[[f64; 2]], select: impl Fn(usize, Region) -> bool) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_vertices()];
    for t in 0..mesh.n_triangles() {
        if !select(t, mesh.regions[t]) {
            continue;
        }
        let b = super::element::divergence(&ElementGeometry::new(mesh.triangle_coords(t)));
        let nodes = &space.tri_nodes[t];
        for (k, &v) in mesh.triangles[t].iter().enumerate() {
            out[v] += (0..6).map(|a| b[k][2 * a] * u[nodes[a]][0] + b[k][2 * a + 1] * u[nodes[a]][1]).sum::<f64>();
        }
    }
    out
}

/// Nodal load `int f . phi_i` for a force that may depend on the field at each quadrature point.
pub fn nodal_load(
    mesh: &Mesh,
    space: &P2Space,
    u: &[[f64; 2]],
    degree: usize,
    f: impl Fn(&QuadPoint) -> [f64; 2],
) -> Vec<[f64; 2]> {
    let r = rule(degree);
    let mut out = vec![[0.0; 2]; space.n_nodes()];
    for t in 0..mesh.n_triangles() {
        let g = ElementGeometry::new(mesh.triangle_coords(t));
        let nodes = &space.tri_nodes[t];
        for (l, &w) in r.points.iter().zip(&r.weights) {
            let (val, grad) = eval_element(space, &g, t, u, l);
            let q = QuadPoint {
                triangle: t,
                region: mesh.regions[t],
                x: g.point(l),
                weight: w * g.area,
                u: val,
                grad,
            };
            let fv = f(&q);
            let phi = p2_values(l);
            for a in 0..6 {
                out[nodes[a]][0] += q.weight * fv[0] * phi[a];
                out[nodes[a]][1] += q.weight * fv[1] * phi[a];
            }
        }
    }
    out
}
