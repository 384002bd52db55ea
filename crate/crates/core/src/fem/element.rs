use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::OnceLock;

use super::space::{p2_gradients, p2_values, ElementGeometry};
use crate::error::{Error, Result};
use crate::quadrature::TriangleRule;

/// Cached triangle rule of the given degree (degrees up to 10).
pub fn rule(degree: usize) -> &'static TriangleRule {
    static RULES: OnceLock<Vec<TriangleRule>> = OnceLock::new();
    &RULES.get_or_init(|| (0..=10).map(TriangleRule::with_degree).collect())[degree.min(10)]
}

/// Viscosity acting on symmetric strain rates in the orthonormal basis
/// `[e11, e22, sqrt(2) e12]`, so that `2 e(u) : M e(v)` is the bulk dissipation density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Viscosity {
    Scalar(f64),
    Tensor([[f64; 3]; 3]),
}

/// Orthonormal deviatoric directions in the strain basis used by [`Viscosity`].
pub const DEV_VOIGT: [[f64; 3]; 2] = [[FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0], [0.0, 0.0, 1.0]];

impl Viscosity {
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        match *self {
            Viscosity::Scalar(mu) => [[mu, 0.0, 0.0], [0.0, mu, 0.0], [0.0, 0.0, mu]],
            Viscosity::Tensor(m) => m,
        }
    }

    /// `mu Id + C` where `c` is the Gram matrix of a deviatoric form in the basis
    /// `(E11 - E22)/sqrt(2)`, `sqrt(2) E12`.
    pub fn effective(mu: f64, c: [[f64; 2]; 2]) -> Self {
        let mut m = Viscosity::Scalar(mu).matrix();
        for a in 0..2 {
            for b in 0..2 {
                for i in 0..3 {
                    for j in 0..3 {
                        m[i][j] += c[a][b] * DEV_VOIGT[a][i] * DEV_VOIGT[b][j];
                    }
                }
            }
        }
        Viscosity::Tensor(m)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.matrix();
        let sym = (0..3).all(|i| (0..3).all(|j| (m[i][j] - m[j][i]).abs() <= 1e-12 * (1.0 + m[i][j].abs())));
        if !sym {
            return Err(Error::SingularViscosity("tensor is not symmetric".into()));
        }
        let eig = nalgebra::Matrix3::from_fn(|i, j| m[i][j]).symmetric_eigenvalues();
        let min = eig.min();
        if !(min > 0.0) || !min.is_finite() {
            return Err(Error::SingularViscosity(format!("smallest eigenvalue {min:.3e}")));
        }
        Ok(())
    }
}

/// Strain vectors of the 12 local velocity basis functions (node `a`, component `c` at `2a + c`).
pub fn strain_vectors(grads: &[[f64; 2]; 6]) -> [[f64; 3]; 12] {
    let mut out = [[0.0; 3]; 12];
    for a in 0..6 {
        let [gx, gy] = grads[a];
        out[2 * a] = [gx, 0.0, gy * FRAC_1_SQRT_2];
        out[2 * a + 1] = [0.0, gy, gx * FRAC_1_SQRT_2];
    }
    out
}

/// `int_K 2 e(phi_j) : M e(phi_i)`.
pub fn stiffness(g: &ElementGeometry, m: &[[f64; 3]; 3]) -> [[f64; 12]; 12] {
    let r = rule(2);
    let mut k = [[0.0; 12]; 12];
    for (l, &w) in r.points.iter().zip(&r.weights) {
        let s = strain_vectors(&p2_gradients(g, l));
        let wt = 2.0 * w * g.area;
        for j in 0..12 {
            let mut ms = [0.0; 3];
            for p in 0..3 {
                ms[p] = m[p][0] * s[j][0] + m[p][1] * s[j][1] + m[p][2] * s[j][2];
            }
            for i in 0..12 {
                k[i][j] += wt * (s[i][0] * ms[0] + s[i][1] * ms[1] + s[i][2] * ms[2]);
            }
        }
    }
    k
}

/// `-int_K q_k div phi_j` for the three linear pressure functions.
pub fn divergence(g: &ElementGeometry) -> [[f64; 12]; 3] {
    let r = rule(2);
    let mut b = [[0.0; 12]; 3];
    for (l, &w) in r.points.iter().zip(&r.weights) {
        let grads = p2_gradients(g, l);
        for k in 0..3 {
            let wt = -w * g.area * l[k];
            for a in 0..6 {
                b[k][2 * a] += wt * grads[a][0];
                b[k][2 * a + 1] += wt * grads[a][1];
            }
        }
    }
    b
}

/// `int_K f . phi_i` with a rule of the given degree.
pub fn load(g: &ElementGeometry, f: &dyn Fn([f64; 2]) -> [f64; 2], degree: usize) -> [f64; 12] {
    let r = rule(degree);
    let mut out = [0.0; 12];
    for (l, &w) in r.points.iter().zip(&r.weights) {
        let fx = f(g.point(l));
        let v = p2_values(l);
        for a in 0..6 {
            out[2 * a] += w * g.area * v[a] * fx[0];
            out[2 * a + 1] += w * g.area * v[a] * fx[1];
        }
    }
    out
}

/// Consistent mass matrix of the linear pressure space.
pub fn pressure_mass(g: &ElementGeometry) -> [[f64; 3]; 3] {
    let mut m = [[g.area / 12.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = g.area / 6.0;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> ElementGeometry {
        ElementGeometry::new([[0.0, 0.0], [1.0, 0.2], [0.3, 0.8]])
    }

    #[test]
    fn rigid_motions_are_in_the_kernel() {
        let g = geom();
        let k = stiffness(&g, &Viscosity::Scalar(1.7).matrix());
        let nodes = [
            g.vertices[0],
            g.vertices[1],
            g.vertices[2],
            g.point(&[0.5, 0.5, 0.0]),
            g.point(&[0.0, 0.5, 0.5]),
            g.point(&[0.5, 0.0, 0.5]),
        ];
        for mode in 0..3 {
            let mut u = [0.0; 12];
            for a in 0..6 {
                let v = match mode {
                    0 => [1.0, 0.0],
                    1 => [0.0, 1.0],
                    _ => [-nodes[a][1], nodes[a][0]],
                };
                u[2 * a] = v[0];
                u[2 * a + 1] = v[1];
            }
            for row in &k {
                let s: f64 = row.iter().zip(&u).map(|(a, b)| a * b).sum();
                assert!(s.abs() < 1e-13);
            }
        }
    }

    #[test]
    fn affine_strain_energy_is_exact() {
        // u = (x + 2y, 3x - y): e = [[1, 2.5], [2.5, -1]], 2 mu e:e |K|
        let g = geom();
        let mu = 0.8;
        let k = stiffness(&g, &Viscosity::Scalar(mu).matrix());
        let nodes = [
            g.vertices[0],
            g.vertices[1],
            g.vertices[2],
            g.point(&[0.5, 0.5, 0.0]),
            g.point(&[0.0, 0.5, 0.5]),
            g.point(&[0.5, 0.0, 0.5]),
        ];
        let mut u = [0.0; 12];
        for a in 0..6 {
            let [x, y] = nodes[a];
            u[2 * a] = x + 2.0 * y;
            u[2 * a + 1] = 3.0 * x - y;
        }
        let mut e = 0.0;
        for i in 0..12 {
            for j in 0..12 {
                e += u[i] * k[i][j] * u[j];
            }
        }
        let exact = 2.0 * mu * (1.0 + 1.0 + 2.0 * 2.5 * 2.5) * g.area;
        assert!((e - exact).abs() < 1e-12);
        // divergence of u is 0
        let b = divergence(&g);
        for row in &b {
            let s: f64 = row.iter().zip(&u).map(|(a, b)| a * b).sum();
            assert!(s.abs() < 1e-14);
        }
    }

    #[test]
    fn identity_tensor_matches_scalar() {
        let g = geom();
        let a = stiffness(&g, &Viscosity::Scalar(2.0).matrix());
        let b = stiffness(&g, &Viscosity::effective(2.0, [[0.0; 2]; 2]).matrix());
        for i in 0..12 {
            for j in 0..12 {
                assert!((a[i][j] - b[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn viscosity_validation() {
        assert!(Viscosity::Scalar(1.0).validate().is_ok());
        assert!(Viscosity::Scalar(0.0).validate().is_err());
        assert!(Viscosity::effective(1.0, [[-2.0, 0.0], [0.0, 0.0]]).validate().is_err());
        assert!(Viscosity::effective(1.0, [[0.3, 0.1], [0.1, 0.2]]).validate().is_ok());
    }
}
