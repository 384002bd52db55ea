use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::mesh::{dist, Mesh, Particle, Region};
use super::shape::InclusionShape;
use super::structured::{linspace, structured_mesh};
use crate::error::{Error, Result};

/// Triangulation of the unit cell `Y = (-1/2, 1/2)^2` conforming to the inclusion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellMesh {
    pub mesh: Mesh,
    pub shape: InclusionShape,
    /// Requested mesh size.
    pub h: f64,
    /// Number of segments along each side of the cell.
    pub n_side: usize,
    /// Grid position `(i, j)` with `0 <= i, j <= n_side` of every vertex on the cell boundary.
    pub grid_index: Vec<Option<[usize; 2]>>,
}

impl CellMesh {
    pub fn dimension(&self) -> usize {
        2
    }

    /// Area of the rigid region as meshed.
    pub fn measured_inclusion_area(&self) -> f64 {
        self.mesh.rigid_area()
    }

    pub fn has_inclusion(&self) -> bool {
        !self.mesh.particles.is_empty()
    }

    /// Coordinate of grid line `j` on either axis.
    pub fn grid_coord(&self, j: usize) -> f64 {
        grid_coord(self.n_side, j)
    }
}

fn grid_coord(n: usize, j: usize) -> f64 {
    -0.5 + j as f64 / n as f64
}

/// Number of boundary segments per cell side for a requested size `h`.
pub fn segments_per_side(h: f64) -> usize {
    2 * (1.0 / (2.0 * h) - 1e-9).ceil().max(1.0) as usize
}

/// Mesh the unit cell around `shape` with an O-grid: a graded quadrilateral ring split
/// into triangles between the inclusion and the cell boundary, and a fan inside the inclusion.
pub fn build_cell_mesh(shape: &InclusionShape, h: f64) -> Result<CellMesh> {
    if !(h > 0.0 && h < 0.5) {
        return Err(Error::InvalidInput(format!("mesh size {h} must lie in (0, 0.5)")));
    }
    shape.validate()?;
    let n = segments_per_side(h);
    let g = linspace(-0.5, 0.5, n);

    if shape.is_empty() {
        let mesh = structured_mesh(&g, &g, [0.0, 0.0]);
        let grid_index = (0..=n)
            .flat_map(|j| (0..=n).map(move |i| [i, j]))
            .map(|[i, j]| (i == 0 || j == 0 || i == n || j == n).then_some([i, j]))
            .collect();
        return Ok(CellMesh {
            mesh,
            shape: *shape,
            h,
            n_side: n,
            grid_index,
        });
    }

    let nb = 4 * n;
    // square boundary points, counter-clockwise from the corner (1/2, -1/2)
    let square: Vec<([f64; 2], [usize; 2])> = (0..nb)
        .map(|i| {
            let (side, j) = (i / n, i % n);
            let idx = match side {
                0 => [n, j],
                1 => [n - j, n],
                2 => [0, n - j],
                _ => [j, 0],
            };
            ([g[idx[0]], g[idx[1]]], idx)
        })
        .collect();
    let inner: Vec<[f64; 2]> = (0..nb)
        .map(|i| shape.boundary_point(-PI / 4.0 + 2.0 * PI * i as f64 / nb as f64))
        .collect();

    let h_in = (0..nb).map(|i| dist(inner[i], inner[(i + 1) % nb])).sum::<f64>() / nb as f64;
    let h_out = 1.0 / n as f64;
    let len = (0..nb).map(|i| dist(inner[i], square[i].0)).sum::<f64>() / nb as f64;
    let weights = radial_weights(len, h_in, h_out);
    let n_r = weights.len() - 1;

    let mut mesh = Mesh::default();
    let mut grid_index = Vec::new();
    mesh.vertices.push([0.0, 0.0]);
    grid_index.push(None);
    // layer m, column i
    let vid = |m: usize, i: usize| 1 + m * nb + (i % nb);
    for (m, &w) in weights.iter().enumerate() {
        for i in 0..nb {
            if m == n_r {
                mesh.vertices.push(square[i].0);
                grid_index.push(Some(square[i].1));
            } else {
                let (p, s) = (inner[i], square[i].0);
                mesh.vertices.push([p[0] + w * (s[0] - p[0]), p[1] + w * (s[1] - p[1])]);
                grid_index.push(None);
            }
        }
    }
    for i in 0..nb {
        mesh.triangles.push([0, vid(0, i), vid(0, i + 1)]);
        mesh.regions.push(Region::Rigid(0));
    }
    for m in 0..n_r {
        for i in 0..nb {
            let (a, b, c, d) = (vid(m, i), vid(m, i + 1), vid(m + 1, i + 1), vid(m + 1, i));
            if i % n < n / 2 {
                mesh.triangles.push([a, b, c]);
                mesh.triangles.push([a, c, d]);
            } else {
                mesh.triangles.push([a, b, d]);
                mesh.triangles.push([b, c, d]);
            }
            mesh.regions.push(Region::Fluid);
            mesh.regions.push(Region::Fluid);
        }
    }
    mesh.orient_ccw();
    mesh.particles.push(Particle {
        lattice: [0, 0],
        center: [0.0, 0.0],
        scale: 1.0,
        boundary: (0..nb).map(|i| vid(0, i)).collect(),
    });

    check_quality(&mesh, shape.volume_fraction, h)?;
    Ok(CellMesh {
        mesh,
        shape: *shape,
        h,
        n_side: n,
        grid_index,
    })
}

/// Reject meshes with degenerate triangles or an inclusion area off by more than `2 h^2`.
fn check_quality(mesh: &Mesh, phi: f64, h: f64) -> Result<()> {
    let min_area = mesh.min_triangle_area();
    if !(min_area > 1e-12 * h * h) {
        return Err(Error::MeshGenFailure(format!(
            "degenerate triangle (area {min_area:.3e}) at h = {h}"
        )));
    }
    let err = (mesh.rigid_area() - phi).abs();
    if err > 2.0 * h * h {
        return Err(Error::MeshGenFailure(format!(
            "inclusion area off by {err:.3e} at h = {h}"
        )));
    }
    Ok(())
}

/// Geometrically graded layer positions in `[0, 1]` across a ring of width `len`,
/// with first and last layer thickness near `h_in` and `h_out`.
fn radial_weights(len: f64, h_in: f64, h_out: f64) -> Vec<f64> {
    let ratio = h_out / h_in;
    let n_r = if (ratio - 1.0).abs() < 0.05 {
        (len / h_out).ceil().max(1.0) as usize
    } else {
        (len * ratio.ln() / (h_out - h_in)).round().max(1.0) as usize
    };
    if n_r == 1 {
        return vec![0.0, 1.0];
    }
    let q = ratio.powf(1.0 / (n_r - 1) as f64);
    if (q - 1.0).abs() < 1e-12 {
        return linspace(0.0, 1.0, n_r);
    }
    let total = q.powi(n_r as i32) - 1.0;
    (0..=n_r)
        .map(|m| if m == n_r { 1.0 } else { (q.powi(m as i32) - 1.0) / total })
        .collect()
}
