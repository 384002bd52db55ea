use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use super::cell_mesh::{build_cell_mesh, CellMesh};
use super::mesh::{Mesh, Particle, Region};
use super::shape::InclusionShape;
use super::structured::{linspace, push_grid_squares};
use crate::error::{Error, Result};

/// Axis-aligned box `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl BoxDomain {
    pub fn new(lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        if !(lo[0] < hi[0] && lo[1] < hi[1]) {
            return Err(Error::InvalidInput(format!("empty box {lo:?} x {hi:?}")));
        }
        Ok(BoxDomain { lo, hi })
    }

    pub fn unit_square() -> Self {
        BoxDomain {
            lo: [0.0, 0.0],
            hi: [1.0, 1.0],
        }
    }

    pub fn center(&self) -> [f64; 2] {
        [0.5 * (self.lo[0] + self.hi[0]), 0.5 * (self.lo[1] + self.hi[1])]
    }

    pub fn area(&self) -> f64 {
        (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])
    }

    pub fn diameter(&self) -> f64 {
        ((self.hi[0] - self.lo[0]).powi(2) + (self.hi[1] - self.lo[1]).powi(2)).sqrt()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|d| p[d] >= self.lo[d] && p[d] <= self.hi[d])
    }

    pub fn on_boundary(&self, p: [f64; 2], tol: f64) -> bool {
        (0..2).any(|d| (p[d] - self.lo[d]).abs() <= tol || (p[d] - self.hi[d]).abs() <= tol)
    }
}

fn to_ratio(x: f64) -> Result<Ratio<i64>> {
    Ratio::approximate_float(x)
        .ok_or_else(|| Error::InvalidInput(format!("{x} has no rational representation")))
}

/// Lattice indices `k` along one axis with `eps (k + [-1/2, 1/2])` strictly inside `(lo, hi)`.
fn axis_indices(lo: Ratio<i64>, hi: Ratio<i64>, eps: Ratio<i64>) -> Vec<i64> {
    let half = Ratio::new(1, 2);
    let k0 = (lo / eps).floor().to_integer() - 1;
    let k1 = (hi / eps).ceil().to_integer() + 1;
    (k0..=k1)
        .filter(|&k| {
            let k = Ratio::from_integer(k);
            lo < eps * (k - half) && eps * (k + half) < hi
        })
        .collect()
}

/// The index set `N^eps` in row-major order (first axis fastest), computed in exact arithmetic.
pub fn lattice_indices(domain: &BoxDomain, eps: f64) -> Result<Vec<[i64; 2]>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps = {eps} must be positive")));
    }
    let e = to_ratio(eps)?;
    let ax: Vec<Vec<i64>> = (0..2)
        .map(|d| Ok(axis_indices(to_ratio(domain.lo[d])?, to_ratio(domain.hi[d])?, e)))
        .collect::<Result<_>>()?;
    Ok(ax[1]
        .iter()
        .flat_map(|&ky| ax[0].iter().map(move |&kx| [kx, ky]))
        .collect())
}

/// Triangulation of `D` conforming to every particle `eps (k + T)`, `k` in `N^eps`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerforatedMesh {
    pub mesh: Mesh,
    pub eps: f64,
    pub domain: BoxDomain,
    /// `N^eps`; particle `p` of the mesh sits in cell `lattice[p]`.
    pub lattice: Vec<[i64; 2]>,
    /// Unscaled cell mesh stamped into every lattice cell.
    pub cell: CellMesh,
    /// Per particle, the global vertex of each cell-mesh vertex.
    pub cell_vertices: Vec<Vec<usize>>,
    /// Per particle, index of its first triangle; the cell's triangles follow in cell-mesh order.
    pub cell_triangle_start: Vec<usize>,
}

impl PerforatedMesh {
    pub fn n_particles(&self) -> usize {
        self.lattice.len()
    }

    /// Center `eps k` of lattice cell `p`.
    pub fn cell_center(&self, p: usize) -> [f64; 2] {
        let k = self.lattice[p];
        [self.eps * k[0] as f64, self.eps * k[1] as f64]
    }

    pub fn cell_triangles(&self, p: usize) -> std::ops::Range<usize> {
        let s = self.cell_triangle_start[p];
        s..s + self.cell.mesh.n_triangles()
    }

    pub fn rigid_area(&self) -> f64 {
        self.mesh.rigid_area()
    }
}

/// Build the perforated mesh from a unit-cell mesh of size `h_per_cell` scaled by `eps`.
pub fn build_perforated_mesh(
    domain: &BoxDomain,
    shape: &InclusionShape,
    eps: f64,
    h_per_cell: f64,
) -> Result<PerforatedMesh> {
    let cell = build_cell_mesh(shape, h_per_cell)?;
    perforate(domain, cell, eps)
}

/// Stamp an existing cell mesh into every lattice cell of `domain`.
pub fn perforate(domain: &BoxDomain, cell: CellMesh, eps: f64) -> Result<PerforatedMesh> {
    if eps >= domain.diameter() {
        return Err(Error::NoParticles);
    }
    let lattice = lattice_indices(domain, eps)?;
    if lattice.is_empty() {
        return Err(Error::NoParticles);
    }
    let n = cell.n_side;
    let kmin = [lattice[0][0], lattice[0][1]];
    let kmax = [lattice[lattice.len() - 1][0], lattice[lattice.len() - 1][1]];

    // global grid lines per axis, and the index where the particle block starts
    let mut axes: Vec<Vec<f64>> = Vec::new();
    let mut block_start = [0usize; 2];
    let mut block_end = [0usize; 2];
    for d in 0..2 {
        let a = eps * (kmin[d] as f64 - 0.5);
        let b = eps * (kmax[d] as f64 + 0.5);
        let spacing = eps / n as f64;
        let m_lo = ((a - domain.lo[d]) / spacing).round().max(1.0) as usize;
        let m_hi = ((domain.hi[d] - b) / spacing).round().max(1.0) as usize;
        let mut xs = linspace(domain.lo[d], a, m_lo);
        xs.pop();
        block_start[d] = xs.len();
        for k in kmin[d]..=kmax[d] {
            for j in 0..n {
                xs.push(eps * (k as f64 + cell.grid_coord(j)));
            }
        }
        block_end[d] = xs.len();
        xs.extend(linspace(b, domain.hi[d], m_hi));
        axes.push(xs);
    }
    let (xs, ys) = (&axes[0], &axes[1]);
    let center = domain.center();

    let mut mesh = Mesh::default();
    let mut grid: HashMap<(usize, usize), usize> = HashMap::new();
    let mut vid = |mesh: &mut Mesh, i: usize, j: usize| -> usize {
        *grid.entry((i, j)).or_insert_with(|| {
            mesh.vertices.push([xs[i], ys[j]]);
            mesh.vertices.len() - 1
        })
    };

    let ranges = |d: usize| {
        [
            (0, block_start[d]),
            (block_start[d], block_end[d]),
            (block_end[d], axes[d].len() - 1),
        ]
    };
    let (rx, ry) = (ranges(0), ranges(1));
    for (bj, &yr) in ry.iter().enumerate() {
        for (bi, &xr) in rx.iter().enumerate() {
            if bi == 1 && bj == 1 {
                continue;
            }
            push_grid_squares(&mut mesh, xs, ys, xr, yr, center, &mut vid);
        }
    }

    let mut cell_vertices = Vec::with_capacity(lattice.len());
    let mut cell_triangle_start = Vec::with_capacity(lattice.len());
    for (p, k) in lattice.iter().enumerate() {
        let c = [eps * k[0] as f64, eps * k[1] as f64];
        let off = [
            block_start[0] + (k[0] - kmin[0]) as usize * n,
            block_start[1] + (k[1] - kmin[1]) as usize * n,
        ];
        let map: Vec<usize> = cell
            .mesh
            .vertices
            .iter()
            .zip(&cell.grid_index)
            .map(|(x, gi)| match gi {
                Some([i, j]) => vid(&mut mesh, off[0] + i, off[1] + j),
                None => {
                    mesh.vertices.push([c[0] + eps * x[0], c[1] + eps * x[1]]);
                    mesh.vertices.len() - 1
                }
            })
            .collect();
        cell_triangle_start.push(mesh.triangles.len());
        for (t, tri) in cell.mesh.triangles.iter().enumerate() {
            mesh.triangles.push([map[tri[0]], map[tri[1]], map[tri[2]]]);
            mesh.regions.push(match cell.mesh.regions[t] {
                Region::Fluid => Region::Fluid,
                Region::Rigid(_) => Region::Rigid(p),
            });
        }
        if let Some(part) = cell.mesh.particles.first() {
            mesh.particles.push(Particle {
                lattice: *k,
                center: [c[0] + eps * part.center[0], c[1] + eps * part.center[1]],
                scale: eps,
                boundary: part.boundary.iter().map(|&v| map[v]).collect(),
            });
        }
        cell_vertices.push(map);
    }
    mesh.orient_ccw();

    Ok(PerforatedMesh {
        mesh,
        eps,
        domain: *domain,
        lattice,
        cell,
        cell_vertices,
        cell_triangle_start,
    })
}
