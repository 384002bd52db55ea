use super::dofmap::DofMap;
use super::element::{divergence, load, stiffness, Viscosity};
use super::space::{ElementGeometry, P2Space};
use crate::error::Result;
use crate::geometry::Mesh;
use crate::sparse::CsrMatrix;

/// Constrained saddle-point system `[K B^T; B 0] q = rhs` in reduced unknowns.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub n_vel: usize,
    pub n_pres: usize,
}

impl SaddleSystem {
    pub fn n(&self) -> usize {
        self.n_vel + self.n_pres
    }

    /// Velocity block `K`.
    pub fn velocity_block(&self) -> CsrMatrix {
        self.block(0..self.n_vel, 0..self.n_vel)
    }

    /// Divergence block `B` (pressure rows, velocity columns).
    pub fn divergence_block(&self) -> CsrMatrix {
        self.block(self.n_vel..self.n(), 0..self.n_vel)
    }

    fn block(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> CsrMatrix {
        let m = &self.matrix;
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for r in rows.clone() {
            for k in m.indptr[r]..m.indptr[r + 1] {
                let c = m.indices[k];
                if cols.contains(&c) {
                    indices.push(c - cols.start);
                    values.push(m.values[k]);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            nrows: rows.len(),
            ncols: cols.len(),
            indptr,
            indices,
            values,
        }
    }
}

/// Element contribution in reduced unknowns: dense `mat` over `dofs` (row-major) and `rhs`.
#[derive(Debug, Clone, Default)]
pub struct LocalSystem {
    pub dofs: Vec<usize>,
    pub mat: Vec<f64>,
    pub rhs: Vec<f64>,
}

/// Element-by-element assembly of a Stokes problem under a [`DofMap`].
#[derive(Clone, Copy)]
pub struct Assembler<'a> {
    pub mesh: &'a Mesh,
    pub space: &'a P2Space,
    pub dofs: &'a DofMap,
    pub viscosity: Viscosity,
    pub body_force: Option<&'a dyn Fn([f64; 2]) -> [f64; 2]>,
    /// Nodal field `w`; the divergence constraint becomes `B u = B w`.
    pub div_target: Option<&'a [[f64; 2]]>,
    pub load_degree: usize,
}

impl<'a> Assembler<'a> {
    pub fn new(mesh: &'a Mesh, space: &'a P2Space, dofs: &'a DofMap, viscosity: Viscosity) -> Self {
        Assembler {
            mesh,
            space,
            dofs,
            viscosity,
            body_force: None,
            div_target: None,
            load_degree: 6,
        }
    }

    pub fn with_force(mut self, f: &'a dyn Fn([f64; 2]) -> [f64; 2]) -> Self {
        self.body_force = Some(f);
        self
    }

    /// Full local matrix (15 x 15: 12 velocity, 3 pressure) and load of triangle `t`.
    pub fn element(&self, t: usize) -> ([[f64; 15]; 15], [f64; 15]) {
        let g = ElementGeometry::new(self.mesh.triangle_coords(t));
        let region = self.mesh.regions[t];
        let mut a = [[0.0; 15]; 15];
        let mut f = [0.0; 15];
        if self.dofs.stiffness_on(region) {
            let k = stiffness(&g, &self.viscosity.matrix());
            for i in 0..12 {
                a[i][..12].copy_from_slice(&k[i]);
            }
        }
        if self.dofs.divergence_on(region) {
            let b = divergence(&g);
            for k in 0..3 {
                for j in 0..12 {
                    a[12 + k][j] = b[k][j];
                    a[j][12 + k] = b[k][j];
                }
            }
            if let Some(w) = self.div_target {
                let nodes = &self.space.tri_nodes[t];
                for k in 0..3 {
                    f[12 + k] = (0..6)
                        .map(|n| b[k][2 * n] * w[nodes[n]][0] + b[k][2 * n + 1] * w[nodes[n]][1])
                        .sum();
                }
            }
        }
        if let Some(force) = self.body_force {
            let l = load(&g, force, self.load_degree);
            f[..12].copy_from_slice(&l);
        }
        (a, f)
    }

    /// Reduced contribution of triangle `t`.
    pub fn local(&self, t: usize) -> LocalSystem {
        let (a, f) = self.element(t);
        self.reduce(t, &a, &f)
    }

    /// Apply the constraint map to a local 15 x 15 system of triangle `t`.
    pub fn reduce(&self, t: usize, a: &[[f64; 15]; 15], f: &[f64; 15]) -> LocalSystem {
        let nodes = &self.space.tri_nodes[t];
        let tri = &self.mesh.triangles[t];
        // (local row, reduced index, coefficient)
        let mut terms: Vec<(usize, usize, f64)> = Vec::with_capacity(30);
        let mut g = [0.0; 15];
        for (a_loc, &n) in nodes.iter().enumerate() {
            for c in 0..2 {
                let s = 2 * n + c;
                g[2 * a_loc + c] = self.dofs.offset[s];
                terms.extend(self.dofs.terms(s).map(|(i, w)| (2 * a_loc + c, i, w)));
            }
        }
        for (k, &v) in tri.iter().enumerate() {
            if let Some(p) = self.dofs.pressure[v] {
                terms.push((12 + k, self.dofs.n_vel + p, 1.0));
            }
        }
        let mut dofs: Vec<usize> = terms.iter().map(|&(_, i, _)| i).collect();
        dofs.sort_unstable();
        dofs.dedup();
        let m = dofs.len();
        // T: 15 x m
        let mut tm = vec![[0.0; 15]; m];
        for &(l, i, w) in &terms {
            let j = dofs.binary_search(&i).expect("present");
            tm[j][l] += w;
        }
        let has_offset = g.iter().any(|&x| x != 0.0);
        let mut resid = *f;
        if has_offset {
            for (i, r) in resid.iter_mut().enumerate() {
                *r -= (0..15).map(|j| a[i][j] * g[j]).sum::<f64>();
            }
        }
        // A T (15 x m), then T^T A T
        let mut at = vec![[0.0; 15]; m];
        for j in 0..m {
            for (i, ai) in a.iter().enumerate() {
                at[j][i] = (0..15).filter(|&l| tm[j][l] != 0.0).map(|l| ai[l] * tm[j][l]).sum();
            }
        }
        let mut mat = vec![0.0; m * m];
        let mut rhs = vec![0.0; m];
        for i in 0..m {
            rhs[i] = (0..15).map(|l| tm[i][l] * resid[l]).sum();
            for j in 0..m {
                mat[i * m + j] = (0..15).map(|l| tm[i][l] * at[j][l]).sum();
            }
        }
        LocalSystem { dofs, mat, rhs }
    }

    /// Reduced unknowns touched by triangle `t`, sorted.
    fn element_dofs(&self, t: usize, out: &mut Vec<usize>) {
        out.clear();
        for &n in &self.space.tri_nodes[t] {
            for c in 0..2 {
                out.extend(self.dofs.terms(2 * n + c).map(|(i, _)| i));
            }
        }
        for &v in &self.mesh.triangles[t] {
            if let Some(p) = self.dofs.pressure[v] {
                out.push(self.dofs.n_vel + p);
            }
        }
        out.sort_unstable();
        out.dedup();
    }

    /// Assemble over the given triangles.
    ///
    /// Two passes: the first sizes every row, the second scatters element entries into
    /// preallocated row slots, which are then sorted and summed in place.
    pub fn assemble_on(&self, triangles: impl Iterator<Item = usize> + Clone) -> SaddleSystem {
        let n = self.dofs.n();
        let mut start = vec![0usize; n + 1];
        let mut buf = Vec::with_capacity(32);
        for t in triangles.clone() {
            self.element_dofs(t, &mut buf);
            for &r in &buf {
                start[r + 1] += buf.len();
            }
        }
        for i in 0..n {
            start[i + 1] += start[i];
        }
        let total = start[n];
        let mut cols = vec![0u32; total];
        let mut vals = vec![0.0f64; total];
        let mut next = start.clone();
        let mut rhs = vec![0.0; n];
        for t in triangles {
            let loc = self.local(t);
            let m = loc.dofs.len();
            for i in 0..m {
                let r = loc.dofs[i];
                rhs[r] += loc.rhs[i];
                let at = next[r];
                for j in 0..m {
                    cols[at + j] = loc.dofs[j] as u32;
                    vals[at + j] = loc.mat[i * m + j];
                }
                next[r] += m;
            }
        }
        drop(next);
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut write = 0usize;
        let mut row: Vec<(u32, f64)> = Vec::new();
        indptr.push(0);
        for r in 0..n {
            row.clear();
            row.extend((start[r]..start[r + 1]).map(|k| (cols[k], vals[k])));
            row.sort_by_key(|e| e.0);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                let mut s = 0.0;
                while i < row.len() && row[i].0 == c {
                    s += row[i].1;
                    i += 1;
                }
                if s != 0.0 {
                    indices.push(c as usize);
                    vals[write] = s;
                    write += 1;
                }
            }
            indptr.push(write);
        }
        drop(cols);
        vals.truncate(write);
        vals.shrink_to_fit();
        SaddleSystem {
            matrix: CsrMatrix {
                nrows: n,
                ncols: n,
                indptr,
                indices,
                values: vals,
            },
            rhs,
            n_vel: self.dofs.n_vel,
            n_pres: self.dofs.n_pres,
        }
    }

    pub fn assemble(&self) -> Result<SaddleSystem> {
        self.viscosity.validate()?;
        Ok(self.assemble_on(0..self.mesh.n_triangles()))
    }

    /// Reduced right-hand side only.
    pub fn rhs(&self) -> Vec<f64> {
        let mut rhs = vec![0.0; self.dofs.n()];
        for t in 0..self.mesh.n_triangles() {
            let loc = self.local(t);
            for (i, &d) in loc.dofs.iter().enumerate() {
                rhs[d] += loc.rhs[i];
            }
        }
        rhs
    }

    /// Matrix-free product with the reduced matrix.
    pub fn apply(&self, q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dofs.n()];
        for t in 0..self.mesh.n_triangles() {
            let loc = self.local(t);
            let m = loc.dofs.len();
            for i in 0..m {
                out[loc.dofs[i]] += (0..m).map(|j| loc.mat[i * m + j] * q[loc.dofs[j]]).sum::<f64>();
            }
        }
        out
    }
}
