use super::mesh::Mesh;
use crate::error::{Error, Result};

/// Identification of vertices on opposite faces of a periodic box.
#[derive(Debug, Clone)]
pub struct PeriodicMap {
    /// Representative vertex of each vertex; `master[v] == v` for masters.
    pub master: Vec<usize>,
    /// Per axis, the lower-face partner of each upper-face vertex.
    pub partner: [Vec<Option<usize>>; 2],
    /// Box bounds the pairing was built for.
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    /// Number of zero-mean velocity constraints (one per component).
    pub mean_constraints: usize,
}

impl PeriodicMap {
    pub fn is_master(&self, v: usize) -> bool {
        self.master[v] == v
    }

    /// Slaves mapped to `m`.
    pub fn slaves_of(&self, m: usize) -> Vec<usize> {
        (0..self.master.len())
            .filter(|&v| v != m && self.master[v] == m)
            .collect()
    }

    pub fn n_masters(&self) -> usize {
        (0..self.master.len()).filter(|&v| self.is_master(v)).count()
    }
}

const FACE_TOL: f64 = 1e-10;
const MATCH_TOL: f64 = 1e-12;

/// Pair the vertices of the faces `x = lo` / `x = hi` and `y = lo` / `y = hi` of the mesh's
/// bounding box; slaves live on the upper faces and map to the lower ones.
pub fn periodic_dof_map(mesh: &Mesh) -> Result<PeriodicMap> {
    let (lo, hi) = mesh.bounding_box();
    let nv = mesh.n_vertices();
    let mut partner: [Vec<Option<usize>>; 2] = [vec![None; nv], vec![None; nv]];
    for d in 0..2 {
        let t = 1 - d;
        let face = |x: f64| {
            let mut v: Vec<usize> = (0..nv)
                .filter(|&i| (mesh.vertices[i][d] - x).abs() <= FACE_TOL)
                .collect();
            v.sort_by(|&a, &b| mesh.vertices[a][t].total_cmp(&mesh.vertices[b][t]));
            v
        };
        let (low, high) = (face(lo[d]), face(hi[d]));
        if low.len() != high.len() {
            return Err(Error::NonMatchingFaces(format!(
                "axis {d}: {} vertices on the lower face, {} on the upper",
                low.len(),
                high.len()
            )));
        }
        for (&a, &b) in low.iter().zip(&high) {
            let mismatch = (mesh.vertices[a][t] - mesh.vertices[b][t]).abs();
            if mismatch > MATCH_TOL {
                return Err(Error::NonMatchingFaces(format!(
                    "axis {d}: vertices {a} and {b} differ by {mismatch:.3e}"
                )));
            }
            partner[d][b] = Some(a);
        }
    }
    let master = (0..nv)
        .map(|mut v| {
            for p in &partner {
                if let Some(m) = p[v] {
                    v = m;
                }
            }
            v
        })
        .collect();
    Ok(PeriodicMap {
        master,
        partner,
        lo,
        hi,
        mean_constraints: 2,
    })
}
