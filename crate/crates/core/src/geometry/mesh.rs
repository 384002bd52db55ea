use serde::{Deserialize, Serialize};

/// Region tag of a simplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Fluid,
    /// Part of particle with the given index into [`Mesh::particles`].
    Rigid(usize),
}

impl Region {
    pub fn is_fluid(self) -> bool {
        matches!(self, Region::Fluid)
    }

    pub fn particle(self) -> Option<usize> {
        match self {
            Region::Rigid(p) => Some(p),
            Region::Fluid => None,
        }
    }
}

/// One rigid inclusion of a mesh.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Particle {
    /// Lattice index `k` (zero for the unit cell).
    pub lattice: [i64; 2],
    /// Center of mass `x_k`.
    pub center: [f64; 2],
    /// Length scale relative to the unit cell (`1` in Y, `eps` in the perforated mesh).
    pub scale: f64,
    /// Closed counter-clockwise loop of boundary vertices (first vertex not repeated).
    pub boundary: Vec<usize>,
}

/// Straight-sided triangle mesh with region tags.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub regions: Vec<Region>,
    pub particles: Vec<Particle>,
}

/// One boundary segment of a particle, with arclength fractions of its endpoints.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryFacet {
    pub particle: usize,
    pub vertices: [usize; 2],
    pub a: [f64; 2],
    pub b: [f64; 2],
    /// Arclength fraction (in `[0,1)`) at `a` and `b` measured along the loop.
    pub sigma: [f64; 2],
}

impl BoundaryFacet {
    pub fn length(&self) -> f64 {
        dist(self.a, self.b)
    }
}

pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_coords(t);
        signed_area(a, b, c)
    }

    /// Flip any clockwise triangle so all signed areas are positive.
    pub fn orient_ccw(&mut self) {
        for t in 0..self.triangles.len() {
            if self.triangle_area(t) < 0.0 {
                self.triangles[t].swap(1, 2);
            }
        }
    }

    pub fn min_triangle_area(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| self.triangle_area(t))
            .fold(f64::INFINITY, f64::min)
    }

    /// Longest edge over all triangles.
    pub fn max_edge_length(&self) -> f64 {
        let mut h: f64 = 0.0;
        for t in 0..self.n_triangles() {
            let [a, b, c] = self.triangle_coords(t);
            h = h.max(dist(a, b)).max(dist(b, c)).max(dist(c, a));
        }
        h
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn region_area(&self, pred: impl Fn(Region) -> bool) -> f64 {
        (0..self.n_triangles())
            .filter(|&t| pred(self.regions[t]))
            .map(|t| self.triangle_area(t))
            .sum()
    }

    pub fn rigid_area(&self) -> f64 {
        self.region_area(|r| !r.is_fluid())
    }

    pub fn n_rigid_triangles(&self) -> usize {
        self.regions.iter().filter(|r| !r.is_fluid()).count()
    }

    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        (lo, hi)
    }

    /// Boundary segments of particle `p`, in loop order.
    pub fn particle_facets(&self, p: usize) -> Vec<BoundaryFacet> {
        let loop_ = &self.particles[p].boundary;
        let n = loop_.len();
        let lengths: Vec<f64> = (0..n)
            .map(|i| dist(self.vertices[loop_[i]], self.vertices[loop_[(i + 1) % n]]))
            .collect();
        let total: f64 = lengths.iter().sum();
        let mut s = 0.0;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let a = loop_[i];
            let b = loop_[(i + 1) % n];
            let s1 = s + lengths[i];
            out.push(BoundaryFacet {
                particle: p,
                vertices: [a, b],
                a: self.vertices[a],
                b: self.vertices[b],
                sigma: [s / total, s1 / total],
            });
            s = s1;
        }
        out
    }

    pub fn particle_perimeter(&self, p: usize) -> f64 {
        self.particle_facets(p).iter().map(|f| f.length()).sum()
    }

    /// Vertices touched by at least one triangle of particle `p`.
    pub fn particle_vertices(&self, p: usize) -> Vec<usize> {
        let mut seen = vec![false; self.n_vertices()];
        let mut out = Vec::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            if self.regions[t] == Region::Rigid(p) {
                for &v in tri {
                    if !seen[v] {
                        seen[v] = true;
                        out.push(v);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// For each vertex, whether any adjacent triangle is fluid.
    pub fn fluid_vertex_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_vertices()];
        for (t, tri) in self.triangles.iter().enumerate() {
            if self.regions[t].is_fluid() {
                for &v in tri {
                    mask[v] = true;
                }
            }
        }
        mask
    }

    /// Apply `f` to every vertex position; used for rotated/reflected copies in symmetry tests.
    pub fn map_vertices(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Mesh {
        let mut m = self.clone();
        for v in &mut m.vertices {
            *v = f(*v);
        }
        for p in &mut m.particles {
            p.center = f(p.center);
        }
        m.orient_ccw();
        for p in 0..m.particles.len() {
            let loop_ = &m.particles[p].boundary;
            let area: f64 = (0..loop_.len())
                .map(|i| {
                    let a = m.vertices[loop_[i]];
                    let b = m.vertices[loop_[(i + 1) % loop_.len()]];
                    a[0] * b[1] - b[0] * a[1]
                })
                .sum();
            if area < 0.0 {
                m.particles[p].boundary.reverse();
            }
        }
        m
    }
}
