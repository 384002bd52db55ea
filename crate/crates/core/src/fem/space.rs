use std::collections::HashMap;

use crate::geometry::Mesh;

/// Continuous quadratic Lagrange space on a triangle mesh: one node per vertex
/// and one per edge midpoint. Node `n_vertices + e` is the midpoint of edge `e`.
#[derive(Debug, Clone)]
pub struct P2Space {
    pub n_vertices: usize,
    pub edges: Vec<[usize; 2]>,
    /// Per triangle: vertices 0..3 then edges (0,1), (1,2), (2,0).
    pub tri_nodes: Vec<[usize; 6]>,
    pub coords: Vec<[f64; 2]>,
    edge_lookup: HashMap<(usize, usize), usize>,
}

impl P2Space {
    pub fn new(mesh: &Mesh) -> Self {
        let nv = mesh.n_vertices();
        let mut edges = Vec::new();
        let mut edge_lookup = HashMap::with_capacity(mesh.n_triangles() * 3 / 2 + 16);
        let mut tri_nodes = Vec::with_capacity(mesh.n_triangles());
        for tri in &mesh.triangles {
            let mut nodes = [tri[0], tri[1], tri[2], 0, 0, 0];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let e = *edge_lookup.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edges.len() - 1
                });
                nodes[3 + k] = nv + e;
            }
            tri_nodes.push(nodes);
        }
        let mut coords = mesh.vertices.clone();
        for &[a, b] in &edges {
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            coords.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        }
        P2Space {
            n_vertices: nv,
            edges,
            tri_nodes,
            coords,
            edge_lookup,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    /// Node at the midpoint of the edge between vertices `a` and `b`.
    pub fn edge_node(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup
            .get(&(a.min(b), a.max(b)))
            .map(|&e| self.n_vertices + e)
    }

    /// Endpoints of node `n`: `[v, v]` for a vertex, the edge's vertices otherwise.
    pub fn node_vertices(&self, n: usize) -> [usize; 2] {
        if n < self.n_vertices {
            [n, n]
        } else {
            self.edges[n - self.n_vertices]
        }
    }

    pub fn is_vertex(&self, n: usize) -> bool {
        n < self.n_vertices
    }
}

/// Affine triangle geometry: area and gradients of the barycentric coordinates.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub area: f64,
    pub grad_lambda: [[f64; 2]; 3],
    pub vertices: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(v: [[f64; 2]; 3]) -> Self {
        let [a, b, c] = v;
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let inv = 1.0 / det;
        let g1 = [(b[1] - c[1]) * inv, (c[0] - b[0]) * inv];
        let g2 = [(c[1] - a[1]) * inv, (a[0] - c[0]) * inv];
        let g3 = [(a[1] - b[1]) * inv, (b[0] - a[0]) * inv];
        ElementGeometry {
            area: 0.5 * det,
            grad_lambda: [g1, g2, g3],
            vertices: v,
        }
    }

    pub fn point(&self, l: &[f64; 3]) -> [f64; 2] {
        let v = &self.vertices;
        [
            l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
            l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
        ]
    }
}

pub const EDGE_PAIRS: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

/// Values of the six quadratic basis functions at barycentric point `l`.
pub fn p2_values(l: &[f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

/// Gradients of the quadratic basis at `l`.
pub fn p2_gradients(g: &ElementGeometry, l: &[f64; 3]) -> [[f64; 2]; 6] {
    let gl = &g.grad_lambda;
    let mut out = [[0.0; 2]; 6];
    for i in 0..3 {
        let s = 4.0 * l[i] - 1.0;
        out[i] = [s * gl[i][0], s * gl[i][1]];
    }
    for (k, &[i, j]) in EDGE_PAIRS.iter().enumerate() {
        out[3 + k] = [
            4.0 * (l[i] * gl[j][0] + l[j] * gl[i][0]),
            4.0 * (l[i] * gl[j][1] + l[j] * gl[i][1]),
        ];
    }
    out
}

/// Constant Hessians of the quadratic basis.
pub fn p2_hessians(g: &ElementGeometry) -> [[[f64; 2]; 2]; 6] {
    let gl = &g.grad_lambda;
    let outer = |a: [f64; 2], b: [f64; 2]| [[a[0] * b[0], a[0] * b[1]], [a[1] * b[0], a[1] * b[1]]];
    let mut out = [[[0.0; 2]; 2]; 6];
    for i in 0..3 {
        let o = outer(gl[i], gl[i]);
        for r in 0..2 {
            for c in 0..2 {
                out[i][r][c] = 4.0 * o[r][c];
            }
        }
    }
    for (k, &[i, j]) in EDGE_PAIRS.iter().enumerate() {
        let (a, b) = (outer(gl[i], gl[j]), outer(gl[j], gl[i]));
        for r in 0..2 {
            for c in 0..2 {
                out[3 + k][r][c] = 4.0 * (a[r][c] + b[r][c]);
            }
        }
    }
    out
}
