use super::mesh::Mesh;

/// Bucket grid over a mesh for point-in-triangle queries.
#[derive(Debug, Clone)]
pub struct PointLocator {
    lo: [f64; 2],
    cell: [f64; 2],
    dims: [usize; 2],
    start: Vec<usize>,
    items: Vec<usize>,
}

impl PointLocator {
    pub fn new(mesh: &Mesh) -> Self {
        let (lo, hi) = mesh.bounding_box();
        let nt = mesh.n_triangles().max(1);
        let side = ((nt as f64).sqrt().ceil() as usize).max(1);
        let dims = [side, side];
        let cell = [
            ((hi[0] - lo[0]) / side as f64).max(f64::MIN_POSITIVE),
            ((hi[1] - lo[1]) / side as f64).max(f64::MIN_POSITIVE),
        ];
        let mut loc = PointLocator {
            lo,
            cell,
            dims,
            start: Vec::new(),
            items: Vec::new(),
        };
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); side * side];
        for t in 0..mesh.n_triangles() {
            let c = mesh.triangle_coords(t);
            let mut bl = [f64::INFINITY; 2];
            let mut bh = [f64::NEG_INFINITY; 2];
            for p in c {
                for d in 0..2 {
                    bl[d] = bl[d].min(p[d]);
                    bh[d] = bh[d].max(p[d]);
                }
            }
            let (i0, j0) = loc.bucket(bl);
            let (i1, j1) = loc.bucket(bh);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * side + i].push(t);
                }
            }
        }
        loc.start.push(0);
        for b in buckets {
            loc.items.extend(b);
            loc.start.push(loc.items.len());
        }
        loc
    }

    fn bucket(&self, p: [f64; 2]) -> (usize, usize) {
        let f = |d: usize| {
            let x = ((p[d] - self.lo[d]) / self.cell[d]).floor();
            (x.max(0.0) as usize).min(self.dims[d] - 1)
        };
        (f(0), f(1))
    }

    /// Triangle containing `p` and its barycentric coordinates; points on shared edges
    /// resolve to one of the adjacent triangles. `None` outside the mesh (beyond `1e-10`).
    pub fn locate(&self, mesh: &Mesh, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let (i, j) = self.bucket(p);
        let b = j * self.dims[0] + i;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.items[self.start[b]..self.start[b + 1]] {
            let l = barycentric(mesh.triangle_coords(t), p);
            let m = l[0].min(l[1]).min(l[2]);
            if m >= 0.0 {
                return Some((t, l));
            }
            if best.is_none_or(|(_, _, bm)| m > bm) {
                best = Some((t, l, m));
            }
        }
        match best {
            Some((t, l, m)) if m > -1e-10 => Some((t, l)),
            _ => None,
        }
    }
}

pub fn barycentric(c: [[f64; 2]; 3], p: [f64; 2]) -> [f64; 3] {
    let [a, b, cc] = c;
    let det = (b[0] - a[0]) * (cc[1] - a[1]) - (cc[0] - a[0]) * (b[1] - a[1]);
    let l1 = ((p[0] - a[0]) * (cc[1] - a[1]) - (cc[0] - a[0]) * (p[1] - a[1])) / det;
    let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
    [1.0 - l1 - l2, l1, l2]
}
