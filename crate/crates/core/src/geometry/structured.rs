use super::mesh::{Mesh, Region};

/// Append the triangles of the grid squares `[i0, i1) x [j0, j1)`.
///
/// `vid(i, j)` returns the vertex at grid node `(i, j)`. Each square is split along the
/// diagonal that points toward `center`'s quadrant corner, so squares touching a domain
/// corner are cut through that corner.
pub(crate) fn push_grid_squares(
    mesh: &mut Mesh,
    xs: &[f64],
    ys: &[f64],
    (i0, i1): (usize, usize),
    (j0, j1): (usize, usize),
    center: [f64; 2],
    vid: &mut impl FnMut(&mut Mesh, usize, usize) -> usize,
) {
    for j in j0..j1 {
        for i in i0..i1 {
            let cx = 0.5 * (xs[i] + xs[i + 1]) - center[0];
            let cy = 0.5 * (ys[j] + ys[j + 1]) - center[1];
            let a = vid(mesh, i, j);
            let b = vid(mesh, i + 1, j);
            let c = vid(mesh, i + 1, j + 1);
            let d = vid(mesh, i, j + 1);
            if cx * cy > 0.0 {
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
}

/// Structured triangulation of the tensor grid `xs x ys`.
pub fn structured_mesh(xs: &[f64], ys: &[f64], center: [f64; 2]) -> Mesh {
    let nx = xs.len();
    let mut mesh = Mesh::default();
    for &y in ys {
        for &x in xs {
            mesh.vertices.push([x, y]);
        }
    }
    push_grid_squares(
        &mut mesh,
        xs,
        ys,
        (0, nx - 1),
        (0, ys.len() - 1),
        center,
        &mut |_, i, j| j * nx + i,
    );
    mesh
}

/// `n + 1` equally spaced points from `a` to `b`, with exact endpoints.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|j| {
            if j == n {
                b
            } else {
                a + (b - a) * j as f64 / n as f64
            }
        })
        .collect()
}
