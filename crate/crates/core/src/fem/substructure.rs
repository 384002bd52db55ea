//! Static condensation of the identical lattice cells of a perforated mesh.
//!
//! Every cell of a perforated mesh is a translated copy of the same cell mesh, so the
//! cell-interior block of the reduced matrix is the same for all cells. It is factored
//! once; the global solve then only involves cell-boundary, particle and margin unknowns.

use faer::Mat;

use super::assembly::Assembler;
use super::dofmap::{ConstraintSpec, DofMap};
use super::element::Viscosity;
use super::solver::DirectSolver;
use super::space::P2Space;
use crate::error::{Error, Result};
use crate::geometry::PerforatedMesh;
use crate::sparse::TripletBuilder;

/// Map from template P2 nodes to global P2 nodes for every cell.
pub fn cell_node_maps(pm: &PerforatedMesh, template: &P2Space, space: &P2Space) -> Result<Vec<Vec<usize>>> {
    pm.cell_vertices
        .iter()
        .map(|vmap| {
            (0..template.n_nodes())
                .map(|n| {
                    let [a, b] = template.node_vertices(n);
                    if a == b {
                        Ok(vmap[a])
                    } else {
                        space.edge_node(vmap[a], vmap[b]).ok_or_else(|| {
                            Error::MeshGenFailure("stamped cell edge missing from the global mesh".into())
                        })
                    }
                })
                .collect()
        })
        .collect()
}

/// Cell mesh scaled to the lattice spacing and centered at the origin.
pub fn scaled_template(pm: &PerforatedMesh) -> crate::geometry::Mesh {
    let e = pm.eps;
    let mut m = pm.cell.mesh.map_vertices(|x| [e * x[0], e * x[1]]);
    for p in &mut m.particles {
        p.scale = e;
    }
    m
}

pub struct CellCondensation {
    interior: Vec<usize>,
    boundary: Vec<usize>,
    lu_ii: DirectSolver,
    /// `A_II^{-1} A_IB`, column-major `n_I x n_B`.
    x: Mat<f64>,
    /// Per cell, global reduced index of every template reduced unknown.
    cell_map: Vec<Vec<usize>>,
    gamma: Vec<usize>,
    gamma_index: Vec<usize>,
    lu_gamma: DirectSolver,
}

const NOT_GAMMA: usize = usize::MAX;

impl CellCondensation {
    pub fn new(pm: &PerforatedMesh, space: &P2Space, dofs: &DofMap, viscosity: Viscosity) -> Result<Self> {
        let tmesh = scaled_template(pm);
        let tspace = P2Space::new(&tmesh);
        let tspec = ConstraintSpec {
            rigid: dofs.rigid,
            pressure_nodes: dofs.pressure_nodes,
            divergence_elements: dofs.divergence_elements,
            ..Default::default()
        };
        let tdofs = DofMap::build(&tmesh, &tspace, &tspec)?;
        let nloc = tdofs.n();
        let node_maps = cell_node_maps(pm, &tspace, space)?;

        // template unknown classes
        let half = 0.5 * pm.eps * (1.0 - 1e-9);
        let on_cell_boundary = |x: [f64; 2]| x[0].abs().max(x[1].abs()) >= half;
        let mut is_interior = vec![true; nloc];
        for r in &tdofs.rigid_dofs {
            r.iter().for_each(|&i| is_interior[i] = false);
        }
        for n in 0..tspace.n_nodes() {
            if on_cell_boundary(tspace.coords[n]) {
                for c in 0..2 {
                    tdofs.terms(2 * n + c).for_each(|(i, _)| is_interior[i] = false);
                }
            }
        }
        for v in 0..tspace.n_vertices {
            if let Some(p) = tdofs.pressure[v] {
                if on_cell_boundary(tspace.coords[v]) {
                    is_interior[tdofs.n_vel + p] = false;
                }
            }
        }

        // template unknown -> global unknown, per cell
        let mut cell_map = Vec::with_capacity(pm.n_particles());
        for (p, nmap) in node_maps.iter().enumerate() {
            let mut map = vec![usize::MAX; nloc];
            if let Some(r) = tdofs.rigid_dofs.first() {
                for k in 0..3 {
                    map[r[k]] = dofs.rigid_dofs[p][k];
                }
            }
            for n in 0..tspace.n_nodes() {
                if tdofs.node_particle[n].is_some() {
                    continue;
                }
                for c in 0..2 {
                    let mut lt = tdofs.terms(2 * n + c);
                    let mut gt = dofs.terms(2 * nmap[n] + c);
                    if let (Some((li, _)), Some((gi, _))) = (lt.next(), gt.next()) {
                        map[li] = gi;
                    }
                }
            }
            for v in 0..tspace.n_vertices {
                if let (Some(lp), Some(gp)) = (tdofs.pressure[v], dofs.pressure[nmap[v]]) {
                    map[tdofs.n_vel + lp] = dofs.n_vel + gp;
                }
            }
            if map.contains(&usize::MAX) {
                return Err(Error::InvalidInput(
                    "cell unknowns are constrained differently from the template".into(),
                ));
            }
            cell_map.push(map);
        }

        let interior: Vec<usize> = (0..nloc).filter(|&i| is_interior[i]).collect();
        let boundary: Vec<usize> = (0..nloc).filter(|&i| !is_interior[i]).collect();
        let (ni, nb) = (interior.len(), boundary.len());
        let mut pos = vec![(false, 0usize); nloc];
        interior.iter().enumerate().for_each(|(k, &i)| pos[i] = (true, k));
        boundary.iter().enumerate().for_each(|(k, &i)| pos[i] = (false, k));

        let local = Assembler::new(&tmesh, &tspace, &tdofs, viscosity).assemble()?;
        let a = &local.matrix;
        let mut tii = TripletBuilder::new(ni, ni);
        let mut aib = Mat::<f64>::zeros(ni, nb);
        let mut abb = Mat::<f64>::zeros(nb, nb);
        for r in 0..nloc {
            for k in a.indptr[r]..a.indptr[r + 1] {
                let (c, v) = (a.indices[k], a.values[k]);
                match (pos[r], pos[c]) {
                    ((true, i), (true, j)) => tii.push(i, j, v),
                    ((true, i), (false, j)) => aib[(i, j)] += v,
                    ((false, i), (false, j)) => abb[(i, j)] += v,
                    _ => {}
                }
            }
        }
        let lu_ii = DirectSolver::factor(&tii.into_csr())?;
        let mut x = aib.clone();
        lu_ii.solve_many(&mut x);
        // S = A_BB - A_IB^T X
        let s = &abb - aib.transpose() * &x;

        // interface numbering
        let mut interior_global = vec![false; dofs.n()];
        for map in &cell_map {
            interior.iter().for_each(|&i| interior_global[map[i]] = true);
        }
        let mut gamma_index = vec![NOT_GAMMA; dofs.n()];
        let mut gamma = Vec::new();
        for g in 0..dofs.n() {
            if !interior_global[g] {
                gamma_index[g] = gamma.len();
                gamma.push(g);
            }
        }
        let ng = gamma.len();
        log::debug!(
            "condensation: {} cells, {ni} interior / {nb} boundary per cell, interface {ng} of {}",
            cell_map.len(),
            dofs.n()
        );

        let mut in_cell = vec![false; pm.mesh.n_triangles()];
        for p in 0..pm.n_particles() {
            pm.cell_triangles(p).for_each(|t| in_cell[t] = true);
        }
        let asm = Assembler::new(&pm.mesh, space, dofs, viscosity);
        let mut trip = TripletBuilder::new(ng, ng);
        for t in (0..pm.mesh.n_triangles()).filter(|&t| !in_cell[t]) {
            let loc = asm.local(t);
            let m = loc.dofs.len();
            for i in 0..m {
                for j in 0..m {
                    let v = loc.mat[i * m + j];
                    if v != 0.0 {
                        trip.push(gamma_index[loc.dofs[i]], gamma_index[loc.dofs[j]], v);
                    }
                }
            }
        }
        for map in &cell_map {
            for (bi, &li) in boundary.iter().enumerate() {
                let gi = gamma_index[map[li]];
                for (bj, &lj) in boundary.iter().enumerate() {
                    let v = s[(bi, bj)];
                    if v != 0.0 {
                        trip.push(gi, gamma_index[map[lj]], v);
                    }
                }
            }
        }
        let gm = trip.into_csr();
        let lu_gamma = DirectSolver::factor(&gm)?;
        Ok(CellCondensation {
            interior,
            boundary,
            lu_ii,
            x,
            cell_map,
            gamma,
            gamma_index,
            lu_gamma,
        })
    }

    pub fn interface_size(&self) -> usize {
        self.gamma.len()
    }

    /// Solve the reduced system for the global right-hand side `b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let ni = self.interior.len();
        let nb = self.boundary.len();
        let mut r: Vec<f64> = self.gamma.iter().map(|&g| b[g]).collect();
        let mut bi_all = Mat::<f64>::zeros(ni, self.cell_map.len());
        for (p, map) in self.cell_map.iter().enumerate() {
            for (k, &li) in self.interior.iter().enumerate() {
                bi_all[(k, p)] = b[map[li]];
            }
        }
        let xt_b = self.x.transpose() * &bi_all;
        for (p, map) in self.cell_map.iter().enumerate() {
            for (k, &lb) in self.boundary.iter().enumerate() {
                r[self.gamma_index[map[lb]]] -= xt_b[(k, p)];
            }
        }
        let qg = self.lu_gamma.solve(&r);
        let mut q = vec![0.0; b.len()];
        for (k, &g) in self.gamma.iter().enumerate() {
            q[g] = qg[k];
        }
        // interior: A_II^{-1} b_I - X q_B
        self.lu_ii.solve_many(&mut bi_all);
        let mut qb_all = Mat::<f64>::zeros(nb, self.cell_map.len());
        for (p, map) in self.cell_map.iter().enumerate() {
            for (k, &lb) in self.boundary.iter().enumerate() {
                qb_all[(k, p)] = q[map[lb]];
            }
        }
        let xq = &self.x * &qb_all;
        for (p, map) in self.cell_map.iter().enumerate() {
            for (k, &li) in self.interior.iter().enumerate() {
                q[map[li]] = bi_all[(k, p)] - xq[(k, p)];
            }
        }
        q
    }
}
