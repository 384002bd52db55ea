use crate::error::{Error, Result};
use crate::geometry::{Mesh, PeriodicMap, Region};

use super::space::P2Space;

/// How velocity nodes on rigid regions are represented.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RigidMode {
    /// Rigid regions are ordinary fluid.
    Off,
    /// Each particle moves as an unknown rigid motion.
    Free,
    /// Each particle moves as `A (x - x_p)` plus an unknown rigid motion.
    Strain([[f64; 2]; 2]),
}

/// Element or node selection for pressure and divergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Fluid,
    All,
}

/// Constraints defining the discrete velocity/pressure space.
#[derive(Clone, Copy)]
pub struct ConstraintSpec<'a> {
    pub periodic: Option<&'a PeriodicMap>,
    /// Velocity prescribed on the boundary of the mesh's bounding box.
    pub dirichlet: Option<&'a dyn Fn([f64; 2]) -> [f64; 2]>,
    pub rigid: RigidMode,
    /// Which vertices carry a pressure unknown.
    pub pressure_nodes: Part,
    /// Which elements contribute to the divergence constraint.
    pub divergence_elements: Part,
    /// Fix one pressure unknown (the constant mode) to zero.
    pub pin_pressure: bool,
    /// Fix one velocity node (the translation mode) to zero.
    pub pin_velocity: bool,
}

impl Default for ConstraintSpec<'_> {
    fn default() -> Self {
        ConstraintSpec {
            periodic: None,
            dirichlet: None,
            rigid: RigidMode::Off,
            pressure_nodes: Part::Fluid,
            divergence_elements: Part::Fluid,
            pin_pressure: false,
            pin_velocity: false,
        }
    }
}

/// Affine map from reduced unknowns `q` to nodal values: `u = T q + g`.
///
/// Reduced unknowns are ordered velocity first (`0..n_vel`), then pressure.
#[derive(Debug, Clone)]
pub struct DofMap {
    ptr: Vec<usize>,
    idx: Vec<usize>,
    coef: Vec<f64>,
    /// Affine part `g`, per velocity scalar `2 * node + component`.
    pub offset: Vec<f64>,
    /// Reduced pressure index (counted from `n_vel`) per vertex.
    pub pressure: Vec<Option<usize>>,
    pub n_vel: usize,
    pub n_pres: usize,
    /// Reduced indices `(m_x, m_y, omega)` of each particle's rigid motion.
    pub rigid_dofs: Vec<[usize; 3]>,
    pub rigid_centers: Vec<[f64; 2]>,
    /// Per node, the particle whose closed rigid region contains it.
    pub node_particle: Vec<Option<usize>>,
    pub pinned_pressure: Option<usize>,
    pub pinned_velocity: Option<usize>,
    pub rigid: RigidMode,
    pub pressure_nodes: Part,
    pub divergence_elements: Part,
    pub periodic: bool,
}

impl DofMap {
    pub fn build(mesh: &Mesh, space: &P2Space, spec: &ConstraintSpec) -> Result<Self> {
        if let (Some(_), RigidMode::Strain(a)) = (spec.periodic, spec.rigid) {
            let tr = a[0][0] + a[1][1];
            let norm = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
            if tr.abs() > 1e-12 * norm.max(1.0) {
                return Err(Error::NonTraceFreeStrain { trace: tr });
            }
        }
        let nn = space.n_nodes();
        let nv = mesh.n_vertices();

        let mut node_particle = vec![None; nn];
        let mut fluid_node = vec![false; nn];
        for (t, nodes) in space.tri_nodes.iter().enumerate() {
            match mesh.regions[t] {
                Region::Rigid(p) => nodes.iter().for_each(|&n| node_particle[n] = Some(p)),
                Region::Fluid => nodes.iter().for_each(|&n| fluid_node[n] = true),
            }
        }
        if spec.rigid == RigidMode::Off {
            node_particle.iter_mut().for_each(|p| *p = None);
        }

        let (lo, hi) = mesh.bounding_box();
        let scale = (hi[0] - lo[0]).max(hi[1] - lo[1]);
        let on_box = |p: [f64; 2]| {
            (0..2).any(|d| (p[d] - lo[d]).abs() <= 1e-12 * scale || (p[d] - hi[d]).abs() <= 1e-12 * scale)
        };

        let node_master = match spec.periodic {
            Some(map) => periodic_node_masters(space, map)?,
            None => (0..nn).collect(),
        };

        let np = mesh.particles.len();
        let mut next = 0;
        let mut rigid_dofs = Vec::with_capacity(np);
        let mut rigid_centers = Vec::with_capacity(np);
        if spec.rigid != RigidMode::Off {
            for part in &mesh.particles {
                rigid_dofs.push([next, next + 1, next + 2]);
                rigid_centers.push(part.center);
                next += 3;
            }
        }

        // free unknowns for master nodes
        let mut node_dof: Vec<Option<usize>> = vec![None; nn];
        let mut pinned_velocity = None;
        for n in 0..nn {
            if node_master[n] != n || node_particle[n].is_some() {
                continue;
            }
            if spec.dirichlet.is_some() && on_box(space.coords[n]) {
                continue;
            }
            if spec.pin_velocity && pinned_velocity.is_none() && fluid_node[n] {
                pinned_velocity = Some(n);
                continue;
            }
            node_dof[n] = Some(next);
            next += 2;
        }
        let n_vel = next;

        let mut ptr = Vec::with_capacity(2 * nn + 1);
        let mut idx = Vec::new();
        let mut coef = Vec::new();
        let mut offset = vec![0.0; 2 * nn];
        ptr.push(0);
        for n in 0..nn {
            let x = space.coords[n];
            for c in 0..2 {
                if let Some(p) = node_particle[n] {
                    let r = rigid_dofs[p];
                    let xc = [x[0] - rigid_centers[p][0], x[1] - rigid_centers[p][1]];
                    idx.push(r[c]);
                    coef.push(1.0);
                    idx.push(r[2]);
                    coef.push(if c == 0 { -xc[1] } else { xc[0] });
                    if let RigidMode::Strain(a) = spec.rigid {
                        offset[2 * n + c] = a[c][0] * xc[0] + a[c][1] * xc[1];
                    }
                } else if let Some(d) = node_dof[node_master[n]] {
                    idx.push(d + c);
                    coef.push(1.0);
                } else if let Some(g) = spec.dirichlet.filter(|_| on_box(x)) {
                    offset[2 * n + c] = g(x)[c];
                }
                ptr.push(idx.len());
            }
        }

        let vertex_master: Vec<usize> = match spec.periodic {
            Some(map) => map.master.clone(),
            None => (0..nv).collect(),
        };
        let mut has_pressure = vec![spec.pressure_nodes == Part::All; nv];
        if spec.pressure_nodes == Part::Fluid {
            for (t, tri) in mesh.triangles.iter().enumerate() {
                if mesh.regions[t].is_fluid() || spec.rigid == RigidMode::Off {
                    tri.iter().for_each(|&v| has_pressure[v] = true);
                }
            }
        }
        let mut pres_master: Vec<Option<usize>> = vec![None; nv];
        let mut n_pres = 0;
        let mut pinned_pressure = None;
        for v in 0..nv {
            if vertex_master[v] == v && has_pressure[v] {
                if spec.pin_pressure && pinned_pressure.is_none() {
                    pinned_pressure = Some(v);
                    continue;
                }
                pres_master[v] = Some(n_pres);
                n_pres += 1;
            }
        }
        let pressure = (0..nv)
            .map(|v| if has_pressure[v] { pres_master[vertex_master[v]] } else { None })
            .collect();

        Ok(DofMap {
            ptr,
            idx,
            coef,
            offset,
            pressure,
            n_vel,
            n_pres,
            rigid_dofs,
            rigid_centers,
            node_particle,
            pinned_pressure,
            pinned_velocity,
            rigid: spec.rigid,
            pressure_nodes: spec.pressure_nodes,
            divergence_elements: spec.divergence_elements,
            periodic: spec.periodic.is_some(),
        })
    }

    pub fn n(&self) -> usize {
        self.n_vel + self.n_pres
    }

    pub fn n_nodes(&self) -> usize {
        self.offset.len() / 2
    }

    /// Reduced terms `(index, coefficient)` of velocity scalar `s = 2 * node + component`.
    pub fn terms(&self, s: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.ptr[s]..self.ptr[s + 1];
        self.idx[r.clone()].iter().copied().zip(self.coef[r].iter().copied())
    }

    /// Whether an element of the given region contributes viscous dissipation.
    pub fn stiffness_on(&self, region: Region) -> bool {
        region.is_fluid() || self.rigid == RigidMode::Off
    }

    pub fn divergence_on(&self, region: Region) -> bool {
        region.is_fluid() || self.divergence_elements == Part::All
    }

    /// `T^T f` for a nodal load `f`, padded with zero pressure entries.
    pub fn restrict(&self, nodal: &[[f64; 2]]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        for (n, f) in nodal.iter().enumerate() {
            for c in 0..2 {
                if f[c] != 0.0 {
                    for (i, a) in self.terms(2 * n + c) {
                        out[i] += a * f[c];
                    }
                }
            }
        }
        out
    }

    /// Nodal velocities `T q + g`.
    pub fn expand_velocity(&self, q: &[f64]) -> Vec<[f64; 2]> {
        (0..self.n_nodes())
            .map(|n| {
                let mut u = [self.offset[2 * n], self.offset[2 * n + 1]];
                for (c, uc) in u.iter_mut().enumerate() {
                    *uc += self.terms(2 * n + c).map(|(i, a)| a * q[i]).sum::<f64>();
                }
                u
            })
            .collect()
    }

    /// Vertex pressures; vertices without a pressure unknown get zero.
    pub fn expand_pressure(&self, q: &[f64]) -> Vec<f64> {
        self.pressure
            .iter()
            .map(|p| p.map_or(0.0, |i| q[self.n_vel + i]))
            .collect()
    }

    pub fn has_pressure(&self, v: usize) -> bool {
        self.pressure[v].is_some() || self.pinned_pressure == Some(v)
    }

    /// Vertices that carry pressure in the constrained space (including a pinned one).
    pub fn pressure_vertices(&self) -> Vec<bool> {
        (0..self.pressure.len()).map(|v| self.has_pressure(v)).collect()
    }
}

/// Master P2 node of every node under the periodic vertex pairing.
fn periodic_node_masters(space: &P2Space, map: &PeriodicMap) -> Result<Vec<usize>> {
    let mut out: Vec<usize> = (0..space.n_nodes()).collect();
    for v in 0..space.n_vertices {
        out[v] = map.master[v];
    }
    for (e, &[a0, b0]) in space.edges.iter().enumerate() {
        let (mut a, mut b) = (a0, b0);
        for partner in &map.partner {
            if let (Some(pa), Some(pb)) = (partner[a], partner[b]) {
                a = pa;
                b = pb;
            }
        }
        if (a, b) != (a0, b0) {
            out[space.n_vertices + e] = space.edge_node(a, b).ok_or_else(|| {
                Error::NonMatchingFaces(format!("edge ({a0}, {b0}) has no periodic partner"))
            })?;
        }
    }
    Ok(out)
}
