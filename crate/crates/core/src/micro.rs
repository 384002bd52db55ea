//! Heterogeneous problem at scale `eps`: rigid particles carrying random surface forces.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cell::{contract, CellSolution, PeriodicEvaluator, Sym2};
use crate::error::{Error, Result};
use crate::fem::substructure::{cell_node_maps, scaled_template};
use crate::fem::{
    discrete_divergence, divergence_norm, element_hessian, eval_element, frob2, h1_norm, integrate, load, rule,
    stiffness, strain, strain_norm, Assembler, CholeskySolver, ConstraintSpec, DofMap, ElementGeometry,
    FactoredSaddle, MixedField, P2Space, Part, RigidMode, RigidMotion, SolveOptions, SolverKind, Viscosity,
};
use crate::forces::{surface_energy_micro, surface_load, BodyForce, RandomCellField, SurfaceForceModel};
use crate::geometry::{Mesh, PerforatedMesh, PointLocator, Region};
use crate::macroscale::{PicardOptions, PicardStep, ADMISSIBILITY_TOL};
use crate::sparse::norm2;

/// `-div(2 mu e(u) - p I) = f` in the fluid, particles rigid, random forces on particle boundaries.
#[derive(Debug, Clone)]
pub struct MicroProblem {
    pub mesh: PerforatedMesh,
    pub mu: f64,
    pub model: SurfaceForceModel,
    /// Realization: particle `p` draws its amplitude from cell index `mesh.lattice[p]`.
    pub field: RandomCellField,
    pub force: BodyForce,
    pub picard: PicardOptions,
    pub solver: SolveOptions,
}

impl MicroProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::SingularViscosity(format!("fluid viscosity {}", self.mu)));
        }
        self.model.validate()?;
        self.picard.validate()?;
        if self.field.law != self.model.law {
            return Err(Error::InvalidInput(
                "the random field must draw amplitudes from the model's law".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MicroSolution {
    pub field: MixedField,
    /// Reduced unknowns of the returned iterate.
    pub q: Vec<f64>,
    pub trace: Vec<PicardStep>,
    /// `||A q - b(u(q))|| / ||b(u(q))||`.
    pub weak_residual: f64,
    pub energy: f64,
    /// Fitted motion of every particle.
    pub motions: Vec<RigidMotion>,
    /// Largest nodal deviation of the velocity from the fitted motions.
    pub rigid_residual: f64,
}

/// Discrete space `V^eps` on a perforated mesh: zero on the outer boundary, rigid on every
/// particle, divergence-free in the fluid.
pub struct MicroSpace<'a> {
    pub pm: &'a PerforatedMesh,
    pub space: P2Space,
    pub dofs: DofMap,
    /// P2 nodes of every particle.
    pub particle_nodes: Vec<Vec<usize>>,
    /// P2 nodes on the outer boundary.
    pub boundary_nodes: Vec<usize>,
}

fn micro_spec<'z>(zero: &'z dyn Fn([f64; 2]) -> [f64; 2]) -> ConstraintSpec<'z> {
    ConstraintSpec {
        dirichlet: Some(zero),
        rigid: RigidMode::Free,
        pressure_nodes: Part::Fluid,
        divergence_elements: Part::Fluid,
        pin_pressure: true,
        ..Default::default()
    }
}

impl<'a> MicroSpace<'a> {
    pub fn new(pm: &'a PerforatedMesh) -> Result<Self> {
        let mesh = &pm.mesh;
        let space = P2Space::new(mesh);
        let zero = |_: [f64; 2]| [0.0, 0.0];
        let dofs = DofMap::build(mesh, &space, &micro_spec(&zero))?;
        let mut particle_nodes = vec![Vec::new(); mesh.particles.len()];
        for (t, nodes) in space.tri_nodes.iter().enumerate() {
            if let Region::Rigid(p) = mesh.regions[t] {
                particle_nodes[p].extend_from_slice(nodes);
            }
        }
        for v in &mut particle_nodes {
            v.sort_unstable();
            v.dedup();
        }
        let size = pm.domain.diameter();
        let boundary_nodes = (0..space.n_nodes())
            .filter(|&n| pm.domain.on_boundary(space.coords[n], 1e-12 * size))
            .collect();
        Ok(MicroSpace {
            pm,
            space,
            dofs,
            particle_nodes,
            boundary_nodes,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.pm.mesh
    }

    /// Least-squares rigid motion of every particle and the largest nodal deviation from it.
    pub fn fit_motions(&self, v: &[[f64; 2]]) -> (Vec<RigidMotion>, f64) {
        let mut worst = 0.0f64;
        let motions = self
            .particle_nodes
            .iter()
            .zip(&self.mesh().particles)
            .map(|(nodes, part)| {
                let pts: Vec<[f64; 2]> = nodes.iter().map(|&n| self.space.coords[n]).collect();
                let vals: Vec<[f64; 2]> = nodes.iter().map(|&n| v[n]).collect();
                let m = RigidMotion::fit(&pts, &vals, part.center);
                worst = worst.max(m.max_deviation(&pts, &vals));
                m
            })
            .collect();
        (motions, worst)
    }

    /// Membership in `V^eps` up to [`ADMISSIBILITY_TOL`] relative to `||v||_{H1}`.
    pub fn is_admissible(&self, v: &[[f64; 2]]) -> bool {
        let scale = h1_norm(self.mesh(), &self.space, v);
        if scale == 0.0 {
            return true;
        }
        let tol = ADMISSIBILITY_TOL * scale;
        if self.boundary_nodes.iter().any(|&n| v[n][0].abs().max(v[n][1].abs()) > tol) {
            return false;
        }
        if self.fit_motions(v).1 > tol {
            return false;
        }
        let div = discrete_divergence(self.mesh(), &self.space, v, |_, r| r.is_fluid());
        norm2(&div) <= tol
    }

    /// `E(v) = int mu e:e - int f.v + sum_k int eps g(s/eps, v, a_k)`, infinite outside `V^eps`.
    pub fn energy(&self, v: &[[f64; 2]], mu: f64, force: &BodyForce, model: &SurfaceForceModel, field: &RandomCellField) -> f64 {
        if !self.is_admissible(v) {
            return f64::INFINITY;
        }
        self.energy_unchecked(v, mu, force, model, field)
    }

    fn energy_unchecked(
        &self,
        v: &[[f64; 2]],
        mu: f64,
        force: &BodyForce,
        model: &SurfaceForceModel,
        field: &RandomCellField,
    ) -> f64 {
        let bulk = integrate(self.mesh(), &self.space, v, 4, |_, _| true, |q| {
            let f = force.eval(q.x);
            mu * frob2(&strain(&q.grad)) - (f[0] * q.u[0] + f[1] * q.u[1])
        });
        let surf = if model.is_zero() {
            0.0
        } else {
            surface_energy_micro(model, field, self.pm, &self.space, v)
        };
        bulk + surf
    }
}

/// [`MicroSpace::energy`] for a problem description.
pub fn energy_micro(v: &[[f64; 2]], problem: &MicroProblem) -> f64 {
    match MicroSpace::new(&problem.mesh) {
        Ok(s) => s.energy(v, problem.mu, &problem.force, &problem.model, &problem.field),
        Err(_) => f64::INFINITY,
    }
}

/// Force and torque balance of one particle from consistent boundary fluxes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleBalance {
    pub particle: usize,
    /// `int_{dT} sigma n ds` with `n` pointing out of the particle.
    pub hydrodynamic_force: [f64; 2],
    /// `int_T f dx`.
    pub body_force: [f64; 2],
    /// Resultant of the surface forces.
    pub surface_force: [f64; 2],
    pub hydrodynamic_torque: f64,
    pub body_torque: f64,
    pub surface_torque: f64,
    /// `|sum of forces| / max(|terms|)`.
    pub force_residual: f64,
    /// `|sum of torques| / max(|terms|, eps |largest force|)`.
    pub torque_residual: f64,
}

/// Spaces, matrix and factorization of the micro problem for one mesh, viscosity and body force.
///
/// The surface forces enter only through the right-hand side, so one system serves every
/// realization of the random field.
pub struct MicroSystem<'a> {
    pub disc: MicroSpace<'a>,
    pub mu: f64,
    pub force: BodyForce,
    body_rhs: Vec<f64>,
    linear: FactoredSaddle,
}

impl<'a> MicroSystem<'a> {
    pub fn new(pm: &'a PerforatedMesh, mu: f64, force: BodyForce, opts: &SolveOptions) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::SingularViscosity(format!("fluid viscosity {mu}")));
        }
        let disc = MicroSpace::new(pm)?;
        let f = |x: [f64; 2]| force.eval(x);
        let sys = Assembler::new(&pm.mesh, &disc.space, &disc.dofs, Viscosity::Scalar(mu))
            .with_force(&f)
            .assemble()?;
        log::debug!("micro system: {} unknowns, {} nonzeros", sys.n(), sys.matrix.nnz());
        let body_rhs = sys.rhs.clone();
        let linear = FactoredSaddle::new(sys, opts)?;
        Ok(MicroSystem {
            disc,
            mu,
            force,
            body_rhs,
            linear,
        })
    }

    pub fn n(&self) -> usize {
        self.disc.dofs.n()
    }

    pub fn mesh(&self) -> &Mesh {
        self.disc.mesh()
    }

    pub fn solver_kind(&self) -> SolverKind {
        self.linear.kind()
    }

    pub fn space(&self) -> &P2Space {
        &self.disc.space
    }

    /// Reduced right-hand side with the surface forces frozen at `u`.
    pub fn rhs(&self, model: &SurfaceForceModel, field: &RandomCellField, u: &[[f64; 2]]) -> Vec<f64> {
        let mut rhs = self.body_rhs.clone();
        if !model.is_zero() {
            let load = surface_load(model, field, self.disc.pm, &self.disc.space, u);
            for (r, l) in rhs.iter_mut().zip(self.disc.dofs.restrict(&load)) {
                *r += l;
            }
        }
        rhs
    }

    pub fn energy(&self, v: &[[f64; 2]], model: &SurfaceForceModel, field: &RandomCellField) -> f64 {
        self.disc.energy(v, self.mu, &self.force, model, field)
    }

    /// Damped Picard iteration from zero.
    pub fn solve(&self, model: &SurfaceForceModel, field: &RandomCellField, picard: &PicardOptions) -> Result<MicroSolution> {
        self.iterate(model, field, picard, vec![0.0; self.n()])
    }

    /// Damped Picard iteration from the reduced vector `q0`.
    pub fn iterate(
        &self,
        model: &SurfaceForceModel,
        field: &RandomCellField,
        picard: &PicardOptions,
        q0: Vec<f64>,
    ) -> Result<MicroSolution> {
        picard.validate()?;
        if q0.len() != self.n() {
            return Err(Error::InvalidInput(format!(
                "initial guess has {} entries, expected {}",
                q0.len(),
                self.n()
            )));
        }
        let theta = if model.profile.is_affine() || model.is_zero() { 1.0 } else { picard.theta };
        let nv = self.disc.dofs.n_vel;
        let (mesh, space) = (self.mesh(), self.space());
        let mut q = q0;
        let mut warm = q[nv..].to_vec();
        let mut u = self.disc.dofs.expand_velocity(&q);
        let mut trace = Vec::new();
        for it in 1..=picard.max_iter {
            let rhs = self.rhs(model, field, &u);
            let sol = self.linear.solve(&rhs, Some(&warm))?;
            q.iter_mut().zip(&sol.q).for_each(|(a, b)| *a = (1.0 - theta) * *a + theta * b);
            warm = sol.q[nv..].to_vec();
            let un = self.disc.dofs.expand_velocity(&q);
            let diff: Vec<[f64; 2]> = un.iter().zip(&u).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect();
            let increment = h1_norm(mesh, space, &diff);
            let scale = h1_norm(mesh, space, &un).max(1.0);
            u = un;
            let energy = self.disc.energy_unchecked(&u, self.mu, &self.force, model, field);
            log::debug!("micro Picard {it}: increment {increment:.3e}, energy {energy:.10e}");
            trace.push(PicardStep {
                iteration: it,
                increment,
                energy,
            });
            if increment <= picard.tol * scale {
                // the last undamped solve satisfies the linearized equations exactly
                let q = sol.q;
                let u = self.disc.dofs.expand_velocity(&q);
                let rhs = self.rhs(model, field, &u);
                let weak_residual = self.linear.residual(&q, &rhs);
                let energy = self.disc.energy_unchecked(&u, self.mu, &self.force, model, field);
                let mut f = MixedField::from_reduced(&self.disc.dofs, &q, weak_residual);
                f.flags.dirichlet = true;
                f.normalize_pressure(mesh);
                let (motions, rigid_residual) = self.disc.fit_motions(&f.velocity);
                return Ok(MicroSolution {
                    field: f,
                    q,
                    trace,
                    weak_residual,
                    energy,
                    motions,
                    rigid_residual,
                });
            }
        }
        Err(Error::PicardStalled {
            trace: trace.iter().map(|s| s.increment).collect(),
        })
    }

    /// Element of `V^eps` solving the Stokes problem for a random nodal load, scaled to unit H1 norm.
    pub fn random_admissible(&self, seed: u64) -> Result<Vec<[f64; 2]>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nv = self.disc.dofs.n_vel;
        let rhs: Vec<f64> = (0..self.n())
            .map(|i| if i < nv { StandardNormal.sample(&mut rng) } else { 0.0 })
            .collect();
        let sol = self.linear.solve(&rhs, None)?;
        let v = self.disc.dofs.expand_velocity(&sol.q);
        let n = h1_norm(self.mesh(), self.space(), &v);
        Ok(v.into_iter().map(|x| [x[0] / n, x[1] / n]).collect())
    }

    /// Force and torque balance of every particle, with hydrodynamic loads from consistent fluxes.
    pub fn particle_balance(
        &self,
        sol: &MicroSolution,
        model: &SurfaceForceModel,
        field: &RandomCellField,
    ) -> Vec<ParticleBalance> {
        let (mesh, space, dofs) = (self.mesh(), self.space(), &self.disc.dofs);
        let np = mesh.particles.len();
        let centers: Vec<[f64; 2]> = mesh.particles.iter().map(|p| p.center).collect();
        let cross = |r: [f64; 2], f: [f64; 2]| r[0] * f[1] - r[1] * f[0];
        let arm = |n: usize, p: usize| [space.coords[n][0] - centers[p][0], space.coords[n][1] - centers[p][1]];
        let mut node_particle = vec![None; space.n_nodes()];
        for (p, nodes) in self.disc.particle_nodes.iter().enumerate() {
            nodes.iter().for_each(|&n| node_particle[n] = Some(p));
        }
        let (mut flux, mut flux_t) = (vec![[0.0; 2]; np], vec![0.0; np]);
        let (mut body, mut body_t) = (vec![[0.0; 2]; np], vec![0.0; np]);
        let f = |x: [f64; 2]| self.force.eval(x);
        let asm = Assembler::new(mesh, space, dofs, Viscosity::Scalar(self.mu)).with_force(&f);
        let u = &sol.field.velocity;
        let pres = &sol.field.pressure;
        for t in 0..mesh.n_triangles() {
            let nodes = &space.tri_nodes[t];
            match mesh.regions[t] {
                Region::Rigid(p) => {
                    let l = load(&ElementGeometry::new(mesh.triangle_coords(t)), &f, asm.load_degree);
                    for (a, &n) in nodes.iter().enumerate() {
                        let fa = [l[2 * a], l[2 * a + 1]];
                        body[p][0] += fa[0];
                        body[p][1] += fa[1];
                        body_t[p] += cross(arm(n, p), fa);
                    }
                }
                Region::Fluid => {
                    if !nodes.iter().any(|&n| node_particle[n].is_some()) {
                        continue;
                    }
                    let (a, fl) = asm.element(t);
                    let mut x = [0.0; 15];
                    for (k, &n) in nodes.iter().enumerate() {
                        x[2 * k] = u[n][0];
                        x[2 * k + 1] = u[n][1];
                    }
                    for (k, &v) in mesh.triangles[t].iter().enumerate() {
                        x[12 + k] = pres[v];
                    }
                    for (k, &n) in nodes.iter().enumerate() {
                        let Some(p) = node_particle[n] else { continue };
                        let mut r = [0.0; 2];
                        for c in 0..2 {
                            let i = 2 * k + c;
                            r[c] = (0..15).map(|j| a[i][j] * x[j]).sum::<f64>() - fl[i];
                        }
                        flux[p][0] += r[0];
                        flux[p][1] += r[1];
                        flux_t[p] += cross(arm(n, p), r);
                    }
                }
            }
        }
        let (mut surf, mut surf_t) = (vec![[0.0; 2]; np], vec![0.0; np]);
        if !model.is_zero() {
            let s = surface_load(model, field, self.disc.pm, space, u);
            for (p, nodes) in self.disc.particle_nodes.iter().enumerate() {
                for &n in nodes {
                    surf[p][0] += s[n][0];
                    surf[p][1] += s[n][1];
                    surf_t[p] += cross(arm(n, p), s[n]);
                }
            }
        }
        (0..np)
            .map(|p| {
                let hydro = [-flux[p][0], -flux[p][1]];
                let sum = [hydro[0] + body[p][0] + surf[p][0], hydro[1] + body[p][1] + surf[p][1]];
                let fscale = [hydro, body[p], surf[p]]
                    .iter()
                    .map(|v| v[0].hypot(v[1]))
                    .fold(f64::MIN_POSITIVE, f64::max);
                let tsum = -flux_t[p] + body_t[p] + surf_t[p];
                let tscale = [flux_t[p], body_t[p], surf_t[p]]
                    .iter()
                    .map(|v| v.abs())
                    .fold(fscale * self.disc.pm.eps, f64::max);
                ParticleBalance {
                    particle: p,
                    hydrodynamic_force: hydro,
                    body_force: body[p],
                    surface_force: surf[p],
                    hydrodynamic_torque: -flux_t[p],
                    body_torque: body_t[p],
                    surface_torque: surf_t[p],
                    force_residual: sum[0].hypot(sum[1]) / fscale,
                    torque_residual: tsum.abs() / tscale,
                }
            })
            .collect()
    }

    /// Construct `u' in V^eps` close to `u` (nodal values on this space, zero on the outer boundary).
    ///
    /// Per cell, `u` is first made rigid on the particle by subtracting a minimal-energy
    /// extension supported in the cell; the remaining fluid divergence is then removed by a
    /// Stokes solve in the space of fields that are rigid on the particles.
    pub fn project_to_veps(&self, u: &[[f64; 2]]) -> Result<Projection> {
        let (mesh, space) = (self.mesh(), self.space());
        if u.len() != space.n_nodes() {
            return Err(Error::InvalidInput(format!(
                "field has {} nodes, the space has {}",
                u.len(),
                space.n_nodes()
            )));
        }
        let ext = CellExtension::new(self.disc.pm, space)?;
        let mut ua = u.to_vec();
        ext.subtract(&mut ua);

        let asm = Assembler {
            div_target: Some(&ua),
            ..Assembler::new(mesh, space, &self.disc.dofs, Viscosity::Scalar(self.mu))
        };
        let rhs = asm.rhs();
        let w = self.disc.dofs.expand_velocity(&self.linear.solve(&rhs, None)?.q);
        let projected: Vec<[f64; 2]> = ua.iter().zip(&w).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect();

        let diff: Vec<[f64; 2]> = u.iter().zip(&projected).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect();
        let gap = h1_norm(mesh, space, &diff);
        let div = divergence_norm(mesh, space, u, |_, _| true);
        let rigid_strain = strain_norm(mesh, space, u, |_, r| !r.is_fluid());
        let rhs_bound = div + rigid_strain;
        Ok(Projection {
            field: projected,
            gap,
            divergence: div,
            rigid_strain,
            constant: if rhs_bound > 0.0 { gap / rhs_bound } else { 0.0 },
        })
    }
}

/// Solve the micro problem from scratch.
pub fn solve_micro(problem: &MicroProblem) -> Result<MicroSolution> {
    problem.validate()?;
    let sys = MicroSystem::new(&problem.mesh, problem.mu, problem.force, &problem.solver)?;
    sys.solve(&problem.model, &problem.field, &problem.picard)
}

/// Result of [`MicroSystem::project_to_veps`].
#[derive(Debug, Clone)]
pub struct Projection {
    pub field: Vec<[f64; 2]>,
    /// `||u - u'||_{H1}`.
    pub gap: f64,
    /// `||div u||_{L2(D)}`.
    pub divergence: f64,
    /// `||e(u)||_{L2}` over the particles.
    pub rigid_strain: f64,
    /// `gap / (divergence + rigid_strain)`.
    pub constant: f64,
}

/// Per-cell minimal-energy extension of the non-rigid part of a field on the particle.
struct CellExtension {
    tmesh: Mesh,
    tspace: P2Space,
    tdofs: DofMap,
    chol: CholeskySolver,
    node_maps: Vec<Vec<usize>>,
    on_cell_boundary: Vec<bool>,
}

impl CellExtension {
    fn new(pm: &PerforatedMesh, space: &P2Space) -> Result<Self> {
        let tmesh = scaled_template(pm);
        let tspace = P2Space::new(&tmesh);
        let zero = |_: [f64; 2]| [0.0, 0.0];
        let tdofs = DofMap::build(&tmesh, &tspace, &micro_spec(&zero))?;
        let sys = Assembler::new(&tmesh, &tspace, &tdofs, Viscosity::Scalar(1.0)).assemble()?;
        let chol = CholeskySolver::factor(&sys.velocity_block())?;
        let node_maps = cell_node_maps(pm, &tspace, space)?;
        let half = 0.5 * pm.eps * (1.0 - 1e-9);
        let on_cell_boundary = tspace.coords.iter().map(|x| x[0].abs().max(x[1].abs()) >= half).collect();
        Ok(CellExtension {
            tmesh,
            tspace,
            tdofs,
            chol,
            node_maps,
            on_cell_boundary,
        })
    }

    /// `u <- u - c_k` in every cell, where `c_k` vanishes on the cell boundary, `u - c_k` is
    /// rigid on the particle, and the fluid strain energy of `c_k` is minimal.
    fn subtract(&self, u: &mut [[f64; 2]]) {
        let nn = self.tspace.n_nodes();
        let visc = Viscosity::Scalar(1.0).matrix();
        let stiff: Vec<Option<[[f64; 12]; 12]>> = (0..self.tmesh.n_triangles())
            .map(|t| {
                self.tmesh.regions[t]
                    .is_fluid()
                    .then(|| stiffness(&ElementGeometry::new(self.tmesh.triangle_coords(t)), &visc))
            })
            .collect();
        let nv = self.tdofs.n_vel;
        for map in &self.node_maps {
            let d: Vec<[f64; 2]> = (0..nn)
                .map(|n| if self.on_cell_boundary[n] { [0.0; 2] } else { u[map[n]] })
                .collect();
            let mut kd = vec![[0.0; 2]; nn];
            for (t, k) in stiff.iter().enumerate() {
                let Some(k) = k else { continue };
                let nodes = &self.tspace.tri_nodes[t];
                for i in 0..12 {
                    let s: f64 = (0..12).map(|j| k[i][j] * d[nodes[j / 2]][j % 2]).sum();
                    kd[nodes[i / 2]][i % 2] += s;
                }
            }
            let rhs = self.tdofs.restrict(&kd);
            let mut q = self.chol.solve(&rhs[..nv]);
            q.resize(self.tdofs.n(), 0.0);
            let z = self.tdofs.expand_velocity(&q);
            for n in 0..nn {
                if !self.on_cell_boundary[n] {
                    let g = map[n];
                    u[g][0] -= d[n][0] - z[n][0];
                    u[g][1] -= d[n][1] - z[n][1];
                }
            }
        }
    }
}

/// Value, gradient `grad[i][j] = d u_i / dx_j` and second derivatives `hess[i][j][k]`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub value: [f64; 2],
    pub grad: [[f64; 2]; 2],
    pub hess: [[[f64; 2]; 2]; 2],
}

/// A macroscopic velocity that can be evaluated with derivatives anywhere in the domain.
pub trait MacroVelocity {
    fn jet(&self, x: [f64; 2]) -> Jet;
}

impl<F: Fn([f64; 2]) -> Jet> MacroVelocity for F {
    fn jet(&self, x: [f64; 2]) -> Jet {
        self(x)
    }
}

/// Piecewise quadratic velocity on a mesh, evaluated by point location.
pub struct FeVelocity<'a> {
    mesh: &'a Mesh,
    space: &'a P2Space,
    u: &'a [[f64; 2]],
    locator: PointLocator,
    lo: [f64; 2],
    hi: [f64; 2],
}

impl<'a> FeVelocity<'a> {
    pub fn new(mesh: &'a Mesh, space: &'a P2Space, u: &'a [[f64; 2]]) -> Self {
        let (lo, hi) = mesh.bounding_box();
        FeVelocity {
            mesh,
            space,
            u,
            locator: PointLocator::new(mesh),
            lo,
            hi,
        }
    }
}

impl MacroVelocity for FeVelocity<'_> {
    fn jet(&self, x: [f64; 2]) -> Jet {
        let d = 1e-12 * (self.hi[0] - self.lo[0]).max(self.hi[1] - self.lo[1]);
        let p = [x[0].clamp(self.lo[0] + d, self.hi[0] - d), x[1].clamp(self.lo[1] + d, self.hi[1] - d)];
        match self.locator.locate(self.mesh, p) {
            Some((t, l)) => {
                let g = ElementGeometry::new(self.mesh.triangle_coords(t));
                let (value, grad) = eval_element(self.space, &g, t, self.u, &l);
                Jet {
                    value,
                    grad,
                    hess: element_hessian(self.space, &g, t, self.u),
                }
            }
            None => Jet::default(),
        }
    }
}

/// First-order corrector `r(x) = eps sum_b chi_b(x/eps) (e(u*)(x) : b)` for an orthonormal
/// deviatoric basis `b` with cell solutions `chi_b`.
pub struct Corrector<'a> {
    pub eps: f64,
    basis: &'a [CellSolution],
    cell: PeriodicEvaluator<'a>,
}

impl<'a> Corrector<'a> {
    /// `basis` must hold the cell solutions of an orthonormal deviatoric basis on `cell_mesh`.
    pub fn new(cell_mesh: &'a Mesh, cell_space: &'a P2Space, basis: &'a [CellSolution], eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidInput(format!("eps = {eps} must be positive")));
        }
        if basis.is_empty() || basis.iter().any(|b| b.field.velocity.len() != cell_space.n_nodes()) {
            return Err(Error::InvalidInput("corrector basis does not live on the cell mesh".into()));
        }
        Ok(Corrector {
            eps,
            basis,
            cell: PeriodicEvaluator::new(cell_mesh, cell_space),
        })
    }

    /// `r` and its gradient at `x`, given the macroscopic jet there.
    pub fn eval(&self, x: [f64; 2], jet: &Jet) -> ([f64; 2], [[f64; 2]; 2]) {
        let e = strain(&jet.grad);
        let y = [x[0] / self.eps, x[1] / self.eps];
        let mut r = [0.0; 2];
        let mut gr = [[0.0; 2]; 2];
        for b in self.basis {
            let c = contract(&e, &b.a);
            let dc: [f64; 2] = std::array::from_fn(|k| {
                let hk: Sym2 = std::array::from_fn(|i| std::array::from_fn(|j| jet.hess[i][j][k]));
                contract(&strain(&hk), &b.a)
            });
            let (chi, dchi) = self.cell.eval(&b.field.velocity, y);
            for i in 0..2 {
                r[i] += self.eps * c * chi[i];
                for k in 0..2 {
                    gr[i][k] += c * dchi[i][k] + self.eps * chi[i] * dc[k];
                }
            }
        }
        (r, gr)
    }

    /// Nodal values of `r` and of `u* - r` on `space`.
    pub fn nodal(&self, space: &P2Space, u_star: &dyn MacroVelocity) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
        space
            .coords
            .iter()
            .map(|&x| {
                let j = u_star.jet(x);
                let (r, _) = self.eval(x, &j);
                (r, [j.value[0] - r[0], j.value[1] - r[1]])
            })
            .unzip()
    }
}

/// Distances between a micro solution and the homogenized one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GapNorms {
    /// `||u_eps - u*||_{L2}`.
    pub l2: f64,
    /// `||u_eps - u*||_{H1}`.
    pub h1: f64,
    /// `||u_eps - (u* - r)||_{H1}`, or NaN without a corrector.
    pub corrected_h1: f64,
    /// `||r||_{L2}`, or NaN without a corrector.
    pub corrector_l2: f64,
}

/// [`GapNorms`] by quadrature of degree `degree` on the mesh of `u_eps`.
pub fn gap_norms(
    mesh: &Mesh,
    space: &P2Space,
    u_eps: &[[f64; 2]],
    u_star: &dyn MacroVelocity,
    corrector: Option<&Corrector>,
    degree: usize,
) -> GapNorms {
    let r = rule(degree);
    let (mut l2, mut semi, mut corr, mut rl2) = (0.0, 0.0, 0.0, 0.0);
    for t in 0..mesh.n_triangles() {
        let g = ElementGeometry::new(mesh.triangle_coords(t));
        for (l, &w) in r.points.iter().zip(&r.weights) {
            let wa = w * g.area;
            let x = g.point(l);
            let (u, gu) = eval_element(space, &g, t, u_eps, l);
            let j = u_star.jet(x);
            let dv = [u[0] - j.value[0], u[1] - j.value[1]];
            let v2 = dv[0] * dv[0] + dv[1] * dv[1];
            let g2: f64 = (0..2).flat_map(|a| (0..2).map(move |b| (a, b))).map(|(a, b)| (gu[a][b] - j.grad[a][b]).powi(2)).sum();
            l2 += wa * v2;
            semi += wa * g2;
            if let Some(c) = corrector {
                let (rv, rg) = c.eval(x, &j);
                let dc = [dv[0] + rv[0], dv[1] + rv[1]];
                let gc: f64 = (0..2)
                    .flat_map(|a| (0..2).map(move |b| (a, b)))
                    .map(|(a, b)| (gu[a][b] - j.grad[a][b] + rg[a][b]).powi(2))
                    .sum();
                corr += wa * (dc[0] * dc[0] + dc[1] * dc[1] + gc);
                rl2 += wa * (rv[0] * rv[0] + rv[1] * rv[1]);
            }
        }
    }
    let with = |x: f64| if corrector.is_some() { x.sqrt() } else { f64::NAN };
    GapNorms {
        l2: l2.sqrt(),
        h1: (l2 + semi).sqrt(),
        corrected_h1: with(corr),
        corrector_l2: with(rl2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forces::{AmplitudeLaw, Profile, Weight};
    use crate::geometry::{build_perforated_mesh, BoxDomain, InclusionShape};

    fn pm(eps: f64) -> PerforatedMesh {
        build_perforated_mesh(&BoxDomain::unit_square(), &InclusionShape::disk(0.1), eps, 0.25).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let pm = pm(0.25);
        let sys = MicroSystem::new(&pm, 1.0, BodyForce::Zero, &SolveOptions::default()).unwrap();
        let f = RandomCellField::new(1, AmplitudeLaw::default());
        let s = sys.solve(&SurfaceForceModel::zero(), &f, &PicardOptions::default()).unwrap();
        assert!(s.field.velocity.iter().all(|u| *u == [0.0, 0.0]));
        assert_eq!(s.energy, 0.0);
    }

    #[test]
    fn zero_field_has_zero_energy_and_strain_is_rejected() {
        let pm = pm(0.25);
        let disc = MicroSpace::new(&pm).unwrap();
        let m = SurfaceForceModel::new(Profile::Sqrt1p, Weight::default(), AmplitudeLaw::default());
        let f = RandomCellField::new(1, m.law);
        let zero = vec![[0.0; 2]; disc.space.n_nodes()];
        assert_eq!(disc.energy(&zero, 1.0, &BodyForce::Zero, &m, &f), 0.0);
        let v = MixedField::interpolate(&disc.space, |x| {
            let b = x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]);
            [b * x[1], -b * x[0]]
        });
        assert_eq!(disc.energy(&v.velocity, 1.0, &BodyForce::Zero, &m, &f), f64::INFINITY);
    }

    #[test]
    fn solution_is_rigid_on_particles() {
        let pm = pm(0.25);
        let sys = MicroSystem::new(&pm, 1.0, BodyForce::Swirl { amplitude: 2.0 }, &SolveOptions::default()).unwrap();
        let m = SurfaceForceModel::new(Profile::Sqrt1p, Weight::default(), AmplitudeLaw::default());
        let f = RandomCellField::new(3, m.law);
        let s = sys.solve(&m, &f, &PicardOptions::default()).unwrap();
        assert!(s.rigid_residual < 1e-12);
        assert!(sys.disc.is_admissible(&s.field.velocity));
        assert!(s.weak_residual < 1e-8, "{} {:?}", s.weak_residual, s.trace);
    }
}
