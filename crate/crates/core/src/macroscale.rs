//! Homogenized Stokes problem with effective viscosity and averaged surface force.

use serde::{Deserialize, Serialize};

use crate::cell::{deviatoric_coords, EffectiveTensor};
use crate::error::{Error, Result};
use crate::fem::{
    discrete_divergence, h1_norm, integrate, nodal_load, strain, Assembler, ConstraintSpec, DirectSolver,
    DofMap, MixedField, P2Space, Part, SaddleSystem, SolveOptions,
};
use crate::forces::{BodyForce, ForceTable, SurfaceForceModel};
use crate::geometry::{InclusionShape, MacroMesh, Mesh};
use crate::sparse::norm2;

/// Controls of the damped fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardOptions {
    /// Damping `theta` in `(0, 1]`.
    pub theta: f64,
    pub max_iter: usize,
    /// Stop when `||u_m - u_{m-1}||_{H1} <= tol * max(1, ||u_m||_{H1})`.
    pub tol: f64,
    /// Grid intervals per axis for the tabulated averaged force.
    pub table_n: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            theta: 0.5,
            max_iter: 200,
            tol: 1e-9,
            table_n: 64,
        }
    }
}

impl PicardOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::InvalidInput(format!("damping {} must lie in (0, 1]", self.theta)));
        }
        if self.max_iter == 0 || !(self.tol > 0.0) {
            return Err(Error::InvalidInput("Picard needs max_iter >= 1 and tol > 0".into()));
        }
        Ok(())
    }
}

/// One fixed-point step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardStep {
    pub iteration: usize,
    /// `||u_m - u_{m-1}||_{H1}`.
    pub increment: f64,
    /// Energy of the iterate `u_m`.
    pub energy: f64,
}

/// `-div(2 mu* e(u) - p I) = f + f*(u)` in `D`, `div u = 0`, `u = 0` on the boundary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HomogenizedProblem {
    pub mesh: MacroMesh,
    pub tensor: EffectiveTensor,
    pub model: SurfaceForceModel,
    /// Inclusion of the unit cell, needed for the boundary measure in `f*`.
    pub shape: InclusionShape,
    pub force: BodyForce,
    pub picard: PicardOptions,
    pub solver: SolveOptions,
}

#[derive(Debug, Clone)]
pub struct HomogenizedSolution {
    pub field: MixedField,
    pub trace: Vec<PicardStep>,
    /// Relative residual of the discrete weak form at the returned field.
    pub weak_residual: f64,
    pub energy: f64,
}

/// Discrete spaces, matrix and factorization of a homogenized problem.
pub struct MacroSystem<'a> {
    pub problem: &'a HomogenizedProblem,
    pub space: P2Space,
    pub dofs: DofMap,
    pub system: SaddleSystem,
    lu: DirectSolver,
}

impl<'a> MacroSystem<'a> {
    pub fn new(problem: &'a HomogenizedProblem) -> Result<Self> {
        if problem.tensor.d != 2 {
            return Err(Error::InvalidInput(format!("effective tensor has dimension {}", problem.tensor.d)));
        }
        problem.picard.validate()?;
        problem.model.validate()?;
        let mesh = &problem.mesh.mesh;
        let space = P2Space::new(mesh);
        let zero = |_: [f64; 2]| [0.0, 0.0];
        let dofs = DofMap::build(
            mesh,
            &space,
            &ConstraintSpec {
                dirichlet: Some(&zero),
                pressure_nodes: Part::All,
                divergence_elements: Part::All,
                pin_pressure: true,
                ..Default::default()
            },
        )?;
        let force = |x: [f64; 2]| problem.force.eval(x);
        let asm = Assembler::new(mesh, &space, &dofs, problem.tensor.viscosity()).with_force(&force);
        let system = asm.assemble()?;
        let lu = DirectSolver::factor(&system.matrix)?;
        Ok(MacroSystem {
            problem,
            space,
            dofs,
            system,
            lu,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.problem.mesh.mesh
    }

    /// Reduced right-hand side `f + f*(u)` for the current velocity.
    pub fn rhs(&self, u: &[[f64; 2]], table: &ForceTable) -> Vec<f64> {
        let mut rhs = self.system.rhs.clone();
        if !self.problem.model.is_zero() {
            let load = nodal_load(self.mesh(), &self.space, u, 6, |q| table.eval(q.u));
            for (r, l) in rhs.iter_mut().zip(self.dofs.restrict(&load)) {
                *r += l;
            }
        }
        rhs
    }

    /// Averaged force table sized to the iterate.
    pub fn table(&self, u: &[[f64; 2]]) -> ForceTable {
        let umax = u.iter().flat_map(|v| v.iter()).fold(0.0f64, |m, x| m.max(x.abs()));
        let p = self.problem;
        ForceTable::for_model(&p.model, &p.shape, (2.0 * umax).max(1e-6), p.picard.table_n)
    }

    fn field(&self, q: &[f64]) -> MixedField {
        let mut f = MixedField::from_reduced(&self.dofs, q, 0.0);
        f.flags.dirichlet = true;
        f.normalize_pressure(self.mesh());
        f
    }

    /// Solve the linear problem with the averaged force frozen at `u`.
    pub fn linear_step(&self, u: &[[f64; 2]]) -> Result<(Vec<f64>, f64)> {
        let rhs = self.rhs(u, &self.table(u));
        let (q, res) = self.lu.solve_refined(&self.system.matrix, &rhs, 3);
        if !res.is_finite() || res > self.problem.solver.tol.max(1e-8) {
            return Err(Error::SolverDiverged {
                reason: format!("homogenized solve residual {res:.3e}"),
                trace: vec![res],
            });
        }
        Ok((q, res))
    }

    /// Damped Picard iteration from the initial reduced vector `q0`.
    pub fn iterate(&self, q0: Vec<f64>) -> Result<HomogenizedSolution> {
        let p = self.problem;
        let theta = if p.model.profile.is_affine() || p.model.is_zero() { 1.0 } else { p.picard.theta };
        let mut q = q0;
        let mut u = self.dofs.expand_velocity(&q);
        let mut trace = Vec::new();
        for it in 1..=p.picard.max_iter {
            let (qn, _) = self.linear_step(&u)?;
            q.iter_mut().zip(&qn).for_each(|(a, b)| *a = (1.0 - theta) * *a + theta * b);
            let un = self.dofs.expand_velocity(&q);
            let diff: Vec<[f64; 2]> = un.iter().zip(&u).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect();
            let increment = h1_norm(self.mesh(), &self.space, &diff);
            let scale = h1_norm(self.mesh(), &self.space, &un).max(1.0);
            u = un;
            let field = self.field(&q);
            let energy = energy_star(&field, p);
            trace.push(PicardStep {
                iteration: it,
                increment,
                energy,
            });
            if increment <= p.picard.tol * scale {
                // the last undamped solve satisfies the linearized equations exactly
                let field = self.field(&qn);
                let energy = energy_star(&field, p);
                let weak_residual = self.weak_residual(&qn);
                return Ok(HomogenizedSolution {
                    field,
                    trace,
                    weak_residual,
                    energy,
                });
            }
        }
        Err(Error::PicardStalled {
            trace: trace.iter().map(|s| s.increment).collect(),
        })
    }

    /// `||A q - b(u(q))|| / ||b(u(q))||`.
    pub fn weak_residual(&self, q: &[f64]) -> f64 {
        let u = self.dofs.expand_velocity(q);
        let rhs = self.rhs(&u, &self.table(&u));
        let mut r = self.system.matrix.mul_vec(q);
        r.iter_mut().zip(&rhs).for_each(|(r, b)| *r -= b);
        norm2(&r) / norm2(&rhs).max(f64::MIN_POSITIVE)
    }
}

/// Solve the homogenized problem starting from zero velocity.
pub fn solve_homogenized(problem: &HomogenizedProblem) -> Result<HomogenizedSolution> {
    let sys = MacroSystem::new(problem)?;
    let n = sys.dofs.n();
    sys.iterate(vec![0.0; n])
}

/// Relative tolerance on the discrete divergence and boundary trace for admissibility.
pub const ADMISSIBILITY_TOL: f64 = 1e-7;

/// Whether `v` lies in the discrete divergence-free space with zero boundary values.
pub fn is_admissible_macro(mesh: &Mesh, space: &P2Space, v: &[[f64; 2]]) -> bool {
    let scale = h1_norm(mesh, space, v).max(f64::MIN_POSITIVE);
    let div = discrete_divergence(mesh, space, v, |_, _| true);
    if norm2(&div) > ADMISSIBILITY_TOL * scale {
        return false;
    }
    let (lo, hi) = mesh.bounding_box();
    let size = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    space.coords.iter().zip(v).all(|(x, u)| {
        let on = (0..2).any(|d| (x[d] - lo[d]).abs() <= 1e-12 * size || (x[d] - hi[d]).abs() <= 1e-12 * size);
        !on || u[0].abs().max(u[1].abs()) <= ADMISSIBILITY_TOL * scale
    })
}

/// `E*(v) = int mu e:e + C[e,e] - int f.v + int E[a] (int w) rho(v)`; infinite outside the
/// admissible space.
pub fn energy_star(v: &MixedField, problem: &HomogenizedProblem) -> f64 {
    let mesh = &problem.mesh.mesh;
    let space = P2Space::new(mesh);
    energy_star_on(mesh, &space, &v.velocity, problem)
}

/// As [`energy_star`] with a prebuilt space.
pub fn energy_star_on(mesh: &Mesh, space: &P2Space, v: &[[f64; 2]], problem: &HomogenizedProblem) -> f64 {
    if !is_admissible_macro(mesh, space, v) {
        return f64::INFINITY;
    }
    let t = &problem.tensor;
    let kappa = if problem.model.is_zero() { 0.0 } else { problem.model.expected_density(&problem.shape) };
    integrate(mesh, space, v, 6, |_, _| true, |q| {
        let e = strain(&q.grad);
        let quad = t.mu * crate::fem::frob2(&e) + c_quadratic(t, &e);
        let f = problem.force.eval(q.x);
        let surf = if kappa == 0.0 { 0.0 } else { kappa * problem.model.profile.value(q.u) };
        quad - (f[0] * q.u[0] + f[1] * q.u[1]) + surf
    })
}

fn c_quadratic(t: &EffectiveTensor, e: &[[f64; 2]; 2]) -> f64 {
    let x = deviatoric_coords(e);
    (0..2).map(|i| (0..2).map(|j| x[i] * t.c_matrix[i][j] * x[j]).sum::<f64>()).sum()
}
