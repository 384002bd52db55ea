//! Periodic cell problems and the effective viscosity tensor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{
    eval_element, frob2, integrate, strain, velocity_mean, Assembler, ConstraintSpec, DirectSolver,
    DofMap, ElementGeometry, MixedField, P2Space, Part, RigidMode, SaddleSystem, Viscosity,
};
use crate::geometry::{periodic_dof_map, CellMesh, Mesh, PeriodicMap, PointLocator};
use crate::sparse::norm2;

pub type Sym2 = [[f64; 2]; 2];

/// Orthonormal basis of trace-free symmetric 2x2 matrices.
pub fn deviatoric_basis() -> [Sym2; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [[[s, 0.0], [0.0, -s]], [[0.0, s], [s, 0.0]]]
}

pub fn contract(a: &Sym2, b: &Sym2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

/// Coordinates of the deviatoric part of `a` in [`deviatoric_basis`].
pub fn deviatoric_coords(a: &Sym2) -> [f64; 2] {
    let b = deviatoric_basis();
    [contract(a, &b[0]), contract(a, &b[1])]
}

fn check_loading(a: &Sym2) -> Result<()> {
    let norm = frob2(a).sqrt();
    if a.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("strain loading is not finite".into()));
    }
    if (a[0][1] - a[1][0]).abs() > 1e-12 * norm.max(1.0) {
        return Err(Error::InvalidInput("strain loading is not symmetric".into()));
    }
    let tr = a[0][0] + a[1][1];
    if tr.abs() > 1e-12 * norm.max(1.0) {
        return Err(Error::NonTraceFreeStrain { trace: tr });
    }
    Ok(())
}

/// Solution of one cell problem.
#[derive(Debug, Clone)]
pub struct CellSolution {
    /// The loading.
    pub a: Sym2,
    /// Periodic, zero-mean velocity with zero-mean fluid pressure.
    pub field: MixedField,
    /// `int_Y mu e(chi):e(chi)`.
    pub dissipation: f64,
    /// Relative residual of the linear solve.
    pub residual: f64,
}

/// Factorized periodic cell operator, shared by every loading on one mesh.
pub struct CellSolver<'a> {
    pub cell: &'a CellMesh,
    pub space: P2Space,
    pub periodic: PeriodicMap,
    pub mu: f64,
    system: SaddleSystem,
    lu: DirectSolver,
}

impl<'a> CellSolver<'a> {
    pub fn new(cell: &'a CellMesh, mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::SingularViscosity(format!("fluid viscosity {mu}")));
        }
        let space = P2Space::new(&cell.mesh);
        let periodic = periodic_dof_map(&cell.mesh)?;
        let dofs = DofMap::build(&cell.mesh, &space, &Self::spec(&periodic, [[0.0; 2]; 2]))?;
        let system = Assembler::new(&cell.mesh, &space, &dofs, Viscosity::Scalar(mu)).assemble()?;
        let lu = DirectSolver::factor(&system.matrix)?;
        Ok(CellSolver {
            cell,
            space,
            periodic,
            mu,
            system,
            lu,
        })
    }

    fn spec(periodic: &PeriodicMap, a: Sym2) -> ConstraintSpec<'_> {
        ConstraintSpec {
            periodic: Some(periodic),
            rigid: RigidMode::Strain(a),
            pressure_nodes: Part::Fluid,
            divergence_elements: Part::Fluid,
            pin_pressure: true,
            pin_velocity: true,
            ..Default::default()
        }
    }

    /// Constraint map for loading `a`.
    pub fn dofs(&self, a: Sym2) -> Result<DofMap> {
        DofMap::build(&self.cell.mesh, &self.space, &Self::spec(&self.periodic, a))
    }

    pub fn system(&self) -> &SaddleSystem {
        &self.system
    }

    pub fn solve(&self, a: Sym2, tol: f64) -> Result<CellSolution> {
        check_loading(&a)?;
        let mesh = &self.cell.mesh;
        let dofs = self.dofs(a)?;
        let rhs = Assembler::new(mesh, &self.space, &dofs, Viscosity::Scalar(self.mu)).rhs();
        let bnorm = norm2(&rhs);
        let (q, residual) = if bnorm == 0.0 {
            (vec![0.0; rhs.len()], 0.0)
        } else {
            let mut q = self.lu.solve(&rhs);
            let mut res = f64::INFINITY;
            for _ in 0..3 {
                let mut r = self.system.matrix.mul_vec(&q);
                r.iter_mut().zip(&rhs).for_each(|(r, b)| *r = b - *r);
                res = norm2(&r) / bnorm;
                if res <= tol.min(1e-12) {
                    break;
                }
                let dq = self.lu.solve(&r);
                q.iter_mut().zip(&dq).for_each(|(q, d)| *q += d);
            }
            if !res.is_finite() || res > tol.max(1e-8) {
                return Err(Error::SolverDiverged {
                    reason: format!("cell solve residual {res:.3e}"),
                    trace: vec![res],
                });
            }
            (q, res)
        };
        let mut field = MixedField::from_reduced(&dofs, &q, residual);
        let mean = velocity_mean(mesh, &self.space, &field.velocity);
        field.velocity.iter_mut().for_each(|u| {
            u[0] -= mean[0];
            u[1] -= mean[1];
        });
        field.flags.zero_mean_velocity = true;
        normalize_fluid_pressure(mesh, &mut field);
        let dissipation = cross_dissipation(mesh, &self.space, self.mu, &field, &field);
        Ok(CellSolution {
            a,
            field,
            dissipation,
            residual,
        })
    }
}

fn normalize_fluid_pressure(mesh: &Mesh, field: &mut MixedField) {
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if mesh.regions[t].is_fluid() {
            let a = mesh.triangle_area(t);
            num += a * tri.iter().map(|&v| field.pressure[v]).sum::<f64>() / 3.0;
            den += a;
        }
    }
    if den > 0.0 {
        let mean = num / den;
        for (p, &m) in field.pressure.iter_mut().zip(&field.pressure_mask) {
            if m {
                *p -= mean;
            }
        }
    }
    field.flags.zero_mean_pressure = true;
}

/// `int_Y mu e(u):e(v)` over the whole cell.
pub fn cross_dissipation(mesh: &Mesh, space: &P2Space, mu: f64, u: &MixedField, v: &MixedField) -> f64 {
    let r = crate::fem::rule(2);
    let mut total = 0.0;
    for t in 0..mesh.n_triangles() {
        let g = ElementGeometry::new(mesh.triangle_coords(t));
        let mut s = 0.0;
        for (l, &w) in r.points.iter().zip(&r.weights) {
            let (_, gu) = eval_element(space, &g, t, &u.velocity, l);
            let (_, gv) = eval_element(space, &g, t, &v.velocity, l);
            s += w * contract(&strain(&gu), &strain(&gv));
        }
        total += mu * s * g.area;
    }
    total
}

/// `int_Y 2 mu [a 1_T - e(chi)] : e(phi)`, the first-order optimality residual.
pub fn orthogonality_residual(cell: &CellMesh, space: &P2Space, mu: f64, sol: &CellSolution, phi: &MixedField) -> f64 {
    let mesh = &cell.mesh;
    let r = crate::fem::rule(2);
    let mut total = 0.0;
    for t in 0..mesh.n_triangles() {
        let g = ElementGeometry::new(mesh.triangle_coords(t));
        let inside = !mesh.regions[t].is_fluid();
        let mut s = 0.0;
        for (l, &w) in r.points.iter().zip(&r.weights) {
            let (_, gc) = eval_element(space, &g, t, &sol.field.velocity, l);
            let (_, gp) = eval_element(space, &g, t, &phi.velocity, l);
            let ec = strain(&gc);
            let mut d = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    d[i][j] = if inside { sol.a[i][j] } else { 0.0 } - ec[i][j];
                }
            }
            s += w * contract(&d, &strain(&gp));
        }
        total += 2.0 * mu * s * g.area;
    }
    total
}

/// `int_Y mu |a 1_T - e(v)|^2`, the cell functional being minimized.
pub fn cell_functional(cell: &CellMesh, space: &P2Space, mu: f64, a: &Sym2, v: &MixedField) -> f64 {
    mu * integrate(&cell.mesh, space, &v.velocity, 2, |_, _| true, |q| {
        let e = strain(&q.grad);
        let inside = !q.region.is_fluid();
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let d = if inside { a[i][j] } else { 0.0 } - e[i][j];
                s += d * d;
            }
        }
        s
    })
}

/// Solve the cell problem for a single trace-free loading.
pub fn solve_cell(cell: &CellMesh, a: Sym2, mu: f64, tol: f64) -> Result<CellSolution> {
    check_loading(&a)?;
    CellSolver::new(cell, mu)?.solve(a, tol)
}

/// Cell solutions for each element of [`deviatoric_basis`].
pub fn corrector_basis(cell: &CellMesh, mu: f64, tol: f64) -> Result<Vec<CellSolution>> {
    let solver = CellSolver::new(cell, mu)?;
    deviatoric_basis().iter().map(|b| solver.solve(*b, tol)).collect()
}

/// Superpose basis solutions: `chi_A = sum_b (A:b) chi_b`.
pub fn reconstruct(basis: &[CellSolution], a: &Sym2) -> Vec<[f64; 2]> {
    let n = basis[0].field.velocity.len();
    let mut out = vec![[0.0; 2]; n];
    for s in basis {
        let c = contract(a, &s.a);
        for (o, u) in out.iter_mut().zip(&s.field.velocity) {
            o[0] += c * u[0];
            o[1] += c * u[1];
        }
    }
    out
}

/// Effective viscosity restricted to trace-free symmetric matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveTensor {
    pub d: usize,
    pub basis: Vec<Sym2>,
    /// `C[i][j] = C[basis_i, basis_j]`; off-diagonals from polarization.
    pub c_matrix: [[f64; 2]; 2],
    /// Off-diagonal entries from the direct cross integral, kept for the symmetry check.
    pub c_cross: [[f64; 2]; 2],
    pub mu: f64,
    /// Matrix of `mu*` on the orthonormal basis: `mu I + C`.
    pub mu_star: [[f64; 2]; 2],
}

impl EffectiveTensor {
    pub fn from_gram(mu: f64, c: [[f64; 2]; 2]) -> Self {
        let mut ms = c;
        ms[0][0] += mu;
        ms[1][1] += mu;
        EffectiveTensor {
            d: 2,
            basis: deviatoric_basis().to_vec(),
            c_matrix: c,
            c_cross: c,
            mu,
            mu_star: ms,
        }
    }

    /// Pure fluid: `C = 0`.
    pub fn fluid(mu: f64) -> Self {
        Self::from_gram(mu, [[0.0; 2]; 2])
    }

    /// `C[a, b]` for trace-free `a`, `b`.
    pub fn c_form(&self, a: &Sym2, b: &Sym2) -> f64 {
        let (x, y) = (deviatoric_coords(a), deviatoric_coords(b));
        (0..2).map(|i| (0..2).map(|j| x[i] * self.c_matrix[i][j] * y[j]).sum::<f64>()).sum()
    }

    /// `mu* a` for trace-free `a`.
    pub fn apply(&self, a: &Sym2) -> Result<Sym2> {
        check_loading(a)?;
        let x = deviatoric_coords(a);
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            let c: f64 = (0..2).map(|j| self.mu_star[i][j] * x[j]).sum();
            for r in 0..2 {
                for s in 0..2 {
                    out[r][s] += c * self.basis[i][r][s];
                }
            }
        }
        Ok(out)
    }

    /// Shear viscosity `mu* b : b` for the off-diagonal basis element.
    pub fn shear(&self) -> f64 {
        self.mu_star[1][1]
    }

    /// Largest relative asymmetry between the two off-diagonal estimates.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.c_matrix[0][0].abs().max(self.c_matrix[1][1].abs()).max(self.mu * 1e-300);
        (self.c_matrix[0][1] - self.c_cross[0][1]).abs().max((self.c_matrix[0][1] - self.c_matrix[1][0]).abs())
            / scale.max(f64::MIN_POSITIVE)
    }

    /// Eigenvalues of the Gram matrix, ascending.
    pub fn c_eigenvalues(&self) -> [f64; 2] {
        let c = self.c_matrix;
        let m = 0.5 * (c[0][0] + c[1][1]);
        let off = 0.5 * (c[0][1] + c[1][0]);
        let d = (0.25 * (c[0][0] - c[1][1]).powi(2) + off * off).sqrt();
        [m - d, m + d]
    }

    /// Tensor viscosity for the homogenized solver.
    pub fn viscosity(&self) -> Viscosity {
        Viscosity::effective(self.mu, self.c_matrix)
    }
}

/// Solve the basis cell problems and assemble `C` and `mu*`.
pub fn effective_tensor(cell: &CellMesh, mu: f64, tol: f64) -> Result<EffectiveTensor> {
    let solver = CellSolver::new(cell, mu)?;
    effective_tensor_with(&solver, tol).map(|(t, _)| t)
}

/// As [`effective_tensor`], also returning the basis solutions.
pub fn effective_tensor_with(solver: &CellSolver, tol: f64) -> Result<(EffectiveTensor, Vec<CellSolution>)> {
    let b = deviatoric_basis();
    let s0 = solver.solve(b[0], tol)?;
    let s1 = solver.solve(b[1], tol)?;
    let mut sum = [[0.0; 2]; 2];
    let mut diff = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            sum[i][j] = b[0][i][j] + b[1][i][j];
            diff[i][j] = b[0][i][j] - b[1][i][j];
        }
    }
    let plus = solver.solve(sum, tol)?.dissipation;
    let minus = solver.solve(diff, tol)?.dissipation;
    let off = 0.25 * (plus - minus);
    let cross = cross_dissipation(&solver.cell.mesh, &solver.space, solver.mu, &s0.field, &s1.field);
    let mut t = EffectiveTensor::from_gram(solver.mu, [[s0.dissipation, off], [off, s1.dissipation]]);
    t.c_cross = [[s0.dissipation, cross], [cross, s1.dissipation]];
    Ok((t, vec![s0, s1]))
}

/// Evaluates cell fields at arbitrary points by periodic wrapping into the cell.
pub struct PeriodicEvaluator<'a> {
    mesh: &'a Mesh,
    space: &'a P2Space,
    locator: PointLocator,
}

impl<'a> PeriodicEvaluator<'a> {
    pub fn new(mesh: &'a Mesh, space: &'a P2Space) -> Self {
        PeriodicEvaluator {
            mesh,
            space,
            locator: PointLocator::new(mesh),
        }
    }

    /// Wrap `y` into `[-1/2, 1/2)^2`.
    pub fn wrap(y: [f64; 2]) -> [f64; 2] {
        [y[0] - y[0].round(), y[1] - y[1].round()]
    }

    /// Value and gradient of `u` at `y` (periodically wrapped).
    pub fn eval(&self, u: &[[f64; 2]], y: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        let mut p = Self::wrap(y);
        // nudge points on the seam so the locator always finds a triangle
        for c in &mut p {
            *c = c.clamp(-0.5 + 1e-14, 0.5 - 1e-14);
        }
        match self.locator.locate(self.mesh, p) {
            Some((t, l)) => {
                let g = ElementGeometry::new(self.mesh.triangle_coords(t));
                eval_element(self.space, &g, t, u, &l)
            }
            None => ([0.0; 2], [[0.0; 2]; 2]),
        }
    }
}
