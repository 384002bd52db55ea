use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use super::assembly::SaddleSystem;
use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Sparse LU of the whole saddle matrix.
    Direct,
    /// Preconditioned conjugate gradients on the pressure Schur complement.
    Uzawa,
    /// Direct up to `direct_limit` unknowns, Uzawa beyond or when the direct solve fails.
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub kind: SolverKind,
    pub tol: f64,
    pub max_iter: usize,
    pub direct_limit: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            kind: SolverKind::Auto,
            tol: 1e-10,
            max_iter: 2000,
            direct_limit: 300_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SaddleSolution {
    pub q: Vec<f64>,
    /// `||A q - rhs|| / ||rhs||`.
    pub residual: f64,
    /// Residual history of the iterative solver (empty for direct solves).
    pub trace: Vec<f64>,
    pub kind: SolverKind,
}

/// Sparse LU factorization kept for repeated solves.
pub struct DirectSolver {
    lu: Lu<usize, f64>,
    n: usize,
}

impl DirectSolver {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let lu = a.to_faer().as_ref().sp_lu().map_err(|e| Error::SolverDiverged {
            reason: format!("sparse LU failed: {e:?}"),
            trace: Vec::new(),
        })?;
        Ok(DirectSolver { lu, n: a.nrows })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut m = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(m.as_mut());
        (0..self.n).map(|i| m[(i, 0)]).collect()
    }

    /// Solve `a x = b` with up to `steps` rounds of iterative refinement; returns `x` and the
    /// relative residual.
    pub fn solve_refined(&self, a: &CsrMatrix, b: &[f64], steps: usize) -> (Vec<f64>, f64) {
        let bn = norm2(b);
        if bn == 0.0 {
            return (vec![0.0; b.len()], 0.0);
        }
        let mut x = self.solve(b);
        let mut res = relative_residual(a, &x, b);
        for _ in 0..steps {
            if res < 1e-14 {
                break;
            }
            let mut r = a.mul_vec(&x);
            r.iter_mut().zip(b).for_each(|(r, b)| *r = b - *r);
            let dx = self.solve(&r);
            x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
            res = relative_residual(a, &x, b);
        }
        (x, res)
    }

    /// Solve for every column of `b` (column-major, `n x k`).
    pub fn solve_many(&self, b: &mut Mat<f64>) {
        self.lu.solve_in_place(b.as_mut());
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Sparse Cholesky factorization of a symmetric positive definite matrix.
pub struct CholeskySolver {
    llt: Llt<usize, f64>,
    n: usize,
}

impl CholeskySolver {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let llt = a.lower_to_faer().as_ref().sp_cholesky(Side::Lower).map_err(|e| {
            Error::SolverDiverged {
                reason: format!("velocity block is not positive definite: {e:?}"),
                trace: Vec::new(),
            }
        })?;
        Ok(CholeskySolver { llt, n: a.nrows })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut m = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        self.llt.solve_in_place(m.as_mut());
        (0..self.n).map(|i| m[(i, 0)]).collect()
    }
}

fn relative_residual(a: &CsrMatrix, q: &[f64], b: &[f64]) -> f64 {
    let mut r = a.mul_vec(q);
    r.iter_mut().zip(b).for_each(|(r, b)| *r -= b);
    norm2(&r) / norm2(b).max(f64::MIN_POSITIVE)
}

/// Solve a constrained saddle system to `||A q - rhs|| <= tol ||rhs||`.
pub fn solve_saddle(sys: &SaddleSystem, opts: &SolveOptions) -> Result<SaddleSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance {} must be positive", opts.tol)));
    }
    let n = sys.n();
    if norm2(&sys.rhs) == 0.0 {
        return Ok(SaddleSolution {
            q: vec![0.0; n],
            residual: 0.0,
            trace: Vec::new(),
            kind: SolverKind::Direct,
        });
    }
    let direct = match opts.kind {
        SolverKind::Direct => true,
        SolverKind::Uzawa => false,
        SolverKind::Auto => n <= opts.direct_limit,
    };
    if direct {
        match solve_direct(sys, opts) {
            Ok(s) => return Ok(s),
            Err(e) if opts.kind == SolverKind::Direct => return Err(e),
            Err(e) => log::warn!("direct solve failed ({e}), falling back to Uzawa"),
        }
    }
    uzawa(sys, opts)
}

fn solve_direct(sys: &SaddleSystem, opts: &SolveOptions) -> Result<SaddleSolution> {
    let lu = DirectSolver::factor(&sys.matrix)?;
    let mut q = lu.solve(&sys.rhs);
    let mut res = relative_residual(&sys.matrix, &q, &sys.rhs);
    let mut trace = vec![res];
    // a few steps of iterative refinement
    for _ in 0..3 {
        if res <= opts.tol || !res.is_finite() {
            break;
        }
        let mut r = sys.matrix.mul_vec(&q);
        r.iter_mut().zip(&sys.rhs).for_each(|(r, b)| *r = b - *r);
        let d = lu.solve(&r);
        q.iter_mut().zip(&d).for_each(|(q, d)| *q += d);
        res = relative_residual(&sys.matrix, &q, &sys.rhs);
        trace.push(res);
    }
    if !(res <= opts.tol) {
        return Err(Error::SolverDiverged {
            reason: format!("direct solve residual {res:.3e} exceeds {:.1e}", opts.tol),
            trace,
        });
    }
    Ok(SaddleSolution {
        q,
        residual: res,
        trace: Vec::new(),
        kind: SolverKind::Direct,
    })
}

/// Schur-complement conjugate gradients with a Cholesky-factored velocity block.
///
/// The factorization is kept, so repeated solves with new right-hand sides only cost the
/// pressure iteration.
pub struct SchurSolver {
    k: CsrMatrix,
    b: CsrMatrix,
    chol: CholeskySolver,
    prec: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl SchurSolver {
    pub fn new(sys: &SaddleSystem, opts: &SolveOptions) -> Result<Self> {
        let k = sys.velocity_block();
        let b = sys.divergence_block();
        let chol = CholeskySolver::factor(&k)?;
        let kd = k.diagonal();
        let prec = (0..sys.n_pres)
            .map(|r| {
                let s: f64 = (b.indptr[r]..b.indptr[r + 1]).map(|i| b.values[i] * b.values[i] / kd[b.indices[i]]).sum();
                if s > 0.0 {
                    1.0 / s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(SchurSolver {
            k,
            b,
            chol,
            prec,
            tol: opts.tol,
            max_iter: opts.max_iter,
        })
    }

    pub fn n_vel(&self) -> usize {
        self.k.nrows
    }

    /// `||A q - rhs|| / ||rhs||` evaluated blockwise.
    pub fn residual(&self, q: &[f64], rhs: &[f64]) -> f64 {
        norm2(&self.residual_vector(q, rhs)) / norm2(rhs).max(f64::MIN_POSITIVE)
    }

    /// Solve with the pressure iteration started from `p0` when given, refining on the
    /// full residual until it meets the tolerance. The reported residual is scaled by
    /// `max(||rhs||, ||B^T p||)` since the velocity rows cancel a pressure force that can
    /// dominate the data.
    pub fn solve(&self, rhs: &[f64], p0: Option<&[f64]>) -> Result<SaddleSolution> {
        let (nv, np) = (self.k.nrows, self.b.nrows);
        if norm2(rhs) == 0.0 {
            return Ok(SaddleSolution {
                q: vec![0.0; nv + np],
                residual: 0.0,
                trace: Vec::new(),
                kind: SolverKind::Uzawa,
            });
        }
        let (mut q, mut trace) = self.pass(rhs, p0)?;
        let mut residual = self.scaled_residual(&q, rhs);
        for _ in 0..3 {
            if residual <= self.tol {
                break;
            }
            let r = self.residual_vector(&q, rhs);
            let (dq, t) = self.pass(&r, None)?;
            q.iter_mut().zip(&dq).for_each(|(q, d)| *q += d);
            trace.extend(t);
            residual = self.scaled_residual(&q, rhs);
        }
        if !(residual <= self.tol) {
            return Err(Error::SolverDiverged {
                reason: format!("Uzawa residual {residual:.3e} exceeds {:.1e}", self.tol),
                trace,
            });
        }
        Ok(SaddleSolution {
            q,
            residual,
            trace,
            kind: SolverKind::Uzawa,
        })
    }

    fn scaled_residual(&self, q: &[f64], rhs: &[f64]) -> f64 {
        let force = norm2(&self.b.mul_transpose_vec(&q[self.k.nrows..]));
        norm2(&self.residual_vector(q, rhs)) / norm2(rhs).max(force).max(f64::MIN_POSITIVE)
    }

    fn residual_vector(&self, q: &[f64], rhs: &[f64]) -> Vec<f64> {
        let nv = self.k.nrows;
        let (u, p) = q.split_at(nv);
        let mut r = self.k.mul_vec(u);
        let btp = self.b.mul_transpose_vec(p);
        r.iter_mut().zip(&btp).for_each(|(r, v)| *r += v);
        r.extend(self.b.mul_vec(u));
        r.iter_mut().zip(rhs).for_each(|(r, b)| *r = b - *r);
        r
    }

    /// One preconditioned CG pass on the pressure Schur complement.
    fn pass(&self, rhs: &[f64], p0: Option<&[f64]>) -> Result<(Vec<f64>, Vec<f64>)> {
        let (nv, np) = (self.k.nrows, self.b.nrows);
        let (f, g) = rhs.split_at(nv);
        let b = &self.b;
        let schur = |p: &[f64]| b.mul_vec(&self.chol.solve(&b.mul_transpose_vec(p)));
        let kf = self.chol.solve(f);
        let mut rhs_s = b.mul_vec(&kf);
        rhs_s.iter_mut().zip(g).for_each(|(r, g)| *r -= g);
        let bnorm = norm2(&rhs_s).max(f64::MIN_POSITIVE);
        let mut p = p0.map(|p| p.to_vec()).unwrap_or_else(|| vec![0.0; np]);
        let mut r = rhs_s.clone();
        if p.iter().any(|x| *x != 0.0) {
            r.iter_mut().zip(schur(&p)).for_each(|(r, s)| *r -= s);
        }
        let mut z: Vec<f64> = r.iter().zip(&self.prec).map(|(r, m)| r * m).collect();
        let mut d = z.clone();
        let mut rz = dot(&r, &z);
        let mut trace = vec![norm2(&r) / bnorm];
        let mut it = 0;
        while np > 0 && *trace.last().unwrap() > 0.1 * self.tol {
            if it >= self.max_iter {
                return Err(Error::SolverDiverged {
                    reason: format!("Uzawa did not converge in {} iterations", self.max_iter),
                    trace,
                });
            }
            let sd = schur(&d);
            let curv = dot(&d, &sd);
            if !(curv > 0.0) {
                return Err(Error::SolverDiverged {
                    reason: format!("non-positive curvature {curv:.3e} in the Schur complement"),
                    trace,
                });
            }
            let alpha = rz / curv;
            p.iter_mut().zip(&d).for_each(|(p, d)| *p += alpha * d);
            r.iter_mut().zip(&sd).for_each(|(r, s)| *r -= alpha * s);
            z = r.iter().zip(&self.prec).map(|(r, m)| r * m).collect();
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            d.iter_mut().zip(&z).for_each(|(d, z)| *d = z + beta * *d);
            trace.push(norm2(&r) / bnorm);
            it += 1;
        }
        let mut rhs_u = f.to_vec();
        let btp = b.mul_transpose_vec(&p);
        rhs_u.iter_mut().zip(&btp).for_each(|(r, v)| *r -= v);
        let mut q = self.chol.solve(&rhs_u);
        q.extend_from_slice(&p);
        Ok((q, trace))
    }
}

fn uzawa(sys: &SaddleSystem, opts: &SolveOptions) -> Result<SaddleSolution> {
    SchurSolver::new(sys, opts)?.solve(&sys.rhs, None)
}

/// A saddle system factored once for many right-hand sides.
pub enum FactoredSaddle {
    Direct { lu: DirectSolver, matrix: CsrMatrix, tol: f64 },
    Schur(SchurSolver),
}

impl FactoredSaddle {
    /// Factor `sys` following `opts.kind`; the matrix is consumed so only one copy is kept.
    pub fn new(sys: SaddleSystem, opts: &SolveOptions) -> Result<Self> {
        if !(opts.tol > 0.0) {
            return Err(Error::InvalidInput(format!("tolerance {} must be positive", opts.tol)));
        }
        let direct = match opts.kind {
            SolverKind::Direct => true,
            SolverKind::Uzawa => false,
            SolverKind::Auto => sys.n() <= opts.direct_limit,
        };
        if direct {
            match DirectSolver::factor(&sys.matrix) {
                Ok(lu) => {
                    return Ok(FactoredSaddle::Direct {
                        lu,
                        matrix: sys.matrix,
                        tol: opts.tol,
                    })
                }
                Err(e) if opts.kind == SolverKind::Direct => return Err(e),
                Err(e) => log::warn!("direct factorization failed ({e}), using Uzawa"),
            }
        }
        Ok(FactoredSaddle::Schur(SchurSolver::new(&sys, opts)?))
    }

    /// Solve; `p0` warm-starts the pressure iteration of the Schur path.
    pub fn solve(&self, rhs: &[f64], p0: Option<&[f64]>) -> Result<SaddleSolution> {
        match self {
            FactoredSaddle::Direct { lu, matrix, tol } => {
                let (q, residual) = lu.solve_refined(matrix, rhs, 3);
                if !(residual <= *tol) {
                    return Err(Error::SolverDiverged {
                        reason: format!("direct solve residual {residual:.3e} exceeds {tol:.1e}"),
                        trace: vec![residual],
                    });
                }
                Ok(SaddleSolution {
                    q,
                    residual,
                    trace: Vec::new(),
                    kind: SolverKind::Direct,
                })
            }
            FactoredSaddle::Schur(s) => s.solve(rhs, p0),
        }
    }

    /// `||A q - rhs|| / ||rhs||`.
    pub fn residual(&self, q: &[f64], rhs: &[f64]) -> f64 {
        match self {
            FactoredSaddle::Direct { matrix, .. } => relative_residual(matrix, q, rhs),
            FactoredSaddle::Schur(s) => s.residual(q, rhs),
        }
    }

    pub fn kind(&self) -> SolverKind {
        match self {
            FactoredSaddle::Direct { .. } => SolverKind::Direct,
            FactoredSaddle::Schur(_) => SolverKind::Uzawa,
        }
    }
}
