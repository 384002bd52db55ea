//! Sweeps over `eps` and volume fraction comparing micro, homogenized and analytic answers.

use std::time::Instant;

use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{effective_tensor_with, CellSolver, EffectiveTensor};
use crate::error::{Error, Result};
use crate::fem::{P2Space, SolveOptions, SolverKind};
use crate::forces::{AmplitudeLaw, BodyForce, Profile, RandomCellField, SurfaceForceModel, Weight};
use crate::geometry::{build_cell_mesh, build_macro_mesh, perforate, BoxDomain, InclusionShape, ShapeKind};
use crate::macroscale::{solve_homogenized, HomogenizedProblem, PicardOptions};
use crate::micro::{gap_norms, Corrector, FeVelocity, MicroSystem};
use crate::quadrature::gauss_legendre;

/// Run `f` on every item with at most `jobs` worker threads; results keep the input order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(f).collect()),
        Err(e) => {
            log::warn!("falling back to one thread: {e}");
            items.iter().map(f).collect()
        }
    }
}

/// Parameters of an `eps`-sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub domain: BoxDomain,
    pub shape: InclusionShape,
    pub mu: f64,
    /// Scales, solved from coarsest to finest.
    pub eps: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Mesh size of the unit cell, used both for the cell problems and for every perforated mesh.
    pub h_per_cell: f64,
    /// Squares per side of the macro mesh.
    pub macro_n: usize,
    pub model: SurfaceForceModel,
    pub force: BodyForce,
    pub picard: PicardOptions,
    pub solver: SolveOptions,
    pub cell_tol: f64,
    /// Quadrature degree of the gap norms.
    pub gap_degree: usize,
    /// Worker threads over seeds.
    pub jobs: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            domain: BoxDomain::unit_square(),
            shape: InclusionShape::disk(0.1),
            mu: 1.0,
            eps: vec![0.25, 0.125, 0.0625],
            seeds: vec![1, 2, 3],
            h_per_cell: 1.0 / 16.0,
            macro_n: 64,
            model: SurfaceForceModel::new(Profile::Sqrt1p, Weight::default(), AmplitudeLaw::default()),
            force: BodyForce::Vortex {
                amplitude: 20.0,
                center: [0.5, 0.5],
                radius: 0.15,
            },
            picard: PicardOptions {
                theta: 1.0,
                ..Default::default()
            },
            solver: SolveOptions::default(),
            cell_tol: 1e-10,
            gap_degree: 6,
            jobs: 1,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps.is_empty() || self.eps.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::InvalidInput("the eps list must be non-empty and positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidInput("at least one seed is required".into()));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::SingularViscosity(format!("fluid viscosity {}", self.mu)));
        }
        if self.gap_degree == 0 {
            return Err(Error::InvalidInput("gap quadrature degree must be positive".into()));
        }
        self.shape.validate()?;
        self.model.validate()?;
        self.picard.validate()
    }
}

/// One `(eps, seed)` run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub seed: u64,
    pub energy_micro: f64,
    pub energy_star: f64,
    /// `|E_eps - E*|`.
    pub energy_gap: f64,
    /// `||u_eps - u*||_{L2}`.
    pub l2: f64,
    /// `||u_eps - u*||_{H1}`.
    pub h1: f64,
    /// `||u_eps - (u* - r_eps)||_{H1}`.
    pub corrected_h1: f64,
    /// `||r_eps||_{L2}`.
    pub corrector_l2: f64,
    pub picard_iterations: usize,
    pub weak_residual: f64,
    pub rigid_residual: f64,
}

/// Size and cost of the micro problem at one scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleInfo {
    pub eps: f64,
    pub particles: usize,
    pub triangles: usize,
    pub unknowns: usize,
    pub solver: SolverKind,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyMetadata {
    pub shape: InclusionShape,
    pub mu: f64,
    pub model: SurfaceForceModel,
    pub force: BodyForce,
    pub h_per_cell: f64,
    pub macro_n: usize,
    pub tensor: EffectiveTensor,
    pub macro_picard_iterations: usize,
    pub macro_weak_residual: f64,
    pub scales: Vec<ScaleInfo>,
}

/// Monotonicity verdicts of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    pub seeds: usize,
    /// Seeds whose `L2` gap strictly decreases as `eps` decreases.
    pub l2_decreasing: usize,
    pub energy_decreasing: usize,
    pub corrected_decreasing: usize,
    /// Every row has `corrected_h1 < h1`.
    pub corrector_improves: bool,
}

impl Verdicts {
    /// Seeds needed for a majority verdict: two out of three.
    pub fn required(&self) -> usize {
        (2 * self.seeds).div_ceil(3)
    }

    pub fn weak_convergence(&self) -> bool {
        self.l2_decreasing >= self.required()
    }

    pub fn energy_convergence(&self) -> bool {
        self.energy_decreasing >= self.required()
    }

    pub fn corrector(&self) -> bool {
        self.corrector_improves && self.corrected_decreasing >= self.required()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// Ordered by `eps` as configured, then seed.
    pub rows: Vec<ConvergenceRow>,
    pub metadata: StudyMetadata,
}

impl ConvergenceReport {
    pub fn seeds(&self) -> Vec<u64> {
        let mut s: Vec<u64> = self.rows.iter().map(|r| r.seed).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Rows of one seed sorted by decreasing `eps`.
    pub fn series(&self, seed: u64) -> Vec<ConvergenceRow> {
        let mut r: Vec<ConvergenceRow> = self.rows.iter().filter(|r| r.seed == seed).copied().collect();
        r.sort_by(|a, b| b.eps.total_cmp(&a.eps));
        r
    }

    /// Number of seeds along which `metric` strictly decreases with `eps`.
    pub fn decreasing_seeds(&self, metric: impl Fn(&ConvergenceRow) -> f64) -> usize {
        self.seeds()
            .into_iter()
            .filter(|&s| strictly_decreasing(&self.series(s).iter().map(&metric).collect::<Vec<_>>()))
            .count()
    }

    pub fn verdicts(&self) -> Verdicts {
        Verdicts {
            seeds: self.seeds().len(),
            l2_decreasing: self.decreasing_seeds(|r| r.l2),
            energy_decreasing: self.decreasing_seeds(|r| r.energy_gap),
            corrected_decreasing: self.decreasing_seeds(|r| r.corrected_h1),
            corrector_improves: self.rows.iter().all(|r| r.corrected_h1 < r.h1),
        }
    }
}

pub fn strictly_decreasing(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[1] < w[0])
}

/// Solve the homogenized problem once, then every `(eps, seed)` micro problem, and compare.
pub fn convergence_study(config: &StudyConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    let cell = build_cell_mesh(&config.shape, config.h_per_cell)?;
    let cell_solver = CellSolver::new(&cell, config.mu)?;
    let (tensor, basis) = effective_tensor_with(&cell_solver, config.cell_tol)?;
    let cell_space = P2Space::new(&cell.mesh);
    log::info!("effective tensor: mu* = {:?}", tensor.mu_star);

    let problem = HomogenizedProblem {
        mesh: build_macro_mesh(&config.domain, config.macro_n)?,
        tensor: tensor.clone(),
        model: config.model.clone(),
        shape: config.shape,
        force: config.force,
        picard: config.picard,
        solver: config.solver,
    };
    let star = solve_homogenized(&problem)?;
    let macro_space = P2Space::new(&problem.mesh.mesh);
    let u_star = FeVelocity::new(&problem.mesh.mesh, &macro_space, &star.field.velocity);
    log::info!("homogenized energy {:.10e} after {} Picard steps", star.energy, star.trace.len());

    let mut rows = Vec::new();
    let mut scales = Vec::new();
    for &eps in &config.eps {
        let t0 = Instant::now();
        let pm = perforate(&config.domain, cell.clone(), eps)?;
        let sys = MicroSystem::new(&pm, config.mu, config.force, &config.solver)?;
        let corrector = Corrector::new(&cell.mesh, &cell_space, &basis, eps)?;
        log::info!("eps {eps}: {} particles, {} unknowns", pm.n_particles(), sys.n());
        let results = parallel_map(&config.seeds, config.jobs, |&seed| -> Result<ConvergenceRow> {
            let field = RandomCellField::new(seed, config.model.law);
            let sol = sys.solve(&config.model, &field, &config.picard)?;
            let gaps = gap_norms(
                sys.mesh(),
                sys.space(),
                &sol.field.velocity,
                &u_star,
                Some(&corrector),
                config.gap_degree,
            );
            log::info!("eps {eps} seed {seed}: L2 gap {:.4e}, energy {:.8e}", gaps.l2, sol.energy);
            Ok(ConvergenceRow {
                eps,
                seed,
                energy_micro: sol.energy,
                energy_star: star.energy,
                energy_gap: (sol.energy - star.energy).abs(),
                l2: gaps.l2,
                h1: gaps.h1,
                corrected_h1: gaps.corrected_h1,
                corrector_l2: gaps.corrector_l2,
                picard_iterations: sol.trace.len(),
                weak_residual: sol.weak_residual,
                rigid_residual: sol.rigid_residual,
            })
        });
        for r in results {
            rows.push(r?);
        }
        scales.push(ScaleInfo {
            eps,
            particles: pm.n_particles(),
            triangles: pm.mesh.n_triangles(),
            unknowns: sys.n(),
            solver: sys.solver_kind(),
            seconds: t0.elapsed().as_secs_f64(),
        });
    }
    Ok(ConvergenceReport {
        rows,
        metadata: StudyMetadata {
            shape: config.shape,
            mu: config.mu,
            model: config.model.clone(),
            force: config.force,
            h_per_cell: config.h_per_cell,
            macro_n: config.macro_n,
            tensor,
            macro_picard_iterations: star.trace.len(),
            macro_weak_residual: star.weak_residual,
            scales,
        },
    })
}

/// Effective viscosity ratio `mu*/mu` of a rigid disk at area fraction `phi` inside a
/// concentric fluid annulus whose outer circle moves with a pure straining flow.
///
/// The stream function is `f(r) sin(2 theta)` with `f = A r^4 + B r^2 + C + D r^-2`; the
/// ratio is the annulus dissipation over that of the undisturbed strain on the full disk.
pub fn disk_cell_viscosity(phi: f64) -> f64 {
    if phi <= 0.0 {
        return 1.0;
    }
    let (big_r, e) = (1.0f64, 1.0f64);
    let a = phi.sqrt() * big_r;
    let row = |r: f64| [r.powi(4), r * r, 1.0, r.powi(-2)];
    let drow = |r: f64| [4.0 * r.powi(3), 2.0 * r, 0.0, -2.0 * r.powi(-3)];
    let (ra, da, rr, dr) = (row(a), drow(a), row(big_r), drow(big_r));
    let m = Matrix4::from_row_slice(&[
        ra[0], ra[1], ra[2], ra[3], da[0], da[1], da[2], da[3], rr[0], rr[1], rr[2], rr[3], dr[0], dr[1], dr[2],
        dr[3],
    ]);
    let rhs = Vector4::new(0.0, 0.0, 0.5 * e * big_r * big_r, e * big_r);
    let c = m.lu().solve(&rhs).expect("annulus system is regular");
    let f = |r: f64| c[0] * r.powi(4) + c[1] * r * r + c[2] + c[3] / (r * r);
    let fp = |r: f64| 4.0 * c[0] * r.powi(3) + 2.0 * c[1] * r - 2.0 * c[3] / r.powi(3);
    let fpp = |r: f64| 12.0 * c[0] * r * r + 2.0 * c[1] + 6.0 * c[3] / r.powi(4);
    // strain amplitudes: e_rr = -e_tt = g cos 2t, e_rt = k sin 2t
    // quadrature in ln r resolves the boundary layer of width ~a around the disk
    let (x, w) = gauss_legendre(64);
    let (la, lr) = (a.ln(), big_r.ln());
    let (mid, half) = (0.5 * (lr + la), 0.5 * (lr - la));
    let mut diss = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        let r = (mid + half * xi).exp();
        let g = 2.0 * fp(r) / r - 2.0 * f(r) / (r * r);
        let k = 0.5 * (-fpp(r) + fp(r) / r - 4.0 * f(r) / (r * r));
        diss += wi * half * r * r * std::f64::consts::PI * (2.0 * g * g + 2.0 * k * k);
    }
    // 2 mu int e:e over the annulus against 2 mu |E|^2 pi R^2 with |E|^2 = 2 e^2
    diss / (2.0 * e * e * std::f64::consts::PI * big_r * big_r)
}

/// Least-squares slope of `y = s x` (a line through the origin).
pub fn slope_through_origin(x: &[f64], y: &[f64]) -> f64 {
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    sxy / sxx
}

/// Least-squares `y = a + b x`, returning `(a, b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiluteConfig {
    pub kind: ShapeKind,
    pub phis: Vec<f64>,
    pub mu: f64,
    /// Coarse cell mesh size; the refinement uses `h / 2`.
    pub h: f64,
    pub tol: f64,
    /// Convergence order assumed by the Richardson extrapolation.
    pub order: f64,
    pub dim: usize,
    pub jobs: usize,
}

impl Default for DiluteConfig {
    fn default() -> Self {
        DiluteConfig {
            kind: ShapeKind::Disk,
            phis: vec![0.005, 0.01, 0.02],
            mu: 1.0,
            h: 1.0 / 32.0,
            tol: 1e-10,
            order: 2.0,
            dim: 2,
            jobs: 1,
        }
    }
}

impl DiluteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 {
            return Err(Error::InvalidInput(format!("dimension {} is not supported", self.dim)));
        }
        if self.phis.len() < 2 || self.phis.iter().any(|&p| !(p > 0.0 && p <= 0.05)) {
            return Err(Error::InvalidInput("dilute study needs at least two fractions in (0, 0.05]".into()));
        }
        if !(self.mu > 0.0 && self.h > 0.0 && self.order > 0.0) {
            return Err(Error::InvalidInput("viscosity, mesh size and order must be positive".into()));
        }
        Ok(())
    }
}

/// Effective tensor of one `(phi, h)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiluteRow {
    pub phi: f64,
    pub h: f64,
    /// `mu*_shear / mu - 1`.
    pub shear_excess: f64,
    /// Same for the axis-aligned deviatoric mode.
    pub normal_excess: f64,
    /// `trace(C) / mu`.
    pub c_trace: f64,
    pub measured_phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiluteReport {
    pub rows: Vec<DiluteRow>,
    pub slope_coarse: f64,
    pub slope_fine: f64,
    pub slope_extrapolated: f64,
    /// `|slope_fine - slope_extrapolated|`.
    pub discretization_error: f64,
    /// Slope of the analytic annulus model over the same fractions.
    pub oracle_slope: f64,
    /// `|slope_extrapolated - oracle_slope| / oracle_slope`.
    pub relative_error: f64,
    /// Intercept of the linear fit of `trace(C)/mu` against `phi` on the fine mesh.
    pub c_intercept: f64,
    /// Five percent of the largest fitted value.
    pub c_intercept_tol: f64,
}

impl DiluteReport {
    pub fn matches_oracle(&self, rel_tol: f64) -> bool {
        self.relative_error <= rel_tol
    }

    pub fn c_vanishes(&self) -> bool {
        self.c_intercept.abs() <= self.c_intercept_tol
    }
}

/// Slope of the shear viscosity excess against `phi`, at `h` and `h / 2`, with extrapolation.
pub fn dilute_study(config: &DiluteConfig) -> Result<DiluteReport> {
    config.validate()?;
    let jobs: Vec<(f64, f64)> = [config.h, 0.5 * config.h]
        .iter()
        .flat_map(|&h| config.phis.iter().map(move |&p| (p, h)))
        .collect();
    let rows = parallel_map(&jobs, config.jobs, |&(phi, h)| -> Result<DiluteRow> {
        let cell = build_cell_mesh(&InclusionShape::new(config.kind, phi), h)?;
        let solver = CellSolver::new(&cell, config.mu)?;
        let (t, _) = effective_tensor_with(&solver, config.tol)?;
        log::info!("phi {phi} h {h}: mu* = {:?}", t.mu_star);
        Ok(DiluteRow {
            phi,
            h,
            shear_excess: t.shear() / config.mu - 1.0,
            normal_excess: t.mu_star[0][0] / config.mu - 1.0,
            c_trace: (t.c_matrix[0][0] + t.c_matrix[1][1]) / config.mu,
            measured_phi: cell.measured_inclusion_area(),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let n = config.phis.len();
    let (coarse, fine) = rows.split_at(n);
    let slope = |rs: &[DiluteRow]| {
        slope_through_origin(&rs.iter().map(|r| r.phi).collect::<Vec<_>>(), &rs.iter().map(|r| r.shear_excess).collect::<Vec<_>>())
    };
    let (s0, s1) = (slope(coarse), slope(fine));
    let s_ext = s1 + (s1 - s0) / (2f64.powf(config.order) - 1.0);
    let oracle: Vec<f64> = config.phis.iter().map(|&p| disk_cell_viscosity(p) - 1.0).collect();
    let oracle_slope = slope_through_origin(&config.phis, &oracle);
    let ct: Vec<f64> = fine.iter().map(|r| r.c_trace).collect();
    let (c_intercept, _) = linear_fit(&config.phis, &ct);
    let c_max = ct.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(DiluteReport {
        slope_coarse: s0,
        slope_fine: s1,
        slope_extrapolated: s_ext,
        discretization_error: (s1 - s_ext).abs(),
        oracle_slope,
        relative_error: (s_ext - oracle_slope).abs() / oracle_slope.abs(),
        c_intercept,
        c_intercept_tol: 0.05 * c_max,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_without_particle_is_pure_fluid() {
        assert_eq!(disk_cell_viscosity(0.0), 1.0);
        assert!((disk_cell_viscosity(1e-12) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn oracle_slope_tends_to_two() {
        for phi in [1e-4, 1e-5] {
            let s = (disk_cell_viscosity(phi) - 1.0) / phi;
            assert!((s - 2.0).abs() < 20.0 * phi, "{s}");
        }
    }

    #[test]
    fn fits_recover_lines() {
        let x = [1.0, 2.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 + 3.0 * v).collect();
        let (a, b) = linear_fit(&x, &y);
        assert!((a - 0.5).abs() < 1e-12 && (b - 3.0).abs() < 1e-12);
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        assert!((slope_through_origin(&x, &y) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn monotonicity_is_strict() {
        assert!(strictly_decreasing(&[3.0, 2.0, 1.0]));
        assert!(!strictly_decreasing(&[3.0, 3.0, 1.0]));
        assert!(strictly_decreasing(&[1.0]));
    }

    #[test]
    fn parallel_map_keeps_order() {
        let v: Vec<usize> = (0..17).collect();
        assert_eq!(parallel_map(&v, 4, |x| x * x), v.iter().map(|x| x * x).collect::<Vec<_>>());
    }
}
