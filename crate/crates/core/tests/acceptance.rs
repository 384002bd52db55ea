//! End-to-end acceptance checks, one test per criterion. Each prints a PASS/FAIL line to
//! stderr. Heavy cases are serialized so that at most one large factorization is alive.

mod common;

use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use susphom::cell::{contract, effective_tensor_with, orthogonality_residual, CellSolver, Sym2};
use susphom::fem::{h1_norm, integrate, solve_saddle, strain, MixedField, SaddleSystem, SolveOptions};
use susphom::forces::{ergodic_average, homogenized_force};
use susphom::geometry::{build_cell_mesh, build_perforated_mesh};
use susphom::macroscale::PicardOptions;
use susphom::micro::MicroSystem;
use susphom::verify::{convergence_study, dilute_study, ConvergenceReport, DiluteConfig, StudyConfig};
use susphom::{AmplitudeLaw, BodyForce, BoxDomain, InclusionShape, Profile, RandomCellField, SurfaceForceModel, Weight};

static HEAVY: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(n: usize, name: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "acceptance {n:>2} {verdict} {name}: {detail}");
}

fn random_deviatoric(rng: &mut impl Rng) -> Sym2 {
    let (a, b): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
    [[a, b], [b, -a]]
}

#[test]
fn c01_cell_problem_exactness() {
    let _g = serial();
    let cell = build_cell_mesh(&InclusionShape::disk(0.1), 1.0 / 32.0).unwrap();
    let solver = CellSolver::new(&cell, 1.0).unwrap();
    let space = &solver.space;
    let zero = solver.solve([[0.0; 2]; 2], 1e-12).unwrap();
    let zero_norm = h1_norm(&cell.mesh, space, &zero.field.velocity);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = random_deviatoric(&mut rng);
    let one = solver.solve(a, 1e-12).unwrap();
    let two = solver.solve(a.map(|r| r.map(|x| 2.0 * x)), 1e-12).unwrap();
    let diff: Vec<[f64; 2]> = two
        .field
        .velocity
        .iter()
        .zip(&one.field.velocity)
        .map(|(p, q)| [p[0] - 2.0 * q[0], p[1] - 2.0 * q[1]])
        .collect();
    let linearity = h1_norm(&cell.mesh, space, &diff) / h1_norm(&cell.mesh, space, &two.field.velocity);

    // random test fields: periodic, rigid on the inclusion, divergence-free in the fluid
    let dofs = solver.dofs([[0.0; 2]; 2]).unwrap();
    let base = solver.system();
    let scale = |v: &MixedField| {
        integrate(&cell.mesh, space, &v.velocity, 2, |_, _| true, |q| {
            let e = strain(&q.grad);
            contract(&e, &e)
        })
        .sqrt()
    };
    let defect = integrate(&cell.mesh, space, &one.field.velocity, 2, |_, _| true, |q| {
        let e = strain(&q.grad);
        let mut d = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                d[i][j] = if q.region.is_fluid() { 0.0 } else { a[i][j] } - e[i][j];
            }
        }
        contract(&d, &d)
    })
    .sqrt();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let rhs: Vec<f64> = (0..base.n())
            .map(|i| if i < base.n_vel { StandardNormal.sample(&mut rng) } else { 0.0 })
            .collect();
        let sys = SaddleSystem {
            rhs,
            ..base.clone()
        };
        let sol = solve_saddle(&sys, &SolveOptions { tol: 1e-12, ..Default::default() }).unwrap();
        let phi = MixedField::from_reduced(&dofs, &sol.q, sol.residual);
        let r = orthogonality_residual(&cell, space, 1.0, &one, &phi) / (2.0 * defect * scale(&phi));
        worst = worst.max(r.abs());
    }
    let pass = zero_norm <= 1e-12 && linearity <= 1e-10 && worst <= 1e-8;
    report(
        1,
        "cell-problem exactness",
        pass,
        format!("|chi_0|_H1 = {zero_norm:.1e}, linearity {linearity:.1e}, orthogonality {worst:.1e}"),
    );
    assert!(pass);
}

#[test]
fn c02_effective_tensor_structure() {
    let _g = serial();
    let cell = build_cell_mesh(&InclusionShape::disk(0.1), 1.0 / 64.0).unwrap();
    let solver = CellSolver::new(&cell, 1.0).unwrap();
    let (t, _) = effective_tensor_with(&solver, 1e-10).unwrap();
    let c = t.c_matrix;
    let scale = c[0][0].abs().max(c[1][1].abs());
    let asym = ((c[0][1] - c[1][0]).abs() / scale).max(t.asymmetry());
    let eig = t.c_eigenvalues();
    let trace = c[0][0] + c[1][1];
    let psd = eig[0] >= -1e-10 * trace;

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut dominates = true;
    let mut invariance = 0.0f64;
    // the symmetry group of the square
    let group: Vec<[[f64; 2]; 2]> = vec![
        [[1.0, 0.0], [0.0, 1.0]],
        [[0.0, -1.0], [1.0, 0.0]],
        [[-1.0, 0.0], [0.0, -1.0]],
        [[0.0, 1.0], [-1.0, 0.0]],
        [[1.0, 0.0], [0.0, -1.0]],
        [[-1.0, 0.0], [0.0, 1.0]],
        [[0.0, 1.0], [1.0, 0.0]],
        [[0.0, -1.0], [-1.0, 0.0]],
    ];
    for _ in 0..100 {
        let a = random_deviatoric(&mut rng);
        let ma = t.apply(&a).unwrap();
        if contract(&ma, &a) < t.mu * contract(&a, &a) {
            dominates = false;
        }
        let base = t.c_form(&a, &a);
        for r in &group {
            let ra: Sym2 = std::array::from_fn(|i| {
                std::array::from_fn(|j| (0..2).flat_map(|k| (0..2).map(move |l| (k, l))).map(|(k, l)| r[i][k] * a[k][l] * r[j][l]).sum())
            });
            invariance = invariance.max((t.c_form(&ra, &ra) - base).abs() / base.abs());
        }
    }
    let pass = asym <= 1e-8 && psd && dominates && invariance <= 1e-6;
    report(
        2,
        "effective-tensor structure",
        pass,
        format!(
            "asymmetry {asym:.1e}, eigenvalues [{:.4e}, {:.4e}], mu* >= mu: {dominates}, lattice invariance {invariance:.1e}",
            eig[0], eig[1]
        ),
    );
    assert!(pass);
}

#[test]
fn c03_dilute_limit() {
    let _g = serial();
    let r = dilute_study(&DiluteConfig::default()).unwrap();
    let pass = r.matches_oracle(0.10) && r.c_vanishes() && r.discretization_error <= 0.01 * r.slope_extrapolated;
    report(
        3,
        "dilute limit",
        pass,
        format!(
            "slope {:.4} (h: {:.4}, h/2: {:.4}), oracle {:.4}, relative error {:.3}, C intercept {:.1e}",
            r.slope_extrapolated, r.slope_coarse, r.slope_fine, r.oracle_slope, r.relative_error, r.c_intercept
        ),
    );
    assert!(pass);
}

#[test]
fn c04_ergodic_averaging() {
    let law = AmplitudeLaw::Uniform { lo: 0.5, hi: 1.5 };
    let bound = 4.0 * law.std() / 4096f64.sqrt();
    let domain = BoxDomain::unit_square();
    let errors: Vec<f64> = (0..20)
        .map(|seed| {
            let f = RandomCellField::new(seed, law);
            (ergodic_average(|_, a| a, |_| [0.0, 0.0], &domain, 1.0 / 64.0, &f) - 1.0).abs()
        })
        .collect();
    let rate = errors.iter().filter(|&&e| e <= bound).count() as f64 / errors.len() as f64;
    let worst = errors.iter().cloned().fold(0.0, f64::max);
    let pass = rate >= 0.95;
    report(
        4,
        "ergodic averaging",
        pass,
        format!("pass rate {rate:.2} with bound {bound:.4}, worst error {worst:.4}"),
    );
    assert!(pass);
}

#[test]
fn c05_homogenized_force_oracle() {
    let shape = InclusionShape::disk(0.1);
    let law = AmplitudeLaw::Uniform { lo: 0.5, hi: 1.5 };
    let b = [0.7, -0.4];
    let model = SurfaceForceModel::new(Profile::Linear { b }, Weight::default(), law);
    let field = RandomCellField::new(5, law);
    let m = law.mean();
    let perimeter = 2.0 * std::f64::consts::PI * (0.1 / std::f64::consts::PI).sqrt();
    let mut worst = 0.0f64;
    let mut pass = true;
    for z in [[0.0, 0.0], [1.0, 0.0], [-0.3, 2.0], [5.0, -5.0]] {
        let est = homogenized_force(&model, &shape, z, 2000, &field).unwrap();
        let err = ((est.value[0] + m * perimeter * b[0]).powi(2) + (est.value[1] + m * perimeter * b[1]).powi(2)).sqrt();
        pass &= err <= 3.0 * est.half_width;
        worst = worst.max(err / est.half_width);
    }
    let zero = homogenized_force(&SurfaceForceModel::zero(), &shape, [0.4, 0.2], 100, &field).unwrap();
    let zero_exact = zero.value == [0.0, 0.0];
    pass &= zero_exact;
    report(
        5,
        "homogenized-force oracle",
        pass,
        format!("worst error / half-width {worst:.2}, g = 0 gives exactly zero: {zero_exact}"),
    );
    assert!(pass);
}

fn study() -> &'static ConvergenceReport {
    static REPORT: OnceLock<ConvergenceReport> = OnceLock::new();
    REPORT.get_or_init(|| convergence_study(&StudyConfig::default()).unwrap())
}

#[test]
fn c06_energy_and_weak_convergence() {
    let _g = serial();
    let t0 = std::time::Instant::now();
    let r = study();
    let v = r.verdicts();
    let minutes = t0.elapsed().as_secs_f64() / 60.0;
    let pass = v.weak_convergence() && v.energy_convergence();
    report(
        6,
        "energy and weak convergence",
        pass,
        format!(
            "L2 gap decreasing for {}/{} seeds, energy gap for {}/{} seeds ({minutes:.1} min)",
            v.l2_decreasing, v.seeds, v.energy_decreasing, v.seeds
        ),
    );
    assert!(pass);
}

#[test]
fn c07_corrector() {
    let _g = serial();
    let r = study();
    let v = r.verdicts();
    let worst = r.rows.iter().map(|x| x.corrected_h1 / x.h1).fold(0.0, f64::max);
    let pass = v.corrector();
    report(
        7,
        "corrector",
        pass,
        format!(
            "corrected < plain in every row: {} (largest ratio {worst:.3}), corrected gap decreasing for {}/{} seeds",
            v.corrector_improves, v.corrected_decreasing, v.seeds
        ),
    );
    assert!(pass);
}

/// Smooth field vanishing on the boundary of the unit square, with random Fourier content.
fn smooth_field(seed: u64) -> impl Fn([f64; 2]) -> [f64; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64, [f64; 2])> = (0..6)
        .map(|_| {
            (
                rng.random_range(-2.0..2.0f64).round(),
                rng.random_range(-2.0..2.0f64).round(),
                rng.random_range(0.0..std::f64::consts::TAU),
                [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)],
            )
        })
        .collect();
    move |x: [f64; 2]| {
        let bubble = 16.0 * x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]);
        let mut u = [0.0; 2];
        for (m, n, ph, c) in &modes {
            let s = (std::f64::consts::TAU * (m * x[0] + n * x[1]) + ph).cos();
            u[0] += bubble * c[0] * s;
            u[1] += bubble * c[1] * s;
        }
        u
    }
}

#[test]
fn c08_projection_constant() {
    let _g = serial();
    let mut constants = Vec::new();
    for eps in [0.25, 0.125, 0.0625] {
        let pm = build_perforated_mesh(&BoxDomain::unit_square(), &InclusionShape::disk(0.1), eps, 1.0 / 16.0).unwrap();
        let sys = MicroSystem::new(&pm, 1.0, BodyForce::Zero, &SolveOptions::default()).unwrap();
        let mut c = 0.0f64;
        for seed in 0..3 {
            let u = smooth_field(100 + seed);
            let nodal: Vec<[f64; 2]> = sys.space().coords.iter().map(|&x| u(x)).collect();
            let p = sys.project_to_veps(&nodal).unwrap();
            assert!(sys.disc.is_admissible(&p.field), "projection left V^eps at eps = {eps}");
            c = c.max(p.constant);
        }
        constants.push(c);
    }
    let max = constants.iter().cloned().fold(0.0, f64::max);
    let min = constants.iter().cloned().fold(f64::INFINITY, f64::min);
    let pass = max / min <= 3.0;
    report(
        8,
        "projection constant",
        pass,
        format!("C(eps) = {constants:.4?}, max/min {:.3}", max / min),
    );
    assert!(pass);
}

#[test]
fn c09_minimality_and_uniqueness() {
    let _g = serial();
    let pm = build_perforated_mesh(&BoxDomain::unit_square(), &InclusionShape::disk(0.1), 0.25, 1.0 / 16.0).unwrap();
    let force = StudyConfig::default().force;
    let sys = MicroSystem::new(&pm, 1.0, force, &SolveOptions::default()).unwrap();
    let model = SurfaceForceModel::new(Profile::Sqrt1p, Weight::default(), AmplitudeLaw::default());
    let field = RandomCellField::new(7, model.law);
    let picard = PicardOptions::default();
    let sol = sys.solve(&model, &field, &picard).unwrap();
    let e0 = sol.energy;
    let u = &sol.field.velocity;
    let norm = h1_norm(sys.mesh(), sys.space(), u);
    let mut minimal = true;
    let mut closest = f64::INFINITY;
    for i in 0..10 {
        let w = sys.random_admissible(1000 + i).unwrap();
        let s = norm * 10f64.powf(-3.0 + i as f64 / 3.0);
        let v: Vec<[f64; 2]> = u.iter().zip(&w).map(|(a, b)| [a[0] + s * b[0], a[1] + s * b[1]]).collect();
        let e = sys.energy(&v, &model, &field);
        minimal &= e0 <= e;
        closest = closest.min(e - e0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let q0: Vec<f64> = (0..sys.n()).map(|_| { let x: f64 = StandardNormal.sample(&mut rng); 0.1 * x }).collect();
    let other = sys.iterate(&model, &field, &picard, q0).unwrap();
    let diff: Vec<[f64; 2]> = u.iter().zip(&other.field.velocity).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect();
    let gap = h1_norm(sys.mesh(), sys.space(), &diff);
    let unique = gap <= 10.0 * picard.tol * norm.max(1.0);
    let pass = minimal && unique;
    report(
        9,
        "minimality and uniqueness",
        pass,
        format!("E(u) <= E(v) for 10 perturbations: {minimal} (smallest excess {closest:.2e}), initializations differ by {gap:.1e}"),
    );
    assert!(pass);
}

#[test]
fn c10_fem_baseline() {
    let runs: Vec<common::Run> = [4, 8, 16, 32].iter().map(|&n| common::manufactured(n, 1.0)).collect();
    let rates: Vec<f64> = runs.windows(2).map(|w| (w[0].l2 / w[1].l2).ln() / (w[0].h / w[1].h).ln()).collect();
    let identity = runs.iter().map(|r| r.energy_gap).fold(0.0, f64::max);
    let pass = rates.iter().all(|&r| r >= 2.7) && identity <= 1e-9;
    report(
        10,
        "FEM baseline",
        pass,
        format!("L2 velocity rates {rates:.3?}, energy identity gap {identity:.1e}"),
    );
    assert!(pass);
}

