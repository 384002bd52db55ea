use serde_json::json;
use susphom::fem::P2Space;
use susphom::forces::{ergodic_average, homogenized_force};
use susphom::geometry::lattice_indices;
use susphom::io::{convergence_csv, dilute_csv, num, picard_csv, tensor_csv, to_json, vtk_legacy, CsvTable};
use susphom::{
    build_cell_mesh, build_macro_mesh, build_perforated_mesh, convergence_study, corrector_basis, dilute_study,
    effective_tensor, solve_homogenized, solve_micro, HomogenizedProblem, MicroProblem, RandomCellField,
};

use crate::artifacts::Artifacts;
use crate::config::RunConfig;
use crate::CliError;

/// Cell correctors for the two deviatoric basis loadings.
pub fn cell(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let cell = build_cell_mesh(&cfg.geometry.shape, cfg.geometry.h_per_cell)?;
    let basis = corrector_basis(&cell, cfg.fem.mu, cfg.cell.tol)?;
    let mut t = CsvTable::new("cell", &["basis", "a_xx", "a_xy", "dissipation", "residual"]);
    for (i, s) in basis.iter().enumerate() {
        t.push(vec![i.to_string(), num(s.a[0][0]), num(s.a[0][1]), num(s.dissipation), num(s.residual)]);
    }
    out.write("cell.csv", &t.render())?;
    if cfg.cell.vtk {
        let space = P2Space::new(&cell.mesh);
        for (i, s) in basis.iter().enumerate() {
            out.write(&format!("chi_{i}.vtk"), &vtk_legacy(&cell.mesh, &space, Some(&s.field), &format!("cell corrector {i}")))?;
        }
    }
    Ok(())
}

pub fn tensor(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let cell = build_cell_mesh(&cfg.geometry.shape, cfg.geometry.h_per_cell)?;
    let t = effective_tensor(&cell, cfg.fem.mu, cfg.cell.tol)?;
    log::info!("shear viscosity {:.6}, asymmetry {:.2e}", t.shear(), t.asymmetry());
    out.write("tensor.csv", &tensor_csv(&t).render())?;
    out.write("tensor.json", &to_json(&t)?)
}

/// Monte Carlo and closed-form averaged force at every probe velocity.
pub fn fstar(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let f = &cfg.forces;
    let shape = &cfg.geometry.shape;
    let field = RandomCellField::new(cfg.seed, f.model.law);
    let mut t = CsvTable::new("fstar", &["z_x", "z_y", "mc_x", "mc_y", "half_width", "exact_x", "exact_y"]);
    for &z in &f.probes {
        let e = homogenized_force(&f.model, shape, z, f.samples, &field)?;
        let x = f.model.homogenized_force_exact(shape, z);
        t.push([z[0], z[1], e.value[0], e.value[1], e.half_width, x[0], x[1]].map(num).to_vec());
    }
    out.write("fstar.csv", &t.render())
}

/// Ergodic average of the amplitude over independent realizations.
pub fn ergodic(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let f = &cfg.forces;
    let domain = &cfg.geometry.domain;
    let cells = lattice_indices(domain, f.ergodic_eps)?.len();
    if cells == 0 {
        return Err(CliError::Config(format!("no cell of size {} fits in the domain", f.ergodic_eps)));
    }
    let law = f.model.law;
    let bound = 4.0 * law.std() / (cells as f64).sqrt();
    let mut t = CsvTable::new("ergodic", &["seed", "estimate", "error", "bound", "pass"]);
    let mut passed = 0;
    for seed in cfg.seeds(f.ergodic_runs) {
        let field = RandomCellField::new(seed, law);
        let v = ergodic_average(|_, a| a, |x| x, domain, f.ergodic_eps, &field);
        let err = (v - law.mean()).abs();
        passed += usize::from(err <= bound);
        t.push(vec![seed.to_string(), num(v), num(err), num(bound), (err <= bound).to_string()]);
    }
    log::info!("{passed}/{} realizations within {bound:.4}", f.ergodic_runs);
    out.write("ergodic.csv", &t.render())
}

pub fn macroscale(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let g = &cfg.geometry;
    let cell = build_cell_mesh(&g.shape, g.h_per_cell)?;
    let problem = HomogenizedProblem {
        mesh: build_macro_mesh(&g.domain, g.macro_n)?,
        tensor: effective_tensor(&cell, cfg.fem.mu, cfg.cell.tol)?,
        model: cfg.forces.model.clone(),
        shape: g.shape,
        force: cfg.forces.body,
        picard: cfg.macroscale.picard,
        solver: cfg.fem.solver,
    };
    let s = solve_homogenized(&problem)?;
    log::info!("homogenized energy {:.8e} after {} Picard steps", s.energy, s.trace.len());
    out.write("macro_picard.csv", &picard_csv(&s.trace).render())?;
    let summary = json!({
        "energy": s.energy,
        "weak_residual": s.weak_residual,
        "picard_iterations": s.trace.len(),
        "tensor": problem.tensor,
    });
    out.write("macro.json", &to_json(&summary)?)?;
    if cfg.macroscale.vtk {
        let mesh = &problem.mesh.mesh;
        out.write("macro.vtk", &vtk_legacy(mesh, &P2Space::new(mesh), Some(&s.field), "homogenized solution"))?;
    }
    Ok(())
}

/// Fine-scale solve for the realization of the master seed.
pub fn micro(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let g = &cfg.geometry;
    let problem = MicroProblem {
        mesh: build_perforated_mesh(&g.domain, &g.shape, cfg.micro.eps, g.h_per_cell)?,
        mu: cfg.fem.mu,
        model: cfg.forces.model.clone(),
        field: RandomCellField::new(cfg.seed, cfg.forces.model.law),
        force: cfg.forces.body,
        picard: cfg.micro.picard,
        solver: cfg.fem.solver,
    };
    let s = solve_micro(&problem)?;
    let pm = &problem.mesh;
    log::info!("{} particles, energy {:.8e}", pm.n_particles(), s.energy);
    out.write("micro_picard.csv", &picard_csv(&s.trace).render())?;
    let mut t = CsvTable::new("particles", &["particle", "i", "j", "amplitude", "m_x", "m_y", "omega"]);
    for (p, (k, m)) in pm.lattice.iter().zip(&s.motions).enumerate() {
        let a = problem.field.amplitude(*k);
        t.push(vec![p.to_string(), k[0].to_string(), k[1].to_string(), num(a), num(m.m[0]), num(m.m[1]), num(m.omega)]);
    }
    out.write("particles.csv", &t.render())?;
    let summary = json!({
        "eps": cfg.micro.eps,
        "particles": pm.n_particles(),
        "energy": s.energy,
        "weak_residual": s.weak_residual,
        "rigid_residual": s.rigid_residual,
        "picard_iterations": s.trace.len(),
    });
    out.write("micro.json", &to_json(&summary)?)?;
    if cfg.micro.vtk {
        out.write("micro.vtk", &vtk_legacy(&pm.mesh, &P2Space::new(&pm.mesh), Some(&s.field), "fine-scale solution"))?;
    }
    Ok(())
}

/// Sweep over `eps` and realizations against the homogenized solution.
pub fn converge(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let report = convergence_study(&cfg.study())?;
    let v = report.verdicts();
    log::info!(
        "L2 decreasing {}/{}, energy decreasing {}/{}, corrected decreasing {}/{}",
        v.l2_decreasing,
        v.seeds,
        v.energy_decreasing,
        v.seeds,
        v.corrected_decreasing,
        v.seeds
    );
    out.write("convergence.csv", &convergence_csv(&report).render())?;
    out.write("convergence.json", &to_json(&json!({ "metadata": report.metadata, "verdicts": v }))?)
}

pub fn dilute(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let r = dilute_study(&cfg.dilute())?;
    log::info!("slope {:.4} vs model {:.4}, relative error {:.3}", r.slope_extrapolated, r.oracle_slope, r.relative_error);
    out.write("dilute.csv", &dilute_csv(&r).render())?;
    out.write("dilute.json", &to_json(&r)?)
}
