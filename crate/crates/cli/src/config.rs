use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use susphom::{
    AmplitudeLaw, BodyForce, BoxDomain, DiluteConfig, InclusionShape, PicardOptions, Profile, SolveOptions, StudyConfig,
    SurfaceForceModel, Weight,
};

use crate::CliError;

/// Everything a run needs, one section per stage of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every random realization derives from it.
    pub seed: u64,
    pub jobs: usize,
    pub dim: usize,
    /// Output directory. Not echoed into the resolved config, so a re-run elsewhere hashes identically.
    #[serde(skip_serializing)]
    pub out: PathBuf,
    pub geometry: GeometryConfig,
    pub fem: FemConfig,
    pub cell: CellConfig,
    pub forces: ForcesConfig,
    #[serde(rename = "macro")]
    pub macroscale: MacroConfig,
    pub micro: MicroConfig,
    pub verify: VerifyConfig,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub domain: BoxDomain,
    pub shape: InclusionShape,
    /// Mesh size of the unit cell.
    pub h_per_cell: f64,
    /// Squares per side of the macro mesh.
    pub macro_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FemConfig {
    pub mu: f64,
    pub solver: SolveOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellConfig {
    pub tol: f64,
    /// Write the corrector fields as VTK.
    pub vtk: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForcesConfig {
    pub model: SurfaceForceModel,
    pub body: BodyForce,
    /// Monte Carlo samples per probe of `f*`.
    pub samples: usize,
    /// Velocities at which `f*` is evaluated.
    pub probes: Vec<[f64; 2]>,
    pub ergodic_eps: f64,
    /// Realizations of the ergodic average, seeded `seed, seed + 1, ...`.
    pub ergodic_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacroConfig {
    pub picard: PicardOptions,
    pub vtk: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MicroConfig {
    pub eps: f64,
    pub picard: PicardOptions,
    pub vtk: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub eps: Vec<f64>,
    /// Realizations per scale, seeded `seed, seed + 1, ...`.
    pub runs: usize,
    pub gap_degree: usize,
    pub dilute_phis: Vec<f64>,
    pub dilute_h: f64,
    pub dilute_order: f64,
}

/// Overrides applied on top of the per-section tolerances.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub solver: Option<f64>,
    pub picard: Option<f64>,
    pub cell: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            jobs: 1,
            dim: 2,
            out: PathBuf::from("out"),
            geometry: GeometryConfig::default(),
            fem: FemConfig::default(),
            cell: CellConfig::default(),
            forces: ForcesConfig::default(),
            macroscale: MacroConfig::default(),
            micro: MicroConfig::default(),
            verify: VerifyConfig::default(),
            tolerances: Tolerances::default(),
        }
    }
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let s = StudyConfig::default();
        GeometryConfig {
            domain: s.domain,
            shape: s.shape,
            h_per_cell: s.h_per_cell,
            macro_n: s.macro_n,
        }
    }
}

impl Default for FemConfig {
    fn default() -> Self {
        FemConfig {
            mu: 1.0,
            solver: SolveOptions::default(),
        }
    }
}

impl Default for CellConfig {
    fn default() -> Self {
        CellConfig { tol: 1e-10, vtk: true }
    }
}

impl Default for ForcesConfig {
    fn default() -> Self {
        let s = StudyConfig::default();
        ForcesConfig {
            model: SurfaceForceModel::new(Profile::Sqrt1p, Weight::default(), AmplitudeLaw::default()),
            body: s.force,
            samples: 4000,
            probes: vec![[0.0, 0.0], [1.0, 0.0], [0.5, -2.0]],
            ergodic_eps: 1.0 / 64.0,
            ergodic_runs: 20,
        }
    }
}

impl Default for MacroConfig {
    fn default() -> Self {
        MacroConfig {
            picard: PicardOptions::default(),
            vtk: true,
        }
    }
}

impl Default for MicroConfig {
    fn default() -> Self {
        MicroConfig {
            eps: 0.125,
            picard: StudyConfig::default().picard,
            vtk: true,
        }
    }
}

impl Default for VerifyConfig {
    fn default() -> Self {
        let s = StudyConfig::default();
        let d = DiluteConfig::default();
        VerifyConfig {
            eps: s.eps,
            runs: s.seeds.len(),
            gap_degree: s.gap_degree,
            dilute_phis: d.phis,
            dilute_h: d.h,
            dilute_order: d.order,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Fold the tolerance overrides into their sections and check the run-level fields.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let t = std::mem::take(&mut self.tolerances);
        if let Some(v) = t.solver {
            self.fem.solver.tol = v;
        }
        if let Some(v) = t.picard {
            self.macroscale.picard.tol = v;
            self.micro.picard.tol = v;
        }
        if let Some(v) = t.cell {
            self.cell.tol = v;
        }
        if self.dim != 2 {
            return Err(CliError::Config(format!("dim = {} is not supported, only 2", self.dim)));
        }
        if self.jobs == 0 {
            return Err(CliError::Config("jobs must be at least 1".into()));
        }
        let positive = [
            ("geometry.h_per_cell", self.geometry.h_per_cell),
            ("fem.mu", self.fem.mu),
            ("cell.tol", self.cell.tol),
            ("fem.solver.tol", self.fem.solver.tol),
            ("micro.eps", self.micro.eps),
            ("forces.ergodic_eps", self.forces.ergodic_eps),
            ("verify.dilute_h", self.verify.dilute_h),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(CliError::Config(format!("{name} = {v} must be positive")));
        }
        if self.geometry.macro_n == 0 || self.verify.runs == 0 {
            return Err(CliError::Config("geometry.macro_n and verify.runs must be positive".into()));
        }
        Ok(self)
    }

    /// The resolved configuration as TOML; parsing it back reproduces `self` apart from `out`.
    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn seeds(&self, n: usize) -> Vec<u64> {
        (0..n as u64).map(|k| self.seed.wrapping_add(k)).collect()
    }

    pub fn study(&self) -> StudyConfig {
        StudyConfig {
            domain: self.geometry.domain,
            shape: self.geometry.shape,
            mu: self.fem.mu,
            eps: self.verify.eps.clone(),
            seeds: self.seeds(self.verify.runs),
            h_per_cell: self.geometry.h_per_cell,
            macro_n: self.geometry.macro_n,
            model: self.forces.model.clone(),
            force: self.forces.body,
            picard: self.micro.picard,
            solver: self.fem.solver,
            cell_tol: self.cell.tol,
            gap_degree: self.verify.gap_degree,
            jobs: self.jobs,
        }
    }

    pub fn dilute(&self) -> DiluteConfig {
        DiluteConfig {
            kind: self.geometry.shape.kind,
            phis: self.verify.dilute_phis.clone(),
            mu: self.fem.mu,
            h: self.verify.dilute_h,
            tol: self.cell.tol,
            order: self.verify.dilute_order,
            dim: self.dim,
            jobs: self.jobs,
        }
    }
}
