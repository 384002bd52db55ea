//! Random surface forces `g(s, z, w) = a(w) w(s) rho(z)`, their ergodic sampling and
//! the averaged volumetric force.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Uniform};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fem::P2Space;
use crate::geometry::{BoxDomain, InclusionShape, Mesh, PerforatedMesh};
use crate::quadrature::gauss_unit_interval;
use crate::sparse::pairwise_sum;

/// Prescribed volumetric force `f(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BodyForce {
    #[default]
    Zero,
    Constant { value: [f64; 2] },
    /// `amplitude (sin(pi y), -sin(pi x))`, a rotational force.
    Swirl { amplitude: f64 },
    /// `amplitude (-(y - c_y), x - c_x) / radius * exp(-|x - c|^2 / radius^2)`, a localized vortex.
    Vortex { amplitude: f64, center: [f64; 2], radius: f64 },
}

impl BodyForce {
    pub fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        match *self {
            BodyForce::Zero => [0.0, 0.0],
            BodyForce::Constant { value } => value,
            BodyForce::Swirl { amplitude } => [amplitude * (PI * x[1]).sin(), -amplitude * (PI * x[0]).sin()],
            BodyForce::Vortex { amplitude, center, radius } => {
                let d = [x[0] - center[0], x[1] - center[1]];
                let s = amplitude / radius * (-(d[0] * d[0] + d[1] * d[1]) / (radius * radius)).exp();
                [-s * d[1], s * d[0]]
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            BodyForce::Zero => true,
            BodyForce::Constant { value } => value == [0.0, 0.0],
            BodyForce::Swirl { amplitude } => amplitude == 0.0,
            BodyForce::Vortex { amplitude, .. } => amplitude == 0.0,
        }
    }
}

/// Convex, Lipschitz profile `rho(z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    /// `rho(z) = b . z`
    Linear { b: [f64; 2] },
    /// `rho(z) = sqrt(1 + |z|^2) - 1`
    Sqrt1p,
    /// Quadratic for `|z| <= kappa`, linear beyond.
    Huber { kappa: f64 },
}

impl Profile {
    pub fn value(&self, z: [f64; 2]) -> f64 {
        let n2 = z[0] * z[0] + z[1] * z[1];
        match *self {
            Profile::Linear { b } => b[0] * z[0] + b[1] * z[1],
            // written to avoid cancellation for small |z|
            Profile::Sqrt1p => n2 / ((1.0 + n2).sqrt() + 1.0),
            Profile::Huber { kappa } => {
                let n = n2.sqrt();
                if n <= kappa {
                    n2 / (2.0 * kappa)
                } else {
                    n - 0.5 * kappa
                }
            }
        }
    }

    pub fn grad(&self, z: [f64; 2]) -> [f64; 2] {
        let n2 = z[0] * z[0] + z[1] * z[1];
        match *self {
            Profile::Linear { b } => b,
            Profile::Sqrt1p => {
                let s = (1.0 + n2).sqrt();
                [z[0] / s, z[1] / s]
            }
            Profile::Huber { kappa } => {
                let n = n2.sqrt();
                let s = if n <= kappa { 1.0 / kappa } else { 1.0 / n };
                [z[0] * s, z[1] * s]
            }
        }
    }

    /// Lipschitz constant of `rho`.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            Profile::Linear { b } => (b[0] * b[0] + b[1] * b[1]).sqrt(),
            Profile::Sqrt1p | Profile::Huber { .. } => 1.0,
        }
    }

    /// Whether the gradient does not depend on `z`.
    pub fn is_affine(&self) -> bool {
        matches!(self, Profile::Linear { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Profile::Huber { kappa } if !(kappa > 0.0 && kappa.is_finite()) => {
                Err(Error::InvalidInput(format!("huber kappa {kappa} must be positive")))
            }
            Profile::Linear { b } if !b.iter().all(|x| x.is_finite()) => {
                Err(Error::InvalidInput("linear profile direction is not finite".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Spatial weight along the inclusion boundary, a function of the arclength fraction `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Weight {
    Constant { value: f64 },
    /// `c0 + sum_k cos[k] cos(2 pi (k+1) s) + sin[k] sin(2 pi (k+1) s)`
    Fourier {
        c0: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
}

impl Default for Weight {
    fn default() -> Self {
        Weight::Constant { value: 1.0 }
    }
}

impl Weight {
    pub fn value(&self, s: f64) -> f64 {
        match self {
            Weight::Constant { value } => *value,
            Weight::Fourier { c0, cos, sin } => {
                let mut w = *c0;
                for (k, c) in cos.iter().enumerate() {
                    w += c * (2.0 * PI * (k + 1) as f64 * s).cos();
                }
                for (k, c) in sin.iter().enumerate() {
                    w += c * (2.0 * PI * (k + 1) as f64 * s).sin();
                }
                w
            }
        }
    }

    /// Mean over one period of the arclength fraction.
    pub fn mean(&self) -> f64 {
        match self {
            Weight::Constant { value } => *value,
            Weight::Fourier { c0, .. } => *c0,
        }
    }

    /// Upper bound of `w`.
    pub fn sup(&self) -> f64 {
        match self {
            Weight::Constant { value } => *value,
            Weight::Fourier { c0, cos, sin } => c0 + cos.iter().chain(sin).map(|c| c.abs()).sum::<f64>(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Weight::Constant { value } => *value >= 0.0 && value.is_finite(),
            Weight::Fourier { c0, cos, sin } => {
                c0.is_finite() && *c0 >= cos.iter().chain(sin).map(|c| c.abs()).sum::<f64>()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput("surface weight must be finite and nonnegative".into()))
        }
    }
}

/// Distribution of the per-particle amplitude `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AmplitudeLaw {
    Uniform { lo: f64, hi: f64 },
    LogNormal { mu_ln: f64, sigma_ln: f64 },
}

impl Default for AmplitudeLaw {
    fn default() -> Self {
        AmplitudeLaw::Uniform { lo: 0.5, hi: 1.5 }
    }
}

impl AmplitudeLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            AmplitudeLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
            AmplitudeLaw::LogNormal { mu_ln, sigma_ln } => (mu_ln + 0.5 * sigma_ln * sigma_ln).exp(),
        }
    }

    pub fn std(&self) -> f64 {
        match *self {
            AmplitudeLaw::Uniform { lo, hi } => (hi - lo) / 12f64.sqrt(),
            AmplitudeLaw::LogNormal { mu_ln, sigma_ln } => {
                let s2 = sigma_ln * sigma_ln;
                ((s2.exp() - 1.0) * (2.0 * mu_ln + s2).exp()).sqrt()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            AmplitudeLaw::Uniform { lo, hi } => lo >= 0.0 && hi >= lo && hi.is_finite(),
            AmplitudeLaw::LogNormal { mu_ln, sigma_ln } => mu_ln.is_finite() && sigma_ln >= 0.0 && sigma_ln.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid amplitude law {self:?}")))
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            AmplitudeLaw::Uniform { lo, hi } => {
                if hi == lo {
                    lo
                } else {
                    Uniform::new(lo, hi).expect("validated bounds").sample(rng)
                }
            }
            AmplitudeLaw::LogNormal { mu_ln, sigma_ln } => {
                LogNormal::new(mu_ln, sigma_ln).expect("validated parameters").sample(rng)
            }
        }
    }
}

/// `g(s, z, a) = a w(s) rho(z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceForceModel {
    pub profile: Profile,
    #[serde(default)]
    pub weight: Weight,
    #[serde(default)]
    pub law: AmplitudeLaw,
}

impl SurfaceForceModel {
    pub fn new(profile: Profile, weight: Weight, law: AmplitudeLaw) -> Self {
        SurfaceForceModel { profile, weight, law }
    }

    /// The model with `g = 0`.
    pub fn zero() -> Self {
        SurfaceForceModel {
            profile: Profile::Sqrt1p,
            weight: Weight::Constant { value: 0.0 },
            law: AmplitudeLaw::Uniform { lo: 1.0, hi: 1.0 },
        }
    }

    pub fn is_zero(&self) -> bool {
        self.weight.sup() == 0.0 || matches!(self.law, AmplitudeLaw::Uniform { lo, hi } if lo == 0.0 && hi == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        self.weight.validate()?;
        self.law.validate()
    }

    /// `g(s, z)` for amplitude `a` at arclength fraction `s`.
    pub fn g(&self, s: f64, z: [f64; 2], a: f64) -> f64 {
        a * self.weight.value(s) * self.profile.value(z)
    }

    /// `grad_z g(s, z)`.
    pub fn grad_g(&self, s: f64, z: [f64; 2], a: f64) -> [f64; 2] {
        let c = a * self.weight.value(s);
        let r = self.profile.grad(z);
        [c * r[0], c * r[1]]
    }

    /// `E[a] int_{dT} w ds`, the factor turning `rho` into the averaged surface density.
    pub fn expected_density(&self, shape: &InclusionShape) -> f64 {
        self.law.mean() * self.weight.mean() * shape.perimeter()
    }

    /// Closed-form `f*(z) = -E[a] (int w) grad rho(z)`.
    pub fn homogenized_force_exact(&self, shape: &InclusionShape, z: [f64; 2]) -> [f64; 2] {
        let k = self.expected_density(shape);
        let r = self.profile.grad(z);
        [-k * r[0], -k * r[1]]
    }
}

/// Independent amplitudes `a(tau_k w)` for every lattice index, reproducible from the seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomCellField {
    pub seed: u64,
    pub law: AmplitudeLaw,
    /// Lattice shift `l`: sampling at `k` returns the base field at `k + l`.
    #[serde(default)]
    pub shift: [i64; 2],
}

impl RandomCellField {
    pub fn new(seed: u64, law: AmplitudeLaw) -> Self {
        RandomCellField { seed, law, shift: [0, 0] }
    }

    fn stream(k: [i64; 2]) -> u64 {
        ((k[0] as u32 as u64) << 32) | (k[1] as u32 as u64)
    }

    /// The generator for index `k`, independent of every other index.
    pub fn rng(&self, k: [i64; 2]) -> ChaCha8Rng {
        let k = [k[0] + self.shift[0], k[1] + self.shift[1]];
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(Self::stream(k));
        rng
    }

    pub fn amplitude(&self, k: [i64; 2]) -> f64 {
        self.law.sample(&mut self.rng(k))
    }

    /// The field composed with the lattice shift by `l`.
    pub fn shifted(&self, l: [i64; 2]) -> Self {
        RandomCellField {
            shift: [self.shift[0] + l[0], self.shift[1] + l[1]],
            ..*self
        }
    }
}

/// Monte Carlo estimate with a 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceEstimate {
    pub value: [f64; 2],
    pub half_width: f64,
}

/// `int_0^1 w(s) ds` by composite Gauss quadrature (4 points on each of `n` pieces).
pub fn weight_integral(weight: &Weight, n: usize) -> f64 {
    let (x, w) = gauss_unit_interval(4);
    let h = 1.0 / n as f64;
    let parts: Vec<f64> = (0..n)
        .map(|i| x.iter().zip(&w).map(|(t, wt)| wt * weight.value((i as f64 + t) * h)).sum::<f64>() * h)
        .collect();
    pairwise_sum(&parts)
}

/// `f*(z) = -int_{dT} E[grad_z g(s, z, .)] ds` with the expectation sampled from `field`.
///
/// Samples are taken along the lattice row `k = (i, 0)`, `i = 0..n_samples`.
pub fn homogenized_force(
    model: &SurfaceForceModel,
    shape: &InclusionShape,
    z: [f64; 2],
    n_samples: usize,
    field: &RandomCellField,
) -> Result<ForceEstimate> {
    if n_samples < 2 {
        return Err(Error::InvalidInput("homogenized force needs at least two samples".into()));
    }
    let samples: Vec<f64> = (0..n_samples as i64).map(|i| field.amplitude([i, 0])).collect();
    let n = n_samples as f64;
    let mean = pairwise_sum(&samples) / n;
    let dev: Vec<f64> = samples.iter().map(|a| (a - mean).powi(2)).collect();
    let sd = (pairwise_sum(&dev) / (n - 1.0)).sqrt();
    let surface = weight_integral(&model.weight, 64) * shape.perimeter();
    let r = model.profile.grad(z);
    let rn = (r[0] * r[0] + r[1] * r[1]).sqrt();
    Ok(ForceEstimate {
        value: [-mean * surface * r[0], -mean * surface * r[1]],
        half_width: 1.96 * sd / n.sqrt() * surface * rn,
    })
}

/// `f*` sampled on a square grid and interpolated bilinearly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForceTable {
    pub half_range: f64,
    pub n: usize,
    pub values: Vec<[f64; 2]>,
    /// Set when `f*` is independent of `z`.
    pub constant: Option<[f64; 2]>,
}

impl ForceTable {
    /// Tabulate `f` on `[-half_range, half_range]^2` with `n + 1` nodes per axis.
    pub fn build(f: impl Fn([f64; 2]) -> [f64; 2] + Sync, half_range: f64, n: usize) -> Self {
        let n = n.max(1);
        let hr = half_range.max(1e-12);
        let mut values = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                let z = [-hr + 2.0 * hr * i as f64 / n as f64, -hr + 2.0 * hr * j as f64 / n as f64];
                values.push(f(z));
            }
        }
        ForceTable {
            half_range: hr,
            n,
            values,
            constant: None,
        }
    }

    pub fn constant(value: [f64; 2]) -> Self {
        ForceTable {
            half_range: 0.0,
            n: 0,
            values: vec![value],
            constant: Some(value),
        }
    }

    /// Closed-form table for `model`, exact when the profile is affine.
    pub fn for_model(model: &SurfaceForceModel, shape: &InclusionShape, half_range: f64, n: usize) -> Self {
        if model.profile.is_affine() || model.is_zero() {
            return Self::constant(model.homogenized_force_exact(shape, [0.0, 0.0]));
        }
        Self::build(|z| model.homogenized_force_exact(shape, z), half_range, n)
    }

    pub fn eval(&self, z: [f64; 2]) -> [f64; 2] {
        if let Some(c) = self.constant {
            return c;
        }
        let n = self.n;
        let h = 2.0 * self.half_range / n as f64;
        let mut idx = [0usize; 2];
        let mut t = [0.0; 2];
        for d in 0..2 {
            let x = ((z[d] + self.half_range) / h).clamp(0.0, n as f64);
            let i = (x.floor() as usize).min(n - 1);
            idx[d] = i;
            t[d] = x - i as f64;
        }
        let at = |i: usize, j: usize| self.values[j * (n + 1) + i];
        let mut out = [0.0; 2];
        for c in 0..2 {
            out[c] = (1.0 - t[0]) * (1.0 - t[1]) * at(idx[0], idx[1])[c]
                + t[0] * (1.0 - t[1]) * at(idx[0] + 1, idx[1])[c]
                + (1.0 - t[0]) * t[1] * at(idx[0], idx[1] + 1)[c]
                + t[0] * t[1] * at(idx[0] + 1, idx[1] + 1)[c];
        }
        out
    }
}

/// Indices `k` whose closed cells `eps (k + [0,1]^2)` lie in the closure of `domain`.
pub fn ergodic_indices(domain: &BoxDomain, eps: f64) -> Vec<[i64; 2]> {
    let mut range = [(0i64, 0i64); 2];
    for d in 0..2 {
        let lo = (domain.lo[d] / eps - 1e-9).ceil() as i64;
        let hi = (domain.hi[d] / eps + 1e-9).floor() as i64 - 1;
        range[d] = (lo, hi);
    }
    let mut out = Vec::new();
    for j in range[1].0..=range[1].1 {
        for i in range[0].0..=range[0].1 {
            out.push([i, j]);
        }
    }
    out
}

/// `eps^2 sum_k h(average of u over cell k, a_k)`.
pub fn ergodic_average(
    h: impl Fn([f64; 2], f64) -> f64,
    u: impl Fn([f64; 2]) -> [f64; 2],
    domain: &BoxDomain,
    eps: f64,
    field: &RandomCellField,
) -> f64 {
    const M: usize = 4;
    let terms: Vec<f64> = ergodic_indices(domain, eps)
        .into_iter()
        .map(|k| {
            let mut avg = [0.0; 2];
            for j in 0..M {
                for i in 0..M {
                    let x = [
                        eps * (k[0] as f64 + (i as f64 + 0.5) / M as f64),
                        eps * (k[1] as f64 + (j as f64 + 0.5) / M as f64),
                    ];
                    let v = u(x);
                    avg[0] += v[0];
                    avg[1] += v[1];
                }
            }
            let m2 = (M * M) as f64;
            h([avg[0] / m2, avg[1] / m2], field.amplitude(k))
        })
        .collect();
    eps * eps * pairwise_sum(&terms)
}

/// Trace of a quadratic velocity along one straight edge, at parameter `t`.
fn edge_trace(ua: [f64; 2], ub: [f64; 2], um: [f64; 2], t: f64) -> [f64; 2] {
    let (na, nb, nm) = ((1.0 - t) * (1.0 - 2.0 * t), t * (2.0 * t - 1.0), 4.0 * t * (1.0 - t));
    [na * ua[0] + nb * ub[0] + nm * um[0], na * ua[1] + nb * ub[1] + nm * um[1]]
}

/// Quadrature points on particle `p`: (arclength fraction, weight `ds`, edge nodes, edge parameter).
fn particle_quadrature(mesh: &Mesh, space: &P2Space, p: usize) -> Vec<(f64, f64, [usize; 3], f64)> {
    let (x, w) = gauss_unit_interval(4);
    let mut out = Vec::new();
    for f in mesh.particle_facets(p) {
        let [a, b] = f.vertices;
        let m = space.edge_node(a, b).expect("boundary facet is a mesh edge");
        let len = f.length();
        for (t, wt) in x.iter().zip(&w) {
            let s = f.sigma[0] + t * (f.sigma[1] - f.sigma[0]);
            out.push((s, wt * len, [a, b, m], *t));
        }
    }
    out
}

/// `sum_k int_{dT_k^eps} eps g(s/eps, v, a_k) ds` over all particles of `pm`.
pub fn surface_energy_micro(
    model: &SurfaceForceModel,
    field: &RandomCellField,
    pm: &PerforatedMesh,
    space: &P2Space,
    v: &[[f64; 2]],
) -> f64 {
    let mesh = &pm.mesh;
    let terms: Vec<f64> = (0..mesh.particles.len())
        .map(|p| {
            let a = field.amplitude(mesh.particles[p].lattice);
            let s: f64 = particle_quadrature(mesh, space, p)
                .into_iter()
                .map(|(sig, ds, [na, nb, nm], t)| ds * model.g(sig, edge_trace(v[na], v[nb], v[nm], t), a))
                .sum();
            pm.eps * s
        })
        .collect();
    pairwise_sum(&terms)
}

/// Nodal load `-sum_k eps int grad_z g(s/eps, v, a_k) . phi_i ds` for every velocity node.
pub fn surface_load(
    model: &SurfaceForceModel,
    field: &RandomCellField,
    pm: &PerforatedMesh,
    space: &P2Space,
    v: &[[f64; 2]],
) -> Vec<[f64; 2]> {
    let mesh = &pm.mesh;
    let mut out = vec![[0.0; 2]; space.n_nodes()];
    for p in 0..mesh.particles.len() {
        let a = field.amplitude(mesh.particles[p].lattice);
        for (sig, ds, nodes, t) in particle_quadrature(mesh, space, p) {
            let z = edge_trace(v[nodes[0]], v[nodes[1]], v[nodes[2]], t);
            let gr = model.grad_g(sig, z, a);
            let shape = [(1.0 - t) * (1.0 - 2.0 * t), t * (2.0 * t - 1.0), 4.0 * t * (1.0 - t)];
            for (n, s) in nodes.iter().zip(shape) {
                out[*n][0] -= pm.eps * ds * gr[0] * s;
                out[*n][1] -= pm.eps * ds * gr[1] * s;
            }
        }
    }
    out
}
