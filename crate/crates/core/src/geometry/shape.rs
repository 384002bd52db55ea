use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Default minimum gap between the inclusion and the cell boundary.
pub const DEFAULT_MIN_GAP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ShapeKind {
    Disk,
    /// Semi-axis ratio `b / a` (vertical over horizontal).
    Ellipse { aspect: f64 },
    /// Square with rounded corners; `corner_ratio` is corner radius over half-side, in `(0, 1]`.
    RoundedSquare { corner_ratio: f64 },
}

/// Rigid inclusion `T` inside the unit cell `Y = (-1/2, 1/2)^2`, centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InclusionShape {
    pub kind: ShapeKind,
    pub volume_fraction: f64,
    #[serde(default = "default_gap")]
    pub min_gap: f64,
}

fn default_gap() -> f64 {
    DEFAULT_MIN_GAP
}

impl InclusionShape {
    pub fn new(kind: ShapeKind, volume_fraction: f64) -> Self {
        InclusionShape {
            kind,
            volume_fraction,
            min_gap: DEFAULT_MIN_GAP,
        }
    }

    pub fn disk(volume_fraction: f64) -> Self {
        Self::new(ShapeKind::Disk, volume_fraction)
    }

    pub fn is_empty(&self) -> bool {
        self.volume_fraction == 0.0
    }

    /// Characteristic half-lengths `(a, b)`: semi-axes for ellipses, half-side twice for squares.
    pub fn half_lengths(&self) -> (f64, f64) {
        let phi = self.volume_fraction;
        match self.kind {
            ShapeKind::Disk => {
                let r = (phi / PI).sqrt();
                (r, r)
            }
            ShapeKind::Ellipse { aspect } => {
                let a = (phi / (PI * aspect)).sqrt();
                (a, a * aspect)
            }
            ShapeKind::RoundedSquare { corner_ratio } => {
                let a = (phi / (4.0 - (4.0 - PI) * corner_ratio * corner_ratio)).sqrt();
                (a, a)
            }
        }
    }

    pub fn radius(&self) -> f64 {
        self.half_lengths().0
    }

    /// Largest volume fraction that keeps the minimum gap.
    pub fn phi_max(kind: ShapeKind, min_gap: f64) -> f64 {
        let m = 0.5 - min_gap;
        match kind {
            ShapeKind::Disk => PI * m * m,
            ShapeKind::Ellipse { aspect } => {
                let (a, b) = if aspect >= 1.0 { (m / aspect, m) } else { (m, m * aspect) };
                PI * a * b
            }
            ShapeKind::RoundedSquare { corner_ratio } => {
                m * m * (4.0 - (4.0 - PI) * corner_ratio * corner_ratio)
            }
        }
    }

    /// Distance between the inclusion boundary and the cell boundary.
    pub fn gap(&self) -> f64 {
        let (a, b) = self.half_lengths();
        0.5 - a.max(b)
    }

    pub fn validate(&self) -> Result<()> {
        let phi = self.volume_fraction;
        if !(phi.is_finite() && phi >= 0.0) {
            return Err(Error::InvalidInput(format!("volume fraction {phi} must be >= 0")));
        }
        match self.kind {
            ShapeKind::Ellipse { aspect } if !(aspect > 0.0 && aspect.is_finite()) => {
                return Err(Error::InvalidInput(format!("ellipse aspect {aspect} must be > 0")));
            }
            ShapeKind::RoundedSquare { corner_ratio } if !(corner_ratio > 0.0 && corner_ratio <= 1.0) => {
                return Err(Error::InvalidInput(format!(
                    "corner ratio {corner_ratio} must be in (0, 1]"
                )));
            }
            _ => {}
        }
        if phi > 0.0 && self.gap() < self.min_gap {
            return Err(Error::ShapeTouchesBoundary {
                gap: self.gap(),
                min: self.min_gap,
            });
        }
        Ok(())
    }

    /// Boundary point at parameter `t` (polar angle for disks and rounded squares,
    /// parametric angle for ellipses).
    pub fn boundary_point(&self, t: f64) -> [f64; 2] {
        let (a, b) = self.half_lengths();
        match self.kind {
            ShapeKind::Disk | ShapeKind::Ellipse { .. } => [a * t.cos(), b * t.sin()],
            ShapeKind::RoundedSquare { corner_ratio } => {
                let r = rounded_square_radius(a, corner_ratio * a, t);
                [r * t.cos(), r * t.sin()]
            }
        }
    }

    pub fn area(&self) -> f64 {
        self.volume_fraction
    }

    pub fn perimeter(&self) -> f64 {
        let (a, b) = self.half_lengths();
        match self.kind {
            ShapeKind::Disk => 2.0 * PI * a,
            ShapeKind::Ellipse { .. } => {
                // Gauss quadrature of the arclength integrand; smooth and periodic.
                let n = 256;
                (0..n)
                    .map(|i| {
                        let t = 2.0 * PI * (i as f64 + 0.5) / n as f64;
                        (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt()
                    })
                    .sum::<f64>()
                    * 2.0
                    * PI
                    / n as f64
            }
            ShapeKind::RoundedSquare { corner_ratio } => {
                let rho = corner_ratio * a;
                8.0 * (a - rho) + 2.0 * PI * rho
            }
        }
    }
}

/// Polar radius of a square with half-side `a` and corner radius `rho` in direction `t`.
fn rounded_square_radius(a: f64, rho: f64, t: f64) -> f64 {
    // reduce to the first octant
    let mut th = t.rem_euclid(PI / 2.0);
    if th > PI / 4.0 {
        th = PI / 2.0 - th;
    }
    let (s, c) = th.sin_cos();
    let straight = a / c;
    if straight * s <= a - rho {
        return straight;
    }
    let k = a - rho;
    let uc = k * (c + s);
    uc + (uc * uc - 2.0 * k * k + rho * rho).sqrt()
}
