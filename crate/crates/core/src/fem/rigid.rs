use serde::{Deserialize, Serialize};

/// Velocity field `x -> M (x - center) + m` with `M` skew-symmetric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidMotion {
    pub m: [f64; 2],
    /// Angular velocity; `M = [[0, -omega], [omega, 0]]`.
    pub omega: f64,
    pub center: [f64; 2],
}

impl RigidMotion {
    pub fn new(m: [f64; 2], omega: f64, center: [f64; 2]) -> Self {
        RigidMotion { m, omega, center }
    }

    pub fn skew(&self) -> [[f64; 2]; 2] {
        [[0.0, -self.omega], [self.omega, 0.0]]
    }

    pub fn velocity(&self, x: [f64; 2]) -> [f64; 2] {
        let r = [x[0] - self.center[0], x[1] - self.center[1]];
        [self.m[0] - self.omega * r[1], self.m[1] + self.omega * r[0]]
    }

    /// Least-squares fit to velocity samples.
    pub fn fit(points: &[[f64; 2]], values: &[[f64; 2]], center: [f64; 2]) -> Self {
        // unknowns (m_x, m_y, omega); rows u_x = m_x - omega r_y, u_y = m_y + omega r_x
        let mut ata = nalgebra::Matrix3::<f64>::zeros();
        let mut atb = nalgebra::Vector3::<f64>::zeros();
        for (x, u) in points.iter().zip(values) {
            let r = [x[0] - center[0], x[1] - center[1]];
            let rows = [([1.0, 0.0, -r[1]], u[0]), ([0.0, 1.0, r[0]], u[1])];
            for (a, b) in rows {
                let a = nalgebra::Vector3::from(a);
                ata += a * a.transpose();
                atb += a * b;
            }
        }
        let sol = ata
            .lu()
            .solve(&atb)
            .unwrap_or_else(nalgebra::Vector3::zeros);
        RigidMotion::new([sol[0], sol[1]], sol[2], center)
    }

    /// Largest deviation of the samples from this motion.
    pub fn max_deviation(&self, points: &[[f64; 2]], values: &[[f64; 2]]) -> f64 {
        points
            .iter()
            .zip(values)
            .map(|(x, u)| {
                let v = self.velocity(*x);
                (u[0] - v[0]).abs().max((u[1] - v[1]).abs())
            })
            .fold(0.0, f64::max)
    }
}
