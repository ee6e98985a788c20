//! Closed-form Euler–Lagrange dynamics of planar chains with one or two
//! revolute joints about z.
//!
//! Link `i` rotates by the absolute angle `φ_i = q_1 + … + q_i`; link 2's
//! joint sits at distance `length` along link 1's x axis. Only plain scalar
//! arithmetic is used.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanarLink {
    pub mass: f64,
    /// Center of mass `(c_x, c_y)` in the link frame.
    pub com: [f64; 2],
    /// Moment of inertia about z through the center of mass.
    pub izz: f64,
    /// Distance from this link's joint to the next joint along x.
    pub length: f64,
}

impl PlanarLink {
    /// Moment of inertia about the joint axis.
    fn izz_joint(&self) -> f64 {
        self.izz + self.mass * (self.com[0] * self.com[0] + self.com[1] * self.com[1])
    }
}

fn rot(a: f64, v: [f64; 2]) -> [f64; 2] {
    let (s, c) = a.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// `ẑ × v` in the plane.
fn perp(v: [f64; 2]) -> [f64; 2] {
    [-v[1], v[0]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Mass matrix in row-major order (`n × n`, `n ∈ {1, 2}`).
pub fn mass_matrix(links: &[PlanarLink], q: &[f64]) -> Result<Vec<f64>> {
    match links.len() {
        1 => Ok(vec![links[0].izz_joint()]),
        2 => {
            let (l1, l2) = (&links[0], &links[1]);
            let beta = l2.com[0] * q[1].cos() - l2.com[1] * q[1].sin();
            let j2 = l2.izz_joint();
            let m11 = l1.izz_joint() + l2.mass * l1.length * l1.length + j2 + 2.0 * l2.mass * l1.length * beta;
            let m12 = j2 + l2.mass * l1.length * beta;
            Ok(vec![m11, m12, m12, j2])
        }
        n => Err(Error::Validation(format!("Lagrangian oracle supports 1 or 2 links, got {n}"))),
    }
}

/// Joint torques `M(q)q̈ + C(q,q̇)q̇ + G(q)` for gravity `g = (g_x, g_y)`.
pub fn lagrangian_oracle(links: &[PlanarLink], q: &[f64], qd: &[f64], qdd: &[f64], g: [f64; 2]) -> Result<Vec<f64>> {
    let n = links.len();
    if q.len() != n || qd.len() != n || qdd.len() != n {
        return Err(Error::Dimension("state length must equal the number of links".into()));
    }
    let m = mass_matrix(links, q)?;
    match n {
        1 => {
            let l = &links[0];
            let grav = -l.mass * dot(g, perp(rot(q[0], l.com)));
            Ok(vec![m[0] * qdd[0] + grav])
        }
        _ => {
            let (l1, l2) = (&links[0], &links[1]);
            let dbeta = -l2.com[0] * q[1].sin() - l2.com[1] * q[1].cos();
            let h = l2.mass * l1.length * dbeta;
            let phi2 = q[0] + q[1];
            let r1 = rot(q[0], l1.com);
            let r2 = rot(phi2, l2.com);
            let e1 = rot(q[0], [l1.length, 0.0]);
            let g1 = -l1.mass * dot(g, perp(r1)) - l2.mass * dot(g, perp([e1[0] + r2[0], e1[1] + r2[1]]));
            let g2 = -l2.mass * dot(g, perp(r2));
            let tau1 = m[0] * qdd[0] + m[1] * qdd[1] + 2.0 * h * qd[0] * qd[1] + h * qd[1] * qd[1] + g1;
            let tau2 = m[2] * qdd[0] + m[3] * qdd[1] - h * qd[0] * qd[0] + g2;
            Ok(vec![tau1, tau2])
        }
    }
}

/// Static derivative `∂τ/∂q` of the one-link pendulum.
pub fn pendulum_gravity_gradient(link: &PlanarLink, q: f64, g: [f64; 2]) -> f64 {
    let c = rot(q, link.com);
    // d/dq (ẑ × R(q)c) = ẑ × ẑ × R(q)c = -R(q)c
    link.mass * dot(g, c)
}
