//! Clamped B-splines.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kinodynamics::JointCoordSeries;
use crate::series::factorial;

/// `p+1` copies of `0` and `t_end` around uniform interior knots.
pub fn clamped_uniform_knots(p: usize, n_c: usize, t_end: f64) -> Vec<f64> {
    let interior = n_c - p - 1;
    let mut k = vec![0.0; p + 1];
    for i in 1..=interior {
        k.push(t_end * i as f64 / (interior + 1) as f64);
    }
    k.extend(std::iter::repeat_n(t_end, p + 1));
    k
}

fn last_nonempty_span(knots: &[f64]) -> usize {
    (0..knots.len() - 1).rev().find(|&s| knots[s] < knots[s + 1]).unwrap_or(0)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// `k`-th derivative of basis function `i` of degree `p` (Cox–de Boor).
/// Empty spans contribute zero; `t` equal to the last knot belongs to the last span.
pub fn bspline_basis(i: usize, p: usize, t: f64, knots: &[f64], k: usize) -> f64 {
    if k > p {
        return 0.0;
    }
    if p == 0 {
        let last = *knots.last().unwrap();
        let inside = knots[i] <= t && t < knots[i + 1];
        let at_end = t >= last && i == last_nonempty_span(knots);
        return if inside || at_end { 1.0 } else { 0.0 };
    }
    let d1 = knots[i + p] - knots[i];
    let d2 = knots[i + p + 1] - knots[i + 1];
    if k == 0 {
        ratio(t - knots[i], d1) * bspline_basis(i, p - 1, t, knots, 0)
            + ratio(knots[i + p + 1] - t, d2) * bspline_basis(i + 1, p - 1, t, knots, 0)
    } else {
        p as f64
            * (ratio(bspline_basis(i, p - 1, t, knots, k - 1), d1)
                - ratio(bspline_basis(i + 1, p - 1, t, knots, k - 1), d2))
    }
}

/// Spline over `[0, T]` for `n_q` joint coordinates. `θ` stacks control
/// points `m_0, …, m_{n_c-1}`, each of length `n_q`.
#[derive(Clone, Debug)]
pub struct BSplineTrajectory {
    pub degree: usize,
    pub knots: Vec<f64>,
    pub n_c: usize,
    pub n_q: usize,
    pub duration: f64,
    pub theta: DVector<f64>,
}

impl BSplineTrajectory {
    pub fn new(degree: usize, n_c: usize, n_q: usize, duration: f64, theta: DVector<f64>) -> Result<Self> {
        if degree == 0 || n_c < degree + 1 {
            return Err(Error::Validation(format!(
                "spline needs degree ≥ 1 and at least degree+1 control points (degree {degree}, {n_c} points)"
            )));
        }
        if !(duration > 0.0) {
            return Err(Error::Validation("spline duration must be positive".into()));
        }
        if theta.len() != n_c * n_q {
            return Err(Error::Dimension(format!(
                "θ has length {}, expected {}",
                theta.len(),
                n_c * n_q
            )));
        }
        Ok(Self {
            degree,
            knots: clamped_uniform_knots(degree, n_c, duration),
            n_c,
            n_q,
            duration,
            theta,
        })
    }

    pub fn with_theta(&self, theta: DVector<f64>) -> Result<Self> {
        Self::new(self.degree, self.n_c, self.n_q, self.duration, theta)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.duration).contains(&t) {
            return Err(Error::Validation(format!("t = {t} outside [0, {}]", self.duration)));
        }
        Ok(())
    }

    /// Index of the knot span containing `t`, in `p..n_c`.
    pub fn span(&self, t: f64) -> usize {
        if t >= self.duration {
            return self.n_c - 1;
        }
        (self.degree..self.n_c)
            .rev()
            .find(|&s| self.knots[s] <= t)
            .unwrap_or(self.degree)
    }

    /// First active control point and the `k`-th derivatives of the `p+1` active bases.
    pub fn active_basis(&self, t: f64, k: usize) -> (usize, Vec<f64>) {
        let s = self.span(t);
        let first = s - self.degree;
        let vals = (first..=s)
            .map(|i| bspline_basis(i, self.degree, t, &self.knots, k))
            .collect();
        (first, vals)
    }

    /// `D^(k)(t)` with `q^(k)(t) = D^(k)(t) θ`; blocks `b_i^(k)(t) I_{n_q}`.
    pub fn dmatrix(&self, t: f64, k: usize) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n_q, self.n_c * self.n_q);
        let (first, vals) = self.active_basis(t, k);
        for (o, b) in vals.iter().enumerate() {
            for j in 0..self.n_q {
                d[(j, (first + o) * self.n_q + j)] = *b;
            }
        }
        d
    }

    /// Raw `k`-th derivative `q^(k)(t)`.
    pub fn eval(&self, t: f64, k: usize) -> DVector<f64> {
        let (first, vals) = self.active_basis(t, k);
        let mut q = DVector::zeros(self.n_q);
        for (o, b) in vals.iter().enumerate() {
            q += self.theta.rows((first + o) * self.n_q, self.n_q) * *b;
        }
        q
    }

    /// `q(t)` and the normalized rate series `q̇_m = q^(m+1)/m!`, `m = 0..=K`.
    pub fn eval_series(&self, t: f64, order: usize) -> Result<JointCoordSeries> {
        self.check_time(t)?;
        let mut c = JointCoordSeries::zeros(vec![1; self.n_q], order);
        let q = self.eval(t, 0);
        for j in 0..self.n_q {
            c.set_q(j, &[q[j]]);
        }
        for m in 0..=order {
            let d = self.eval(t, m + 1) / factorial(m);
            for j in 0..self.n_q {
                c.set_qd_block(j, m, &[d[j]]);
            }
        }
        Ok(c)
    }

    /// `∂𝔮_(K)/∂θ` restricted to the active control points: returns the first
    /// active θ column and a `n_q(K+2) × (p+1)n_q` block.
    pub fn local_coord_jacobian(&self, t: f64, order: usize) -> (usize, DMatrix<f64>) {
        let p = self.degree;
        let nq = self.n_q;
        let mut out = DMatrix::zeros(nq * (order + 2), (p + 1) * nq);
        let mut first = 0;
        for blk in 0..order + 2 {
            let (deriv, scale) = if blk == 0 { (0, 1.0) } else { (blk, 1.0 / factorial(blk - 1)) };
            let (f, vals) = self.active_basis(t, deriv);
            first = f;
            for (o, b) in vals.iter().enumerate() {
                for j in 0..nq {
                    out[(j * (order + 2) + blk, o * nq + j)] = b * scale;
                }
            }
        }
        (first * nq, out)
    }

    /// Dense `∂𝔮_(K)/∂θ`.
    pub fn coord_jacobian(&self, t: f64, order: usize) -> DMatrix<f64> {
        let (c0, local) = self.local_coord_jacobian(t, order);
        let mut out = DMatrix::zeros(local.nrows(), self.theta.len());
        out.view_mut((0, c0), local.shape()).copy_from(&local);
        out
    }
}
