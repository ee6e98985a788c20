//! Inverse-KKT weight recovery.
//!
//! At a stationary point of `Σ w_i c_i + ρ‖r_pen‖²` the weighted cost
//! gradient lies in the row space of the penalty Jacobian. Projecting each
//! `∇c_i` onto the orthogonal complement of that space gives rows of `C` with
//! `Cᵀ w = 0`; `w` is then the simplex point minimizing `‖Cᵀ w‖`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::trajopt::cost::{evaluate_cost_gradient, penalty};
use crate::trajopt::spec::Experiment;

/// Largest weight count handled by subset enumeration.
pub const MAX_WEIGHTS: usize = 16;
/// Singular values below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-12;
/// Admissible negative weight from roundoff.
const NEG_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct IocResult {
    pub weights: Vec<f64>,
    /// `‖Cᵀ w‖` with `C` scaled to unit Frobenius norm.
    pub residual: f64,
    pub l1_error: Option<f64>,
}

/// Rows `∂c_i/∂θ` projected onto the null space of the penalty Jacobian.
pub fn kkt_matrix(exp: &Experiment, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
    let ev = evaluate_cost_gradient(exp, theta)?;
    let traj = exp.trajectory(theta.clone())?;
    let pen = penalty(exp, &traj);
    let grads = ev.term_gradients.expect("gradients requested");
    let n = theta.len();
    let svd = pen.jacobian.clone().svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let basis: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > RANK_TOL * smax)
        .map(|(r, _)| vt.row(r).transpose())
        .collect();
    let mut c = DMatrix::zeros(grads.len(), n);
    for (i, g) in grads.iter().enumerate() {
        let mut p = g.clone();
        for v in &basis {
            p -= v * v.dot(g);
        }
        c.row_mut(i).copy_from(&p.transpose());
    }
    Ok(c)
}

/// `min ‖Cᵀw‖` over `w ≥ 0, Σw = 1` by enumerating supports.
pub fn inverse_kkt_from_matrix(c: &DMatrix<f64>) -> Result<IocResult> {
    let m = c.nrows();
    if m < 2 {
        return Err(Error::Validation("inverse KKT needs at least two cost terms".into()));
    }
    if m > MAX_WEIGHTS {
        return Err(Error::Validation(format!("inverse KKT handles at most {MAX_WEIGHTS} weights, got {m}")));
    }
    let scale = c.norm();
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Uninformative);
    }
    let c = c / scale;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << m) {
        let support: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let Some(ws) = simplex_least_squares(&c, &support) else {
            continue;
        };
        if ws.iter().any(|&w| w < -NEG_TOL) {
            continue;
        }
        let mut w = vec![0.0; m];
        for (&i, &v) in support.iter().zip(&ws) {
            w[i] = v.max(0.0);
        }
        let sum: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= sum);
        let res = (c.transpose() * DVector::from_column_slice(&w)).norm();
        if best.as_ref().is_none_or(|(r, _)| res < *r) {
            best = Some((res, w));
        }
    }
    let (residual, weights) = best.ok_or_else(|| Error::Numerical("no feasible simplex support".into()))?;
    Ok(IocResult {
        weights,
        residual,
        l1_error: None,
    })
}

/// `argmin ‖A w‖` over the affine set `Σ w = 1`, `A = C_Sᵀ`.
fn simplex_least_squares(c: &DMatrix<f64>, support: &[usize]) -> Option<Vec<f64>> {
    let s = support.len();
    let a = DMatrix::from_fn(c.ncols(), s, |r, k| c[(support[k], r)]);
    let w0 = DVector::from_element(s, 1.0 / s as f64);
    if s == 1 {
        return Some(vec![1.0]);
    }
    // Orthonormal basis of {z : Σz = 0}: the trailing columns of a QR of [1 | I].
    let mut m = DMatrix::identity(s, s);
    m.set_column(0, &DVector::from_element(s, 1.0));
    let q = m.qr().q();
    let nbasis = q.columns(1, s - 1).into_owned();
    let an = &a * &nbasis;
    let rhs = -(&a * &w0);
    let z = an.svd(true, true).solve(&rhs, RANK_TOL).ok()?;
    let w = w0 + nbasis * z;
    w.iter().all(|v| v.is_finite()).then(|| w.iter().copied().collect())
}

pub fn inverse_kkt(exp: &Experiment, theta: &DVector<f64>) -> Result<IocResult> {
    let c = kkt_matrix(exp, theta)?;
    inverse_kkt_from_matrix(&c)
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Normalizes nonnegative weights onto the simplex.
pub fn simplex_normalize(w: &[f64]) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}
