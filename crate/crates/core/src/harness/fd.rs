//! Finite-difference oracles.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::jacobians::Family;
use crate::kinodynamics::{dynamics_state, stack_series, GravitySpec, JointCoordSeries};
use crate::model::RobotModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FdScheme {
    Forward,
    Central,
}

#[derive(Clone, Copy, Debug)]
pub struct FdConfig {
    pub step: f64,
    pub scheme: FdScheme,
    /// Perturb multi-DoF joint positions by right-multiplied group increments.
    pub lie: bool,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            step: 1e-6,
            scheme: FdScheme::Central,
            lie: true,
        }
    }
}

impl FdConfig {
    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Validation(format!("FD step must be positive, got {}", self.step)));
        }
        Ok(())
    }
}

fn finite(v: &DVector<f64>) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical("non-finite value in finite-difference evaluation".into()))
    }
}

/// Column-wise FD of `f` around `x` with additive perturbations.
pub fn fd_jacobian_vec<F>(f: F, x: &DVector<f64>, cfg: &FdConfig) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    cfg.validate()?;
    let f0 = match cfg.scheme {
        FdScheme::Forward => {
            let v = f(x)?;
            finite(&v)?;
            Some(v)
        }
        FdScheme::Central => None,
    };
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let mut xp = x.clone();
        xp[i] += cfg.step;
        let fp = f(&xp)?;
        finite(&fp)?;
        let col = match &f0 {
            Some(f0) => (fp - f0) / cfg.step,
            None => {
                let mut xm = x.clone();
                xm[i] -= cfg.step;
                let fm = f(&xm)?;
                finite(&fm)?;
                (fp - fm) / (2.0 * cfg.step)
            }
        };
        cols.push(col);
    }
    Ok(DMatrix::from_columns(&cols))
}

/// Coordinates displaced by `h` along layout column `col`.
pub fn perturb(model: &RobotModel, at: &JointCoordSeries, col: usize, h: f64, lie: bool) -> JointCoordSeries {
    let layout = at.layout();
    let j = (0..layout.dofs.len())
        .rev()
        .find(|&j| layout.offset(j) <= col)
        .expect("column inside layout");
    let local = col - layout.offset(j);
    let n = layout.dofs[j];
    let mut out = at.clone();
    if local < n && lie {
        let q = model.joints[j].joint_type.retract(at.q(j), local, h);
        out.set_q(j, &q);
    } else {
        let mut v = at.as_vector().clone();
        v[col] += h;
        out = JointCoordSeries::from_vector(layout.clone(), v).expect("same layout");
    }
    out
}

/// FD Jacobian of `f` with respect to the stacked coordinate series.
pub fn fd_jacobian<F>(model: &RobotModel, f: F, at: &JointCoordSeries, cfg: &FdConfig) -> Result<DMatrix<f64>>
where
    F: Fn(&JointCoordSeries) -> Result<DVector<f64>>,
{
    cfg.validate()?;
    let n = at.layout().total();
    let f0 = match cfg.scheme {
        FdScheme::Forward => Some(f(at)?),
        FdScheme::Central => None,
    };
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n);
    for c in 0..n {
        let fp = f(&perturb(model, at, c, cfg.step, cfg.lie))?;
        finite(&fp)?;
        let col = match &f0 {
            Some(f0) => (fp - f0) / cfg.step,
            None => {
                let fm = f(&perturb(model, at, c, -cfg.step, cfg.lie))?;
                finite(&fm)?;
                (fp - fm) / (2.0 * cfg.step)
            }
        };
        cols.push(col);
    }
    Ok(DMatrix::from_columns(&cols))
}

/// Stacked values of every family at output order `k_out`, from a state of order `k_out + 1`.
pub fn family_values(
    model: &RobotModel,
    coords: &JointCoordSeries,
    gravity: &GravitySpec,
    k_out: usize,
) -> Result<HashMap<Family, DVector<f64>>> {
    let state = dynamics_state(model, coords, gravity, k_out + 1)?;
    Family::ALL
        .iter()
        .map(|f| Ok((*f, stack_series(&f.values(&state, k_out)?))))
        .collect()
}

/// FD reference for all eight families at output order `k_out`.
///
/// `coords` must have order `k_out + 1`. Velocity and momentum families are
/// returned over the order-`k_out` input columns, force and torque families
/// over all columns.
pub fn fd_bundle(
    model: &RobotModel,
    coords: &JointCoordSeries,
    gravity: &GravitySpec,
    k_out: usize,
    cfg: &FdConfig,
) -> Result<HashMap<Family, DMatrix<f64>>> {
    cfg.validate()?;
    if coords.order() != k_out + 1 {
        return Err(Error::Order("FD bundle needs coordinates of order k_out + 1".into()));
    }
    let n = coords.layout().total();
    let keep = coords.layout().truncated_columns(k_out);
    let base = match cfg.scheme {
        FdScheme::Forward => Some(family_values(model, coords, gravity, k_out)?),
        FdScheme::Central => None,
    };
    let mut cols: HashMap<Family, Vec<DVector<f64>>> = HashMap::new();
    for c in 0..n {
        let plus = family_values(model, &perturb(model, coords, c, cfg.step, cfg.lie), gravity, k_out)?;
        let (minus, denom) = match &base {
            Some(b) => (b.clone(), cfg.step),
            None => (
                family_values(model, &perturb(model, coords, c, -cfg.step, cfg.lie), gravity, k_out)?,
                2.0 * cfg.step,
            ),
        };
        for f in Family::ALL {
            let col = (&plus[&f] - &minus[&f]) / denom;
            finite(&col)?;
            cols.entry(f).or_default().push(col);
        }
    }
    Ok(cols
        .into_iter()
        .map(|(f, c)| {
            let full = DMatrix::from_columns(&c);
            let m = if f.input_shift() == 0 {
                DMatrix::from_fn(full.nrows(), keep.len(), |r, k| full[(r, keep[k])])
            } else {
                full
            };
            (f, m)
        })
        .collect())
}

/// `k`-th time derivative of `f` at `t` by fourth-order central stencils, `1 ≤ k ≤ 4`.
pub fn time_derivative<F>(f: F, t: f64, k: usize, h: f64) -> DVector<f64>
where
    F: Fn(f64) -> DVector<f64>,
{
    let (offsets, weights, scale): (&[i32], &[f64], f64) = match k {
        1 => (&[-2, -1, 1, 2], &[1.0, -8.0, 8.0, -1.0], 12.0 * h),
        2 => (&[-2, -1, 0, 1, 2], &[-1.0, 16.0, -30.0, 16.0, -1.0], 12.0 * h * h),
        3 => (&[-3, -2, -1, 1, 2, 3], &[1.0, -8.0, 13.0, -13.0, 8.0, -1.0], 8.0 * h.powi(3)),
        4 => (&[-3, -2, -1, 0, 1, 2, 3], &[-1.0, 12.0, -39.0, 56.0, -39.0, 12.0, -1.0], 6.0 * h.powi(4)),
        _ => panic!("time_derivative supports orders 1..=4"),
    };
    let mut acc: Option<DVector<f64>> = None;
    for (o, w) in offsets.iter().zip(weights) {
        let v = f(t + *o as f64 * h) * *w;
        acc = Some(match acc {
            Some(a) => a + v,
            None => v,
        });
    }
    acc.unwrap() / scale
}
