//! Weighted sub-cost evaluation over the sample grid.
//!
//! Each sub-cost is `c_i = dt Σ_s ‖y_i(t_s)‖²` where `y_i` stacks raw
//! derivatives of the chosen quantity over its targets. Boundary conditions
//! enter as quadratic penalties and joint bounds as one-sided hinges, both
//! weighted by `ρ`, so the objective is `Σ w_i c_i + ρ ‖r_pen‖²`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::Result;
use crate::jacobians::{force_jacobians, momentum_jacobians, torque_jacobian, velocity_jacobians};
use crate::kinodynamics::{dynamics_state, forward_state, GravitySpec, JointCoordSeries};
use crate::series::factorial;
use crate::trajopt::bspline::BSplineTrajectory;
use crate::trajopt::spec::{Experiment, Quantity};

/// Per-sample quantity values and their Jacobians over the active control points.
#[derive(Clone, Debug)]
pub struct SampleTerms {
    /// First θ column of the local block.
    pub col0: usize,
    pub values: Vec<DVector<f64>>,
    /// `∂y_i/∂θ` restricted to columns `col0..col0 + (p+1) n_q`.
    pub jacobians: Option<Vec<DMatrix<f64>>>,
}

struct Orders {
    velocity: Option<usize>,
    torque: Option<usize>,
}

fn orders(exp: &Experiment) -> Orders {
    let max_of = |q: Quantity| exp.costs.iter().filter(|c| c.quantity == q).map(|c| c.order).max();
    Orders {
        velocity: max_of(Quantity::LinkVelocity),
        torque: max_of(Quantity::JointTorque),
    }
}

/// Quantity values (and optionally Jacobians) of every cost term at time `t`.
pub fn sample_terms(exp: &Experiment, traj: &BSplineTrajectory, t: f64, with_jac: bool) -> Result<SampleTerms> {
    let ord = orders(exp);
    let k_coords = ord.velocity.unwrap_or(0).max(ord.torque.map_or(0, |d| d + 1));
    let coords: JointCoordSeries = traj.eval_series(t, k_coords)?;
    let model = &exp.model;
    let nq = traj.n_q;
    let local_cols = (traj.degree + 1) * nq;

    // Link velocities are taken without the gravity offset of the base.
    let vel = match ord.velocity {
        Some(kv) => {
            let st = forward_state(model, &coords, &GravitySpec::off(), kv)?;
            let jac = if with_jac {
                let kin = velocity_jacobians(model, &st, kv)?;
                let (_, lc) = traj.local_coord_jacobian(t, kv);
                Some(kin.link_velocity.iter().map(|j| j * &lc).collect::<Vec<_>>())
            } else {
                None
            };
            Some((st, jac))
        }
        None => None,
    };
    let tau = match ord.torque {
        Some(kt) => {
            let st = dynamics_state(model, &coords, &exp.spec.gravity, kt + 1)?;
            let jac = if with_jac {
                let kin = velocity_jacobians(model, &st, kt + 1)?;
                let mom = momentum_jacobians(model, &st, &kin)?;
                let force = force_jacobians(&st, &kin, &mom)?;
                let (_, lc) = traj.local_coord_jacobian(t, kt + 1);
                Some(torque_jacobian(model, &force).iter().map(|j| j * &lc).collect::<Vec<_>>())
            } else {
                None
            };
            Some((st, jac))
        }
        None => None,
    };

    let (col0, _) = traj.active_basis(t, 0);
    let mut values = Vec::with_capacity(exp.costs.len());
    let mut jacobians = with_jac.then(|| Vec::with_capacity(exp.costs.len()));
    for c in &exp.costs {
        let d = c.order;
        let scale = factorial(d);
        let rows_per = if c.quantity == Quantity::LinkVelocity { 6 } else { 1 };
        let mut y = DVector::zeros(rows_per * c.bodies.len());
        let mut jy = DMatrix::zeros(y.len(), local_cols);
        match c.quantity {
            Quantity::LinkVelocity => {
                let (st, jac) = vel.as_ref().expect("velocity state present");
                for (r, &i) in c.bodies.iter().enumerate() {
                    y.rows_mut(6 * r, 6).copy_from(&(st.velocity(i).block(d) * scale));
                    if let Some(jac) = jac {
                        jy.rows_mut(6 * r, 6).copy_from(&(jac[i].rows(6 * d, 6) * scale));
                    }
                }
            }
            Quantity::JointCoordinate => {
                let (_, vals) = traj.active_basis(t, d);
                let q = traj.eval(t, d);
                for (r, &j) in c.bodies.iter().enumerate() {
                    y[r] = q[j];
                    for (o, b) in vals.iter().enumerate() {
                        jy[(r, o * nq + j)] = *b;
                    }
                }
            }
            Quantity::JointTorque => {
                let (st, jac) = tau.as_ref().expect("dynamics state present");
                for (r, &j) in c.bodies.iter().enumerate() {
                    y[r] = st.torques()[j].block(d)[0] * scale;
                    if let Some(jac) = jac {
                        jy.row_mut(r).copy_from(&(jac[j].row(d) * scale));
                    }
                }
            }
        }
        values.push(y);
        if let Some(js) = jacobians.as_mut() {
            js.push(jy);
        }
    }
    Ok(SampleTerms {
        col0: col0 * nq,
        values,
        jacobians,
    })
}

/// Penalty residuals: boundary rows `[q(0)-q0; q̇(0)-q̇0; q(T)-qT; q̇(T)-q̇T]`
/// followed by one row per active bound violation at the samples.
#[derive(Clone, Debug)]
pub struct Penalty {
    pub residual: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub equality_rows: usize,
}

impl Penalty {
    pub fn boundary_residual(&self) -> f64 {
        self.residual.rows(0, self.equality_rows).amax()
    }

    pub fn bound_violation(&self) -> f64 {
        let n = self.residual.len() - self.equality_rows;
        if n == 0 {
            0.0
        } else {
            self.residual.rows(self.equality_rows, n).amax()
        }
    }
}

pub fn penalty(exp: &Experiment, traj: &BSplineTrajectory) -> Penalty {
    let nq = traj.n_q;
    let b = &exp.spec.boundary;
    let big_t = exp.spec.duration_s;
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    for (t, k, target) in [(0.0, 0, &b.q0), (0.0, 1, &b.qd0), (big_t, 0, &b.q_t), (big_t, 1, &b.qd_t)] {
        let d = traj.dmatrix(t, k);
        for j in 0..nq {
            let row = d.row(j).transpose();
            let val = row.dot(&traj.theta) - target[j];
            rows.push((row, val));
        }
    }
    let equality_rows = rows.len();
    let (lo, hi) = (&exp.spec.bounds.lower, &exp.spec.bounds.upper);
    for &t in &exp.times {
        let q = traj.eval(t, 0);
        let mut d = None;
        for j in 0..nq {
            let viol = if q[j] > hi[j] {
                q[j] - hi[j]
            } else if q[j] < lo[j] {
                q[j] - lo[j]
            } else {
                continue;
            };
            let dm = d.get_or_insert_with(|| traj.dmatrix(t, 0));
            rows.push((dm.row(j).transpose(), viol));
        }
    }
    let n = traj.theta.len();
    let mut jacobian = DMatrix::zeros(rows.len(), n);
    let mut residual = DVector::zeros(rows.len());
    for (r, (row, val)) in rows.into_iter().enumerate() {
        jacobian.row_mut(r).copy_from(&row.transpose());
        residual[r] = val;
    }
    Penalty {
        residual,
        jacobian,
        equality_rows,
    }
}

#[derive(Clone, Debug)]
pub struct CostEval {
    /// `Σ w_i c_i + ρ‖r_pen‖²`.
    pub total: f64,
    /// `Σ w_i c_i`.
    pub weighted: f64,
    pub terms: Vec<f64>,
    pub penalty: f64,
    pub boundary_residual: f64,
    pub bound_violation: f64,
    /// `∂c_i/∂θ`, present when gradients were requested.
    pub term_gradients: Option<Vec<DVector<f64>>>,
    /// Gradient of `total`.
    pub gradient: Option<DVector<f64>>,
}

struct Partial {
    col0: usize,
    terms: Vec<f64>,
    grads: Option<Vec<DVector<f64>>>,
    normal: Option<(DMatrix<f64>, DVector<f64>)>,
}

fn sample_partials(exp: &Experiment, traj: &BSplineTrajectory, with_jac: bool, normal: bool) -> Result<Vec<Partial>> {
    let dt = exp.dt;
    exp.times
        .par_iter()
        .map(|&t| {
            let st = sample_terms(exp, traj, t, with_jac)?;
            let terms = st.values.iter().map(|y| dt * y.norm_squared()).collect();
            let (grads, normal) = match &st.jacobians {
                Some(js) => {
                    let grads: Vec<DVector<f64>> =
                        js.iter().zip(&st.values).map(|(j, y)| j.tr_mul(y) * (2.0 * dt)).collect();
                    let normal = normal.then(|| {
                        let m = js[0].ncols();
                        let mut h = DMatrix::zeros(m, m);
                        let mut g = DVector::zeros(m);
                        for ((j, y), c) in js.iter().zip(&st.values).zip(&exp.costs) {
                            let w = c.weight * dt;
                            h += j.tr_mul(j) * w;
                            g += j.tr_mul(y) * w;
                        }
                        (h, g)
                    });
                    (Some(grads), normal)
                }
                None => (None, None),
            };
            Ok(Partial {
                col0: st.col0,
                terms,
                grads,
                normal,
            })
        })
        .collect()
}

fn assemble(exp: &Experiment, traj: &BSplineTrajectory, parts: &[Partial]) -> CostEval {
    let m = exp.costs.len();
    let n = traj.theta.len();
    let mut terms = vec![0.0; m];
    let mut term_gradients = parts[0].grads.as_ref().map(|_| vec![DVector::zeros(n); m]);
    for p in parts {
        for (acc, v) in terms.iter_mut().zip(&p.terms) {
            *acc += v;
        }
        if let (Some(tg), Some(g)) = (term_gradients.as_mut(), p.grads.as_ref()) {
            for (acc, gi) in tg.iter_mut().zip(g) {
                let mut view = acc.rows_mut(p.col0, gi.len());
                view += gi;
            }
        }
    }
    let pen = penalty(exp, traj);
    let rho = exp.penalty_weight();
    let weighted: f64 = terms.iter().zip(&exp.costs).map(|(c, t)| c * t.weight).sum();
    let pen_val = rho * pen.residual.norm_squared();
    let gradient = term_gradients.as_ref().map(|tg| {
        let mut g = pen.jacobian.tr_mul(&pen.residual) * (2.0 * rho);
        for (gi, c) in tg.iter().zip(&exp.costs) {
            g += gi * c.weight;
        }
        g
    });
    CostEval {
        total: weighted + pen_val,
        weighted,
        terms,
        penalty: pen_val,
        boundary_residual: pen.boundary_residual(),
        bound_violation: pen.bound_violation(),
        term_gradients,
        gradient,
    }
}

/// Objective and per-term costs at `theta`.
pub fn evaluate_cost(exp: &Experiment, theta: &DVector<f64>) -> Result<CostEval> {
    let traj = exp.trajectory(theta.clone())?;
    let parts = sample_partials(exp, &traj, false, false)?;
    Ok(assemble(exp, &traj, &parts))
}

/// Objective, per-term costs and their analytical gradients at `theta`.
pub fn evaluate_cost_gradient(exp: &Experiment, theta: &DVector<f64>) -> Result<CostEval> {
    let traj = exp.trajectory(theta.clone())?;
    let parts = sample_partials(exp, &traj, true, false)?;
    Ok(assemble(exp, &traj, &parts))
}

/// Gauss–Newton normal equations `(JᵀJ, Jᵀr)` of the weighted residual
/// `r = [√(w_i dt) y_i(t_s); √ρ r_pen]`, with `‖r‖²` equal to the objective.
pub fn normal_equations(exp: &Experiment, theta: &DVector<f64>) -> Result<(f64, DMatrix<f64>, DVector<f64>)> {
    let traj = exp.trajectory(theta.clone())?;
    let parts = sample_partials(exp, &traj, true, true)?;
    let n = theta.len();
    let mut h = DMatrix::zeros(n, n);
    let mut g = DVector::zeros(n);
    for p in &parts {
        let (hl, gl) = p.normal.as_ref().expect("normal blocks requested");
        let m = gl.len();
        let mut hv = h.view_mut((p.col0, p.col0), (m, m));
        hv += hl;
        let mut gv = g.rows_mut(p.col0, m);
        gv += gl;
    }
    let ev = assemble(exp, &traj, &parts);
    let pen = penalty(exp, &traj);
    let rho = exp.penalty_weight();
    h += pen.jacobian.tr_mul(&pen.jacobian) * rho;
    g += pen.jacobian.tr_mul(&pen.residual) * rho;
    Ok((ev.total, h, g))
}
