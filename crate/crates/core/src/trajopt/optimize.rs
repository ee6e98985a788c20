//! Damped Gauss–Newton with Armijo backtracking.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::trajopt::cost::{evaluate_cost, normal_equations};
use crate::trajopt::spec::Experiment;

/// A sum-of-squares objective `f(x) = ‖r(x)‖²`.
pub trait LeastSquares {
    fn objective(&self, x: &DVector<f64>) -> Result<f64>;
    /// `(f, JᵀJ, Jᵀr)` at `x`.
    fn normal_equations(&self, x: &DVector<f64>) -> Result<(f64, DMatrix<f64>, DVector<f64>)>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerSettings {
    pub damping: f64,
    pub max_iters: usize,
    pub step_tol: f64,
    pub armijo_c1: f64,
    pub max_halvings: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            damping: 1e-8,
            max_iters: 500,
            step_tol: 1e-12,
            armijo_c1: 1e-4,
            max_halvings: 40,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GnOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub objective: f64,
    /// Objective after each accepted step, starting with the initial value.
    pub history: Vec<f64>,
    pub converged: bool,
    pub line_search_failed: bool,
}

/// Relative size below which objective changes are indistinguishable from roundoff.
const ROUNDOFF: f64 = 1e-13;

fn solve_spd(h: &DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = h.clone().cholesky() {
        return Ok(ch.solve(g));
    }
    h.clone()
        .lu()
        .solve(g)
        .ok_or_else(|| Error::Numerical("singular Gauss–Newton system".into()))
}

pub fn gauss_newton<P: LeastSquares>(problem: &P, x0: DVector<f64>, cfg: &OptimizerSettings) -> Result<GnOutcome> {
    let mut x = x0;
    let mut history = Vec::new();
    let mut f_last = f64::NAN;
    let mut converged = false;
    let mut line_search_failed = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let (f, mut h, g) = problem.normal_equations(&x)?;
        if !f.is_finite() {
            return Err(Error::Numerical("objective is not finite".into()));
        }
        if history.is_empty() {
            history.push(f);
        }
        f_last = f;
        for i in 0..h.nrows() {
            h[(i, i)] += cfg.damping;
        }
        let delta = -solve_spd(&h, &g)?;
        // d/dα f(x + αΔ) at 0 is 2 gᵀΔ.
        let slope = 2.0 * g.dot(&delta);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let trial = &x + &delta * alpha;
            let ft = problem.objective(&trial)?;
            let roundoff = ROUNDOFF * f.abs().max(1.0);
            if ft.is_finite() && (ft <= f + cfg.armijo_c1 * alpha * slope || (ft <= f && (f - ft) <= roundoff)) {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }
        iterations += 1;
        let Some((mut trial, mut ft)) = accepted else {
            line_search_failed = true;
            break;
        };
        // Minimizer of the quadratic through f(0), f'(0) and f(α); taken when it
        // improves on the accepted point.
        let curv = ft - f - slope * alpha;
        if curv > 0.0 {
            let a_star = -slope * alpha * alpha / (2.0 * curv);
            if a_star > 0.0 && a_star < alpha && (alpha - a_star) > 1e-3 * alpha {
                let cand = &x + &delta * a_star;
                let fc = problem.objective(&cand)?;
                if fc.is_finite() && fc < ft {
                    trial = cand;
                    ft = fc;
                    alpha = a_star;
                }
            }
        }
        let step = delta.norm() * alpha;
        x = trial;
        f_last = ft;
        history.push(ft);
        if step < cfg.step_tol {
            converged = true;
            break;
        }
    }
    Ok(GnOutcome {
        x,
        iterations,
        objective: f_last,
        history,
        converged,
        line_search_failed,
    })
}

#[derive(Clone, Debug)]
pub struct OptResult {
    pub theta: DVector<f64>,
    pub iterations: usize,
    pub final_cost: f64,
    /// Unweighted sub-costs `c_i`.
    pub term_costs: Vec<f64>,
    pub weighted_cost: f64,
    pub penalty: f64,
    /// Max-abs boundary equality residual.
    pub boundary_residual: f64,
    /// Max-abs bound violation over the samples.
    pub bound_violation: f64,
    pub converged: bool,
    pub line_search_failed: bool,
    pub history: Vec<f64>,
}

struct TrajectoryProblem<'a>(&'a Experiment);

impl LeastSquares for TrajectoryProblem<'_> {
    fn objective(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(evaluate_cost(self.0, x)?.total)
    }

    fn normal_equations(&self, x: &DVector<f64>) -> Result<(f64, DMatrix<f64>, DVector<f64>)> {
        normal_equations(self.0, x)
    }
}

pub fn direct_optimize(exp: &Experiment) -> Result<OptResult> {
    direct_optimize_from(exp, exp.initial_theta())
}

pub fn direct_optimize_from(exp: &Experiment, theta0: DVector<f64>) -> Result<OptResult> {
    let o = &exp.spec.optimizer;
    let cfg = OptimizerSettings {
        damping: o.damping,
        max_iters: o.max_iters,
        step_tol: o.step_tol,
        ..OptimizerSettings::default()
    };
    let out = gauss_newton(&TrajectoryProblem(exp), theta0, &cfg)?;
    let ev = evaluate_cost(exp, &out.x)?;
    Ok(OptResult {
        theta: out.x,
        iterations: out.iterations,
        final_cost: ev.total,
        term_costs: ev.terms,
        weighted_cost: ev.weighted,
        penalty: ev.penalty,
        boundary_residual: ev.boundary_residual,
        bound_violation: ev.bound_violation,
        converged: out.converged,
        line_search_failed: out.line_search_failed,
        history: out.history,
    })
}
