//! Trajectory CSV output and re-fitting of control points from sampled positions.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kinodynamics::dynamics_state;
use crate::trajopt::spec::Experiment;

/// Header `t,q_*,qd_*,qdd_*,tau_*`.
pub fn trajectory_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for prefix in ["q", "qd", "qdd", "tau"] {
        h.extend((0..n).map(|j| format!("{prefix}_{j}")));
    }
    h
}

/// Rows of `[t, q, q̇, q̈, τ]` at every sample.
pub fn trajectory_rows(exp: &Experiment, theta: &DVector<f64>) -> Result<Vec<Vec<f64>>> {
    let traj = exp.trajectory(theta.clone())?;
    let n = exp.n_q();
    exp.times
        .iter()
        .map(|&t| {
            let coords = traj.eval_series(t, 1)?;
            let st = dynamics_state(&exp.model, &coords, &exp.spec.gravity, 1)?;
            let mut row = Vec::with_capacity(1 + 4 * n);
            row.push(t);
            for k in 0..3 {
                row.extend(traj.eval(t, k).iter());
            }
            row.extend(st.torques().iter().map(|s| s.block(0)[0]));
            Ok(row)
        })
        .collect()
}

pub fn write_trajectory<W: Write>(out: W, exp: &Experiment, theta: &DVector<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trajectory_header(exp.n_q()))?;
    for row in trajectory_rows(exp, theta)? {
        w.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Parsed trajectory table: times and joint positions.
#[derive(Clone, Debug)]
pub struct SampledTrajectory {
    pub t: Vec<f64>,
    pub q: Vec<Vec<f64>>,
}

pub fn read_trajectory<R: Read>(input: R, n_q: usize) -> Result<SampledTrajectory> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Parse(format!("trajectory CSV lacks column '{name}'")))
    };
    let tc = col("t")?;
    let qc = (0..n_q).map(|j| col(&format!("q_{j}"))).collect::<Result<Vec<_>>>()?;
    let mut out = SampledTrajectory { t: Vec::new(), q: Vec::new() };
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |c: usize| -> Result<f64> {
            rec.get(c)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Parse(format!("row {}: bad number in column {c}", line + 1)))
        };
        out.t.push(num(tc)?);
        out.q.push(qc.iter().map(|&c| num(c)).collect::<Result<_>>()?);
    }
    if out.t.is_empty() {
        return Err(Error::Parse("trajectory CSV has no rows".into()));
    }
    Ok(out)
}

/// Least-squares control points reproducing the sampled positions.
pub fn fit_theta(exp: &Experiment, samples: &SampledTrajectory) -> Result<DVector<f64>> {
    let n = exp.n_theta();
    let nq = exp.n_q();
    let traj = exp.trajectory(DVector::zeros(n))?;
    let rows = samples.t.len() * nq;
    let mut a = DMatrix::zeros(rows, n);
    let mut b = DVector::zeros(rows);
    for (s, (&t, q)) in samples.t.iter().zip(&samples.q).enumerate() {
        if !(0.0..=exp.spec.duration_s).contains(&t) {
            return Err(Error::Validation(format!("sample time {t} outside the experiment horizon")));
        }
        let d = traj.dmatrix(t, 0);
        a.rows_mut(s * nq, nq).copy_from(&d);
        for j in 0..nq {
            b[s * nq + j] = q[j];
        }
    }
    if rows < n {
        return Err(Error::Validation("too few samples to determine the control points".into()));
    }
    let ata = a.tr_mul(&a);
    let atb = a.tr_mul(&b);
    ata.cholesky()
        .map(|c| c.solve(&atb))
        .ok_or_else(|| Error::Numerical("sampled positions do not determine the control points".into()))
}
