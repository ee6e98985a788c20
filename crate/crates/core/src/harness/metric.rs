//! Jacobian comparison metric.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `(max|Δ|, max|Δ| / max|J_ref|)`.
pub fn normalized_error(test: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<(f64, f64)> {
    if test.shape() != reference.shape() {
        return Err(Error::Dimension(format!(
            "cannot compare {:?} with {:?}",
            test.shape(),
            reference.shape()
        )));
    }
    let max_abs = (test - reference).abs().max();
    let denom = reference.abs().max();
    if denom == 0.0 {
        return Err(Error::Numerical("reference Jacobian is identically zero; e_J undefined".into()));
    }
    Ok((max_abs, max_abs / denom))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub family: String,
    pub order: usize,
    pub max_abs: f64,
    /// `None` when the reference is identically zero.
    pub e_j: Option<f64>,
    pub rows: usize,
    pub cols: usize,
}

impl ErrorReport {
    pub fn compare(family: &str, order: usize, test: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<Self> {
        let (max_abs, e_j) = match normalized_error(test, reference) {
            Ok((m, e)) => (m, Some(e)),
            Err(Error::Numerical(_)) => ((test - reference).abs().max(), None),
            Err(e) => return Err(e),
        };
        Ok(Self {
            family: family.to_string(),
            order,
            max_abs,
            e_j,
            rows: test.nrows(),
            cols: test.ncols(),
        })
    }

    pub fn within(&self, tol: f64) -> bool {
        match self.e_j {
            Some(e) => e <= tol,
            None => self.max_abs <= tol,
        }
    }
}

/// Compares every analytical family at order `k_out` with the FD oracle.
/// `coords` must have order `k_out + 1`.
pub fn jacobian_report(
    model: &crate::model::RobotModel,
    coords: &crate::kinodynamics::JointCoordSeries,
    gravity: &crate::kinodynamics::GravitySpec,
    k_out: usize,
    cfg: &crate::harness::fd::FdConfig,
) -> Result<Vec<ErrorReport>> {
    use crate::jacobians::{Family, JacobianBundle};
    let bundle = JacobianBundle::compute(model, coords, gravity, k_out)?;
    let fd = crate::harness::fd::fd_bundle(model, coords, gravity, k_out, cfg)?;
    Family::ALL
        .iter()
        .map(|f| ErrorReport::compare(f.name(), k_out, &bundle.stacked(*f), &fd[f]))
        .collect()
}
