//! Spline-parameterized trajectory optimization and inverse-KKT weight recovery.

pub mod bspline;
pub mod cost;
pub mod io;
pub mod ioc;
pub mod optimize;
pub mod spec;

pub use bspline::{bspline_basis, BSplineTrajectory};
pub use cost::{evaluate_cost, CostEval};
pub use ioc::{inverse_kkt, inverse_kkt_from_matrix, IocResult};
pub use optimize::{direct_optimize, gauss_newton, LeastSquares, OptResult, OptimizerSettings};
pub use spec::{CostSpec, Experiment, ExperimentSpec, Quantity};
