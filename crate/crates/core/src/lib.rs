//! Higher-order rigid-body kinodynamics.
//!
//! Physical quantities are carried together with their time derivatives as
//! factorial-normalized series. The crate provides the spatial algebra,
//! comprehensive motion transformation matrices, forward kinodynamics over
//! kinematic trees, analytical Jacobians with respect to joint coordinate
//! series, B-spline trajectory optimization, inverse-KKT weight recovery and
//! independent verification oracles.

pub mod cmtm;
pub mod error;
pub mod harness;
pub mod jacobians;
pub mod kinodynamics;
pub mod model;
pub mod series;
pub mod spatial;
pub mod trajopt;

pub use error::{Error, Result};
