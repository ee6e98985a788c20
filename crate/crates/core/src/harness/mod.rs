//! Verification oracles, error metrics and benchmarks.

pub mod bench;
pub mod fd;
pub mod lagrangian;
pub mod metric;
pub mod random;

pub use fd::{fd_jacobian, fd_jacobian_vec, FdConfig, FdScheme};
pub use lagrangian::{lagrangian_oracle, PlanarLink};
pub use metric::{normalized_error, ErrorReport};
