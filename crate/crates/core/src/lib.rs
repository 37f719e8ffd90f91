//! Tensor-product B-spline collocation with residual minimization by sparse
//! Gauss–Newton (IGA-ODIL), plus a finite-difference ODIL baseline and a joint
//! state/parameter inverse solver.

pub mod assembly;
pub mod error;
pub mod geometry;
pub mod gram;
pub mod inverse;
pub mod linalg;
pub mod metrics;
pub mod odil_fd;
pub mod pipeline;
pub mod problem;
pub mod solver;
pub mod spline;

pub use error::{Error, Result};
