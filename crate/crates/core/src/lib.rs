//! Hessian-Schatten total variation (HTV) on the unit square.
//!
//! * [`schatten`]: Schatten norms and eigenframes of 2x2 matrices.
//! * [`mesh`]: exact-rational conforming triangulations and CPWL functions.
//! * [`field`]: smooth test fields, quadrature of their HTV, mollification
//!   and reflection extension.
//! * [`htv`]: exact HTV of CPWL functions from gradient jumps across edges.
//! * [`approx`]: eigenframe-aligned CPWL approximations of smooth fields
//!   whose HTV converges to the field's HTV.
//! * [`extremal`]: extreme points of the HTV unit ball among CPWL functions
//!   and decompositions into them.
//! * [`acceptance`]: end-to-end numerical checks shared by the test suite
//!   and the `selftest` command.

pub mod acceptance;
pub mod approx;
pub mod error;
pub mod extremal;
pub mod field;
pub mod htv;
pub(crate) mod linalg;
pub mod mesh;
pub mod schatten;
pub(crate) mod sum;

pub use error::{HtvError, Result};
pub use mesh::{CpwlFunction, Point, Rational, Triangulation};
pub use schatten::{Mat2, SchattenP};
