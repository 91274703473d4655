//! Thermodynamic formalism on exactly computable models.
//!
//! Subshifts of finite type carrying locally constant potentials, roofs and
//! observables are handled with finite linear algebra; piecewise-affine Markov
//! interval maps carry the C¹ machinery (transfer operators on collocated
//! functions, `‖·‖_{1,t}` norms and spectral probes).

pub mod contour;
pub mod counting;
pub mod error;
pub mod fit;
pub mod interval;
pub mod linalg;
pub mod models;
pub mod par;
pub mod quad;
pub mod suspension;
pub mod symbolic;
pub mod thermo;
pub mod zeta;

pub use error::{Error, ErrorKind, Result};
