//! C¹ models: piecewise-affine expanding Markov maps with polynomial roof and
//! potential, Chebyshev collocation of functions on the partition, the
//! complex transfer operator, the `‖·‖_{1,t}` norm, Dolgopyat probes and the
//! telescoping residual.

pub mod grid;
pub mod map;
pub mod norm;
pub mod operator;
pub mod probe;
pub mod telescope;

pub use grid::{ChebBasis, GridFunction};
pub use map::{build_map, Affine, ExpandingMarkovMap, MapSpec};
pub use norm::{norm_1t, sup_norm};
pub use operator::{IntervalModel, PiecewisePoly, SmoothRoof};
pub use probe::{dolgopyat_probe, op_norm_estimate, DolgopyatProbeResult};
pub use telescope::{telescoping_residual, telescoping_sequence, PointRule, TelescopeResult};
