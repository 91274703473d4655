//! The `‖·‖_{1,t}` norm on grid functions.

use super::grid::GridFunction;
use super::operator::sampled_extremum;

/// Samples per interval, relative to the node count.
pub const SAMPLE_FACTOR: usize = 4;

/// `sup |w|`: `4m` samples per interval, then golden-section refinement
/// around the largest one.
pub fn sup_norm(w: &GridFunction) -> f64 {
    let n = SAMPLE_FACTOR * w.order();
    (0..w.intervals().len())
        .map(|i| {
            let (a, b) = w.intervals()[i];
            let (neg, _) = sampled_extremum(&|x| -w.eval(i, x).norm(), a, b, n);
            -neg
        })
        .fold(0.0, f64::max)
}

/// `max{‖w‖_∞, ‖w'‖_∞/|t|}` for `|t| > 1`, `max{‖w‖_∞, ‖w'‖_∞}` otherwise.
pub fn norm_1t(w: &GridFunction, t: f64) -> f64 {
    let s = sup_norm(w);
    let d = sup_norm(&w.derivative());
    if t.abs() > 1.0 {
        s.max(d / t.abs())
    } else {
        s.max(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    #[test]
    fn examples() {
        let iv = [(0.0, 0.5), (0.5, 1.0)];
        let one = GridFunction::constant(&iv, 16, 1.0).unwrap();
        assert!((norm_1t(&one, 3.0) - 1.0).abs() < 1e-14);
        assert!((norm_1t(&one, 0.2) - 1.0).abs() < 1e-14);
        let w = GridFunction::from_fn(&iv, 32, |_, x| Complex64::new((2.0 * PI * x).sin(), 0.0)).unwrap();
        assert!((norm_1t(&w, 4.0 * PI) - 1.0).abs() < 1e-9);
        assert!((norm_1t(&w, 0.5) - 2.0 * PI).abs() < 1e-8);
    }
}
