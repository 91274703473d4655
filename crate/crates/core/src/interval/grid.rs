//! Piecewise Chebyshev–Lobatto collocation of functions on a partition.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MIN_ORDER: usize = 8;
pub const DEFAULT_ORDER: usize = 32;
pub const MAX_ORDER: usize = 256;

/// Lobatto nodes `u_j = cos(πj/(m−1))` on `[−1, 1]` with barycentric
/// weights and the spectral differentiation matrix.
#[derive(Debug, Clone)]
pub struct ChebBasis {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    diff: DMatrix<f64>,
}

impl ChebBasis {
    pub fn new(order: usize) -> Result<Self> {
        if !(MIN_ORDER..=MAX_ORDER * 2).contains(&order) {
            return Err(Error::invalid(format!("collocation order {order} outside [{MIN_ORDER}, {}]", 2 * MAX_ORDER)));
        }
        let n = order - 1;
        let nodes: Vec<f64> = (0..order)
            .map(|j| {
                // Symmetric evaluation keeps u_j = −u_{n−j} exactly.
                let th = std::f64::consts::PI * (n as f64 - 2.0 * j as f64) / (2.0 * n as f64);
                th.sin()
            })
            .collect();
        let weights: Vec<f64> = (0..order)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        let mut diff = DMatrix::zeros(order, order);
        for i in 0..order {
            let mut row = 0.0;
            for j in 0..order {
                if i != j {
                    let v = (weights[j] / weights[i]) / (nodes[i] - nodes[j]);
                    diff[(i, j)] = v;
                    row += v;
                }
            }
            diff[(i, i)] = -row;
        }
        Ok(Self { order, nodes, weights, diff })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn diff(&self) -> &DMatrix<f64> {
        &self.diff
    }

    /// Barycentric interpolation at `u ∈ [−1, 1]`.
    pub fn interpolate(&self, values: &[Complex64], u: f64) -> Complex64 {
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for ((&x, &w), &v) in self.nodes.iter().zip(&self.weights).zip(values) {
            let d = u - x;
            if d == 0.0 {
                return v;
            }
            let c = w / d;
            num += v * c;
            den += c;
        }
        num / den
    }

    /// Lagrange basis values `ℓ_q(u)`.
    pub fn lagrange(&self, u: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.order];
        if let Some(q) = self.nodes.iter().position(|&x| x == u) {
            out[q] = 1.0;
            return out;
        }
        let mut den = 0.0;
        for (slot, (&x, &w)) in out.iter_mut().zip(self.nodes.iter().zip(&self.weights)) {
            *slot = w / (u - x);
            den += *slot;
        }
        out.iter_mut().for_each(|v| *v /= den);
        out
    }
}

/// A function on `⋃ I_i`, stored by its values at the Lobatto nodes of each
/// interval. Values may be complex.
#[derive(Debug, Clone)]
pub struct GridFunction {
    basis: Arc<ChebBasis>,
    intervals: Arc<[(f64, f64)]>,
    values: Vec<Vec<Complex64>>,
}

fn to_ref(x: f64, (a, b): (f64, f64)) -> f64 {
    ((2.0 * x - a - b) / (b - a)).clamp(-1.0, 1.0)
}

fn from_ref(u: f64, (a, b): (f64, f64)) -> f64 {
    0.5 * (a + b) + 0.5 * (b - a) * u
}

impl GridFunction {
    pub fn from_fn(intervals: &[(f64, f64)], order: usize, f: impl Fn(usize, f64) -> Complex64) -> Result<Self> {
        Self::from_fn_with(Arc::new(ChebBasis::new(order)?), intervals.into(), f)
    }

    pub(crate) fn from_fn_with(
        basis: Arc<ChebBasis>,
        intervals: Arc<[(f64, f64)]>,
        f: impl Fn(usize, f64) -> Complex64,
    ) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::invalid("grid function needs at least one interval"));
        }
        let values = intervals
            .iter()
            .enumerate()
            .map(|(i, &iv)| basis.nodes.iter().map(|&u| f(i, from_ref(u, iv))).collect())
            .collect();
        Ok(Self { basis, intervals, values })
    }

    pub(crate) fn from_values(basis: Arc<ChebBasis>, intervals: Arc<[(f64, f64)]>, values: Vec<Vec<Complex64>>) -> Self {
        Self { basis, intervals, values }
    }

    pub fn constant(intervals: &[(f64, f64)], order: usize, v: f64) -> Result<Self> {
        Self::from_fn(intervals, order, |_, _| Complex64::new(v, 0.0))
    }

    pub fn order(&self) -> usize {
        self.basis.order
    }

    pub fn basis(&self) -> &Arc<ChebBasis> {
        &self.basis
    }

    pub fn intervals(&self) -> &Arc<[(f64, f64)]> {
        &self.intervals
    }

    pub fn values(&self) -> &[Vec<Complex64>] {
        &self.values
    }

    /// Physical node positions on interval `i`.
    pub fn nodes(&self, i: usize) -> Vec<f64> {
        self.basis.nodes.iter().map(|&u| from_ref(u, self.intervals[i])).collect()
    }

    /// Value of the interpolant on interval `i` at `x` (clamped to `I_i`).
    pub fn eval(&self, i: usize, x: f64) -> Complex64 {
        self.basis.interpolate(&self.values[i], to_ref(x, self.intervals[i]))
    }

    /// Spectral derivative.
    pub fn derivative(&self) -> GridFunction {
        let m = self.order();
        let values = self
            .values
            .iter()
            .zip(self.intervals.iter())
            .map(|(v, &(a, b))| {
                let scale = 2.0 / (b - a);
                (0..m)
                    .map(|p| {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for (q, &vq) in v.iter().enumerate() {
                            acc += vq * self.basis.diff[(p, q)];
                        }
                        acc * scale
                    })
                    .collect()
            })
            .collect();
        Self { basis: self.basis.clone(), intervals: self.intervals.clone(), values }
    }

    /// The same interpolant sampled on a grid of another order.
    pub fn resample(&self, order: usize) -> Result<GridFunction> {
        if order == self.order() {
            return Ok(self.clone());
        }
        Self::from_fn_with(Arc::new(ChebBasis::new(order)?), self.intervals.clone(), |i, x| self.eval(i, x))
    }

    pub fn scale(&self, c: Complex64) -> GridFunction {
        let values = self.values.iter().map(|v| v.iter().map(|&z| z * c).collect()).collect();
        Self { basis: self.basis.clone(), intervals: self.intervals.clone(), values }
    }

    /// `χ_{I_i}·self`.
    pub fn restrict(&self, i: usize) -> GridFunction {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| if j == i { v.clone() } else { vec![Complex64::new(0.0, 0.0); v.len()] })
            .collect();
        Self { basis: self.basis.clone(), intervals: self.intervals.clone(), values }
    }

    /// Largest node value modulus.
    pub fn node_sup(&self) -> f64 {
        self.values.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv() -> Vec<(f64, f64)> {
        vec![(0.0, 0.5), (0.5, 1.0)]
    }

    #[test]
    fn round_trip_at_nodes() {
        let g = GridFunction::from_fn(&iv(), 16, |_, x| Complex64::new((3.0 * x).sin(), x)).unwrap();
        for i in 0..2 {
            for (p, x) in g.nodes(i).into_iter().enumerate() {
                assert!((g.eval(i, x) - g.values()[i][p]).norm() <= 1e-13);
            }
        }
    }

    #[test]
    fn spectral_derivative_of_cubic() {
        let g = GridFunction::from_fn(&iv(), 12, |_, x| Complex64::new(x * x * x, 0.0)).unwrap();
        let d = g.derivative();
        for i in 0..2 {
            for (p, x) in d.nodes(i).into_iter().enumerate() {
                assert!((d.values()[i][p].re - 3.0 * x * x).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn order_bounds() {
        assert!(ChebBasis::new(7).is_err());
        assert!(ChebBasis::new(8).is_ok());
    }

    #[test]
    fn lagrange_reproduces_interpolant() {
        let b = ChebBasis::new(10).unwrap();
        let vals: Vec<Complex64> = b.nodes().iter().map(|&u| Complex64::new(u.exp(), 0.0)).collect();
        let l = b.lagrange(0.3);
        let s: f64 = l.iter().zip(&vals).map(|(a, v)| a * v.re).sum();
        assert!((s - b.interpolate(&vals, 0.3).re).abs() < 1e-14);
        assert!((s - 0.3f64.exp()).abs() < 1e-8);
    }
}
