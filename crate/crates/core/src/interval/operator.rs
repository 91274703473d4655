//! Smooth roof and potential data, and the transfer operator
//! `L_s w(x) = Σ_{f(y)=x} e^{ψ(y) − s c r(y)} w(y)` on grid functions.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::{ChebBasis, GridFunction, DEFAULT_ORDER, MAX_ORDER};
use super::map::ExpandingMarkovMap;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::par;
use crate::symbolic::{CylinderFunction, Symbol};

/// Largest polynomial degree accepted for roofs and potentials.
pub const MAX_DEGREE: usize = 6;

/// Relative interpolation residual tolerated after one application.
pub const INTERPOLATION_TOL: f64 = 1e-10;

/// One polynomial per interval, in the global coordinate `x`, coefficients
/// in increasing degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePoly {
    coeffs: Vec<Vec<f64>>,
}

impl PiecewisePoly {
    pub fn new(map: &ExpandingMarkovMap, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        if coeffs.len() != map.len() {
            return Err(Error::invalid(format!("{} polynomials for {} intervals", coeffs.len(), map.len())));
        }
        if let Some(p) = coeffs.iter().find(|p| p.is_empty() || p.len() > MAX_DEGREE + 1) {
            return Err(Error::invalid(format!("polynomial with {} coefficients; degree must be 0..={MAX_DEGREE}", p.len())));
        }
        if coeffs.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite polynomial coefficient"));
        }
        Ok(Self { coeffs })
    }

    pub fn constant(map: &ExpandingMarkovMap, v: f64) -> Self {
        Self { coeffs: vec![vec![v]; map.len()] }
    }

    /// The same polynomial on every interval.
    pub fn uniform(map: &ExpandingMarkovMap, coeffs: &[f64]) -> Result<Self> {
        Self::new(map, vec![coeffs.to_vec(); map.len()])
    }

    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    pub fn eval(&self, i: usize, x: f64) -> f64 {
        self.coeffs[i].iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self, i: usize, x: f64) -> f64 {
        let p = &self.coeffs[i];
        (1..p.len()).rev().fold(0.0, |acc, k| acc * x + k as f64 * p[k])
    }

    /// Piecewise constant: every polynomial has degree zero.
    pub fn constant_values(&self) -> Option<Vec<f64>> {
        self.coeffs
            .iter()
            .map(|p| p.iter().skip(1).all(|&c| c == 0.0).then_some(p[0]))
            .collect()
    }

    /// `(min, max)` of polynomial `i` on `[a, b]`: dense sampling followed by
    /// golden-section refinement around the best samples.
    pub fn extrema(&self, i: usize, (a, b): (f64, f64)) -> (f64, f64) {
        let f = |x: f64| self.eval(i, x);
        let (lo, _) = sampled_extremum(&f, a, b, 400);
        let (neg_hi, _) = sampled_extremum(&|x| -f(x), a, b, 400);
        (lo, -neg_hi)
    }
}

/// Minimum of `f` on `[a, b]` from `n+1` samples, refined by golden section
/// on the bracketing cell; the second value is the arg-min.
pub(crate) fn sampled_extremum(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> (f64, f64) {
    let h = (b - a) / n as f64;
    let (mut best, mut arg) = (f64::INFINITY, a);
    for j in 0..=n {
        let x = if j == n { b } else { a + h * j as f64 };
        let v = f(x);
        if v < best {
            best = v;
            arg = x;
        }
    }
    let (mut l, mut r) = ((arg - h).max(a), (arg + h).min(b));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = r - g * (r - l);
        let x2 = l + g * (r - l);
        if f(x1) < f(x2) {
            r = x2;
        } else {
            l = x1;
        }
    }
    let xm = 0.5 * (l + r);
    let vm = f(xm);
    if vm < best {
        (vm, xm)
    } else {
        (best, arg)
    }
}

/// A roof polynomial with a verified positive minimum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothRoof {
    poly: PiecewisePoly,
    r_min: f64,
    r_max: f64,
}

impl SmoothRoof {
    pub fn new(map: &ExpandingMarkovMap, poly: PiecewisePoly) -> Result<Self> {
        if poly.coeffs.len() != map.len() {
            return Err(Error::invalid("roof has the wrong number of pieces"));
        }
        let (mut r_min, mut r_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..map.len() {
            let (lo, hi) = poly.extrema(i, map.interval(i));
            r_min = r_min.min(lo);
            r_max = r_max.max(hi);
        }
        if !(r_min > 0.0) {
            return Err(Error::invalid(format!("roof not strictly positive (minimum {r_min})")));
        }
        Ok(Self { poly, r_min, r_max })
    }

    pub fn poly(&self) -> &PiecewisePoly {
        &self.poly
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }
}

/// Expanding map with potential `ψ`, roof `r` and flow constant `c`.
#[derive(Debug, Clone)]
pub struct IntervalModel {
    map: ExpandingMarkovMap,
    psi: PiecewisePoly,
    roof: SmoothRoof,
    c: f64,
    order: usize,
    intervals: Arc<[(f64, f64)]>,
    /// For each target interval `j`, the branches `i` with `I_j ⊆ f(I_i)`.
    preimages: Vec<Vec<usize>>,
}

impl IntervalModel {
    /// Builds the model and solves `P(ψ − c r) = 0` on the discretized
    /// operator.
    pub fn new(map: ExpandingMarkovMap, psi: PiecewisePoly, roof: SmoothRoof) -> Result<Self> {
        let mut m = Self::with_c(map, psi, roof, 0.0)?;
        m.c = m.solve_c()?;
        Ok(m)
    }

    pub fn with_c(map: ExpandingMarkovMap, psi: PiecewisePoly, roof: SmoothRoof, c: f64) -> Result<Self> {
        if psi.coeffs.len() != map.len() {
            return Err(Error::invalid("potential has the wrong number of pieces"));
        }
        let n = map.len();
        let preimages = (0..n)
            .map(|j| (0..n).filter(|&i| map.shift().allows(i as Symbol, j as Symbol)).collect())
            .collect();
        let intervals = map.intervals().into();
        Ok(Self { map, psi, roof, c, order: DEFAULT_ORDER, intervals, preimages })
    }

    pub fn map(&self) -> &ExpandingMarkovMap {
        &self.map
    }

    pub fn psi(&self) -> &PiecewisePoly {
        &self.psi
    }

    pub fn roof(&self) -> &SmoothRoof {
        &self.roof
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn intervals(&self) -> &Arc<[(f64, f64)]> {
        &self.intervals
    }

    /// `ψ − s c r` on interval `i` at `y`.
    pub fn exponent(&self, s: Complex64, i: usize, y: f64) -> Complex64 {
        self.psi.eval(i, y) - s * (self.c * self.roof.poly.eval(i, y))
    }

    pub fn grid_function(&self, f: impl Fn(usize, f64) -> Complex64) -> Result<GridFunction> {
        GridFunction::from_fn(&self.intervals, self.order, f)
    }

    /// `(L_s w)(x)` for `x ∈ I_j`, evaluated exactly from the interpolant of
    /// `w`.
    pub fn apply_at(&self, s: Complex64, w: &GridFunction, j: usize, x: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &i in &self.preimages[j] {
            let y = self.map.inverse(i).apply(x);
            acc += self.exponent(s, i, y).exp() * w.eval(i, y);
        }
        acc
    }

    /// `L_s w` sampled at the nodes of `w`'s grid, after checking that the
    /// result is resolved: the interpolant is compared with the exact value
    /// between nodes.
    pub fn apply_l(&self, s: Complex64, w: &GridFunction) -> Result<GridFunction> {
        self.check_compatible(w)?;
        let basis = w.basis().clone();
        let m = basis.order();
        let tasks: Vec<(usize, f64)> =
            (0..self.map.len()).flat_map(|j| w.nodes(j).into_iter().map(move |x| (j, x))).collect();
        let flat = par::map(&tasks, |&(j, x)| self.apply_at(s, w, j, x));
        let values: Vec<Vec<Complex64>> = flat.chunks(m).map(<[Complex64]>::to_vec).collect();
        let out = GridFunction::from_values(basis.clone(), self.intervals.clone(), values);
        let residual = self.interpolation_residual(s, w, &out);
        if residual > INTERPOLATION_TOL {
            return Err(Error::InterpolationResidual { residual, tolerance: INTERPOLATION_TOL, order: m });
        }
        Ok(out)
    }

    /// `apply_l`, doubling the order of `w` on residual failure up to the
    /// maximum order.
    pub fn apply_l_adaptive(&self, s: Complex64, w: &GridFunction) -> Result<GridFunction> {
        let mut cur = w.clone();
        loop {
            match self.apply_l(s, &cur) {
                Err(Error::InterpolationResidual { order, .. }) if order * 2 <= MAX_ORDER => {
                    cur = cur.resample(order * 2)?;
                }
                other => return other,
            }
        }
    }

    /// `Σ e^{ψ(y) − σ c r(y)} |w(y)|` at the nodes: the dominating real
    /// operator applied to `|w|`.
    pub fn apply_abs(&self, sigma: f64, w: &GridFunction) -> Result<Vec<Vec<f64>>> {
        self.check_compatible(w)?;
        let s = Complex64::new(sigma, 0.0);
        Ok((0..self.map.len())
            .map(|j| {
                w.nodes(j)
                    .into_iter()
                    .map(|x| {
                        self.preimages[j]
                            .iter()
                            .map(|&i| {
                                let y = self.map.inverse(i).apply(x);
                                self.exponent(s, i, y).re.exp() * w.eval(i, y).norm()
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect())
    }

    fn check_compatible(&self, w: &GridFunction) -> Result<()> {
        if w.intervals().len() != self.map.len() || w.intervals().iter().zip(self.intervals.iter()).any(|(a, b)| a != b) {
            return Err(Error::invalid("grid function lives on a different partition"));
        }
        Ok(())
    }

    fn interpolation_residual(&self, s: Complex64, w: &GridFunction, out: &GridFunction) -> f64 {
        let scale = out.node_sup().max(1e-300);
        let basis = w.basis();
        let nodes = basis.nodes();
        let mut worst: f64 = 0.0;
        for j in 0..self.map.len() {
            let (a, b) = self.intervals[j];
            for p in 0..nodes.len() - 1 {
                let u = 0.5 * (nodes[p] + nodes[p + 1]);
                let x = 0.5 * (a + b) + 0.5 * (b - a) * u;
                let exact = self.apply_at(s, w, j, x);
                worst = worst.max((out.eval(j, x) - exact).norm());
            }
        }
        worst / scale
    }

    /// Collocation matrix of `L_s` on the grid of the given order; block
    /// `(j, i)` maps node values on `I_i` to node values on `I_j`.
    pub fn collocation_matrix(&self, s: Complex64, order: usize) -> Result<CMatrix> {
        let basis = ChebBasis::new(order)?;
        let n = self.map.len();
        let mut m = CMatrix::zeros(n * order, n * order);
        for j in 0..n {
            let (a, b) = self.intervals[j];
            for (p, &u) in basis.nodes().iter().enumerate() {
                let x = 0.5 * (a + b) + 0.5 * (b - a) * u;
                for &i in &self.preimages[j] {
                    let y = self.map.inverse(i).apply(x);
                    let weight = self.exponent(s, i, y).exp();
                    let (ai, bi) = self.intervals[i];
                    let v = ((2.0 * y - ai - bi) / (bi - ai)).clamp(-1.0, 1.0);
                    for (q, l) in basis.lagrange(v).into_iter().enumerate() {
                        m[(j * order + p, i * order + q)] += weight * l;
                    }
                }
            }
        }
        Ok(m)
    }

    /// Leading eigenvalue of the discretized `L_σ` for real `σ`.
    pub fn leading_eigenvalue(&self, sigma: f64) -> Result<f64> {
        let m = self.collocation_matrix(Complex64::new(sigma, 0.0), self.order)?;
        let ev = linalg::leading_eigenvalue(&m);
        if !(ev.re > 0.0) || ev.im.abs() > 1e-8 * ev.re {
            return Err(Error::NoConvergence { iterations: 0, residual: ev.im.abs() });
        }
        Ok(ev.re)
    }

    /// `P(ψ − σ c r)` of the discretized operator.
    pub fn pressure(&self, sigma: f64) -> Result<f64> {
        Ok(self.leading_eigenvalue(sigma)?.ln())
    }

    fn pressure_at_c(&self, c: f64) -> Result<f64> {
        let probe = Self { c, ..self.clone() };
        probe.pressure(1.0)
    }

    fn solve_c(&self) -> Result<f64> {
        let p0 = self.pressure_at_c(0.0)?;
        if !(p0 > 0.0) {
            return Err(Error::NoBracket { pressure: p0 });
        }
        let (mut lo, mut hi) = (0.0, (p0 + 1.0) / self.roof.r_min);
        while self.pressure_at_c(hi)? > 0.0 {
            hi *= 2.0;
        }
        while hi - lo > 1e-14 * hi {
            let mid = 0.5 * (lo + hi);
            if self.pressure_at_c(mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// The roof as a depth-one symbolic function, when it is piecewise
    /// constant.
    pub fn symbolic_roof(&self) -> Option<CylinderFunction> {
        let v = self.roof.poly.constant_values()?;
        CylinderFunction::per_symbol(self.map.shift(), &v).ok()
    }

    pub fn symbolic_psi(&self) -> Option<CylinderFunction> {
        let v = self.psi.constant_values()?;
        CylinderFunction::per_symbol(self.map.shift(), &v).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::pressure;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn doubling(psi: f64, roof: &[f64]) -> IntervalModel {
        let map = ExpandingMarkovMap::doubling();
        let p = PiecewisePoly::constant(&map, psi);
        let r = SmoothRoof::new(&map, PiecewisePoly::uniform(&map, roof).unwrap()).unwrap();
        IntervalModel::with_c(map, p, r, 2f64.ln()).unwrap()
    }

    #[test]
    fn constants() {
        let m = doubling(-2f64.ln(), &[1.0]);
        let one = m.grid_function(|_, _| Complex64::new(1.0, 0.0)).unwrap();
        let out = m.apply_l(Complex64::new(0.0, 0.0), &one).unwrap();
        assert!(out.values().iter().flatten().all(|z| (z.re - 1.0).abs() < 1e-15 && z.im == 0.0));
        let m = doubling(0.0, &[1.0]);
        let out = m.apply_l(Complex64::new(0.0, 0.0), &one).unwrap();
        assert!(out.values().iter().flatten().all(|z| (z.re - 2.0).abs() < 1e-15));
    }

    #[test]
    fn pointwise_domination() {
        let m = doubling(0.0, &[1.0, 0.0, 0.25]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w = m
                .grid_function(|i, x| Complex64::new(a[0] + a[1] * x + a[2] * (5.0 * x).sin(), a[3] + a[4] * x * x + a[5] * i as f64))
                .unwrap();
            let t = rng.random_range(-60.0..60.0);
            let lw = m.apply_l_adaptive(Complex64::new(1.0, t), &w).unwrap();
            let w2 = w.resample(lw.order()).unwrap();
            let dom = m.apply_abs(1.0, &w2).unwrap();
            for (row, drow) in lw.values().iter().zip(&dom) {
                for (z, d) in row.iter().zip(drow) {
                    assert!(z.norm() <= d + 1e-12 * d.max(1.0));
                }
            }
        }
    }

    #[test]
    fn eigenvalue_matches_symbolic_pressure() {
        // Golden-mean map with piecewise-constant data.
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let spec = super::super::map::MapSpec { endpoints: vec![0.0, 1.0 / phi, 1.0], slopes: vec![phi, -phi], offsets: vec![0.0, phi] };
        let map = ExpandingMarkovMap::new(&spec).unwrap();
        let psi = PiecewisePoly::new(&map, vec![vec![0.2], vec![-0.1]]).unwrap();
        let roof = SmoothRoof::new(&map, PiecewisePoly::new(&map, vec![vec![1.0], vec![1.5]]).unwrap()).unwrap();
        let m = IntervalModel::new(map, psi, roof).unwrap();
        let shift = m.map().shift().clone();
        let sym_psi = m.symbolic_psi().unwrap();
        let sym_r = m.symbolic_roof().unwrap();
        for sigma in [0.0, 0.5, 1.0, 1.7] {
            let phi_sym = sym_psi.combine(1.0, &sym_r, -sigma * m.c()).unwrap();
            let want = pressure(&shift, &phi_sym).unwrap().exp();
            let got = m.leading_eigenvalue(sigma).unwrap();
            assert!((got / want - 1.0).abs() < 1e-8, "{sigma}: {got} vs {want}");
        }
        assert!(m.pressure(1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn roof_positivity_is_checked() {
        let map = ExpandingMarkovMap::doubling();
        // 1 − 4x(1−x)·1.01 dips below zero near x = 1/2.
        let p = PiecewisePoly::uniform(&map, &[1.0, -4.04, 4.04]).unwrap();
        assert!(SmoothRoof::new(&map, p).is_err());
        assert!(PiecewisePoly::uniform(&map, &[1.0; 8]).is_err());
    }
}
