//! Residual of the telescoping comparison between the periodic-point sum and
//! `Σ_i L_s^n(χ_{I_i} k)(x_i)`.
//!
//! Both sides run over the same words `ī` of length `n` (cyclically
//! admissible, so that `f^{−n}_ī` maps `I_{i_0}` into itself). The periodic
//! side evaluates at the fixed point `x_ī` of `f^{−n}_ī`, the operator side
//! at `f^{−n}_ī(x_{i_0})`. This compares `Σ_{f^n x = x} k(x) e^{S_n(ψ−scr)(x)}`,
//! which equals `Z_n/n` by cyclic invariance of the periodic-point set.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::GridFunction;
use super::operator::IntervalModel;
use crate::error::{Error, Result};
use crate::fit::{linear_fit, LinearFit};
use crate::par;
use crate::symbolic::{admissible_words, Symbol};

/// Most words a single residual may enumerate.
pub const WORD_BUDGET: u64 = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointRule {
    /// `x_i` is the fixed point of branch `i` when it exists, else the
    /// midpoint.
    FixedPoint,
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TelescopeResult {
    pub n: usize,
    pub periodic_sum: Complex64,
    pub operator_sum: Complex64,
    pub residual: f64,
    pub words: usize,
}

/// Base points `x_i` under `rule`.
pub fn base_points(model: &IntervalModel, rule: PointRule) -> Vec<f64> {
    (0..model.map().len())
        .map(|i| match rule {
            PointRule::Midpoint => model.map().midpoint(i),
            PointRule::FixedPoint => {
                model.map().periodic_point(&[i as Symbol]).unwrap_or_else(|_| model.map().midpoint(i))
            }
        })
        .collect()
}

/// Pull `start` back along `word` (last symbol first), accumulating
/// `Σ (ψ − s c r)` over the visited points; returns the final preimage.
fn pull_back(model: &IntervalModel, s: Complex64, word: &[Symbol], start: f64) -> (f64, Complex64) {
    let mut z = start;
    let mut acc = Complex64::new(0.0, 0.0);
    for &sym in word.iter().rev() {
        let i = sym as usize;
        z = model.map().inverse(i).apply(z);
        acc += model.exponent(s, i, z);
    }
    (z, acc)
}

pub fn telescoping_residual(
    model: &IntervalModel,
    n: usize,
    s: Complex64,
    k: &GridFunction,
    rule: PointRule,
) -> Result<TelescopeResult> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let size = model.map().len() as u64;
    let count = size.checked_pow(n as u32).unwrap_or(u64::MAX);
    if count > WORD_BUDGET {
        return Err(Error::Budget { what: format!("words of length {n}"), limit: WORD_BUDGET, reached: count });
    }
    let shift = model.map().shift();
    let words: Vec<Vec<Symbol>> = admissible_words(shift, n)?
        .into_iter()
        .map(|w| w.symbols().to_vec())
        .filter(|w| shift.is_cyclically_admissible(w))
        .collect();
    let points = base_points(model, rule);
    let terms: Vec<Result<(Complex64, Complex64)>> = par::map(&words, |w| {
        let i0 = w[0] as usize;
        let xp = model.map().periodic_point(w)?;
        let (yp, sp) = pull_back(model, s, w, xp);
        let (yo, so) = pull_back(model, s, w, points[i0]);
        Ok((sp.exp() * k.eval(i0, yp), so.exp() * k.eval(i0, yo)))
    });
    let (mut periodic_sum, mut operator_sum) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    let mut diff = Complex64::new(0.0, 0.0);
    for t in terms {
        let (p, o) = t?;
        periodic_sum += p;
        operator_sum += o;
        diff += p - o;
    }
    Ok(TelescopeResult { n, periodic_sum, operator_sum, residual: diff.norm(), words: words.len() })
}

/// Residuals for each `n` with a fit of `log residual` against `n`; zero
/// residuals are left out of the fit.
pub fn telescoping_sequence(
    model: &IntervalModel,
    ns: &[usize],
    s: Complex64,
    k: &GridFunction,
    rule: PointRule,
) -> Result<(Vec<TelescopeResult>, LinearFit)> {
    let results: Vec<TelescopeResult> =
        ns.iter().map(|&n| telescoping_residual(model, n, s, k, rule)).collect::<Result<_>>()?;
    let (x, y): (Vec<f64>, Vec<f64>) =
        results.iter().filter(|r| r.residual > 0.0).map(|r| (r.n as f64, r.residual.ln())).unzip();
    let fit = linear_fit(&x, &y)?;
    Ok((results, fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::map::ExpandingMarkovMap;
    use crate::interval::operator::{PiecewisePoly, SmoothRoof};

    fn doubling() -> IntervalModel {
        let map = ExpandingMarkovMap::doubling();
        let psi = PiecewisePoly::constant(&map, 0.0);
        let r = SmoothRoof::new(&map, PiecewisePoly::uniform(&map, &[1.0, 0.0, 0.25]).unwrap()).unwrap();
        IntervalModel::new(map, psi, r).unwrap()
    }

    #[test]
    fn fixed_point_rule_is_exact_at_one() {
        let m = doubling();
        let k = m.grid_function(|_, x| Complex64::new(1.0 + x, 0.0)).unwrap();
        let r = telescoping_residual(&m, 1, Complex64::new(1.0, 10.0), &k, PointRule::FixedPoint).unwrap();
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.words, 2);
    }

    #[test]
    fn midpoint_residuals_decay() {
        let m = doubling();
        let k = m.grid_function(|_, x| Complex64::new(1.0 + x, 0.0)).unwrap();
        let ns: Vec<usize> = (2..=10).collect();
        let (res, fit) = telescoping_sequence(&m, &ns, Complex64::new(1.0, 10.0), &k, PointRule::Midpoint).unwrap();
        assert!(res.iter().all(|r| r.residual > 0.0));
        assert!(fit.slope < -0.2, "{fit:?}");
        let zero = m.grid_function(|_, _| Complex64::new(0.0, 0.0)).unwrap();
        for n in 1..5 {
            assert_eq!(telescoping_residual(&m, n, Complex64::new(1.0, 10.0), &zero, PointRule::Midpoint).unwrap().residual, 0.0);
        }
    }
}
