//! Weighted transfer matrices, pressure, RPF (Gibbs) data and the flow
//! pressure normalization `P(ψ − c r) = 0`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, EigenOptions};
use crate::symbolic::{admissible_words, edge_presentation, CylinderFunction, Recoded, Roof, Subshift, Symbol};

/// `M(s)[i][j] = A[i][j]·exp(ψ(i,j) − s·c·r(i,j))` on a depth-one shift.
#[derive(Debug, Clone)]
pub struct WeightMatrix {
    pub s: Complex64,
    pub c: f64,
    pub matrix: CMatrix,
}

fn require_depth_two(f: &CylinderFunction) -> Result<()> {
    if f.depth() != 2 {
        return Err(Error::DepthMismatch { expected: 2, found: f.depth() });
    }
    Ok(())
}

/// Complex matrix with entries `A·exp(f(i,j))` for an edge-weight closure.
pub(crate) fn edge_matrix(shift: &Subshift, mut f: impl FnMut(Symbol, Symbol) -> Complex64) -> CMatrix {
    let n = shift.alphabet_size();
    CMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (i as Symbol, j as Symbol);
        if shift.allows(a, b) {
            f(a, b)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

pub fn build_weight_matrix(
    shift: &Subshift,
    psi: &CylinderFunction,
    r: &CylinderFunction,
    c: f64,
    s: Complex64,
) -> Result<WeightMatrix> {
    require_depth_two(psi)?;
    require_depth_two(r)?;
    if psi.shift() != shift || r.shift() != shift {
        return Err(Error::invalid("psi and r must live on the given shift"));
    }
    if !(r.min() > 0.0) {
        return Err(Error::invalid(format!("roof not strictly positive (minimum {})", r.min())));
    }
    let matrix = edge_matrix(shift, |a, b| {
        let w = [a, b];
        (Complex64::new(psi.eval(&w), 0.0) - s * c * r.eval(&w)).exp()
    });
    Ok(WeightMatrix { s, c, matrix })
}

/// Real matrix `A·exp(φ(i,j))` for depth-2 `φ`.
fn real_edge_matrix(shift: &Subshift, phi: &CylinderFunction) -> DMatrix<f64> {
    let n = shift.alphabet_size();
    DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (i as Symbol, j as Symbol);
        if shift.allows(a, b) {
            phi.eval(&[a, b]).exp()
        } else {
            0.0
        }
    })
}

/// Topological pressure of a real locally constant potential.
pub fn pressure(shift: &Subshift, phi: &CylinderFunction) -> Result<f64> {
    let rec = edge_presentation(shift, std::slice::from_ref(phi))?;
    let b = real_edge_matrix(&rec.shift, &rec.fns[0]);
    Ok(linalg::perron(&b, &EigenOptions::default())?.eigenvalue.ln())
}

/// RPF data of a real potential together with the induced Markov measure.
#[derive(Debug, Clone, Serialize)]
pub struct GibbsData {
    pub eigenvalue: f64,
    pub pressure: f64,
    /// Right eigenvector `h` on the edge presentation, unit sum.
    pub right_eigenfunction: Vec<f64>,
    /// Left eigenvector `ν`, normalized so that `ν·h = 1`.
    pub left_eigenmeasure: Vec<f64>,
    /// Stationary law `π_i = ν_i h_i`.
    pub stationary: Vec<f64>,
    /// Row-stochastic kernel `P[i][j] = A e^{φ(i,j)} h_j / (λ h_i)`.
    pub transition: Vec<Vec<f64>>,
    pub residual_right: f64,
    pub residual_left: f64,
    /// `max |πP − π|`.
    pub residual_stationary: f64,
    #[serde(skip)]
    presentation: Recoded,
    #[serde(skip)]
    base: Subshift,
}

impl GibbsData {
    /// Presentation (possibly a higher-block recoding) the vectors live on.
    pub fn presentation(&self) -> &Recoded {
        &self.presentation
    }

    pub fn base(&self) -> &Subshift {
        &self.base
    }

    /// Gibbs measure of the cylinder spelled by `word` on the base shift.
    pub fn cylinder_measure(&self, word: &[Symbol]) -> Result<f64> {
        if !self.base.is_linearly_admissible(word) || word.is_empty() {
            return Ok(0.0);
        }
        let b = self.presentation.block_len;
        if word.len() < b {
            // Sum over admissible extensions to one block.
            let mut total = 0.0;
            for w in admissible_words(&self.base, b)? {
                if w.symbols().starts_with(word) {
                    total += self.cylinder_measure(w.symbols())?;
                }
            }
            return Ok(total);
        }
        let state = |k: usize| self.presentation.symbol_of(&word[k..k + b]).expect("admissible block") as usize;
        let mut m = self.stationary[state(0)];
        for k in 0..word.len() - b {
            m *= self.transition[state(k)][state(k + 1)];
        }
        Ok(m)
    }
}

fn gibbs_from_matrix(b: &DMatrix<f64>, rec: Recoded, base: &Subshift) -> Result<GibbsData> {
    let eig = linalg::perron(b, &EigenOptions::default())?;
    let n = b.nrows();
    let lambda = eig.eigenvalue;
    let h = &eig.right;
    let nu = &eig.left;
    let pi: Vec<f64> = (0..n).map(|i| nu[i] * h[i]).collect();
    let transition: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| b[(i, j)] * h[j] / (lambda * h[i])).collect()).collect();
    let pi_v = DVector::from_vec(pi.clone());
    let p_m = DMatrix::from_fn(n, n, |i, j| transition[i][j]);
    let residual_stationary = (p_m.transpose() * &pi_v - &pi_v).amax();
    Ok(GibbsData {
        eigenvalue: lambda,
        pressure: lambda.ln(),
        right_eigenfunction: h.iter().copied().collect(),
        left_eigenmeasure: nu.iter().copied().collect(),
        stationary: pi,
        transition,
        residual_right: eig.residual_right,
        residual_left: eig.residual_left,
        residual_stationary,
        presentation: rec,
        base: base.clone(),
    })
}

/// Ruelle–Perron–Frobenius data of a real potential.
pub fn rpf(shift: &Subshift, phi: &CylinderFunction) -> Result<GibbsData> {
    let rec = edge_presentation(shift, std::slice::from_ref(phi))?;
    let b = real_edge_matrix(&rec.shift, &rec.fns[0]);
    gibbs_from_matrix(&b, rec, shift)
}

/// `∫ φ dμ` for the Gibbs state in `g`.
pub fn gibbs_integral(g: &GibbsData, phi: &CylinderFunction) -> Result<f64> {
    if phi.shift() != g.base() {
        return Err(Error::invalid("function and Gibbs state live on different shifts"));
    }
    let b = g.presentation.block_len;
    let depth = phi.depth().max(b);
    let mut total = crate::par::KahanSum::new();
    for w in admissible_words(g.base(), depth)? {
        let v = phi.eval(&w.symbols()[..phi.depth()]);
        if v != 0.0 {
            total.add(v * g.cylinder_measure(w.symbols())?);
        }
    }
    Ok(total.value())
}

/// Flow pressure constant `c` with `P(ψ − c r) = 0`.
#[derive(Debug, Clone, Serialize)]
pub struct NormalizationResult {
    pub c: f64,
    pub bracket: (f64, f64),
    /// `|P(ψ − c r)|`.
    pub residual: f64,
    /// `dP/dc = −∫ r dμ_{ψ−cr}`.
    pub dp_dc: f64,
    /// Central finite difference of `P(ψ − c r)` at step `1e-5`.
    pub dp_dc_finite_difference: f64,
    pub bisection_steps: usize,
}

/// Edge data shared by every evaluation of `P(ψ − c r)`.
struct PressureFamily {
    rec: Recoded,
}

impl PressureFamily {
    fn new(shift: &Subshift, psi: &CylinderFunction, r: &CylinderFunction) -> Result<Self> {
        Ok(Self { rec: edge_presentation(shift, &[psi.clone(), r.clone()])? })
    }

    fn matrix(&self, c: f64) -> DMatrix<f64> {
        let (psi, r) = (&self.rec.fns[0], &self.rec.fns[1]);
        let n = self.rec.shift.alphabet_size();
        DMatrix::from_fn(n, n, |i, j| {
            let w = [i as Symbol, j as Symbol];
            if self.rec.shift.allows(w[0], w[1]) {
                (psi.eval(&w) - c * r.eval(&w)).exp()
            } else {
                0.0
            }
        })
    }

    fn pressure(&self, c: f64) -> Result<f64> {
        Ok(linalg::perron(&self.matrix(c), &EigenOptions::default())?.eigenvalue.ln())
    }
}

pub fn solve_flow_pressure(shift: &Subshift, psi: &CylinderFunction, r: &Roof) -> Result<NormalizationResult> {
    let fam = PressureFamily::new(shift, psi, r.function())?;
    let p0 = fam.pressure(0.0)?;
    if !(p0 > 0.0) {
        return Err(Error::NoBracket { pressure: p0 });
    }
    let bracket = (0.0, (p0 + 1.0) / r.r_min());
    let (mut lo, mut hi) = bracket;
    let (mut f_lo, mut f_hi) = (p0, fam.pressure(hi)?);
    if !(f_hi < 0.0) {
        return Err(Error::NoBracket { pressure: p0 });
    }
    let mut steps = 0;
    while hi - lo > 1e-13 && steps < 200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = fam.pressure(mid)?;
        if fm > 0.0 {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
            f_hi = fm;
        }
        steps += 1;
    }
    let mut c = if f_lo.abs() <= f_hi.abs() { lo } else { hi };
    let mut residual = f_lo.abs().min(f_hi.abs());
    if f_hi != f_lo {
        let cand = lo - f_lo * (hi - lo) / (f_hi - f_lo);
        if cand.is_finite() && (lo..=hi).contains(&cand) {
            let fc = fam.pressure(cand)?;
            if fc.abs() <= residual {
                c = cand;
                residual = fc.abs();
            }
        }
    }
    if residual > 1e-12 {
        return Err(Error::NoConvergence { iterations: steps, residual });
    }
    // Derivative: −∫ r dμ for the Gibbs state of ψ − c r.
    let g = gibbs_from_matrix(&fam.matrix(c), fam.rec.clone(), &fam.rec.shift)?;
    let r_edge = &fam.rec.fns[1];
    let n = fam.rec.shift.alphabet_size();
    let mut int_r = 0.0;
    for i in 0..n {
        for j in 0..n {
            if fam.rec.shift.allows(i as Symbol, j as Symbol) {
                int_r += g.stationary[i] * g.transition[i][j] * r_edge.eval(&[i as Symbol, j as Symbol]);
            }
        }
    }
    let eps = 1e-5;
    let fd = (fam.pressure(c + eps)? - fam.pressure(c - eps)?) / (2.0 * eps);
    let dp_dc = -int_r;
    if !(dp_dc < 0.0) {
        return Err(Error::refused(format!("dP/dc = {dp_dc} is not negative")));
    }
    Ok(NormalizationResult { c, bracket, residual, dp_dc, dp_dc_finite_difference: fd, bisection_steps: steps })
}

/// `ψ − c·r` as a single cylinder function.
pub fn shifted_potential(psi: &CylinderFunction, r: &CylinderFunction, c: f64) -> Result<CylinderFunction> {
    psi.combine(1.0, r, -c)
}

/// `∫k dμ / ∫r dμ` for the Gibbs state of `ψ − c r`.
pub fn flow_average(
    shift: &Subshift,
    psi: &CylinderFunction,
    r: &Roof,
    k: &CylinderFunction,
    c: f64,
) -> Result<f64> {
    let g = rpf(shift, &shifted_potential(psi, r.function(), c)?)?;
    Ok(gibbs_integral(&g, k)? / gibbs_integral(&g, r.function())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn golden() -> f64 {
        (1.0 + 5f64.sqrt()) / 2.0
    }

    #[test]
    fn weight_matrix_examples() {
        let s = Subshift::full(2);
        let zero = CylinderFunction::constant(&s, 2, 0.0).unwrap();
        let one = CylinderFunction::constant(&s, 2, 1.0).unwrap();
        let m = build_weight_matrix(&s, &zero, &one, LN_2, Complex64::new(1.0, 0.0)).unwrap();
        assert!(m.matrix.iter().all(|z| (z - Complex64::new(0.5, 0.0)).norm() < 1e-15));
        assert!((linalg::leading_eigenvalue(&m.matrix).norm() - 1.0).abs() < 1e-14);
        let m0 = build_weight_matrix(&s, &zero, &one, LN_2, Complex64::new(0.0, 0.0)).unwrap();
        assert!((linalg::leading_eigenvalue(&m0.matrix).norm() - 2.0).abs() < 1e-14);
        let mt = build_weight_matrix(&s, &zero, &one, LN_2, Complex64::new(0.0, 3.7)).unwrap();
        assert!(mt.matrix.iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
        let d1 = CylinderFunction::zero(&s);
        assert!(matches!(
            build_weight_matrix(&s, &d1, &one, LN_2, Complex64::new(1.0, 0.0)),
            Err(Error::DepthMismatch { .. })
        ));
    }

    #[test]
    fn pressure_examples() {
        let s = Subshift::full(2);
        assert!((pressure(&s, &CylinderFunction::zero(&s)).unwrap() - LN_2).abs() < 1e-14);
        let gm = Subshift::golden_mean();
        assert!((pressure(&gm, &CylinderFunction::zero(&gm)).unwrap() - golden().ln()).abs() < 1e-14);
        let phi = CylinderFunction::per_symbol(&s, &[0.3f64.ln(), 0.7f64.ln()]).unwrap();
        assert!(pressure(&s, &phi).unwrap().abs() < 1e-14);
    }

    #[test]
    fn rpf_examples() {
        let s = Subshift::full(2);
        let phi = CylinderFunction::per_symbol(&s, &[0.3f64.ln(), 0.7f64.ln()]).unwrap();
        let g = rpf(&s, &phi).unwrap();
        assert!((g.cylinder_measure(&[0]).unwrap() - 0.3).abs() < 1e-14);
        assert!((g.cylinder_measure(&[0, 1, 1]).unwrap() - 0.3 * 0.7 * 0.7).abs() < 1e-14);
        let h = &g.right_eigenfunction;
        assert!((h[0] - h[1]).abs() < 1e-14);
        let g0 = rpf(&s, &CylinderFunction::zero(&s)).unwrap();
        assert!(g0.stationary.iter().all(|p| (p - 0.5).abs() < 1e-14));
        assert!(g0.transition.iter().flatten().all(|p| (p - 0.5).abs() < 1e-14));

        let gm = Subshift::golden_mean();
        let g = rpf(&gm, &CylinderFunction::zero(&gm)).unwrap();
        let f2 = golden() * golden();
        assert!((g.stationary[0] - f2 / (1.0 + f2)).abs() < 1e-14);
        assert!((g.stationary[1] - 1.0 / (1.0 + f2)).abs() < 1e-14);
        assert!(g.residual_stationary < 1e-14);
        assert!(g.residual_right < 1e-12 && g.residual_left < 1e-12);
        for row in &g.transition {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn gibbs_integral_examples() {
        let s = Subshift::full(2);
        let g = rpf(&s, &CylinderFunction::zero(&s)).unwrap();
        let ind0 = CylinderFunction::per_symbol(&s, &[1.0, 0.0]).unwrap();
        assert!((gibbs_integral(&g, &ind0).unwrap() - 0.5).abs() < 1e-14);
        let one = CylinderFunction::constant(&s, 3, 1.0).unwrap();
        assert!((gibbs_integral(&g, &one).unwrap() - 1.0).abs() < 1e-14);
        let p: f64 = 0.3;
        let gp = rpf(&s, &CylinderFunction::per_symbol(&s, &[p.ln(), (1.0 - p).ln()]).unwrap()).unwrap();
        let ind01 = CylinderFunction::from_fn(&s, 2, |w| (w == [0, 1]) as u8 as f64).unwrap();
        assert!((gibbs_integral(&gp, &ind01).unwrap() - p * (1.0 - p)).abs() < 1e-14);
    }

    #[test]
    fn flow_pressure_examples() {
        let s = Subshift::full(2);
        let zero = CylinderFunction::zero(&s);
        let res = solve_flow_pressure(&s, &zero, &Roof::constant(&s, 1.0).unwrap()).unwrap();
        assert!((res.c - LN_2).abs() < 1e-12);
        assert!((res.dp_dc + 1.0).abs() < 1e-10);
        let gm = Subshift::golden_mean();
        let res = solve_flow_pressure(&gm, &CylinderFunction::zero(&gm), &Roof::constant(&gm, 1.0).unwrap()).unwrap();
        assert!((res.c - golden().ln()).abs() < 1e-12);
        let r12 = Roof::new(CylinderFunction::per_symbol(&s, &[1.0, 2.0]).unwrap()).unwrap();
        let res = solve_flow_pressure(&s, &zero, &r12).unwrap();
        assert!((res.c - golden().ln()).abs() < 1e-12);
        assert!((res.dp_dc - res.dp_dc_finite_difference).abs() < 1e-6);
        // P(ψ) < 0: no positive root.
        let neg = CylinderFunction::constant(&s, 1, -1.0).unwrap();
        assert!(matches!(solve_flow_pressure(&s, &neg, &Roof::constant(&s, 1.0).unwrap()), Err(Error::NoBracket { .. })));
    }

    #[test]
    fn flow_average_examples() {
        let s = Subshift::full(2);
        let zero = CylinderFunction::zero(&s);
        let r = Roof::constant(&s, 1.0).unwrap();
        assert!((flow_average(&s, &zero, &r, r.function(), LN_2).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(flow_average(&s, &zero, &r, &zero, LN_2).unwrap(), 0.0);
        let k = CylinderFunction::per_symbol(&s, &[0.4, 2.2]).unwrap();
        assert!((flow_average(&s, &zero, &r, &k, LN_2).unwrap() - 1.3).abs() < 1e-14);
    }
}
