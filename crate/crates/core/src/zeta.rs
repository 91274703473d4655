//! Weighted periodic-point sums `Z_n`, the zeta derivative `η(s)` by series
//! and by resolvent continuation, the residue at `s = 1`, zero scans and
//! growth scans.
//!
//! For depth-2 data `Z_n = n·tr(K_M M^{n−1})`, hence
//! `η(s) = Σ Z_n/n = tr(K_M (I − M(s))^{−1})`, which is the continuation used
//! everywhere left of `Re s = 1`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::linalg::{self, CMatrix, EigenOptions, ScaledMatrix};
use crate::par;
use crate::suspension::SuspensionSystem;
use crate::symbolic::{edge_presentation, CylinderFunction, Recoded, Symbol};
use crate::thermo::edge_matrix;

/// Condition estimate of `I − M(s)` above which `s` counts as a pole.
pub const POLE_CONDITION: f64 = 1e12;

/// Largest number of words the direct `Z_n` path may visit.
const DIRECT_WORD_BUDGET: u64 = 20_000_000;

/// Largest series truncation.
const MAX_SERIES_TERMS: usize = 1_000_000;

fn cz(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaMethod {
    Series,
    Resolvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaEvaluation {
    pub s: Complex64,
    pub value: Complex64,
    pub method: EtaMethod,
    /// Series truncation `N`.
    pub truncation: Option<usize>,
    /// Certified bound on the series tail.
    pub tail_bound: Option<f64>,
    /// 1-norm condition estimate of `I − M(s)`.
    pub condition: Option<f64>,
}

/// Edge presentation of `(ψ, r, k)` for one system, reused across many `s`.
#[derive(Debug, Clone)]
pub struct EtaModel {
    rec: Recoded,
    c: f64,
}

impl EtaModel {
    pub fn new(sys: &SuspensionSystem, k: &CylinderFunction) -> Result<Self> {
        if k.shift() != sys.base() {
            return Err(Error::invalid("observable lives on a different shift"));
        }
        let k_abs = k.map(f64::abs);
        let fns = [sys.psi().clone(), sys.roof().function().clone(), k.clone(), k_abs];
        Ok(Self { rec: edge_presentation(sys.base(), &fns)?, c: sys.c() })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn size(&self) -> usize {
        self.rec.shift.alphabet_size()
    }

    fn exponent(&self, w: &[Symbol; 2], s: Complex64) -> Complex64 {
        cz(self.rec.fns[0].eval(w)) - s * self.c * self.rec.fns[1].eval(w)
    }

    /// `M(s)`.
    pub fn weight_matrix(&self, s: Complex64) -> CMatrix {
        edge_matrix(&self.rec.shift, |a, b| self.exponent(&[a, b], s).exp())
    }

    /// `K_M(s)[i][j] = A·k(i,j)·exp(ψ(i,j) − s c r(i,j))`.
    pub fn k_matrix(&self, s: Complex64) -> CMatrix {
        edge_matrix(&self.rec.shift, |a, b| {
            let w = [a, b];
            cz(self.rec.fns[2].eval(&w)) * self.exponent(&w, s).exp()
        })
    }

    fn k_abs_matrix(&self, sigma: f64) -> CMatrix {
        edge_matrix(&self.rec.shift, |a, b| {
            let w = [a, b];
            cz(self.rec.fns[3].eval(&w)) * self.exponent(&w, cz(sigma)).exp()
        })
    }

    pub fn k_is_zero(&self) -> bool {
        self.rec.fns[2].is_zero()
    }

    /// `n·tr(K_M M^{n−1})` with exponent tracking.
    pub fn zn_trace(&self, s: Complex64, n: usize) -> Result<Complex64> {
        if n == 0 {
            return Err(Error::invalid("period must be at least 1"));
        }
        let m = self.weight_matrix(s);
        let mut p = ScaledMatrix::identity(self.size());
        for _ in 1..n {
            p = p.mul(&m);
        }
        let km = self.k_matrix(s);
        let tr = (&km * &p.mantissa).trace();
        let v = tr * (p.log_scale.exp() * n as f64);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Overflow(format!("Z_{n} at s = {s}")));
        }
        Ok(v)
    }

    /// Spectral radius of `M(σ)` for real `σ` and its Perron right vector.
    fn perron_at(&self, sigma: f64) -> Result<linalg::PerronEigen> {
        let m = self.weight_matrix(cz(sigma)).map(|z| z.re);
        linalg::perron(&m, &EigenOptions::default())
    }

    pub fn spectral_radius(&self, sigma: f64) -> Result<f64> {
        Ok(self.perron_at(sigma)?.eigenvalue)
    }

    /// Series `Σ_{n ≤ N} Z_n/n` with `N` chosen so that the certified tail
    /// `B ρ^N/(1 − ρ)` is at most `tol`, where `ρ = ρ(M(σ))` and
    /// `B = Σ|K_M(σ)|·h_max/h_min` bounds `|Z_n|/(n ρ^{n−1})`.
    pub fn eta_series(&self, s: Complex64, tol: f64) -> Result<EtaEvaluation> {
        if !(tol > 0.0) {
            return Err(Error::invalid("series tolerance must be positive"));
        }
        let eig = self.perron_at(s.re)?;
        let rho = eig.eigenvalue;
        if rho >= 1.0 || s.re <= 1.0 {
            return Err(Error::SeriesDivergent { sigma: s.re });
        }
        let h_max = eig.right.max();
        let h_min = eig.right.min();
        let b: f64 = self.k_abs_matrix(s.re).iter().map(|z| z.re).sum::<f64>() * h_max / h_min;
        let terms = if b == 0.0 {
            1
        } else {
            // Smallest N with B ρ^N/(1 − ρ) ≤ tol.
            let n = ((tol * (1.0 - rho) / b).ln() / rho.ln()).ceil().max(1.0);
            if !(n <= MAX_SERIES_TERMS as f64) {
                return Err(Error::Budget {
                    what: "series terms".into(),
                    limit: MAX_SERIES_TERMS as u64,
                    reached: if n.is_finite() { n as u64 } else { u64::MAX },
                });
            }
            n as usize
        };
        let m = self.weight_matrix(s);
        let km = self.k_matrix(s);
        let mut acc = km.clone();
        let mut sum = Complex64::new(0.0, 0.0);
        for n in 1..=terms {
            sum += acc.trace();
            if n < terms {
                acc = &acc * &m;
            }
        }
        let tail = b * rho.powi(terms as i32) / (1.0 - rho);
        Ok(EtaEvaluation {
            s,
            value: sum,
            method: EtaMethod::Series,
            truncation: Some(terms),
            tail_bound: Some(tail),
            condition: None,
        })
    }

    /// `tr(K_M (I − M(s))^{−1})`, refused near poles.
    pub fn eta_resolvent(&self, s: Complex64) -> Result<EtaEvaluation> {
        let m = self.weight_matrix(s);
        let km = self.k_matrix(s);
        let (sol, cond) = linalg::resolvent_solve(&m, &km);
        match sol {
            Some(x) if cond <= POLE_CONDITION => Ok(EtaEvaluation {
                s,
                value: x.trace(),
                method: EtaMethod::Resolvent,
                truncation: None,
                tail_bound: None,
                condition: Some(cond),
            }),
            _ => Err(Error::PoleProximal { re: s.re, im: s.im, condition: cond }),
        }
    }

    /// `η_{|k|}(σ)` for real `σ`: a bound for `|η(σ + it)|` at every `t`.
    pub fn abs_bound(&self, sigma: f64) -> Result<f64> {
        let m = self.weight_matrix(cz(sigma));
        let (sol, cond) = linalg::resolvent_solve(&m, &self.k_abs_matrix(sigma));
        match sol {
            Some(x) if cond <= POLE_CONDITION => Ok(x.trace().re),
            _ => Err(Error::PoleProximal { re: sigma, im: 0.0, condition: cond }),
        }
    }

    pub fn det(&self, s: Complex64) -> Complex64 {
        linalg::det_i_minus(&self.weight_matrix(s))
    }

    pub fn leading_eigenvalue(&self, s: Complex64) -> Complex64 {
        linalg::leading_eigenvalue(&self.weight_matrix(s))
    }

    /// `log ζ(s) = Σ_n tr(M(s)^n)/n` by series; needs `Re s > 1`.
    pub fn log_zeta_series(&self, s: Complex64, tol: f64) -> Result<Complex64> {
        let eig = self.perron_at(s.re)?;
        let rho = eig.eigenvalue;
        if rho >= 1.0 {
            return Err(Error::SeriesDivergent { sigma: s.re });
        }
        let size = self.size() as f64;
        let b = size * eig.right.max() / eig.right.min();
        let terms = ((tol * (1.0 - rho) / b).ln() / rho.ln()).ceil().clamp(1.0, MAX_SERIES_TERMS as f64) as usize;
        let m = self.weight_matrix(s);
        let mut p = m.clone();
        let mut sum = Complex64::new(0.0, 0.0);
        for n in 1..=terms {
            sum += p.trace() / n as f64;
            p = &p * &m;
        }
        Ok(sum)
    }

    /// `ζ(s) = 1/det(I − M(s))`, the continuation of the series.
    pub fn zeta_resolvent(&self, s: Complex64) -> Result<Complex64> {
        let d = self.det(s);
        if d.norm() == 0.0 {
            return Err(Error::PoleProximal { re: s.re, im: s.im, condition: f64::INFINITY });
        }
        Ok(d.inv())
    }
}

/// `Z_n` by the trace formula.
pub fn zn(sys: &SuspensionSystem, s: Complex64, k: &CylinderFunction, n: usize) -> Result<Complex64> {
    EtaModel::new(sys, k)?.zn_trace(s, n)
}

/// `Z_n` as an explicit sum over cyclically admissible words, accumulated
/// with the largest real exponent factored out.
pub fn zn_direct(sys: &SuspensionSystem, s: Complex64, k: &CylinderFunction, n: usize) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::invalid("period must be at least 1"));
    }
    let shift = sys.base();
    let size = shift.alphabet_size() as u64;
    let words = size.checked_pow(n as u32).filter(|&w| w <= DIRECT_WORD_BUDGET);
    let Some(_) = words else {
        return Err(Error::Budget { what: "direct Z_n words".into(), limit: DIRECT_WORD_BUDGET, reached: u64::MAX });
    };
    let (psi, r, c) = (sys.psi(), sys.roof(), sys.c());
    // Per-word exponent and weight, then a scaled sum.
    let firsts: Vec<Symbol> = (0..shift.alphabet_size() as Symbol).collect();
    let parts: Vec<Vec<(Complex64, f64)>> = par::map(&firsts, |&first| {
        let mut out = Vec::new();
        let mut word = vec![first];
        fn rec(
            word: &mut Vec<Symbol>,
            n: usize,
            shift: &crate::symbolic::Subshift,
            f: &mut dyn FnMut(&[Symbol]),
        ) {
            if word.len() == n {
                if shift.allows(word[n - 1], word[0]) {
                    f(word);
                }
                return;
            }
            for s in 0..shift.alphabet_size() as Symbol {
                if shift.allows(*word.last().expect("non-empty"), s) {
                    word.push(s);
                    rec(word, n, shift, f);
                    word.pop();
                }
            }
        }
        rec(&mut word, n, shift, &mut |w| {
            let (p, rr, kk) = cyclic_sums(w, psi, r, k);
            out.push((cz(p) - s * c * rr, kk));
        });
        out
    });
    let all: Vec<(Complex64, f64)> = parts.into_iter().flatten().collect();
    let scale = all.iter().map(|(e, _)| e.re).fold(f64::NEG_INFINITY, f64::max);
    if !scale.is_finite() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut re = par::KahanSum::new();
    let mut im = par::KahanSum::new();
    for (e, kk) in &all {
        let v = (e - scale).exp() * *kk;
        re.add(v.re);
        im.add(v.im);
    }
    let v = Complex64::new(re.value(), im.value()) * scale.exp();
    if !(v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::Overflow(format!("Z_{n} at s = {s}")));
    }
    Ok(v)
}

fn cyclic_sums(w: &[Symbol], psi: &CylinderFunction, r: &CylinderFunction, k: &CylinderFunction) -> (f64, f64, f64) {
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for i in 0..w.len() {
        a += psi.eval_cyclic(w, i);
        b += r.eval_cyclic(w, i);
        c += k.eval_cyclic(w, i);
    }
    (a, b, c)
}

pub fn eta_series(sys: &SuspensionSystem, k: &CylinderFunction, s: Complex64, tol: f64) -> Result<EtaEvaluation> {
    EtaModel::new(sys, k)?.eta_series(s, tol)
}

pub fn eta_resolvent(sys: &SuspensionSystem, k: &CylinderFunction, s: Complex64) -> Result<EtaEvaluation> {
    EtaModel::new(sys, k)?.eta_resolvent(s)
}

/// Richardson-extrapolated residue of `η` at `s = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residue {
    pub value: f64,
    /// `ε·η(1+ε)` at `ε = 1e-3, 5e-4, 2.5e-4`.
    pub samples: [f64; 3],
}

pub const RESIDUE_STEPS: [f64; 3] = [1e-3, 5e-4, 2.5e-4];

/// `lim_{ε→0} ε·η(1+ε)`. Refuses when the samples are not Cauchy with
/// successive differences shrinking by at least 1.8.
pub fn residue_at_one(sys: &SuspensionSystem, k: &CylinderFunction) -> Result<Residue> {
    let model = EtaModel::new(sys, k)?;
    let mut samples = [0.0; 3];
    for (slot, eps) in samples.iter_mut().zip(RESIDUE_STEPS) {
        *slot = eps * model.eta_resolvent(cz(1.0 + eps))?.value.re;
    }
    let [f0, f1, f2] = samples;
    let (d1, d2) = ((f1 - f0).abs(), (f2 - f1).abs());
    let scale = f0.abs().max(f1.abs()).max(f2.abs());
    if d2 > 1e-13 * scale.max(1e-300) && d1 < 1.8 * d2 {
        return Err(Error::refused(format!(
            "residue extrapolation unstable: samples {f0:.17e}, {f1:.17e}, {f2:.17e}"
        )));
    }
    let r1 = 2.0 * f1 - f0;
    let r2 = 2.0 * f2 - f1;
    Ok(Residue { value: (4.0 * r2 - r1) / 3.0, samples })
}

/// One grid point of a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub sigma: f64,
    pub t: f64,
    pub value: Complex64,
    pub modulus: f64,
    pub flag: ScanFlag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanFlag {
    None,
    /// Modulus within `1e-10` of 1.
    Unit,
    /// Endpoint of a cell where the modulus crosses 1.
    Crossing,
    /// Pole-proximal or unusable sample.
    Skipped,
}

impl ScanFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScanFlag::None => "",
            ScanFlag::Unit => "unit",
            ScanFlag::Crossing => "crossing",
            ScanFlag::Skipped => "skipped",
        }
    }
}

/// Grid cell `[σ_a, σ_b] × [t_a, t_b]` bracketing a modulus crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub sigma: (f64, f64),
    pub t: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthFit {
    pub alpha_hat: f64,
    pub intercept: f64,
    pub residual: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub points: Vec<ScanPoint>,
    pub crossings: Vec<Crossing>,
    /// Some adjacent samples differ in modulus by more than 0.2.
    pub coarse_grid: bool,
    pub zero_count: Option<ZeroCount>,
    pub growth: Option<GrowthFit>,
    /// Growth fit skipped because every sample vanished.
    pub fit_skipped: bool,
}

impl ScanReport {
    /// CSV body with columns `sigma,t,value_re,value_im,modulus,flag`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sigma,t,value_re,value_im,modulus,flag\n");
        for p in &self.points {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
                p.sigma,
                p.t,
                p.value.re,
                p.value.im,
                p.modulus,
                p.flag.as_str()
            ));
        }
        out
    }
}

fn grid(range: (f64, f64), per_unit: usize) -> Vec<f64> {
    let width = range.1 - range.0;
    let steps = ((width * per_unit as f64).ceil() as usize).max(1);
    (0..=steps).map(|i| if i == steps { range.1 } else { range.0 + width * i as f64 / steps as f64 }).collect()
}

/// Modulus of the leading eigenvalue of `M(σ+it)` on a grid, with cells
/// where it crosses 1 and an argument-principle count of the zeros of
/// `det(I − M(s))` inside the scanned rectangle.
pub fn zero_scan(
    sys: &SuspensionSystem,
    sigma_range: (f64, f64),
    t_range: (f64, f64),
    grid_steps: usize,
) -> Result<ScanReport> {
    let (sa, sb) = sigma_range;
    if !(sa > 0.0 && sa < sb && sb <= 1.5) {
        return Err(Error::invalid(format!("sigma range ({sa}, {sb}) must satisfy 0 < lo < hi <= 1.5")));
    }
    if !(t_range.0 < t_range.1) {
        return Err(Error::invalid("t range must be increasing"));
    }
    if grid_steps < 8 {
        return Err(Error::invalid("grid needs at least 8 steps per unit"));
    }
    let model = EtaModel::new(sys, &CylinderFunction::zero(sys.base()))?;
    let sigmas = grid(sigma_range, grid_steps);
    let ts = grid(t_range, grid_steps);
    let (ns, nt) = (sigmas.len(), ts.len());
    let mut points = par::map_range(ns * nt, |idx| {
        let (i, j) = (idx / nt, idx % nt);
        let s = Complex64::new(sigmas[i], ts[j]);
        let value = model.leading_eigenvalue(s);
        let modulus = value.norm();
        let flag = if (modulus - 1.0).abs() <= 1e-10 { ScanFlag::Unit } else { ScanFlag::None };
        ScanPoint { sigma: sigmas[i], t: ts[j], value, modulus, flag }
    });
    let mut crossings = Vec::new();
    let mut coarse = false;
    let at = |i: usize, j: usize| i * nt + j;
    let mut mark = Vec::new();
    for i in 0..ns {
        for j in 0..nt {
            let p = points[at(i, j)];
            for (ii, jj) in [(i + 1, j), (i, j + 1)] {
                if ii >= ns || jj >= nt {
                    continue;
                }
                let q = points[at(ii, jj)];
                if (p.modulus - q.modulus).abs() > 0.2 {
                    coarse = true;
                }
                let (a, b) = (p.modulus - 1.0, q.modulus - 1.0);
                let unit = p.flag == ScanFlag::Unit || q.flag == ScanFlag::Unit;
                if unit || a * b < 0.0 {
                    crossings.push(Crossing { sigma: (p.sigma, q.sigma), t: (p.t, q.t) });
                    mark.push(at(i, j));
                    mark.push(at(ii, jj));
                }
            }
        }
    }
    for idx in mark {
        if points[idx].flag == ScanFlag::None {
            points[idx].flag = ScanFlag::Crossing;
        }
    }
    let zero_count = count_zeros(&model, sigma_range, t_range).ok();
    Ok(ScanReport { points, crossings, coarse_grid: coarse, zero_count, growth: None, fit_skipped: false })
}

/// Winding number of `det(I − M(s))` around a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroCount {
    pub sigma: (f64, f64),
    pub t: (f64, f64),
    pub count: i64,
    pub winding: f64,
    pub evaluations: usize,
}

/// Count zeros of `det(I − M(s))` inside `[σ_a, σ_b] × [t_a, t_b]` by the
/// argument principle. The boundary is walked adaptively so that the
/// argument changes by less than π/3 between consecutive samples; a zero on
/// or too close to the boundary is refused.
pub fn count_zeros(model: &EtaModel, sigma: (f64, f64), t: (f64, f64)) -> Result<ZeroCount> {
    let corners = [
        Complex64::new(sigma.0, t.0),
        Complex64::new(sigma.1, t.0),
        Complex64::new(sigma.1, t.1),
        Complex64::new(sigma.0, t.1),
    ];
    let f = |s: Complex64| model.det(s);
    let mut total = 0.0;
    let mut evals = 0usize;
    let max_step = 0.02;
    for e in 0..4 {
        let (a, b) = (corners[e], corners[(e + 1) % 4]);
        let len = (b - a).norm();
        let pieces = ((len / max_step).ceil() as usize).max(4);
        let us: Vec<f64> = (0..=pieces).map(|i| i as f64 / pieces as f64).collect();
        let vals = par::map(&us, |&u| f(a + (b - a) * u));
        evals += vals.len();
        for w in 0..pieces {
            let (d, n) = arg_change(&f, a, b, us[w], us[w + 1], vals[w], vals[w + 1], 0)?;
            total += d;
            evals += n;
        }
    }
    let winding = total / (2.0 * std::f64::consts::PI);
    let count = winding.round() as i64;
    if (winding - count as f64).abs() > 0.05 {
        return Err(Error::refused(format!("argument principle winding {winding} is not near an integer")));
    }
    Ok(ZeroCount { sigma, t, count, winding, evaluations: evals })
}

#[allow(clippy::too_many_arguments)]
fn arg_change(
    f: &impl Fn(Complex64) -> Complex64,
    a: Complex64,
    b: Complex64,
    u0: f64,
    u1: f64,
    f0: Complex64,
    f1: Complex64,
    depth: usize,
) -> Result<(f64, usize)> {
    let tiny = 1e-12;
    if f0.norm() < tiny || f1.norm() < tiny {
        return Err(Error::refused(format!("det(I - M) vanishes on the contour near s = {}", a + (b - a) * u0)));
    }
    let d = (f1 / f0).arg();
    if d.abs() < std::f64::consts::FRAC_PI_3 {
        return Ok((d, 0));
    }
    if depth > 40 {
        return Err(Error::refused(format!("zero of det(I - M) on the contour near s = {}", a + (b - a) * u0)));
    }
    let um = 0.5 * (u0 + u1);
    let fm = f(a + (b - a) * um);
    let (x, n1) = arg_change(f, a, b, u0, um, f0, fm, depth + 1)?;
    let (y, n2) = arg_change(f, a, b, um, u1, fm, f1, depth + 1)?;
    Ok((x + y, n1 + n2 + 1))
}

/// Zero-free region certified by an argument-principle count: the only zero
/// of `det(I − M(s))` in `[σ_left, σ_right] × [−R, R]` is `s = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroFreeCertificate {
    pub sigma_left: f64,
    pub sigma_right: f64,
    pub height: f64,
    pub zero_count: ZeroCount,
}

impl ZeroFreeCertificate {
    pub fn covers(&self, sigma_left: f64, sigma_right: f64, height: f64) -> bool {
        self.sigma_left <= sigma_left && self.sigma_right >= sigma_right && self.height >= height
    }
}

/// Certify `[σ_left, σ_right] × [−R, R]`. Refused when the zero count is not
/// exactly one (the simple zero at `s = 1` from `P(ψ − c r) = 0`).
pub fn certify_zero_free(
    sys: &SuspensionSystem,
    sigma_left: f64,
    sigma_right: f64,
    height: f64,
) -> Result<ZeroFreeCertificate> {
    if !(0.0 < sigma_left && sigma_left < 1.0 && sigma_right > 1.0 && height > 0.0) {
        return Err(Error::invalid("certificate needs 0 < sigma_left < 1 < sigma_right and height > 0"));
    }
    let model = EtaModel::new(sys, &CylinderFunction::zero(sys.base()))?;
    let zc = count_zeros(&model, (sigma_left, sigma_right), (-height, height))?;
    if zc.count != 1 {
        return Err(Error::refused(format!(
            "{} zeros of det(I - M(s)) in [{sigma_left}, {sigma_right}] x [-{height}, {height}]; only s = 1 is allowed",
            zc.count
        )));
    }
    Ok(ZeroFreeCertificate { sigma_left, sigma_right, height, zero_count: zc })
}

/// `|η(σ + it)|` over `t_list` with a least-squares fit of `log|η|` against
/// `log|t|`.
pub fn growth_scan(sys: &SuspensionSystem, k: &CylinderFunction, sigma: f64, t_list: &[f64]) -> Result<ScanReport> {
    let model = EtaModel::new(sys, k)?;
    let points: Vec<ScanPoint> = par::map(t_list, |&t| {
        let s = Complex64::new(sigma, t);
        match model.eta_resolvent(s) {
            Ok(e) => ScanPoint { sigma, t, value: e.value, modulus: e.value.norm(), flag: ScanFlag::None },
            Err(_) => ScanPoint { sigma, t, value: Complex64::new(f64::NAN, f64::NAN), modulus: f64::NAN, flag: ScanFlag::Skipped },
        }
    });
    let usable: Vec<&ScanPoint> = points.iter().filter(|p| p.flag == ScanFlag::None && p.t != 0.0).collect();
    if usable.len() < 4 {
        return Err(Error::refused(format!("growth scan has {} usable samples; need 4", usable.len())));
    }
    let fit_skipped = usable.iter().all(|p| p.modulus == 0.0);
    let growth = if fit_skipped {
        None
    } else {
        let pos: Vec<&&ScanPoint> = usable.iter().filter(|p| p.modulus > 0.0).collect();
        if pos.len() < 4 {
            return Err(Error::refused("fewer than 4 nonzero growth samples"));
        }
        let x: Vec<f64> = pos.iter().map(|p| p.t.abs().ln()).collect();
        let y: Vec<f64> = pos.iter().map(|p| p.modulus.ln()).collect();
        let f = linear_fit(&x, &y)?;
        Some(GrowthFit { alpha_hat: f.slope, intercept: f.intercept, residual: f.residual, n_points: f.n_points })
    };
    Ok(ScanReport { points, crossings: Vec::new(), coarse_grid: false, zero_count: None, growth, fit_skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::{Roof, Subshift};
    use std::f64::consts::LN_2;

    fn full2() -> SuspensionSystem {
        let s = Subshift::full(2);
        SuspensionSystem::new(s.clone(), CylinderFunction::zero(&s), Roof::constant(&s, 1.0).unwrap()).unwrap()
    }

    fn one(sys: &SuspensionSystem) -> CylinderFunction {
        CylinderFunction::constant(sys.base(), 1, 1.0).unwrap()
    }

    #[test]
    fn zn_examples() {
        let sys = full2();
        let k = one(&sys);
        assert!((zn(&sys, cz(2.0), &k, 2).unwrap() - cz(0.5)).norm() < 1e-14);
        assert!((zn_direct(&sys, cz(2.0), &k, 2).unwrap() - cz(0.5)).norm() < 1e-14);
        for n in 1..8 {
            assert!((zn(&sys, cz(1.0), &k, n).unwrap() - cz(n as f64)).norm() < 1e-12);
        }
        let zero = CylinderFunction::zero(sys.base());
        assert_eq!(zn(&sys, cz(1.3), &zero, 4).unwrap(), cz(0.0));
    }

    #[test]
    fn eta_examples() {
        let sys = full2();
        let k = one(&sys);
        let e2 = eta_series(&sys, &k, cz(2.0), 1e-13).unwrap();
        assert!((e2.value - cz(1.0)).norm() < 1e-12);
        assert!(e2.tail_bound.unwrap() <= 1e-13);
        let e3 = eta_series(&sys, &k, cz(3.0), 1e-13).unwrap();
        assert!((e3.value - cz(1.0 / 3.0)).norm() < 1e-12);
        let zero = CylinderFunction::zero(sys.base());
        assert_eq!(eta_series(&sys, &zero, cz(1.7), 1e-10).unwrap().value, cz(0.0));
        assert!(matches!(eta_series(&sys, &k, cz(1.0), 1e-10), Err(Error::SeriesDivergent { .. })));

        let r2 = eta_resolvent(&sys, &k, cz(2.0)).unwrap();
        assert!((r2.value - cz(1.0)).norm() < 1e-13);
        let half = eta_resolvent(&sys, &k, cz(0.5)).unwrap();
        let expected = 2f64.sqrt() / (1.0 - 2f64.sqrt());
        assert!((half.value - cz(expected)).norm() < 1e-12);
        assert!(matches!(eta_resolvent(&sys, &k, cz(1.0)), Err(Error::PoleProximal { .. })));
    }

    #[test]
    fn residue_examples() {
        let sys = full2();
        let r = residue_at_one(&sys, &one(&sys)).unwrap();
        assert!((r.value - 1.0 / LN_2).abs() < 1e-9);
        let r = residue_at_one(&sys, sys.roof().function()).unwrap();
        assert!((r.value - 1.0 / sys.c()).abs() < 1e-9);
        assert_eq!(residue_at_one(&sys, &CylinderFunction::zero(sys.base())).unwrap().value, 0.0);
    }

    #[test]
    fn lattice_scan_flags_unit_line() {
        let sys = full2();
        let rep = zero_scan(&sys, (0.875, 1.125), (-10.0, 10.0), 8).unwrap();
        let unit_row: Vec<&ScanPoint> = rep.points.iter().filter(|p| (p.sigma - 1.0).abs() < 1e-12).collect();
        assert!(!unit_row.is_empty());
        assert!(unit_row.iter().all(|p| p.flag == ScanFlag::Unit));
        // Zeros of 1 − 2^{1−s} at 1 + 2πim/log 2, m = −1, 0, 1.
        assert_eq!(rep.zero_count.unwrap().count, 3);
        let rep = zero_scan(&sys, (1.2, 1.5), (-5.0, 5.0), 8).unwrap();
        assert!(rep.crossings.is_empty());
        assert!(certify_zero_free(&sys, 0.9, 1.1, 10.0).is_err());
        assert!(certify_zero_free(&sys, 0.9, 1.1, 5.0).is_ok());
    }

    #[test]
    fn nonlattice_scan_has_single_crossing_near_one() {
        let s = Subshift::full(2);
        let roof = Roof::new(CylinderFunction::per_symbol(&s, &[1.0, 2f64.sqrt()]).unwrap()).unwrap();
        let sys = SuspensionSystem::new(s.clone(), CylinderFunction::zero(&s), roof).unwrap();
        // The modulus-one curve bends left of σ = 1 away from t = 0, so in a
        // thin strip below the line every crossing sits near s = 1.
        let rep = zero_scan(&sys, (0.99, 1.1), (-20.0, 20.0), 10).unwrap();
        assert!(!rep.crossings.is_empty());
        assert!(rep.crossings.iter().all(|c| c.t.0.abs() <= 1.5 && c.t.1.abs() <= 1.5));
        assert_eq!(rep.zero_count.unwrap().count, 1);
        assert!(!rep.coarse_grid);
    }

    #[test]
    fn zeta_paths_agree() {
        let sys = full2();
        let m = EtaModel::new(&sys, &one(&sys)).unwrap();
        let s = Complex64::new(1.6, 2.0);
        let series = m.log_zeta_series(s, 1e-14).unwrap().exp();
        let res = m.zeta_resolvent(s).unwrap();
        assert!((series - res).norm() < 1e-12 * res.norm());
    }

    #[test]
    fn growth_examples() {
        let sys = full2();
        let ts: Vec<f64> = (1..=20).map(|i| i as f64 * 3.3).collect();
        let zero = CylinderFunction::zero(sys.base());
        let rep = growth_scan(&sys, &zero, 1.5, &ts).unwrap();
        assert!(rep.fit_skipped && rep.growth.is_none());
        let rep = growth_scan(&sys, &one(&sys), 1.5, &ts).unwrap();
        assert!(rep.growth.unwrap().alpha_hat.abs() < 0.2);
        assert!(rep.points.iter().all(|p| p.modulus <= 2f64.powf(-0.5) / (1.0 - 2f64.powf(-0.5)) + 1e-12));
    }
}
