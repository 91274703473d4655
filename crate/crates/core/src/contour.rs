//! Mellin kernels and contour-integral evaluation of the counting function
//! `Φ_1` and the auxiliary functions `ψ_{K,ℓ}`.
//!
//! Every integrand is `η(s) T^{s+ℓ} / (s(s+1)…(s+ℓ))` with `η` evaluated by
//! the resolvent. Since `η(s̄) = η(s)‾` for real data, the vertical line
//! integral `(1/2πi)∫_{x−iR}^{x+iR}` reduces to `(1/π) Re ∫_0^R g(x+it) dt`,
//! and the pair of horizontal segments at `±R` to `(1/π) Im ∫ g(x+iR) dx`.
//!
//! Truncating the line at height `R` costs at most
//! `η_{|k|}(d) T^{d+ℓ} / (π ℓ R^ℓ)`, the bound reported as the truncation
//! error. It is rigorous and usually pessimistic.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::integrate;
use crate::suspension::SuspensionSystem;
use crate::symbolic::CylinderFunction;
use crate::zeta::{certify_zero_free, residue_at_one, EtaModel, ZeroFreeCertificate};

/// Relative tolerance for the line integrals.
pub const DEFAULT_REL_TOL: f64 = 1e-8;

/// Truncation height used by `perron_phi1` when none is configured.
pub const DEFAULT_PERRON_HEIGHT: f64 = 1000.0;

/// A kernel evaluation whose truncation estimate exceeds this is flagged.
pub const KERNEL_TRUNCATION_TOL: f64 = 1e-2;

const MAX_PANELS: usize = 400_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContourConfig {
    /// Abscissa of the vertical line; `1 + 1/log T` when absent.
    pub d: Option<f64>,
    /// Truncation height. For `ψ_{K,ℓ}` the default is `(log T)^{eps_exp}`.
    pub height: Option<f64>,
    /// Left abscissa of the shifted contour; `C(R)` when absent.
    pub sigma_left: Option<f64>,
    pub eps_exp: f64,
    pub rho_reg: f64,
    /// Whether `ψ_{K,ℓ}` shifts the contour left of `Re s = 1`.
    pub shift: bool,
    pub rel_tol: f64,
}

impl Default for ContourConfig {
    fn default() -> Self {
        Self { d: None, height: None, sigma_left: None, eps_exp: 1.5, rho_reg: 0.5, shift: false, rel_tol: DEFAULT_REL_TOL }
    }
}

impl ContourConfig {
    pub fn abscissa(&self, t: f64) -> Result<f64> {
        let d = self.d.unwrap_or(1.0 + 1.0 / t.ln());
        if !(d > 1.0 && d.is_finite()) {
            return Err(Error::invalid(format!("abscissa d must exceed 1, got {d}")));
        }
        Ok(d)
    }

    /// `R(T) = (log T)^ε`, with `ε` inside `((3ρ+2)^{−1}, ρ^{−1})`.
    pub fn auxiliary_height(&self, t: f64) -> Result<f64> {
        if let Some(r) = self.height {
            return check_height(r);
        }
        let (eps, rho) = (self.eps_exp, self.rho_reg);
        if !(rho > 0.0 && eps > 1.0 / (3.0 * rho + 2.0) && eps < 1.0 / rho) {
            return Err(Error::invalid(format!(
                "eps_exp = {eps} must lie in ((3 rho + 2)^-1, rho^-1) for rho_reg = {rho}"
            )));
        }
        check_height(t.ln().powf(eps))
    }

    /// `C(R) = 1 − 1/(h^{ρ+1} R^ρ)`.
    pub fn left_abscissa(&self, h: f64, height: f64) -> f64 {
        self.sigma_left
            .unwrap_or_else(|| 1.0 - 1.0 / (h.powf(self.rho_reg + 1.0) * height.powf(self.rho_reg)))
    }
}

fn check_height(r: f64) -> Result<f64> {
    if r > 0.0 && r.is_finite() {
        Ok(r)
    } else {
        Err(Error::invalid(format!("truncation height must be positive, got {r}")))
    }
}

/// Outcome of one contour evaluation. `value = main_term + remainder` holds
/// exactly in floating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerronResult {
    pub t: f64,
    pub ell: u32,
    pub d: f64,
    pub height: f64,
    pub sigma_left: Option<f64>,
    pub value: f64,
    pub main_term: f64,
    pub remainder: f64,
    pub quadrature_error: f64,
    pub truncation_error: f64,
    pub evaluations: usize,
}

impl PerronResult {
    pub fn error_estimate(&self) -> f64 {
        self.quadrature_error + self.truncation_error
    }

    pub fn agrees_with(&self, direct: f64) -> bool {
        (self.value - direct).abs() <= self.error_estimate() + 1e-12 * direct.abs().max(1.0)
    }
}

/// `1/(s(s+1)…(s+ℓ))`.
fn rational(s: Complex64, ell: u32) -> Complex64 {
    let mut den = s;
    for j in 1..=ell {
        den *= s + j as f64;
    }
    den.inv()
}

fn panels_for(length: f64, frequency: f64) -> usize {
    let width = (std::f64::consts::PI / (frequency + 1.0)).min(1.0);
    ((length / width).ceil() as usize).clamp(1, MAX_PANELS)
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Numerical `(1/2πi)∫_{d−iR}^{d+iR} y^{s+a}/(s(s+1)…(s+ℓ)) ds` beside its
/// `R → ∞` limit. The order-one kernel carries `y^{s+1}` (limit `y − 1` for
/// `y > 1`); higher orders carry `y^s` (limit `(1 − 1/y)^ℓ/ℓ!`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelValue {
    pub value: f64,
    pub closed_form: f64,
    pub quadrature_error: f64,
    pub truncation_error: f64,
    pub r_too_small: bool,
}

impl KernelValue {
    pub fn within_estimate(&self) -> bool {
        (self.value - self.closed_form).abs() <= self.quadrature_error + self.truncation_error
    }
}

pub fn mellin_kernel(y: f64, d: f64, height: f64, ell: u32) -> Result<KernelValue> {
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::invalid(format!("kernel argument must be positive, got {y}")));
    }
    if !(d > 1.0) || ell == 0 {
        return Err(Error::invalid("kernel needs d > 1 and order at least 1"));
    }
    check_height(height)?;
    let a = if ell == 1 { 1.0 } else { 0.0 };
    let ly = y.ln();
    let q = integrate(
        |t| {
            let s = Complex64::new(d, t);
            Ok(((s + a) * ly).exp() * rational(s, ell))
        },
        0.0,
        height,
        panels_for(height, ly.abs()),
        1e-11,
        1e-15,
    )?;
    let closed_form = if y < 1.0 {
        0.0
    } else if ell == 1 {
        y - 1.0
    } else {
        (1.0 - 1.0 / y).powi(ell as i32) / factorial(ell)
    };
    let truncation_error = y.powf(d + a) / (std::f64::consts::PI * ell as f64 * height.powi(ell as i32));
    Ok(KernelValue {
        value: q.value.re / std::f64::consts::PI,
        closed_form,
        quadrature_error: q.error / std::f64::consts::PI,
        truncation_error,
        r_too_small: truncation_error > KERNEL_TRUNCATION_TOL,
    })
}

/// Largest `|kernel − closed form|` over `samples` heights spread
/// geometrically on `[r_lo, r_hi]`. Pointwise errors oscillate in `R`; the
/// envelope is what decays like a power.
pub fn kernel_error_envelope(y: f64, d: f64, r_lo: f64, r_hi: f64, ell: u32, samples: usize) -> Result<f64> {
    if !(r_lo > 0.0 && r_hi > r_lo) || samples < 2 {
        return Err(Error::invalid("envelope needs 0 < r_lo < r_hi and at least two samples"));
    }
    let mut worst: f64 = 0.0;
    for i in 0..samples {
        let r = r_lo * (r_hi / r_lo).powf(i as f64 / (samples - 1) as f64);
        let k = mellin_kernel(y, d, r, ell)?;
        worst = worst.max((k.value - k.closed_form).abs());
    }
    Ok(worst)
}

/// Envelope on `[R, 2R]` divided by envelope on `[2R, 4R]`.
pub fn kernel_convergence_ratio(y: f64, d: f64, height: f64, ell: u32) -> Result<f64> {
    let near = kernel_error_envelope(y, d, height, 2.0 * height, ell, 24)?;
    let far = kernel_error_envelope(y, d, 2.0 * height, 4.0 * height, ell, 24)?;
    Ok(near / far)
}

struct Integrand<'a> {
    model: &'a EtaModel,
    log_t: f64,
    ell: u32,
    frequency: f64,
}

impl Integrand<'_> {
    fn eval(&self, s: Complex64) -> Result<Complex64> {
        let eta = self.model.eta_resolvent(s)?.value;
        Ok(eta * ((s + self.ell as f64) * self.log_t).exp() * rational(s, self.ell))
    }

    /// `(1/π) Re ∫_0^R g(x+it) dt` and its error estimate.
    fn vertical(&self, x: f64, height: f64, rel_tol: f64) -> Result<(f64, f64, usize)> {
        let q = integrate(|t| self.eval(Complex64::new(x, t)), 0.0, height, panels_for(height, self.frequency), rel_tol, 0.0)?;
        let pi = std::f64::consts::PI;
        Ok((q.value.re / pi, q.error / pi, q.evaluations))
    }

    /// `(1/π) Im ∫_{x_l}^{x_r} g(x+iR) dx`: both horizontal segments.
    fn horizontal(&self, x_l: f64, x_r: f64, height: f64, rel_tol: f64) -> Result<(f64, f64, usize)> {
        let q = integrate(|x| self.eval(Complex64::new(x, height)), x_l, x_r, 16, rel_tol, 0.0)?;
        let pi = std::f64::consts::PI;
        Ok((q.value.im / pi, q.error / pi, q.evaluations))
    }
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    sys: &SuspensionSystem,
    k: &CylinderFunction,
    t: f64,
    ell: u32,
    d: f64,
    height: f64,
    sigma_left: Option<f64>,
    rel_tol: f64,
) -> Result<PerronResult> {
    if !(rel_tol > 0.0) {
        return Err(Error::invalid("relative tolerance must be positive"));
    }
    let model = EtaModel::new(sys, k)?;
    let log_t = t.ln();
    let integrand = Integrand { model: &model, log_t, ell, frequency: log_t + sys.c() * sys.roof().max() };
    let truncation_error = model.abs_bound(d)? * ((d + ell as f64) * log_t).exp()
        / (std::f64::consts::PI * ell as f64 * height.powi(ell as i32));
    let (main_term, remainder, quadrature_error, evaluations) = match sigma_left {
        None => {
            let (v, e, n) = integrand.vertical(d, height, rel_tol)?;
            (0.0, v, e, n)
        }
        Some(sl) => {
            require_certificate(certify_zero_free(sys, sl, d, height)?, sl, d, height)?;
            let residue = residue_at_one(sys, k)?.value;
            let main = residue * (log_t * (ell + 1) as f64).exp() / factorial(ell + 1);
            let (v, ev, nv) = integrand.vertical(sl, height, rel_tol)?;
            let (h, eh, nh) = integrand.horizontal(sl, d, height, rel_tol)?;
            (main, v + h, ev + eh, nv + nh)
        }
    };
    Ok(PerronResult {
        t,
        ell,
        d,
        height,
        sigma_left,
        value: main_term + remainder,
        main_term,
        remainder,
        quadrature_error,
        truncation_error,
        evaluations,
    })
}

fn require_certificate(cert: ZeroFreeCertificate, sl: f64, d: f64, height: f64) -> Result<()> {
    if cert.covers(sl, d, height) {
        Ok(())
    } else {
        Err(Error::refused("zero-free certificate does not cover the contour"))
    }
}

/// `Φ_1(T) ≈ (1/2πi)∫_{d−iR}^{d+iR} η(s) T^{s+1}/(s(s+1)) ds`.
pub fn perron_phi1(sys: &SuspensionSystem, k: &CylinderFunction, t: f64, config: &ContourConfig) -> Result<PerronResult> {
    if !(t >= 2.0 && t.is_finite()) {
        return Err(Error::invalid(format!("T must be at least 2, got {t}")));
    }
    let d = config.abscissa(t)?;
    let height = check_height(config.height.unwrap_or(DEFAULT_PERRON_HEIGHT))?;
    evaluate(sys, k, t, 1, d, height, None, config.rel_tol)
}

/// `Φ_1(T)` as the residue at `s = 1` plus the integral over the contour
/// shifted to `Re s = σ_left`. Refused unless the rectangle
/// `[σ_left, d] × [−R, R]` is certified free of zeros other than `s = 1`.
pub fn shifted_contour_phi1(
    sys: &SuspensionSystem,
    k: &CylinderFunction,
    t: f64,
    sigma_left: f64,
    height: f64,
    config: &ContourConfig,
) -> Result<PerronResult> {
    if !(t >= 2.0 && t.is_finite()) {
        return Err(Error::invalid(format!("T must be at least 2, got {t}")));
    }
    let d = config.abscissa(t)?;
    evaluate(sys, k, t, 1, d, check_height(height)?, Some(sigma_left), config.rel_tol)
}

/// `ψ_{K,ℓ}(T) = (1/2πi)∫ η(s) T^{s+ℓ}/(s(s+1)…(s+ℓ)) ds`, defined for
/// unweighted systems only (so `c = h`). Truncated at `R(T)`; with
/// `config.shift` the line moves to `C(R)` and the residue term
/// `(1/h)∫k dμ · T^{ℓ+1}/(ℓ+1)!` is split off. The direct counterpart is
/// `Φ_ℓ(T)/ℓ!`.
pub fn psi_ell_contour(
    sys: &SuspensionSystem,
    k: &CylinderFunction,
    t: f64,
    ell: u32,
    config: &ContourConfig,
) -> Result<PerronResult> {
    if !sys.is_unweighted() {
        return Err(Error::refused("auxiliary functions are defined for psi = 0 only"));
    }
    if ell == 0 {
        return Err(Error::invalid("order must be at least 1"));
    }
    if !(t >= 2.0 && t.is_finite()) {
        return Err(Error::invalid(format!("T must be at least 2, got {t}")));
    }
    let d = config.abscissa(t)?;
    let height = config.auxiliary_height(t)?;
    let left = if config.shift {
        let sl = config.left_abscissa(sys.c(), height);
        if !(sl > 0.0 && sl < 1.0) {
            return Err(Error::refused(format!("left abscissa {sl} outside (0, 1); raise R or rho_reg")));
        }
        Some(sl)
    } else {
        None
    };
    evaluate(sys, k, t, ell, d, height, left, config.rel_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::{Mode, OrbitTable};
    use crate::symbolic::{EnumerationOptions, Roof, Subshift};

    fn full2() -> SuspensionSystem {
        let s = Subshift::full(2);
        SuspensionSystem::new(s.clone(), CylinderFunction::zero(&s), Roof::constant(&s, 1.0).unwrap()).unwrap()
    }

    fn nonlattice() -> SuspensionSystem {
        let s = Subshift::full(2);
        let roof = Roof::new(CylinderFunction::per_symbol(&s, &[1.0, 2f64.sqrt()]).unwrap()).unwrap();
        SuspensionSystem::new(s.clone(), CylinderFunction::zero(&s), roof).unwrap()
    }

    fn one(sys: &SuspensionSystem) -> CylinderFunction {
        CylinderFunction::constant(sys.base(), 1, 1.0).unwrap()
    }

    #[test]
    fn kernel_examples() {
        for (y, ell, want) in [(2.0, 1, 1.0), (0.5, 1, 0.0), (0.5, 3, 0.0), (2.0, 2, 0.125)] {
            let k = mellin_kernel(y, 1.5, 200.0, ell).unwrap();
            assert_eq!(k.closed_form, want);
            assert!(k.within_estimate(), "{y} {ell}: {k:?}");
            assert!(!k.r_too_small);
        }
        // Orders >= 1 are continuous at y = 1, where the tail is not
        // oscillatory and the R^-l estimate is sharp.
        assert_eq!(mellin_kernel(1.0, 1.5, 10.0, 1).unwrap().closed_form, 0.0);
        assert!(mellin_kernel(2.0, 0.5, 10.0, 1).is_err());
        assert!(mellin_kernel(2.0, 1.5, 0.5, 1).unwrap().r_too_small);
    }

    #[test]
    fn kernel_error_decays_like_a_power() {
        assert!(kernel_convergence_ratio(2.0, 1.5, 20.0, 1).unwrap() >= 1.8);
        assert!(kernel_convergence_ratio(2.0, 1.5, 20.0, 2).unwrap() >= 3.5);
        // At y = 1 the order-one tail is −1/(πR) to leading order.
        let ratio = kernel_convergence_ratio(1.0, 1.5, 20.0, 1).unwrap();
        assert!((ratio / 2.0 - 1.0).abs() <= 0.2, "{ratio}");
    }

    #[test]
    fn perron_matches_direct_sum_on_full_shift() {
        let sys = full2();
        let k = one(&sys);
        let direct = OrbitTable::build(&sys, &k, 8f64.ln() / sys.c(), &EnumerationOptions::default())
            .unwrap()
            .phi(8.0, 1, Mode::WithRepetitions)
            .unwrap();
        assert!((direct - 28.0).abs() < 1e-12);
        let r = perron_phi1(&sys, &k, 8.0, &ContourConfig::default()).unwrap();
        assert!(r.agrees_with(28.0), "{r:?}");
        assert_eq!(r.value, r.main_term + r.remainder);
        // The bound is pessimistic; the actual error is far smaller.
        assert!((r.value - 28.0).abs() < 0.05, "{}", r.value);
    }

    #[test]
    fn perron_trivial_cases() {
        let sys = full2();
        let zero = CylinderFunction::zero(sys.base());
        let r = perron_phi1(&sys, &zero, 8.0, &ContourConfig::default()).unwrap();
        assert_eq!(r.value, 0.0);
        // First orbit length scale is e^{c} = 2.
        let r = perron_phi1(&sys, &one(&sys), 2.0, &ContourConfig { height: Some(400.0), ..Default::default() }).unwrap();
        assert!(r.agrees_with(0.0), "{r:?}");
    }

    #[test]
    fn shifted_contour_refused_on_lattice_model() {
        let sys = full2();
        let err = shifted_contour_phi1(&sys, &one(&sys), 8.0, 0.9, 40.0, &ContourConfig::default()).unwrap_err();
        assert_eq!(err.kind(), crate::ErrorKind::Refusal);
    }

    #[test]
    fn shifted_contour_on_nonlattice_model() {
        let sys = nonlattice();
        let k = one(&sys);
        let t = (4.0 * sys.c()).exp();
        let direct = OrbitTable::build(&sys, &k, 4.0 + 1e-9, &EnumerationOptions::default())
            .unwrap()
            .phi(t, 1, Mode::WithRepetitions)
            .unwrap();
        let cfg = ContourConfig::default();
        let r = shifted_contour_phi1(&sys, &k, t, 0.97, 40.0, &cfg).unwrap();
        assert!(r.agrees_with(direct), "{r:?} vs {direct}");
        assert_eq!(r.value, r.main_term + r.remainder);
        // Residue of η at 1 is ∫k dμ/(c ∫r dμ).
        let expect = sys.flow_average(&k).unwrap() / sys.c();
        assert!((r.main_term / (t * t / 2.0) - expect).abs() < 1e-6);
        // Same truncated line integral, evaluated without the shift.
        let plain = perron_phi1(&sys, &k, t, &ContourConfig { height: Some(40.0), ..cfg }).unwrap();
        assert!((plain.value - r.value).abs() < 1e-5 * direct.abs().max(1.0), "{} vs {}", plain.value, r.value);
    }

    #[test]
    fn psi_ell_matches_direct_sum() {
        let sys = full2();
        let k = one(&sys);
        let t: f64 = 20.0;
        let direct = OrbitTable::build(&sys, &k, t.ln() / sys.c() + 1.0, &EnumerationOptions::default())
            .unwrap()
            .phi(t, 2, Mode::WithRepetitions)
            .unwrap()
            / 2.0;
        let cfg = ContourConfig { height: Some(300.0), ..Default::default() };
        let r = psi_ell_contour(&sys, &k, t, 2, &cfg).unwrap();
        assert!(r.agrees_with(direct), "{r:?} vs {direct}");
        let zero = CylinderFunction::zero(sys.base());
        assert_eq!(psi_ell_contour(&sys, &zero, t, 2, &cfg).unwrap().value, 0.0);
    }

    #[test]
    fn psi_ell_refuses_weighted_systems() {
        let s = Subshift::full(2);
        let psi = CylinderFunction::per_symbol(&s, &[0.1, -0.2]).unwrap();
        let sys = SuspensionSystem::new(s.clone(), psi, Roof::constant(&s, 1.0).unwrap()).unwrap();
        let err = psi_ell_contour(&sys, &one(&sys), 10.0, 2, &ContourConfig::default()).unwrap_err();
        assert_eq!(err.kind(), crate::ErrorKind::Refusal);
    }

    #[test]
    fn d_independence() {
        let sys = nonlattice();
        let k = one(&sys);
        let t: f64 = 10.0;
        let runs: Vec<PerronResult> = [1.05, 1.2, 1.0 + 1.0 / t.ln()]
            .iter()
            .map(|&d| perron_phi1(&sys, &k, t, &ContourConfig { d: Some(d), height: Some(500.0), ..Default::default() }).unwrap())
            .collect();
        for a in &runs {
            for b in &runs {
                assert!((a.value - b.value).abs() <= a.error_estimate() + b.error_estimate());
            }
        }
    }
}
