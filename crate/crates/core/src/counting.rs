//! Orbit enumeration under a roof-length budget, the counting functions
//! `Φ_ℓ`, weighted orbit measures `μ_T`, window measures, equidistribution
//! error curves and rate fits.
//!
//! Instances `(τ, m)` carry the weight `k_τ e^{mψ_τ}`: summing over periodic
//! points with the `1/n` factor of the zeta calculus gives exactly one such
//! term per repetition. Orbit masses follow arc length, so `Z_T` weights each
//! prime orbit by `e^{ψ_τ} ℓ_τ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::par::KahanSum;
use crate::suspension::SuspensionSystem;
use crate::symbolic::{collect_lyndon, CylinderFunction, EnumerationOptions, LengthBound, PrimeOrbit};

/// Relative slack applied to every `≤` test on orbit lengths, so that
/// boundary orbits (`e^{c m ℓ_τ} = T`) survive rounding of `log T / c`.
pub const BOUNDARY_SLACK: f64 = 1e-12;

#[inline]
fn within(length: f64, budget: f64) -> bool {
    length <= budget * (1.0 + BOUNDARY_SLACK)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    PrimeOnly,
    WithRepetitions,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::PrimeOnly => "prime_only",
            Mode::WithRepetitions => "with_repetitions",
        }
    }
}

/// Repetition `m` of a prime orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitInstance {
    /// Index into [`OrbitTable::orbits`].
    pub orbit: u32,
    pub multiplicity: u32,
    /// `m·ℓ_τ`.
    pub total_length: f64,
    /// `e^{m ψ_τ}`.
    pub weight: f64,
    /// `k_τ e^{m ψ_τ}`.
    pub k_weight: f64,
    /// `ℓ_τ e^{m ψ_τ}`, the `k = r` weight.
    pub r_weight: f64,
}

/// Every instance with `m·ℓ_τ ≤ L`, sorted by total length.
#[derive(Debug, Clone)]
pub struct OrbitTable {
    c: f64,
    budget: f64,
    orbits: Vec<PrimeOrbit>,
    instances: Vec<OrbitInstance>,
}

impl OrbitTable {
    pub fn build(sys: &SuspensionSystem, k: &CylinderFunction, budget: f64, opts: &EnumerationOptions) -> Result<Self> {
        if !(budget > 0.0) || !budget.is_finite() {
            return Err(Error::invalid(format!("roof-length budget must be positive, got {budget}")));
        }
        if k.shift() != sys.base() {
            return Err(Error::invalid("observable lives on a different shift"));
        }
        let weights = sys.weights(k);
        let bound = LengthBound { roof: sys.roof(), budget };
        let make = |w: &[u16]| {
            let o = weights.orbit(w);
            within(o.length, budget).then_some(o)
        };
        let mut orbits = collect_lyndon(sys.base(), &bound, opts, &make)?;
        orbits.sort_by(|a, b| a.word.len().cmp(&b.word.len()).then_with(|| a.word.cmp(&b.word)));
        let mut instances = Vec::new();
        for (idx, o) in orbits.iter().enumerate() {
            let mut m = 1u32;
            while within(m as f64 * o.length, budget) {
                let weight = (m as f64 * o.psi).exp();
                instances.push(OrbitInstance {
                    orbit: idx as u32,
                    multiplicity: m,
                    total_length: m as f64 * o.length,
                    weight,
                    k_weight: o.k * weight,
                    r_weight: o.length * weight,
                });
                if instances.len() as u64 > opts.max_items {
                    return Err(Error::Budget {
                        what: "orbit instances".into(),
                        limit: opts.max_items,
                        reached: instances.len() as u64,
                    });
                }
                m += 1;
            }
        }
        instances.sort_by(|a, b| {
            a.total_length
                .total_cmp(&b.total_length)
                .then(a.orbit.cmp(&b.orbit))
                .then(a.multiplicity.cmp(&b.multiplicity))
        });
        Ok(Self { c: sys.c(), budget, orbits, instances })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn orbits(&self) -> &[PrimeOrbit] {
        &self.orbits
    }

    pub fn instances(&self) -> &[OrbitInstance] {
        &self.instances
    }

    /// Instances (in `mode`) with total length `≤ cut`.
    fn upto(&self, cut: f64, mode: Mode) -> Result<impl Iterator<Item = &OrbitInstance>> {
        if cut > self.budget * (1.0 + BOUNDARY_SLACK) {
            return Err(Error::invalid(format!("length {cut} exceeds the enumerated budget {}", self.budget)));
        }
        let end = self.instances.partition_point(|i| within(i.total_length, cut));
        Ok(self.instances[..end].iter().filter(move |i| mode == Mode::WithRepetitions || i.multiplicity == 1))
    }

    fn weighted(&self, cut: f64, mode: Mode, f: impl Fn(&OrbitInstance) -> f64) -> Result<f64> {
        let mut acc = KahanSum::new();
        for i in self.upto(cut, mode)? {
            acc.add(f(i));
        }
        Ok(acc.value())
    }

    /// `Φ_ℓ(T) = Σ_{e^{c m ℓ_τ} ≤ T} k_τ e^{mψ_τ} (T − e^{c m ℓ_τ})^ℓ`.
    pub fn phi(&self, t: f64, ell: u32, mode: Mode) -> Result<f64> {
        if !(t >= 1.0) {
            return Err(Error::invalid(format!("T must be at least 1, got {t}")));
        }
        let cut = t.ln() / self.c;
        let c = self.c;
        self.weighted(cut, mode, |i| {
            if ell == 0 {
                i.k_weight
            } else {
                i.k_weight * (t - (c * i.total_length).exp()).max(0.0).powi(ell as i32)
            }
        })
    }

    /// `Z_T` in both modes.
    pub fn z_t(&self, t: f64) -> Result<ZT> {
        if !(t > 0.0) {
            return Err(Error::invalid("T must be positive"));
        }
        Ok(ZT {
            prime_only: self.weighted(t, Mode::PrimeOnly, |i| i.r_weight)?,
            with_repetitions: self.weighted(t, Mode::WithRepetitions, |i| i.r_weight)?,
        })
    }

    /// `∫K dμ_{Ψ,T}` with arc-length normalized orbit measures.
    pub fn mu_t(&self, t: f64, mode: Mode) -> Result<f64> {
        let num = self.weighted(t, mode, |i| i.k_weight)?;
        let den = self.weighted(t, mode, |i| i.r_weight)?;
        if den == 0.0 {
            return Err(Error::invalid(format!("no periodic orbits of length <= {t}")));
        }
        Ok(num / den)
    }

    /// Orbits with `T − ε < m ℓ_τ ≤ T`, as a ratio of `Φ_0` differences.
    pub fn window(&self, t: f64, eps: f64, mode: Mode) -> Result<f64> {
        if !(eps > 0.0 && eps <= t) {
            return Err(Error::invalid(format!("window width must satisfy 0 < eps <= T, got eps = {eps}, T = {t}")));
        }
        let lo = t - eps;
        let num = self.weighted(t, mode, |i| i.k_weight)? - self.weighted(lo, mode, |i| i.k_weight)?;
        let den = self.weighted(t, mode, |i| i.r_weight)? - self.weighted(lo, mode, |i| i.r_weight)?;
        if den == 0.0 {
            return Err(Error::invalid(format!("window ({lo}, {t}] holds no orbits")));
        }
        Ok(num / den)
    }

    /// `|μ_T(K) − reference|` over an increasing grid of `T`.
    pub fn error_curve(&self, grid: &[f64], mode: Mode, reference: f64, lattice: bool) -> Result<CountingCurve> {
        check_increasing(grid)?;
        let points = grid
            .iter()
            .map(|&t| {
                let value = self.mu_t(t, mode)?;
                Ok(CurvePoint { t, value, reference, abs_error: (value - reference).abs() })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CountingCurve { points, mode, c: self.c, lattice })
    }

    /// Window errors `|window(T, ε) − reference|` over a grid.
    pub fn window_curve(&self, grid: &[f64], eps: f64, mode: Mode, reference: f64, lattice: bool) -> Result<CountingCurve> {
        check_increasing(grid)?;
        let points = grid
            .iter()
            .map(|&t| {
                let value = self.window(t, eps, mode)?;
                Ok(CurvePoint { t, value, reference, abs_error: (value - reference).abs() })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CountingCurve { points, mode, c: self.c, lattice })
    }
}

fn check_increasing(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("T grid must be non-empty and strictly increasing"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZT {
    pub prime_only: f64,
    pub with_repetitions: f64,
}

/// Instances with `m·ℓ_τ ≤ L` in deterministic order.
pub fn enumerate_by_budget(
    sys: &SuspensionSystem,
    k: &CylinderFunction,
    budget: f64,
    opts: &EnumerationOptions,
) -> Result<Vec<OrbitInstance>> {
    Ok(OrbitTable::build(sys, k, budget, opts)?.instances)
}

fn table_for_t(sys: &SuspensionSystem, k: &CylinderFunction, length: f64) -> Result<OrbitTable> {
    OrbitTable::build(sys, k, length.max(f64::MIN_POSITIVE), &EnumerationOptions::default())
}

pub fn phi(sys: &SuspensionSystem, k: &CylinderFunction, t: f64, ell: u32, mode: Mode) -> Result<f64> {
    if !(t >= 1.0) {
        return Err(Error::invalid(format!("T must be at least 1, got {t}")));
    }
    if t == 1.0 {
        return Ok(0.0);
    }
    table_for_t(sys, k, t.ln() / sys.c())?.phi(t, ell, mode)
}

pub fn z_t(sys: &SuspensionSystem, t: f64) -> Result<ZT> {
    if !(t > 0.0) {
        return Err(Error::invalid("T must be positive"));
    }
    let zero = CylinderFunction::zero(sys.base());
    table_for_t(sys, &zero, t)?.z_t(t)
}

pub fn mu_t_integral(sys: &SuspensionSystem, k: &CylinderFunction, t: f64, mode: Mode) -> Result<f64> {
    table_for_t(sys, k, t)?.mu_t(t, mode)
}

pub fn window_integral(sys: &SuspensionSystem, k: &CylinderFunction, t: f64, eps: f64, mode: Mode) -> Result<f64> {
    table_for_t(sys, k, t)?.window(t, eps, mode)
}

pub fn error_curve(sys: &SuspensionSystem, k: &CylinderFunction, grid: &[f64], mode: Mode) -> Result<CountingCurve> {
    check_increasing(grid)?;
    let table = table_for_t(sys, k, *grid.last().expect("non-empty"))?;
    table.error_curve(grid, mode, sys.flow_average(k)?, sys.is_lattice())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub t: f64,
    pub value: f64,
    pub reference: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountingCurve {
    pub points: Vec<CurvePoint>,
    pub mode: Mode,
    /// Flow pressure, used by the exponential rate model.
    pub c: f64,
    pub lattice: bool,
}

impl CountingCurve {
    /// CSV body with columns `T,value,reference,abs_error,mode`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("T,value,reference,abs_error,mode\n");
        for p in &self.points {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
                p.t,
                p.value,
                p.reference,
                p.abs_error,
                self.mode.as_str()
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// `err ≈ C e^{−δ c T}`.
    Exponential,
    /// `err ≈ C T^{−δ}`.
    Polynomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub model: RateModel,
    pub delta_hat: f64,
    pub intercept: f64,
    /// RMS residual in log space.
    pub residual: f64,
    pub n_points: usize,
    /// Samples dropped because their error was exactly zero.
    pub excluded_zero: usize,
    pub span: (f64, f64),
}

pub fn fit_rate(curve: &CountingCurve, model: RateModel) -> Result<RateFit> {
    let pos: Vec<&CurvePoint> = curve.points.iter().filter(|p| p.abs_error > 0.0).collect();
    let excluded_zero = curve.points.len() - pos.len();
    if pos.len() < 4 {
        return Err(Error::refused(format!("rate fit needs 4 positive error samples, got {}", pos.len())));
    }
    let x: Vec<f64> = match model {
        RateModel::Exponential => pos.iter().map(|p| p.t).collect(),
        RateModel::Polynomial => pos.iter().map(|p| p.t.ln()).collect(),
    };
    let y: Vec<f64> = pos.iter().map(|p| p.abs_error.ln()).collect();
    let f = linear_fit(&x, &y)?;
    let delta_hat = match model {
        RateModel::Exponential => -f.slope / curve.c,
        RateModel::Polynomial => -f.slope,
    };
    Ok(RateFit {
        model,
        delta_hat,
        intercept: f.intercept,
        residual: f.residual,
        n_points: f.n_points,
        excluded_zero,
        span: (pos[0].t, pos[pos.len() - 1].t),
    })
}

/// Smoothing width used by [`unsmooth`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmoothingWidth {
    /// `Δ(T) = T^{1−δ}`.
    Power { delta: f64 },
    /// `Δ(T) = T (log T)^{−β/2}`.
    LogPower { beta: f64 },
}

impl SmoothingWidth {
    pub fn width(&self, t: f64) -> f64 {
        match *self {
            SmoothingWidth::Power { delta } => t.powf(1.0 - delta),
            SmoothingWidth::LogPower { beta } => t * t.ln().powf(-beta / 2.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnsmoothBracket {
    pub t: f64,
    pub width: f64,
    /// `(Φ_1(T) − Φ_1(T − Δ))/Δ`.
    pub lower: f64,
    /// `(Φ_1(T + Δ) − Φ_1(T))/Δ`.
    pub upper: f64,
}

impl UnsmoothBracket {
    pub fn contains(&self, v: f64) -> bool {
        let slack = 1e-12 * v.abs().max(self.upper.abs()).max(1.0);
        self.lower - slack <= v && v <= self.upper + slack
    }
}

/// Two-sided bound on `Φ_0(T)` from a `Φ_1` evaluator, valid because
/// `Φ_0` is nondecreasing (`K ≥ 0`) and `Φ_1(T) = ∫_1^T Φ_0`.
pub fn unsmooth(
    phi1: impl Fn(f64) -> Result<f64>,
    t: f64,
    width: SmoothingWidth,
    resolution: f64,
) -> Result<UnsmoothBracket> {
    let delta = width.width(t);
    if !(delta > resolution) || !delta.is_finite() {
        return Err(Error::invalid(format!("smoothing width {delta} below evaluator resolution {resolution}")));
    }
    let clamp = |x: f64| if x <= 1.0 { Ok(0.0) } else { phi1(x) };
    let mid = phi1(t)?;
    let lower = (mid - clamp(t - delta)?) / delta;
    let upper = (phi1(t + delta)? - mid) / delta;
    Ok(UnsmoothBracket { t, width: delta, lower, upper })
}
