//! Adaptive Gauss–Kronrod (7/15) quadrature for complex integrands on a real
//! interval. The interval is cut into equal initial panels that are refined
//! independently and concurrently; panel results are summed in panel order.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::par;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

/// Gauss weights at `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: Complex64,
    /// Sum of the panel-wise `|K15 − G7|` estimates.
    pub error: f64,
    /// Estimate of `∫|f|`, the scale the relative tolerance refers to.
    pub abs_integral: f64,
    pub evaluations: usize,
}

struct Panel {
    value: Complex64,
    error: f64,
    abs: f64,
}

fn gk15<F>(f: &F, a: f64, b: f64) -> Result<Panel>
where
    F: Fn(f64) -> Result<Complex64>,
{
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut kron = Complex64::new(0.0, 0.0);
    let mut gauss = Complex64::new(0.0, 0.0);
    let mut abs = 0.0;
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let pts: &[f64] = if x == 0.0 { &[0.0] } else { &[-x, x] };
        for &u in pts {
            let v = f(mid + half * u)?;
            kron += v * w;
            abs += v.norm() * w;
            if j % 2 == 1 {
                gauss += v * WG[j / 2];
            }
        }
    }
    Ok(Panel { value: kron * half, error: ((kron - gauss) * half).norm(), abs: abs * half.abs() })
}

fn refine<F>(f: &F, a: f64, b: f64, p: Panel, tol: f64, depth: u32, evals: &mut usize) -> Result<Panel>
where
    F: Fn(f64) -> Result<Complex64>,
{
    if p.error <= tol || depth >= MAX_DEPTH || !p.error.is_finite() {
        return Ok(p);
    }
    let m = 0.5 * (a + b);
    let left = gk15(f, a, m)?;
    let right = gk15(f, m, b)?;
    *evals += 30;
    let l = refine(f, a, m, left, 0.5 * tol, depth + 1, evals)?;
    let r = refine(f, m, b, right, 0.5 * tol, depth + 1, evals)?;
    Ok(Panel { value: l.value + r.value, error: l.error + r.error, abs: l.abs + r.abs })
}

/// `∫_a^b f` to `max(abs_tol, rel_tol·∫|f|)`. Errors raised by `f` abort the
/// whole integral; the first one in panel order is returned.
pub fn integrate<F>(f: F, a: f64, b: f64, panels: usize, rel_tol: f64, abs_tol: f64) -> Result<Quadrature>
where
    F: Fn(f64) -> Result<Complex64> + Sync + Send,
{
    if !(a.is_finite() && b.is_finite()) || panels == 0 {
        return Err(Error::invalid("quadrature needs a finite interval and at least one panel"));
    }
    if a == b {
        return Ok(Quadrature { value: Complex64::new(0.0, 0.0), error: 0.0, abs_integral: 0.0, evaluations: 0 });
    }
    let width = (b - a) / panels as f64;
    let bounds = |i: usize| (a + width * i as f64, if i + 1 == panels { b } else { a + width * (i + 1) as f64 });
    let coarse: Vec<Result<Panel>> = par::map_range(panels, |i| {
        let (lo, hi) = bounds(i);
        gk15(&f, lo, hi)
    });
    let coarse: Vec<Panel> = coarse.into_iter().collect::<Result<_>>()?;
    let scale: f64 = coarse.iter().map(|p| p.abs).sum();
    let tol = abs_tol.max(rel_tol * scale);
    let per_panel = tol / panels as f64;
    let refined: Vec<Result<(Panel, usize)>> = par::map_range(panels, |i| {
        let (lo, hi) = bounds(i);
        let p = &coarse[i];
        let mut evals = 15;
        let out = refine(&f, lo, hi, Panel { value: p.value, error: p.error, abs: p.abs }, per_panel, 0, &mut evals)?;
        Ok((out, evals))
    });
    let mut value = Complex64::new(0.0, 0.0);
    let (mut error, mut abs, mut evaluations) = (0.0, 0.0, 0);
    for r in refined {
        let (p, n) = r?;
        value += p.value;
        error += p.error;
        abs += p.abs;
        evaluations += n;
    }
    Ok(Quadrature { value, error, abs_integral: abs, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_oscillatory() {
        let q = integrate(|x| Ok(Complex64::new(x * x, 0.0)), 0.0, 3.0, 1, 1e-12, 0.0).unwrap();
        assert!((q.value.re - 9.0).abs() < 1e-12);
        let q = integrate(|x| Ok(Complex64::new(0.0, x).exp()), 0.0, 100.0, 20, 1e-10, 0.0).unwrap();
        let exact = Complex64::new(100f64.sin(), 1.0 - 100f64.cos());
        assert!((q.value - exact).norm() < 1e-8, "{:?}", q.value);
    }

    #[test]
    fn worker_count_does_not_change_result() {
        let f = |x: f64| Ok(Complex64::new((3.0 * x).cos() / (1.0 + x * x), x.sin()));
        let a = par::with_workers(1, || integrate(f, 0.0, 50.0, 37, 1e-9, 0.0).unwrap());
        let b = par::with_workers(4, || integrate(f, 0.0, 50.0, 37, 1e-9, 0.0).unwrap());
        assert_eq!(a, b);
    }
}
