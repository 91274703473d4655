//! Lower-bound estimates of `‖L_s^n‖_{1,t}` and the Dolgopyat decay probe.
//!
//! Norms are maximized over a reproducible trial set: trial 0 is the
//! constant function, trial `j ≥ 1` has random complex Chebyshev
//! coefficients drawn from ChaCha8 seeded with the master seed on stream `j`.
//! Each trial is normalized to unit `‖·‖_{1,t}`. The estimates are therefore
//! lower bounds on the operator norms.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::grid::GridFunction;
use super::norm::norm_1t;
use super::operator::IntervalModel;
use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::par;
use crate::suspension::detect_lattice;
use crate::symbolic::Roof;

pub const MIN_TRIALS: usize = 32;

/// Trial `index` for the given seed, normalized in `‖·‖_{1,t}`.
pub fn trial_function(model: &IntervalModel, index: usize, seed: u64, t: f64) -> Result<GridFunction> {
    let w = if index == 0 {
        model.grid_function(|_, _| Complex64::new(1.0, 0.0))?
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        let m = model.order();
        let coeffs: Vec<Vec<Complex64>> = (0..model.map().len())
            .map(|_| {
                (0..m)
                    .map(|k| {
                        let decay = 1.0 / ((k + 1) * (k + 1)) as f64;
                        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * decay
                    })
                    .collect()
            })
            .collect();
        let intervals = model.intervals().clone();
        model.grid_function(|i, x| {
            let (a, b) = intervals[i];
            let theta = ((2.0 * x - a - b) / (b - a)).clamp(-1.0, 1.0).acos();
            coeffs[i].iter().enumerate().map(|(k, &ck)| ck * (k as f64 * theta).cos()).sum()
        })?
    };
    let norm = norm_1t(&w, t);
    if !(norm > 0.0) {
        return Err(Error::invalid("trial function vanishes"));
    }
    Ok(w.scale(Complex64::new(1.0 / norm, 0.0)))
}

/// `max_trials ‖L_s^n w‖_{1,t}` for `n = 1..=n_max`, with `t = Im s`.
pub fn op_norm_estimate(model: &IntervalModel, s: Complex64, n_max: usize, trials: usize, seed: u64) -> Result<Vec<f64>> {
    if trials < MIN_TRIALS {
        return Err(Error::invalid(format!("at least {MIN_TRIALS} trials are required, got {trials}")));
    }
    if n_max == 0 {
        return Err(Error::invalid("n_max must be at least 1"));
    }
    let t = s.im;
    let per_trial: Vec<Result<Vec<f64>>> = par::map_range(trials, |j| {
        let mut w = trial_function(model, j, seed, t)?;
        let mut norms = Vec::with_capacity(n_max);
        for _ in 0..n_max {
            w = model.apply_l_adaptive(s, &w)?;
            norms.push(norm_1t(&w, t));
        }
        Ok(norms)
    });
    let mut best = vec![0.0f64; n_max];
    for r in per_trial {
        for (b, v) in best.iter_mut().zip(r?) {
            *b = b.max(v);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DolgopyatProbeResult {
    pub sigma: f64,
    pub t: f64,
    /// `⌊log|t|⌋`.
    pub block: usize,
    /// `P(ψ − σ c r)` of the discretized operator.
    pub pressure: f64,
    pub trials: usize,
    pub seed: u64,
    /// Lower-bound estimates of `‖L^n‖_{1,t}`, `n = 1..=n_max`.
    pub norms: Vec<f64>,
    /// Fitted decay per unit of `p⌊log|t|⌋`.
    pub rho_hat: f64,
    /// Fitted prefactor, the analogue of `C`.
    pub c_hat: f64,
    /// RMS residual of the log-norm fit.
    pub residual: f64,
    /// Set when the roof is lattice; no decay is expected then.
    pub lattice_warning: bool,
}

/// Whether the roof is piecewise constant with lattice orbit lengths. Smooth
/// non-constant roofs are reported as non-lattice.
pub fn roof_is_lattice(model: &IntervalModel) -> Result<bool> {
    match model.symbolic_roof() {
        Some(r) => Ok(detect_lattice(&Roof::new(r)?, model.map().shift(), 10)?.lattice),
        None => Ok(false),
    }
}

/// Fit `log‖L^n‖ ≈ log C + p⌊log|t|⌋·log ρ` at the block ends
/// `n = p⌊log|t|⌋` (`l = 0`, so the `e^{lP}` factor drops out). All
/// `n ≤ n_max` are still reported in `norms`.
pub fn dolgopyat_probe(
    model: &IntervalModel,
    sigma: f64,
    t: f64,
    n_max: usize,
    trials: usize,
    seed: u64,
) -> Result<DolgopyatProbeResult> {
    if !(t.abs() >= std::f64::consts::E) {
        return Err(Error::invalid(format!("probe needs |t| >= e so that floor(log|t|) >= 1, got {t}")));
    }
    let block = t.abs().ln().floor() as usize;
    if n_max < 2 * block {
        return Err(Error::invalid(format!("n_max must cover two blocks of length {block}")));
    }
    let pressure = model.pressure(sigma)?;
    let norms = op_norm_estimate(model, Complex64::new(sigma, t), n_max, trials, seed)?;
    let (x, y): (Vec<f64>, Vec<f64>) = norms
        .iter()
        .enumerate()
        .filter(|&(idx, &v)| (idx + 1) % block == 0 && v > 0.0)
        .map(|(idx, &v)| ((idx + 1) as f64, v.ln()))
        .unzip();
    let fit = linear_fit(&x, &y)?;
    Ok(DolgopyatProbeResult {
        sigma,
        t,
        block,
        pressure,
        trials,
        seed,
        norms,
        rho_hat: fit.slope.exp(),
        c_hat: fit.intercept.exp(),
        residual: fit.residual,
        lattice_warning: roof_is_lattice(model)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::map::ExpandingMarkovMap;
    use crate::interval::operator::{PiecewisePoly, SmoothRoof};

    fn model(roof: &[f64]) -> IntervalModel {
        let map = ExpandingMarkovMap::doubling();
        let psi = PiecewisePoly::constant(&map, 0.0);
        let r = SmoothRoof::new(&map, PiecewisePoly::uniform(&map, roof).unwrap()).unwrap();
        IntervalModel::new(map, psi, r).unwrap()
    }

    #[test]
    fn normalized_operator_is_flat() {
        let m = model(&[1.0]);
        assert!((m.c() - 2f64.ln()).abs() < 1e-12);
        let est = op_norm_estimate(&m, Complex64::new(1.0, 0.0), 10, 32, 1).unwrap();
        assert!(est.iter().all(|v| (v - 1.0).abs() < 1e-9), "{est:?}");
        assert!(op_norm_estimate(&m, Complex64::new(1.0, 0.0), 3, 0, 1).is_err());
    }

    #[test]
    fn lattice_twist_does_not_decay() {
        let m = model(&[1.0]);
        let t = 2.0 * std::f64::consts::PI / m.c();
        let est = op_norm_estimate(&m, Complex64::new(1.0, t), 20, 32, 3).unwrap();
        assert!(est.iter().all(|v| (v / est[0] - 1.0).abs() <= 0.02), "{est:?}");
        let probe = dolgopyat_probe(&m, 1.0, 3.0 * t, 20, 32, 3).unwrap();
        assert!(probe.lattice_warning);
        assert!(dolgopyat_probe(&m, 1.0, 2.0, 20, 32, 3).is_err());
    }

    #[test]
    fn determinism_across_workers() {
        let m = model(&[1.0, 0.0, 0.25]);
        let s = Complex64::new(1.0, 50.0);
        let a = par::with_workers(1, || op_norm_estimate(&m, s, 6, 32, 11).unwrap());
        let b = par::with_workers(4, || op_norm_estimate(&m, s, 6, 32, 11).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn nonlattice_roof_decays() {
        let m = model(&[1.0, 0.0, 0.25]);
        let p = dolgopyat_probe(&m, 1.0, 50.0, 30, 32, 20240917).unwrap();
        assert!(!p.lattice_warning);
        assert_eq!(p.block, 3);
        assert!(p.rho_hat <= 0.98 && p.residual <= 0.1, "{p:?}");
    }
}
