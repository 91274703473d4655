//! Reference models used by the test suites, the bench and the bundled
//! experiment configs.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::interval::{ExpandingMarkovMap, GridFunction, IntervalModel, PiecewisePoly, SmoothRoof};
use crate::suspension::SuspensionSystem;
use crate::symbolic::{CylinderFunction, Roof, Subshift};

/// Full 2-shift, `ψ = 0`, `r ≡ 1`. Here `c = log 2`.
pub fn full_shift_unit() -> SuspensionSystem {
    let s = Subshift::full(2);
    let roof = Roof::constant(&s, 1.0).expect("positive roof");
    SuspensionSystem::new(s.clone(), CylinderFunction::zero(&s), roof).expect("reference model")
}

/// Golden-mean shift, `ψ = 0`, `r ≡ 1`.
pub fn golden_mean_unit() -> SuspensionSystem {
    let s = Subshift::golden_mean();
    let roof = Roof::constant(&s, 1.0).expect("positive roof");
    SuspensionSystem::new(s.clone(), CylinderFunction::zero(&s), roof).expect("reference model")
}

/// Full 2-shift with roof `(1, √2)` on the two symbols: non-lattice.
pub fn nonlattice() -> SuspensionSystem {
    let s = Subshift::full(2);
    let roof = Roof::new(CylinderFunction::per_symbol(&s, &[1.0, 2f64.sqrt()]).expect("depth-1 table")).expect("positive roof");
    SuspensionSystem::new(s.clone(), CylinderFunction::zero(&s), roof).expect("reference model")
}

/// Indicator of symbol 0, the depth-1 observable used on [`nonlattice`].
pub fn nonlattice_observable(sys: &SuspensionSystem) -> CylinderFunction {
    CylinderFunction::per_symbol(sys.base(), &[1.0, 0.0]).expect("depth-1 table")
}

/// Depth-2 model with random `ψ ∈ [−0.3, 0.3]` and `r ∈ [0.5, 2]`, on the
/// full 2-shift for even `index` and the golden-mean shift for odd.
pub fn random_symbolic(seed: u64, index: u64) -> Result<SuspensionSystem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let s = if index % 2 == 0 { Subshift::full(2) } else { Subshift::golden_mean() };
    let psi = CylinderFunction::from_fn(&s, 2, |_| rng.random_range(-0.3..0.3))?;
    let r = CylinderFunction::from_fn(&s, 2, |_| rng.random_range(0.5..2.0))?;
    SuspensionSystem::new(s, psi, Roof::new(r)?)
}

/// Random depth-2 observable on the base of `sys`, values in `[−1, 1]`.
pub fn random_observable(sys: &SuspensionSystem, seed: u64, index: u64) -> Result<CylinderFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    rng.set_stream(index);
    CylinderFunction::from_fn(sys.base(), 2, |_| rng.random_range(-1.0..1.0))
}

/// Doubling map with `ψ = 0` and the same roof polynomial (coefficients in
/// increasing degree) on both branches.
pub fn doubling(roof: &[f64]) -> Result<IntervalModel> {
    let map = ExpandingMarkovMap::doubling();
    let psi = PiecewisePoly::constant(&map, 0.0);
    let r = SmoothRoof::new(&map, PiecewisePoly::uniform(&map, roof)?)?;
    IntervalModel::new(map, psi, r)
}

/// Doubling map with `r(x) = 1 + x²/4`.
pub fn doubling_smooth() -> IntervalModel {
    doubling(&[1.0, 0.0, 0.25]).expect("reference model")
}

/// Doubling map with `r ≡ 1`: lattice.
pub fn doubling_lattice() -> IntervalModel {
    doubling(&[1.0]).expect("reference model")
}

/// `k(x) = 1 + x`.
pub fn doubling_observable(model: &IntervalModel) -> GridFunction {
    model.grid_function(|_, x| Complex64::new(1.0 + x, 0.0)).expect("grid on a valid model")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_constants() {
        assert!((full_shift_unit().c() - 2f64.ln()).abs() < 1e-12);
        assert!((golden_mean_unit().c() - ((1.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-12);
        assert!(!nonlattice().is_lattice());
        assert!(full_shift_unit().is_lattice());
    }

    #[test]
    fn random_models_are_reproducible() {
        let a = random_symbolic(7, 3).unwrap();
        let b = random_symbolic(7, 3).unwrap();
        assert_eq!(a.c(), b.c());
        assert_ne!(a.c(), random_symbolic(7, 5).unwrap().c());
    }
}
