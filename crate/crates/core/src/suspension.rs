//! Suspension flows over a shift: flow observables polynomial in the fiber
//! coordinate, their lifts to the base, and lattice detection for roofs.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::symbolic::{
    enumerate_prime_orbits, CylinderFunction, EnumerationOptions, OrbitWeights, Roof, Subshift,
};
use crate::thermo::{self, NormalizationResult};

/// Largest number of orbit lengths fed to the integer-relation test.
const MAX_LATTICE_LENGTHS: usize = 50;
const LATTICE_TOL: f64 = 1e-9;
const MAX_DENOMINATOR: u64 = 1000;

/// `K(x, u) = Σ_j c_j(x) u^j` on `{0 ≤ u < r(x)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowObservable {
    coeffs: Vec<CylinderFunction>,
}

impl FlowObservable {
    pub fn new(coeffs: Vec<CylinderFunction>) -> Result<Self> {
        let Some(first) = coeffs.first() else {
            return Err(Error::invalid("flow observable needs at least one coefficient"));
        };
        if coeffs.iter().any(|c| c.shift() != first.shift()) {
            return Err(Error::invalid("observable coefficients live on different shifts"));
        }
        Ok(Self { coeffs })
    }

    /// `K ≡ value`.
    pub fn constant(shift: &Subshift, value: f64) -> Self {
        Self { coeffs: vec![CylinderFunction::constant(shift, 1, value).expect("depth-1 table fits")] }
    }

    /// `K(x, u) = c_0(x)`, independent of the fiber coordinate.
    pub fn base_only(c0: CylinderFunction) -> Self {
        Self { coeffs: vec![c0] }
    }

    pub fn coefficients(&self) -> &[CylinderFunction] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn shift(&self) -> &Subshift {
        self.coeffs[0].shift()
    }

    /// Hölder exponent of the lift; 1 for this class.
    pub fn alpha0(&self) -> f64 {
        1.0
    }

    pub fn depth(&self) -> usize {
        self.coeffs.iter().map(|c| c.depth()).max().unwrap_or(1)
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        let n = self.coeffs.len().max(other.coeffs.len());
        let zero = CylinderFunction::zero(self.shift());
        let coeffs = (0..n)
            .map(|j| {
                let x = self.coeffs.get(j).unwrap_or(&zero);
                let y = other.coeffs.get(j).unwrap_or(&zero);
                x.combine(a, y, b)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(coeffs)
    }

    fn poly_at(&self, word: &[u16]) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.eval(&word[..c.depth()])).collect()
    }
}

/// Lifted observable with its sup-norm report.
#[derive(Debug, Clone)]
pub struct LiftedObservable {
    pub k: CylinderFunction,
    pub source: FlowObservable,
    pub norms: ObservableNorms,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservableNorms {
    pub sup_k: f64,
    /// Sup of `|K|` over the suspension.
    pub sup_big_k: f64,
    pub sup_r: f64,
    /// `‖r‖_sup · sup|K|`.
    pub bound: f64,
}

impl ObservableNorms {
    pub fn holds(&self) -> bool {
        self.sup_k <= self.bound * (1.0 + 1e-12) + 1e-300
    }
}

/// `k(x) = ∫_0^{r(x)} K(x, u) du = Σ_j c_j(x) r(x)^{j+1}/(j+1)`, exactly.
pub fn lift(big_k: &FlowObservable, r: &Roof) -> Result<LiftedObservable> {
    if big_k.shift() != r.shift() {
        return Err(Error::invalid("observable and roof live on different shifts"));
    }
    let depth = big_k.depth().max(r.depth());
    let k = CylinderFunction::from_fn(r.shift(), depth, |w| {
        let rx = r.eval(&w[..r.depth()]);
        big_k.poly_at(w).iter().enumerate().map(|(j, c)| c * rx.powi(j as i32 + 1) / (j as f64 + 1.0)).sum()
    })?;
    let norms = observable_norms(big_k, &k, r)?;
    Ok(LiftedObservable { k, source: big_k.clone(), norms })
}

fn poly_eval(c: &[f64], u: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &x| acc * u + x)
}

/// `sup_{0 ≤ u ≤ len} |Σ c_j u^j|`: exact for degree ≤ 2, otherwise dense
/// sampling followed by golden-section refinement to `1e-9`.
fn fiber_sup(c: &[f64], len: f64) -> f64 {
    let f = |u: f64| poly_eval(c, u).abs();
    let mut best = f(0.0).max(f(len));
    if c.len() <= 2 {
        return best;
    }
    if c.len() == 3 {
        if c[2] != 0.0 {
            let u = -c[1] / (2.0 * c[2]);
            if (0.0..=len).contains(&u) {
                best = best.max(f(u));
            }
        }
        return best;
    }
    let samples = 2000;
    let h = len / samples as f64;
    let mut arg = 0;
    for i in 0..=samples {
        let v = f(i as f64 * h);
        if v > best {
            best = v;
            arg = i;
        }
    }
    let (mut a, mut b) = ((arg as f64 - 1.0).max(0.0) * h, ((arg + 1) as f64 * h).min(len));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    while b - a > 1e-9 * len.max(1.0) {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if f(x1) < f(x2) {
            a = x1;
        } else {
            b = x2;
        }
    }
    best.max(f(0.5 * (a + b)))
}

/// Sup norms of `K` and its lift `k`, plus the lifting bound `‖r‖·sup|K|`.
pub fn observable_norms(big_k: &FlowObservable, k: &CylinderFunction, r: &Roof) -> Result<ObservableNorms> {
    let depth = big_k.depth().max(r.depth());
    let mut sup_big_k: f64 = 0.0;
    for w in crate::symbolic::admissible_words(r.shift(), depth)? {
        let rx = r.eval(&w.symbols()[..r.depth()]);
        sup_big_k = sup_big_k.max(fiber_sup(&big_k.poly_at(w.symbols()), rx));
    }
    let sup_r = r.sup_abs();
    Ok(ObservableNorms { sup_k: k.sup_abs(), sup_big_k, sup_r, bound: sup_r * sup_big_k })
}

/// Outcome of [`detect_lattice`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeReport {
    pub lattice: bool,
    /// Generator of the length group when lattice.
    pub span: Option<f64>,
    /// Too few periods inspected to decide.
    pub inconclusive: bool,
    pub lengths_used: usize,
}

/// Best rational approximation `p/q` with `q ≤ max_q` (continued fractions).
fn rational_approx(x: f64, max_q: u64) -> (i64, u64) {
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1u64, 1i64, 0u64);
    let mut v = x;
    for _ in 0..64 {
        let a = v.floor();
        let (p2, q2) = (a as i64 * p1 + p0, a as u64 * q1 + q0);
        if q2 > max_q {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = v - a;
        if frac.abs() < 1e-15 {
            break;
        }
        v = 1.0 / frac;
    }
    (p1, q1.max(1))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Whether the prime orbit lengths up to period `p_max` lie in a discrete
/// group `span·ℤ`, tested with an integer-relation check at tolerance `1e-9`.
pub fn detect_lattice(r: &Roof, shift: &Subshift, p_max: usize) -> Result<LatticeReport> {
    if p_max < 2 {
        return Err(Error::invalid("lattice detection needs p_max >= 2"));
    }
    let zero = CylinderFunction::zero(shift);
    let weights = OrbitWeights { psi: &zero, roof: r, k: &zero };
    let orbits = enumerate_prime_orbits(shift, weights, p_max, &EnumerationOptions { max_items: 1_000_000 })?;
    let lengths: Vec<f64> = orbits.iter().take(MAX_LATTICE_LENGTHS).map(|o| o.length).collect();
    let inconclusive = p_max < 3 || lengths.len() < 2;
    let base = lengths.iter().copied().fold(f64::INFINITY, f64::min);
    let mut denominators = Vec::with_capacity(lengths.len());
    let mut numerators = Vec::with_capacity(lengths.len());
    for &l in &lengths {
        let x = l / base;
        let (p, q) = rational_approx(x, MAX_DENOMINATOR);
        if (x - p as f64 / q as f64).abs() > LATTICE_TOL * x.max(1.0) {
            return Ok(LatticeReport { lattice: false, span: None, inconclusive, lengths_used: lengths.len() });
        }
        numerators.push(p);
        denominators.push(q);
    }
    let lcm = denominators.iter().fold(1u64, |acc, &q| acc / gcd(acc, q) * q);
    let g = numerators
        .iter()
        .zip(&denominators)
        .fold(0u64, |acc, (&p, &q)| gcd(acc, (p as u64) * (lcm / q)));
    let span = base / lcm as f64 * g.max(1) as f64;
    Ok(LatticeReport { lattice: true, span: Some(span), inconclusive, lengths_used: lengths.len() })
}

/// Suspension of a mixing shift under a roof, with the normalizing flow
/// pressure `c` solved and the roof classified as lattice or not.
#[derive(Debug, Clone)]
pub struct SuspensionSystem {
    base: Subshift,
    roof: Roof,
    psi: CylinderFunction,
    normalization: NormalizationResult,
    lattice: LatticeReport,
}

impl SuspensionSystem {
    pub fn new(base: Subshift, psi: CylinderFunction, roof: Roof) -> Result<Self> {
        if psi.shift() != &base || roof.shift() != &base {
            return Err(Error::invalid("potential and roof must live on the base shift"));
        }
        let normalization = thermo::solve_flow_pressure(&base, &psi, &roof)?;
        // Smallest period range holding enough orbits for the lattice test.
        let mut p = 3;
        let counts = crate::symbolic::prime_orbit_counts(&base, 12)?;
        while p < 12 && counts[..p].iter().sum::<u64>() < MAX_LATTICE_LENGTHS as u64 {
            p += 1;
        }
        let lattice = detect_lattice(&roof, &base, p)?;
        Ok(Self { base, roof, psi, normalization, lattice })
    }

    pub fn base(&self) -> &Subshift {
        &self.base
    }

    pub fn roof(&self) -> &Roof {
        &self.roof
    }

    pub fn psi(&self) -> &CylinderFunction {
        &self.psi
    }

    /// Flow pressure `c` with `P(ψ − c r) = 0`.
    pub fn c(&self) -> f64 {
        self.normalization.c
    }

    pub fn normalization(&self) -> &NormalizationResult {
        &self.normalization
    }

    pub fn lattice(&self) -> &LatticeReport {
        &self.lattice
    }

    pub fn is_lattice(&self) -> bool {
        self.lattice.lattice
    }

    /// Whether `ψ ≡ 0`.
    pub fn is_unweighted(&self) -> bool {
        self.psi.is_zero()
    }

    /// `∫k dμ_σ / ∫r dμ_σ` for this system.
    pub fn flow_average(&self, k: &CylinderFunction) -> Result<f64> {
        thermo::flow_average(&self.base, &self.psi, &self.roof, k, self.c())
    }

    pub fn weights<'a>(&'a self, k: &'a CylinderFunction) -> OrbitWeights<'a> {
        OrbitWeights { psi: &self.psi, roof: &self.roof, k }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::birkhoff_sum;

    #[test]
    fn lift_examples() {
        let s = Subshift::full(2);
        let r = Roof::new(CylinderFunction::per_symbol(&s, &[1.2, 0.7]).unwrap()).unwrap();
        let one = lift(&FlowObservable::constant(&s, 1.0), &r).unwrap();
        assert_eq!(one.k.table(), r.table());
        let two_u = FlowObservable::new(vec![
            CylinderFunction::zero(&s),
            CylinderFunction::constant(&s, 1, 2.0).unwrap(),
        ])
        .unwrap();
        let l = lift(&two_u, &r).unwrap();
        assert!((l.k.eval(&[0]) - 1.44).abs() < 1e-15);
        assert!(lift(&FlowObservable::constant(&s, 0.0), &r).unwrap().k.is_zero());
    }

    #[test]
    fn norm_examples() {
        let s = Subshift::full(2);
        let r1 = Roof::constant(&s, 1.0).unwrap();
        let n = lift(&FlowObservable::constant(&s, 1.0), &r1).unwrap().norms;
        assert_eq!((n.sup_k, n.bound), (1.0, 1.0));
        let u = FlowObservable::new(vec![CylinderFunction::zero(&s), CylinderFunction::constant(&s, 1, 1.0).unwrap()]).unwrap();
        let n = lift(&u, &Roof::constant(&s, 2.0).unwrap()).unwrap().norms;
        assert_eq!((n.sup_k, n.bound), (2.0, 4.0));
        assert!(n.holds());
        let n = lift(&FlowObservable::constant(&s, 0.0), &r1).unwrap().norms;
        assert_eq!((n.sup_k, n.sup_big_k, n.bound), (0.0, 0.0, 0.0));
    }

    #[test]
    fn fiber_sup_of_cubic_is_refined() {
        // u^3 - u on [0, 1]: extremum -2/(3√3) at u = 1/√3.
        let v = fiber_sup(&[0.0, -1.0, 0.0, 1.0], 1.0);
        assert!((v - 2.0 / (3.0 * 3f64.sqrt())).abs() < 1e-12);
        assert_eq!(fiber_sup(&[1.0, -4.0, 2.0], 3.0), 7.0);
    }

    #[test]
    fn lattice_examples() {
        let s = Subshift::full(2);
        let rep = detect_lattice(&Roof::constant(&s, 1.0).unwrap(), &s, 6).unwrap();
        assert!(rep.lattice);
        assert!((rep.span.unwrap() - 1.0).abs() < 1e-12);
        let irr = Roof::new(CylinderFunction::per_symbol(&s, &[1.0, 2f64.sqrt()]).unwrap()).unwrap();
        assert!(!detect_lattice(&irr, &s, 6).unwrap().lattice);
        let int = Roof::new(CylinderFunction::per_symbol(&s, &[1.0, 2.0]).unwrap()).unwrap();
        let rep = detect_lattice(&int, &s, 6).unwrap();
        assert!(rep.lattice);
        assert!((rep.span.unwrap() - 1.0).abs() < 1e-12);
        let half = Roof::new(CylinderFunction::per_symbol(&s, &[1.0, 1.5]).unwrap()).unwrap();
        assert!((detect_lattice(&half, &s, 6).unwrap().span.unwrap() - 0.5).abs() < 1e-12);
        assert!(detect_lattice(&int, &s, 2).unwrap().inconclusive);
        assert!(detect_lattice(&int, &s, 1).is_err());
    }

    #[test]
    fn orbit_integral_of_lift_matches_fiber_integrals() {
        let s = Subshift::full(2);
        let r = Roof::new(CylinderFunction::per_symbol(&s, &[1.0, 2f64.sqrt()]).unwrap()).unwrap();
        let big_k = FlowObservable::new(vec![
            CylinderFunction::per_symbol(&s, &[0.5, -1.0]).unwrap(),
            CylinderFunction::per_symbol(&s, &[2.0, 0.25]).unwrap(),
        ])
        .unwrap();
        let k = lift(&big_k, &r).unwrap().k;
        let word = [0u16, 1, 1, 0, 1];
        let direct: f64 = word
            .iter()
            .map(|&x| {
                let rx = r.eval(&[x]);
                let c = big_k.poly_at(&[x]);
                c[0] * rx + c[1] * rx * rx / 2.0
            })
            .sum();
        assert!((birkhoff_sum(&word, &k).unwrap() - direct).abs() < 1e-13);
    }

    #[test]
    fn system_solves_c() {
        let s = Subshift::full(2);
        let sys = SuspensionSystem::new(s.clone(), CylinderFunction::zero(&s), Roof::constant(&s, 1.0).unwrap()).unwrap();
        assert!((sys.c() - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(sys.is_lattice());
        assert!(sys.is_unweighted());
    }
}
