//! Piecewise-affine expanding Markov maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbolic::{Subshift, Symbol};

/// Tolerance for the Markov property at partition points.
pub const MARKOV_TOL: f64 = 1e-14;

/// Branch data as read from a config: partition `x_0 < … < x_N` and
/// `f(x) = slopes[i]·x + offsets[i]` on `[x_i, x_{i+1}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub endpoints: Vec<f64>,
    pub slopes: Vec<f64>,
    pub offsets: Vec<f64>,
}

impl MapSpec {
    /// `x ↦ 2x mod 1` with branches on `[0, 1/2]` and `[1/2, 1]`.
    pub fn doubling() -> Self {
        Self { endpoints: vec![0.0, 0.5, 1.0], slopes: vec![2.0, 2.0], offsets: vec![0.0, -1.0] }
    }
}

/// `x ↦ slope·x + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Affine {
    pub slope: f64,
    pub offset: f64,
}

impl Affine {
    pub fn apply(&self, x: f64) -> f64 {
        self.slope * x + self.offset
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Affine) -> Affine {
        Affine { slope: self.slope * other.slope, offset: self.slope * other.offset + self.offset }
    }

    pub fn inverse(&self) -> Affine {
        Affine { slope: 1.0 / self.slope, offset: -self.offset / self.slope }
    }

    /// Contraction factor `|slope|`.
    pub fn contraction(&self) -> f64 {
        self.slope.abs()
    }

    pub fn fixed_point(&self) -> Option<f64> {
        (self.slope != 1.0).then(|| self.offset / (1.0 - self.slope))
    }
}

#[derive(Debug, Clone)]
pub struct ExpandingMarkovMap {
    endpoints: Vec<f64>,
    branches: Vec<Affine>,
    inverses: Vec<Affine>,
    shift: Subshift,
    gamma: f64,
}

/// Index `j` with `|endpoints[j] − y| ≤ tol`.
fn partition_index(endpoints: &[f64], y: f64) -> Option<usize> {
    let scale = endpoints.last().unwrap().abs().max(endpoints[0].abs()).max(1.0);
    endpoints.iter().position(|&e| (e - y).abs() <= MARKOV_TOL * scale)
}

pub fn build_map(spec: &MapSpec) -> Result<ExpandingMarkovMap> {
    let n = spec.slopes.len();
    if n == 0 || spec.endpoints.len() != n + 1 || spec.offsets.len() != n {
        return Err(Error::invalid("map spec needs N+1 endpoints and N slopes and offsets"));
    }
    if !spec.endpoints.windows(2).all(|w| w[0] < w[1]) || spec.endpoints.iter().any(|e| !e.is_finite()) {
        return Err(Error::invalid("endpoints must be finite and strictly increasing"));
    }
    if n > Symbol::MAX as usize {
        return Err(Error::invalid("too many intervals"));
    }
    let mut rows = vec![vec![0u8; n]; n];
    let mut gamma: f64 = 0.0;
    for i in 0..n {
        let a = spec.slopes[i];
        if !(a.abs() > 1.0) {
            return Err(Error::invalid(format!("branch {i} has slope {a}; expanding maps need |slope| > 1")));
        }
        gamma = gamma.max(1.0 / a.abs());
        let br = Affine { slope: a, offset: spec.offsets[i] };
        let (lo, hi) = (spec.endpoints[i], spec.endpoints[i + 1]);
        let mut ends = [0usize; 2];
        for (slot, x) in ends.iter_mut().zip([lo, hi]) {
            let y = br.apply(x);
            *slot = partition_index(&spec.endpoints, y).ok_or_else(|| {
                Error::invalid(format!("Markov property fails: branch {i} maps endpoint {x} to {y}, not a partition point"))
            })?;
        }
        let (u, v) = (ends[0].min(ends[1]), ends[0].max(ends[1]));
        for slot in &mut rows[i][u..v] {
            *slot = 1;
        }
    }
    let shift = Subshift::from_rows(rows)?;
    let branches: Vec<Affine> = spec.slopes.iter().zip(&spec.offsets).map(|(&slope, &offset)| Affine { slope, offset }).collect();
    let inverses = branches.iter().map(Affine::inverse).collect();
    Ok(ExpandingMarkovMap { endpoints: spec.endpoints.clone(), branches, inverses, shift, gamma })
}

impl ExpandingMarkovMap {
    pub fn new(spec: &MapSpec) -> Result<Self> {
        build_map(spec)
    }

    pub fn doubling() -> Self {
        build_map(&MapSpec::doubling()).expect("doubling map is Markov")
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn interval(&self, i: usize) -> (f64, f64) {
        (self.endpoints[i], self.endpoints[i + 1])
    }

    pub fn intervals(&self) -> Vec<(f64, f64)> {
        (0..self.len()).map(|i| self.interval(i)).collect()
    }

    pub fn branch(&self, i: usize) -> Affine {
        self.branches[i]
    }

    /// Inverse of branch `i`, defined on `f(I_i)`.
    pub fn inverse(&self, i: usize) -> Affine {
        self.inverses[i]
    }

    /// The incidence as a subshift: `i → j` when `I_j ⊆ f(I_i)`.
    pub fn shift(&self) -> &Subshift {
        &self.shift
    }

    /// `max 1/|a_i|`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        let (a, b) = self.interval(i);
        0.5 * (a + b)
    }

    /// `f^{−m}_ī = g_{i_0} ∘ … ∘ g_{i_{m−1}}`, sending `f(I_{i_{m−1}})` into
    /// `I_ī`. Contraction is `∏ 1/|a_{i_j}| ≤ γ^m`.
    pub fn inverse_branch(&self, word: &[Symbol]) -> Result<Affine> {
        if word.is_empty() {
            return Err(Error::invalid("inverse branch needs a non-empty word"));
        }
        if let Some(&s) = word.iter().find(|&&s| s as usize >= self.len()) {
            return Err(Error::invalid(format!("symbol {s} out of range")));
        }
        if !self.shift.is_linearly_admissible(word) {
            return Err(Error::Inadmissible { word: word.to_vec(), reason: "violates the Markov incidence".into() });
        }
        let mut g = Affine { slope: 1.0, offset: 0.0 };
        for &s in word {
            g = g.compose(&self.inverses[s as usize]);
        }
        Ok(g)
    }

    /// The unique `x ∈ I_{i_0}` with `f^n(x) = x` following `word`.
    pub fn periodic_point(&self, word: &[Symbol]) -> Result<f64> {
        if !word.is_empty() && word.iter().all(|&s| (s as usize) < self.len()) && !self.shift.is_cyclically_admissible(word) {
            return Err(Error::Inadmissible { word: word.to_vec(), reason: "not cyclically admissible".into() });
        }
        let g = self.inverse_branch(word)?;
        let x = g.fixed_point().ok_or_else(|| Error::invalid("composed branch has no fixed point"))?;
        let (a, b) = self.interval(word[0] as usize);
        let slack = MARKOV_TOL * (b - a).max(1.0);
        if !(x >= a - slack && x <= b + slack) {
            return Err(Error::invalid(format!("fixed point {x} lies outside I_{} = [{a}, {b}]; inconsistent map", word[0])));
        }
        Ok(x.clamp(a, b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_examples() {
        let f = ExpandingMarkovMap::doubling();
        assert_eq!(f.gamma(), 0.5);
        assert_eq!(f.inverse_branch(&[0, 1]).unwrap().contraction(), 0.25);
        assert_eq!(f.periodic_point(&[0]).unwrap(), 0.0);
        assert!((f.periodic_point(&[0, 1]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((f.periodic_point(&[0, 0, 1]).unwrap() - 1.0 / 7.0).abs() < 1e-15);
        let x = f.periodic_point(&[0, 1]).unwrap();
        let y = f.branch(0).apply(x);
        assert!((f.branch(1).apply(y) - x).abs() < 1e-15);
    }

    #[test]
    fn incidence_and_rejections() {
        // Golden-mean style: I_0 = [0, 1/φ] maps onto [0, 1], I_1 onto I_0.
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let a = 1.0 / phi;
        let spec = MapSpec { endpoints: vec![0.0, a, 1.0], slopes: vec![phi, -phi], offsets: vec![0.0, phi] };
        let f = build_map(&spec).unwrap();
        assert!(!f.shift().allows(1, 1));
        assert!(f.inverse_branch(&[1, 1]).is_err());
        assert!(f.periodic_point(&[0, 1]).is_ok());
        let bad = MapSpec { endpoints: vec![0.0, 0.5, 1.0], slopes: vec![2.0, 1.9], offsets: vec![0.0, -0.9] };
        let err = build_map(&bad).unwrap_err().to_string();
        assert!(err.contains("Markov"), "{err}");
        let slow = MapSpec { endpoints: vec![0.0, 1.0], slopes: vec![1.0], offsets: vec![0.0] };
        assert!(build_map(&slow).is_err());
    }
}
