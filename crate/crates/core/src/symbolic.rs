//! Subshifts of finite type, admissible words, prime orbits and Birkhoff sums
//! of locally constant functions.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

pub type Symbol = u16;

/// Largest table a [`CylinderFunction`] may allocate (`N^depth` slots).
const MAX_TABLE: usize = 1 << 24;

/// Unvalidated square 0/1 matrix. Reducible or periodic matrices are
/// representable here so that [`verify_mixing`] can inspect them; only a
/// mixing matrix can become a [`Subshift`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    rows: Vec<Vec<u8>>,
}

impl TransitionMatrix {
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("transition matrix is empty"));
        }
        let n = rows.len();
        if n > Symbol::MAX as usize {
            return Err(Error::invalid(format!("alphabet of size {n} too large")));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid(format!("row {i} has length {} but matrix is {n}x{n}", row.len())));
            }
            if let Some(v) = row.iter().find(|&&v| v > 1) {
                return Err(Error::invalid(format!("row {i} contains entry {v}; entries must be 0 or 1")));
            }
        }
        Ok(Self { rows })
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i][j] == 1
    }
}

/// Outcome of [`verify_mixing`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MixingReport {
    pub irreducible: bool,
    /// Gcd of cycle lengths; only meaningful when irreducible.
    pub period: Option<usize>,
    pub diagnostic: Option<String>,
}

impl MixingReport {
    pub fn is_mixing(&self) -> bool {
        self.irreducible && self.period == Some(1)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn reachable(t: &TransitionMatrix, start: usize, reverse: bool) -> Vec<bool> {
    let n = t.size();
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            let edge = if reverse { t.get(v, u) } else { t.get(u, v) };
            if edge && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

/// Strong connectivity and period of the transition graph.
pub fn verify_mixing(t: &TransitionMatrix) -> Result<MixingReport> {
    let n = t.size();
    if n == 0 {
        return Err(Error::invalid("transition matrix is empty"));
    }
    for i in 0..n {
        if !(0..n).any(|j| t.get(i, j)) {
            return Ok(MixingReport {
                irreducible: false,
                period: None,
                diagnostic: Some(format!("row {i} is all zeros (symbol {i} has no successor)")),
            });
        }
        if !(0..n).any(|j| t.get(j, i)) {
            return Ok(MixingReport {
                irreducible: false,
                period: None,
                diagnostic: Some(format!("column {i} is all zeros (symbol {i} has no predecessor)")),
            });
        }
    }
    let fwd = reachable(t, 0, false);
    let bwd = reachable(t, 0, true);
    if let Some(v) = (0..n).find(|&v| !fwd[v] || !bwd[v]) {
        let diag = if !fwd[v] {
            format!("no path from symbol 0 to symbol {v}")
        } else {
            format!("no path from symbol {v} to symbol 0")
        };
        return Ok(MixingReport { irreducible: false, period: None, diagnostic: Some(diag) });
    }
    // BFS levels; the period is the gcd of level(u) + 1 - level(v) over edges.
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if t.get(u, v) && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g = 0usize;
    for u in 0..n {
        for v in 0..n {
            if t.get(u, v) {
                let d = (level[u] as i64 + 1 - level[v] as i64).unsigned_abs() as usize;
                g = gcd(g, d);
            }
        }
    }
    let diagnostic = (g != 1).then(|| format!("transition graph has period {g}"));
    Ok(MixingReport { irreducible: true, period: Some(g), diagnostic })
}

/// Irreducible, aperiodic subshift of finite type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subshift {
    n: usize,
    allowed: Vec<bool>,
}

impl Subshift {
    pub fn new(t: TransitionMatrix) -> Result<Self> {
        let report = verify_mixing(&t)?;
        if !report.is_mixing() {
            return Err(Error::NotMixing(report.diagnostic.unwrap_or_else(|| "not mixing".into())));
        }
        let n = t.size();
        let allowed = (0..n * n).map(|k| t.get(k / n, k % n)).collect();
        Ok(Self { n, allowed })
    }

    pub fn from_rows(rows: Vec<Vec<u8>>) -> Result<Self> {
        Self::new(TransitionMatrix::new(rows)?)
    }

    /// Full shift on `n` symbols.
    pub fn full(n: usize) -> Self {
        Self::from_rows(vec![vec![1; n]; n]).expect("full shift is mixing")
    }

    /// Golden-mean shift: the word `11` is forbidden.
    pub fn golden_mean() -> Self {
        Self::from_rows(vec![vec![1, 1], vec![1, 0]]).expect("golden-mean shift is mixing")
    }

    pub fn alphabet_size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn allows(&self, a: Symbol, b: Symbol) -> bool {
        self.allowed[a as usize * self.n + b as usize]
    }

    pub fn transition(&self) -> TransitionMatrix {
        let rows = (0..self.n)
            .map(|i| (0..self.n).map(|j| self.allowed[i * self.n + j] as u8).collect())
            .collect();
        TransitionMatrix { rows }
    }

    pub fn is_linearly_admissible(&self, w: &[Symbol]) -> bool {
        w.iter().all(|&s| (s as usize) < self.n) && w.windows(2).all(|p| self.allows(p[0], p[1]))
    }

    pub fn is_cyclically_admissible(&self, w: &[Symbol]) -> bool {
        !w.is_empty() && self.is_linearly_admissible(w) && self.allows(w[w.len() - 1], w[0])
    }
}

/// Finite word over the alphabet of a shift, tagged linear or cyclic.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Word {
    symbols: Vec<Symbol>,
    cyclic: bool,
}

impl Word {
    pub fn linear(shift: &Subshift, symbols: Vec<Symbol>) -> Result<Self> {
        if symbols.is_empty() || !shift.is_linearly_admissible(&symbols) {
            return Err(Error::Inadmissible { word: symbols, reason: "not linearly admissible".into() });
        }
        Ok(Self { symbols, cyclic: false })
    }

    pub fn cyclic(shift: &Subshift, symbols: Vec<Symbol>) -> Result<Self> {
        if !shift.is_cyclically_admissible(&symbols) {
            return Err(Error::Inadmissible { word: symbols, reason: "not cyclically admissible".into() });
        }
        Ok(Self { symbols, cyclic: true })
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn is_cyclic(&self) -> bool {
        self.cyclic
    }

    pub fn key(&self) -> String {
        word_key(&self.symbols)
    }
}

const DIGITS: &[u8] = b"0123456789abcdefghijklmnopqrstuvwxyz";

/// Digit-string key `s0s1...` used in model files (base 36 symbols).
pub fn word_key(w: &[Symbol]) -> String {
    w.iter().map(|&s| DIGITS[s as usize] as char).collect()
}

pub fn parse_word_key(key: &str) -> Result<Vec<Symbol>> {
    key.chars()
        .map(|ch| {
            ch.to_digit(36)
                .map(|d| d as Symbol)
                .ok_or_else(|| Error::invalid(format!("bad symbol {ch:?} in word key {key:?}")))
        })
        .collect()
}

/// All linearly admissible words of length `n`, in lexicographic order.
pub fn admissible_words(shift: &Subshift, n: usize) -> Result<Vec<Word>> {
    if n == 0 {
        return Err(Error::invalid("word length must be at least 1"));
    }
    let mut out = Vec::new();
    let mut buf = Vec::with_capacity(n);
    fn rec(shift: &Subshift, n: usize, buf: &mut Vec<Symbol>, out: &mut Vec<Word>) {
        if buf.len() == n {
            out.push(Word { symbols: buf.clone(), cyclic: false });
            return;
        }
        for s in 0..shift.alphabet_size() as Symbol {
            if buf.last().map_or(true, |&l| shift.allows(l, s)) {
                buf.push(s);
                rec(shift, n, buf, out);
                buf.pop();
            }
        }
    }
    rec(shift, n, &mut buf, &mut out);
    Ok(out)
}

/// Number of points of period `n`, i.e. `trace(A^n)`, in exact arithmetic.
pub fn count_periodic_points(shift: &Subshift, n: usize) -> Result<BigUint> {
    if n == 0 {
        return Err(Error::invalid("period must be at least 1"));
    }
    let size = shift.alphabet_size();
    type M = Vec<Vec<BigUint>>;
    let mul = |a: &M, b: &M| -> M {
        let mut c = vec![vec![BigUint::zero(); size]; size];
        for i in 0..size {
            for k in 0..size {
                if a[i][k].is_zero() {
                    continue;
                }
                for j in 0..size {
                    if !b[k][j].is_zero() {
                        c[i][j] += &a[i][k] * &b[k][j];
                    }
                }
            }
        }
        c
    };
    let base: M = (0..size)
        .map(|i| (0..size).map(|j| if shift.allows(i as Symbol, j as Symbol) { BigUint::one() } else { BigUint::zero() }).collect())
        .collect();
    let mut result: M = (0..size).map(|i| (0..size).map(|j| if i == j { BigUint::one() } else { BigUint::zero() }).collect()).collect();
    let mut power = base;
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            result = mul(&result, &power);
        }
        e >>= 1;
        if e > 0 {
            power = mul(&power, &power);
        }
    }
    Ok((0..size).map(|i| result[i][i].clone()).sum())
}

/// Locally constant function of fixed depth on a subshift: one value per
/// admissible word of length `depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderFunction {
    shift: Subshift,
    depth: usize,
    values: Vec<f64>,
}

impl CylinderFunction {
    fn slots(shift: &Subshift, depth: usize) -> Result<usize> {
        if depth == 0 {
            return Err(Error::invalid("cylinder function depth must be at least 1"));
        }
        let mut s: usize = 1;
        for _ in 0..depth {
            s = s.checked_mul(shift.alphabet_size()).filter(|&v| v <= MAX_TABLE).ok_or_else(|| {
                Error::invalid(format!("depth {depth} table too large for alphabet {}", shift.alphabet_size()))
            })?;
        }
        Ok(s)
    }

    fn index(&self, w: &[Symbol]) -> usize {
        w.iter().fold(0usize, |acc, &s| acc * self.shift.n + s as usize)
    }

    /// Build from a closure evaluated on every admissible word of length `depth`.
    pub fn from_fn(shift: &Subshift, depth: usize, mut f: impl FnMut(&[Symbol]) -> f64) -> Result<Self> {
        let slots = Self::slots(shift, depth)?;
        let mut out = Self { shift: shift.clone(), depth, values: vec![f64::NAN; slots] };
        for w in admissible_words(shift, depth)? {
            let v = f(w.symbols());
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite value at word {}", w.key())));
            }
            let idx = out.index(w.symbols());
            out.values[idx] = v;
        }
        Ok(out)
    }

    pub fn constant(shift: &Subshift, depth: usize, value: f64) -> Result<Self> {
        Self::from_fn(shift, depth, |_| value)
    }

    pub fn zero(shift: &Subshift) -> Self {
        Self::constant(shift, 1, 0.0).expect("depth-1 table always fits")
    }

    /// Depth-1 function from one value per symbol.
    pub fn per_symbol(shift: &Subshift, values: &[f64]) -> Result<Self> {
        if values.len() != shift.alphabet_size() {
            return Err(Error::invalid(format!(
                "expected {} per-symbol values, got {}",
                shift.alphabet_size(),
                values.len()
            )));
        }
        Self::from_fn(shift, 1, |w| values[w[0] as usize])
    }

    /// Build from a word-key table; the keys must be exactly the admissible
    /// words of length `depth`.
    pub fn from_table(shift: &Subshift, depth: usize, table: &BTreeMap<String, f64>) -> Result<Self> {
        let words = admissible_words(shift, depth)?;
        let mut parsed: HashMap<Vec<Symbol>, f64> = HashMap::new();
        for (k, &v) in table {
            let w = parse_word_key(k)?;
            if w.len() != depth {
                return Err(Error::invalid(format!("key {k:?} has length {} but depth is {depth}", w.len())));
            }
            if !shift.is_linearly_admissible(&w) {
                return Err(Error::Inadmissible { word: w, reason: format!("key {k:?} is not an admissible word") });
            }
            parsed.insert(w, v);
        }
        if let Some(missing) = words.iter().find(|w| !parsed.contains_key(w.symbols())) {
            return Err(Error::invalid(format!("missing value for admissible word {:?}", missing.key())));
        }
        Self::from_fn(shift, depth, |w| parsed[w])
    }

    pub fn shift(&self) -> &Subshift {
        &self.shift
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Value on an admissible word of length exactly `depth`.
    pub fn eval(&self, w: &[Symbol]) -> f64 {
        debug_assert_eq!(w.len(), self.depth);
        self.values[self.index(w)]
    }

    /// Value on the window of `depth` symbols starting at `start`, read
    /// cyclically from `word`.
    #[inline]
    pub fn eval_cyclic(&self, word: &[Symbol], start: usize) -> f64 {
        let n = word.len();
        let mut idx = 0usize;
        for j in 0..self.depth {
            idx = idx * self.shift.n + word[(start + j) % n] as usize;
        }
        self.values[idx]
    }

    /// Same function viewed at a larger depth (reads the prefix).
    pub fn extend(&self, depth: usize) -> Result<Self> {
        if depth < self.depth {
            return Err(Error::invalid(format!("cannot reduce depth {} to {depth}", self.depth)));
        }
        if depth == self.depth {
            return Ok(self.clone());
        }
        Self::from_fn(&self.shift, depth, |w| self.eval(&w[..self.depth]))
    }

    /// Word-key table of all values.
    pub fn table(&self) -> BTreeMap<String, f64> {
        admissible_words(&self.shift, self.depth)
            .expect("depth >= 1")
            .into_iter()
            .map(|w| (w.key(), self.eval(w.symbols())))
            .collect()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied().filter(|v| !v.is_nan())
    }

    pub fn min(&self) -> f64 {
        self.values().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values().all(|v| v == 0.0)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let values = self.values.iter().map(|&v| if v.is_nan() { v } else { f(v) }).collect();
        Self { shift: self.shift.clone(), depth: self.depth, values }
    }

    /// `a * self + b * other`, at the larger of the two depths.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.shift != other.shift {
            return Err(Error::invalid("functions live on different shifts"));
        }
        let d = self.depth.max(other.depth);
        Self::from_fn(&self.shift, d, |w| a * self.eval(&w[..self.depth]) + b * other.eval(&w[..other.depth]))
    }
}

/// Strictly positive cylinder function used as a roof.
#[derive(Debug, Clone, PartialEq)]
pub struct Roof {
    f: CylinderFunction,
    r_min: f64,
}

impl Roof {
    pub fn new(f: CylinderFunction) -> Result<Self> {
        let r_min = f.min();
        if !(r_min > 0.0) {
            return Err(Error::invalid(format!("roof not strictly positive (minimum {r_min})")));
        }
        Ok(Self { f, r_min })
    }

    pub fn constant(shift: &Subshift, value: f64) -> Result<Self> {
        Self::new(CylinderFunction::constant(shift, 1, value)?)
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn function(&self) -> &CylinderFunction {
        &self.f
    }
}

impl std::ops::Deref for Roof {
    type Target = CylinderFunction;
    fn deref(&self) -> &CylinderFunction {
        &self.f
    }
}

#[inline]
fn birkhoff_unchecked(word: &[Symbol], phi: &CylinderFunction) -> f64 {
    (0..word.len()).map(|i| phi.eval_cyclic(word, i)).sum()
}

/// `φ^{(n)}` along the periodic point with itinerary `word` repeated,
/// windows read cyclically.
pub fn birkhoff_sum(word: &[Symbol], phi: &CylinderFunction) -> Result<f64> {
    if !phi.shift().is_cyclically_admissible(word) {
        return Err(Error::Inadmissible { word: word.to_vec(), reason: "not cyclically admissible".into() });
    }
    Ok(birkhoff_unchecked(word, phi))
}

/// Whether `word` equals its lexicographically least rotation and is not a
/// proper power.
pub fn is_lyndon(word: &[Symbol]) -> bool {
    let n = word.len();
    if n == 0 {
        return false;
    }
    (1..n).all(|r| {
        let rotated = word[r..].iter().chain(&word[..r]);
        word.iter().cmp(rotated) == std::cmp::Ordering::Less
    })
}

/// Canonical representative of a cyclic word: its least rotation.
pub fn canonical_rotation(word: &[Symbol]) -> Vec<Symbol> {
    let n = word.len();
    (0..n)
        .map(|r| word[r..].iter().chain(&word[..r]).copied().collect::<Vec<_>>())
        .min()
        .unwrap_or_default()
}

/// Primitive periodic orbit with cached Birkhoff weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrimeOrbit {
    /// Lexicographically least rotation of the primitive itinerary.
    pub word: Vec<Symbol>,
    /// Roof length `ℓ_τ = r^{(p)}`.
    pub length: f64,
    /// Potential weight `ψ_τ = ψ^{(p)}`.
    pub psi: f64,
    /// Observable weight `k_τ = k^{(p)}`.
    pub k: f64,
}

impl PrimeOrbit {
    pub fn period(&self) -> usize {
        self.word.len()
    }
}

/// Potential, roof and observable attached to orbits during enumeration.
#[derive(Debug, Clone, Copy)]
pub struct OrbitWeights<'a> {
    pub psi: &'a CylinderFunction,
    pub roof: &'a Roof,
    pub k: &'a CylinderFunction,
}

impl OrbitWeights<'_> {
    fn check(&self, shift: &Subshift) -> Result<()> {
        for (name, f) in [("psi", self.psi), ("roof", self.roof.function()), ("k", self.k)] {
            if f.shift() != shift {
                return Err(Error::invalid(format!("{name} is defined on a different shift")));
            }
        }
        Ok(())
    }

    pub(crate) fn orbit(&self, word: &[Symbol]) -> PrimeOrbit {
        PrimeOrbit {
            word: word.to_vec(),
            length: birkhoff_unchecked(word, self.roof),
            psi: birkhoff_unchecked(word, self.psi),
            k: birkhoff_unchecked(word, self.k),
        }
    }
}

/// Options for orbit enumeration.
#[derive(Debug, Clone, Copy)]
pub struct EnumerationOptions {
    /// Abort after this many emitted items.
    pub max_items: u64,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        Self { max_items: 50_000_000 }
    }
}

/// Pruning rule for the Lyndon-word walk. The walk cuts every subtree whose
/// prefix is not admitted.
pub(crate) trait PrefixBound: Sync {
    /// Accumulated-cost contribution when `prefix` has just been extended by
    /// its last symbol.
    fn increment(&self, prefix: &[Symbol]) -> f64;
    /// Whether a prefix of length `len` with accumulated cost `partial` can
    /// still extend (or be) an accepted word.
    fn admits(&self, len: usize, partial: f64) -> bool;
    /// Hard cap on word length.
    fn max_len(&self) -> usize;
}

pub(crate) struct PeriodBound(pub usize);

impl PrefixBound for PeriodBound {
    fn increment(&self, _: &[Symbol]) -> f64 {
        0.0
    }
    fn admits(&self, len: usize, _: f64) -> bool {
        len <= self.0
    }
    fn max_len(&self) -> usize {
        self.0
    }
}

/// Roof-length budget: prefix windows already fully inside the prefix are
/// summed exactly; every remaining window costs at least `r_min`.
pub(crate) struct LengthBound<'a> {
    pub roof: &'a Roof,
    pub budget: f64,
}

impl PrefixBound for LengthBound<'_> {
    fn increment(&self, prefix: &[Symbol]) -> f64 {
        let d = self.roof.depth();
        if prefix.len() >= d {
            self.roof.eval(&prefix[prefix.len() - d..])
        } else {
            0.0
        }
    }
    fn admits(&self, len: usize, partial: f64) -> bool {
        let d = self.roof.depth();
        let counted = (len + 1).saturating_sub(d);
        let lower = partial + (len - counted) as f64 * self.roof.r_min();
        lower <= self.budget * (1.0 + 1e-12) + 1e-300
    }
    fn max_len(&self) -> usize {
        (self.budget / self.roof.r_min()).floor() as usize + 1
    }
}

#[derive(Clone)]
struct Node {
    prefix: Vec<Symbol>,
    period: usize,
    partial: f64,
}

struct Walker<'a, B: PrefixBound> {
    shift: &'a Subshift,
    bound: &'a B,
    counter: &'a AtomicU64,
    limit: u64,
}

impl<B: PrefixBound> Walker<'_, B> {
    /// Children of `node` in the prenecklace tree, in increasing symbol order.
    fn children(&self, node: &Node) -> Vec<Node> {
        let t = node.prefix.len();
        if t >= self.bound.max_len() {
            return Vec::new();
        }
        let lo = if t == 0 { 0 } else { node.prefix[t - node.period] };
        let mut out = Vec::new();
        for s in lo..self.shift.alphabet_size() as Symbol {
            if t > 0 && !self.shift.allows(node.prefix[t - 1], s) {
                continue;
            }
            let mut prefix = node.prefix.clone();
            prefix.push(s);
            let partial = node.partial + self.bound.increment(&prefix);
            if !self.bound.admits(t + 1, partial) {
                continue;
            }
            let period = if t > 0 && s == node.prefix[t - node.period] { node.period } else { t + 1 };
            out.push(Node { prefix, period, partial });
        }
        out
    }

    fn emit<T>(&self, node: &Node, make: &(dyn Fn(&[Symbol]) -> Option<T> + Sync), out: &mut Vec<T>) -> Result<()> {
        let t = node.prefix.len();
        if t > 0 && node.period == t && self.shift.allows(node.prefix[t - 1], node.prefix[0]) {
            if let Some(item) = make(&node.prefix) {
                out.push(item);
                let reached = self.counter.fetch_add(1, Ordering::Relaxed) + 1;
                if reached > self.limit {
                    return Err(Error::Budget { what: "enumerated orbits".into(), limit: self.limit, reached });
                }
            }
        }
        Ok(())
    }

    fn walk<T>(&self, node: Node, make: &(dyn Fn(&[Symbol]) -> Option<T> + Sync), out: &mut Vec<T>) -> Result<()> {
        self.emit(&node, make, out)?;
        for child in self.children(&node) {
            self.walk(child, make, out)?;
        }
        Ok(())
    }
}

/// Visit every cyclically admissible Lyndon word admitted by `bound`, turning
/// each into an item with `make`. Work is split into prefix subtrees whose
/// layout does not depend on the worker count; results are concatenated in
/// fixed subtree order.
pub(crate) fn collect_lyndon<T, B>(
    shift: &Subshift,
    bound: &B,
    opts: &EnumerationOptions,
    make: &(dyn Fn(&[Symbol]) -> Option<T> + Sync),
) -> Result<Vec<T>>
where
    T: Send,
    B: PrefixBound,
{
    let counter = AtomicU64::new(0);
    let walker = Walker { shift, bound, counter: &counter, limit: opts.max_items };
    let mut head = Vec::new();
    let mut frontier = vec![Node { prefix: Vec::new(), period: 1, partial: 0.0 }];
    // Expand breadth-first until there are enough independent subtrees; the
    // nodes consumed on the way are emitted up front.
    const TARGET: usize = 512;
    while frontier.len() < TARGET {
        let mut next = Vec::new();
        for node in &frontier {
            next.extend(walker.children(node));
        }
        if next.is_empty() {
            break;
        }
        for node in &frontier {
            walker.emit(node, make, &mut head)?;
        }
        frontier = next;
        if frontier.iter().all(|n| n.prefix.len() >= bound.max_len()) {
            break;
        }
    }
    let parts: Vec<Result<Vec<T>>> = par::map(&frontier, |node| {
        let mut out = Vec::new();
        walker.walk(node.clone(), make, &mut out)?;
        Ok(out)
    });
    let mut all = head;
    for p in parts {
        all.extend(p?);
    }
    Ok(all)
}

/// One [`PrimeOrbit`] per primitive cyclic class of period at most `p_max`,
/// sorted by period and then lexicographically.
pub fn enumerate_prime_orbits(
    shift: &Subshift,
    weights: OrbitWeights<'_>,
    p_max: usize,
    opts: &EnumerationOptions,
) -> Result<Vec<PrimeOrbit>> {
    if p_max == 0 {
        return Err(Error::invalid("p_max must be at least 1"));
    }
    weights.check(shift)?;
    let make = |w: &[Symbol]| Some(weights.orbit(w));
    let mut orbits = collect_lyndon(shift, &PeriodBound(p_max), opts, &make)?;
    orbits.sort_by(|a, b| a.word.len().cmp(&b.word.len()).then_with(|| a.word.cmp(&b.word)));
    Ok(orbits)
}

/// Prime orbit counts by period `1..=p_max` (no weights).
pub fn prime_orbit_counts(shift: &Subshift, p_max: usize) -> Result<Vec<u64>> {
    if p_max == 0 {
        return Err(Error::invalid("p_max must be at least 1"));
    }
    let make = |w: &[Symbol]| Some(w.len());
    let lens = collect_lyndon(shift, &PeriodBound(p_max), &EnumerationOptions::default(), &make)?;
    let mut counts = vec![0u64; p_max];
    for l in lens {
        counts[l - 1] += 1;
    }
    Ok(counts)
}

/// Higher-block presentation of a shift with its functions.
#[derive(Debug, Clone)]
pub struct Recoded {
    /// Shift whose symbols are the admissible blocks of length `block_len`.
    pub shift: Subshift,
    /// Block spelled by each new symbol.
    pub blocks: Vec<Vec<Symbol>>,
    pub block_len: usize,
    pub fns: Vec<CylinderFunction>,
    index: HashMap<Vec<Symbol>, Symbol>,
}

impl Recoded {
    /// New symbol spelling `block`, if admissible.
    pub fn symbol_of(&self, block: &[Symbol]) -> Option<Symbol> {
        self.index.get(block).copied()
    }

    /// Translate an original cyclic word into the block alphabet.
    pub fn encode_cyclic(&self, word: &[Symbol]) -> Option<Vec<Symbol>> {
        let n = word.len();
        (0..n)
            .map(|i| {
                let block: Vec<Symbol> = (0..self.block_len).map(|j| word[(i + j) % n]).collect();
                self.symbol_of(&block)
            })
            .collect()
    }

    fn identity(shift: &Subshift, fns: Vec<CylinderFunction>) -> Self {
        let blocks: Vec<Vec<Symbol>> = (0..shift.alphabet_size() as Symbol).map(|s| vec![s]).collect();
        let index = blocks.iter().enumerate().map(|(i, b)| (b.clone(), i as Symbol)).collect();
        Self { shift: shift.clone(), blocks, block_len: 1, fns, index }
    }
}

/// Recode depth-`d` functions as depth-2 functions on the shift of
/// `(d-1)`-blocks. Depth-1 input is returned unchanged.
pub fn recode_depth_one(shift: &Subshift, fns: &[CylinderFunction]) -> Result<Recoded> {
    for f in fns {
        if f.shift() != shift {
            return Err(Error::invalid("function defined on a different shift"));
        }
    }
    let d = fns.iter().map(|f| f.depth()).max().unwrap_or(1);
    if d <= 1 {
        return Ok(Recoded::identity(shift, fns.to_vec()));
    }
    let block_len = d - 1;
    let blocks: Vec<Vec<Symbol>> = admissible_words(shift, block_len)?.into_iter().map(|w| w.symbols).collect();
    if blocks.len() > Symbol::MAX as usize {
        return Err(Error::invalid("recoded alphabet too large"));
    }
    let index: HashMap<Vec<Symbol>, Symbol> = blocks.iter().enumerate().map(|(i, b)| (b.clone(), i as Symbol)).collect();
    let m = blocks.len();
    let rows: Vec<Vec<u8>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let (u, v) = (&blocks[i], &blocks[j]);
                    (u[1..] == v[..block_len - 1] && shift.allows(u[block_len - 1], v[block_len - 1])) as u8
                })
                .collect()
        })
        .collect();
    let new_shift = Subshift::from_rows(rows)?;
    let mut new_fns = Vec::with_capacity(fns.len());
    for f in fns {
        let ext = f.extend(d)?;
        new_fns.push(CylinderFunction::from_fn(&new_shift, 2, |w| {
            let mut full = blocks[w[0] as usize].clone();
            full.push(*blocks[w[1] as usize].last().expect("non-empty block"));
            ext.eval(&full)
        })?);
    }
    Ok(Recoded { shift: new_shift, blocks, block_len, fns: new_fns, index })
}

/// Depth-1 data viewed on edges: the value is attached to the target symbol.
/// This differs from prefix reading by a coboundary, so cyclic Birkhoff sums
/// and Gibbs states are unchanged, and a potential depending on one symbol
/// gets a constant right eigenvector whenever its Gibbs state is Bernoulli.
fn edge_lift(f: &CylinderFunction) -> Result<CylinderFunction> {
    match f.depth() {
        1 => CylinderFunction::from_fn(f.shift(), 2, |w| f.eval(&w[1..])),
        _ => f.extend(2),
    }
}

/// Depth-2 (edge) presentation used by the weight matrices: recodes when any
/// function is deeper than 2, otherwise keeps the shift and views every
/// function at depth 2.
pub fn edge_presentation(shift: &Subshift, fns: &[CylinderFunction]) -> Result<Recoded> {
    let d = fns.iter().map(|f| f.depth()).max().unwrap_or(1);
    if d <= 2 {
        let lifted = fns.iter().map(edge_lift).collect::<Result<Vec<_>>>()?;
        for f in fns {
            if f.shift() != shift {
                return Err(Error::invalid("function defined on a different shift"));
            }
        }
        Ok(Recoded::identity(shift, lifted))
    } else {
        recode_depth_one(shift, fns)
    }
}

/// Express a function on the original shift in an existing edge
/// presentation. Fails if the function is deeper than the presentation.
pub fn to_edge_function(rec: &Recoded, f: &CylinderFunction) -> Result<CylinderFunction> {
    let depth = rec.block_len + 1;
    if f.depth() > depth {
        return Err(Error::DepthMismatch { expected: depth, found: f.depth() });
    }
    if rec.block_len == 1 {
        return edge_lift(f);
    }
    let ext = f.extend(depth)?;
    CylinderFunction::from_fn(&rec.shift, 2, |w| {
        let mut full = rec.blocks[w[0] as usize].clone();
        full.push(*rec.blocks[w[1] as usize].last().expect("non-empty block"));
        ext.eval(&full)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_cycle() -> TransitionMatrix {
        TransitionMatrix::new(vec![vec![0, 1], vec![1, 0]]).unwrap()
    }

    #[test]
    fn mixing_examples() {
        let full = TransitionMatrix::new(vec![vec![1, 1], vec![1, 1]]).unwrap();
        assert_eq!(verify_mixing(&full).unwrap(), MixingReport { irreducible: true, period: Some(1), diagnostic: None });
        let r = verify_mixing(&two_cycle()).unwrap();
        assert!(r.irreducible);
        assert_eq!(r.period, Some(2));
        let r = verify_mixing(&TransitionMatrix::new(vec![vec![1, 1], vec![0, 1]]).unwrap()).unwrap();
        assert!(!r.irreducible);
        assert!(Subshift::new(two_cycle()).is_err());
    }

    #[test]
    fn zero_rows_are_diagnosed() {
        let t = TransitionMatrix::new(vec![vec![1, 1], vec![0, 0]]).unwrap();
        let r = verify_mixing(&t).unwrap();
        assert!(!r.irreducible);
        assert!(r.diagnostic.unwrap().contains("row 1"));
        assert!(TransitionMatrix::new(vec![]).is_err());
        assert!(TransitionMatrix::new(vec![vec![2]]).is_err());
    }

    #[test]
    fn admissible_word_lists() {
        let full = Subshift::full(2);
        let w: Vec<String> = admissible_words(&full, 2).unwrap().iter().map(Word::key).collect();
        assert_eq!(w, ["00", "01", "10", "11"]);
        let gm = Subshift::golden_mean();
        let w: Vec<String> = admissible_words(&gm, 3).unwrap().iter().map(Word::key).collect();
        // Brute force over {0,1}^3 filtering out "11".
        let brute: Vec<String> =
            (0..8).map(|x| format!("{:03b}", x)).filter(|s| !s.contains("11")).collect();
        assert_eq!(w, brute);
        assert_eq!(admissible_words(&gm, 1).unwrap().len(), 2);
        assert!(admissible_words(&gm, 0).is_err());
    }

    #[test]
    fn periodic_point_counts() {
        assert_eq!(count_periodic_points(&Subshift::full(2), 3).unwrap(), BigUint::from(8u32));
        // A^4 for A = [[1,1],[1,0]] is [[5,3],[3,2]].
        assert_eq!(count_periodic_points(&Subshift::golden_mean(), 4).unwrap(), BigUint::from(7u32));
        assert_eq!(count_periodic_points(&Subshift::full(2), 100).unwrap(), BigUint::one() << 100usize);
        assert!(count_periodic_points(&Subshift::full(2), 0).is_err());
    }

    fn zero_weights(shift: &Subshift) -> (CylinderFunction, Roof, CylinderFunction) {
        (CylinderFunction::zero(shift), Roof::constant(shift, 1.0).unwrap(), CylinderFunction::zero(shift))
    }

    #[test]
    fn prime_orbits_of_full_two_shift() {
        let s = Subshift::full(2);
        let (psi, r, k) = zero_weights(&s);
        let orbits = enumerate_prime_orbits(&s, OrbitWeights { psi: &psi, roof: &r, k: &k }, 3, &Default::default()).unwrap();
        let keys: Vec<String> = orbits.iter().map(|o| word_key(&o.word)).collect();
        assert_eq!(keys, ["0", "1", "01", "001", "011"]);
        assert_eq!(prime_orbit_counts(&s, 3).unwrap(), vec![2, 1, 2]);
        let gm = Subshift::golden_mean();
        let (psi, r, k) = zero_weights(&gm);
        let o = enumerate_prime_orbits(&gm, OrbitWeights { psi: &psi, roof: &r, k: &k }, 1, &Default::default()).unwrap();
        assert_eq!(o.len(), 1);
        assert_eq!(o[0].word, vec![0]);
    }

    #[test]
    fn birkhoff_examples() {
        let s = Subshift::full(2);
        let phi = CylinderFunction::per_symbol(&s, &[0.3, 1.7]).unwrap();
        assert_eq!(birkhoff_sum(&[0, 1], &phi).unwrap(), 0.3 + 1.7);
        let phi2 = CylinderFunction::from_fn(&s, 2, |w| (w[0] * 2 + w[1]) as f64 + 0.5).unwrap();
        assert_eq!(birkhoff_sum(&[0, 1], &phi2).unwrap(), phi2.eval(&[0, 1]) + phi2.eval(&[1, 0]));
        let phi3 = CylinderFunction::from_fn(&s, 3, |w| w[0] as f64 * 0.1 + w[1] as f64 + w[2] as f64 * 7.0).unwrap();
        assert!((birkhoff_sum(&[0, 0, 1], &phi3).unwrap() - birkhoff_sum(&[0, 1, 0], &phi3).unwrap()).abs() < 1e-14);
        let gm = Subshift::golden_mean();
        let f = CylinderFunction::zero(&gm);
        assert!(birkhoff_sum(&[1, 1], &f).is_err());
        assert!(birkhoff_sum(&[0, 1], &f).is_ok());
    }

    #[test]
    fn cylinder_tables_need_exact_coverage() {
        let gm = Subshift::golden_mean();
        let mut t = BTreeMap::new();
        t.insert("00".to_string(), 1.0);
        t.insert("01".to_string(), 2.0);
        assert!(CylinderFunction::from_table(&gm, 2, &t).is_err());
        t.insert("10".to_string(), 3.0);
        let f = CylinderFunction::from_table(&gm, 2, &t).unwrap();
        assert_eq!(f.table(), t);
        t.insert("11".to_string(), 4.0);
        assert!(CylinderFunction::from_table(&gm, 2, &t).is_err());
    }

    #[test]
    fn recode_examples() {
        let full = Subshift::full(2);
        let f = CylinderFunction::from_fn(&full, 2, |w| w[0] as f64 + 2.0 * w[1] as f64).unwrap();
        let rec = recode_depth_one(&full, std::slice::from_ref(&f)).unwrap();
        assert_eq!(rec.shift.alphabet_size(), 2);
        assert_eq!(rec.fns[0].depth(), 2);
        let gm = Subshift::golden_mean();
        let g = CylinderFunction::from_fn(&gm, 3, |w| w.iter().map(|&x| x as f64).sum()).unwrap();
        let rec = recode_depth_one(&gm, std::slice::from_ref(&g)).unwrap();
        assert_eq!(rec.shift.alphabet_size(), 3);
        let keys: Vec<String> = rec.blocks.iter().map(|b| word_key(b)).collect();
        assert_eq!(keys, ["00", "01", "10"]);
        let h = CylinderFunction::per_symbol(&gm, &[1.0, 2.0]).unwrap();
        let same = recode_depth_one(&gm, std::slice::from_ref(&h)).unwrap();
        assert_eq!(same.fns[0], h);
    }

    #[test]
    fn lyndon_and_canonical() {
        assert!(is_lyndon(&[0, 0, 1]));
        assert!(!is_lyndon(&[0, 1, 0]));
        assert!(!is_lyndon(&[0, 1, 0, 1]));
        assert_eq!(canonical_rotation(&[1, 0, 0]), vec![0, 0, 1]);
    }
}
