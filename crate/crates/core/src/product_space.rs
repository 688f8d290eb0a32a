//! Finite product spaces `X_1 × … × X_n`, points, explicit subsets, product
//! measures and the weighted Hamming machinery built on top of them.
//!
//! Every coordinate alphabet is the integer range `0..size`. Subsets are
//! stored extensionally (sorted, deduplicated), which keeps cross-sections,
//! hull vertices and exact expectations enumerable.

use std::fmt;

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, CompensatedSum};

/// Default upper bound on the number of points an exact enumeration may visit.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// Tolerance used when validating probability vectors and weight norms.
pub const PROBABILITY_TOL: f64 = 1e-12;

/// Coordinate alphabet sizes of a product space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alphabet {
    sizes: Vec<usize>,
}

impl Alphabet {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidAlphabet("dimension must be at least 1".into()));
        }
        if let Some(i) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidAlphabet(format!("coordinate {i} has size 0")));
        }
        Ok(Self { sizes })
    }

    /// `n` copies of the same alphabet size.
    pub fn uniform(n: usize, size: usize) -> Result<Self> {
        Self::new(vec![size; n])
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of points of the whole space.
    pub fn cardinality(&self) -> u128 {
        self.sizes.iter().try_fold(1u128, |acc, &s| acc.checked_mul(s as u128)).unwrap_or(u128::MAX)
    }

    /// Validates `symbols` against this alphabet.
    pub fn point(&self, symbols: Vec<usize>) -> Result<Point> {
        if symbols.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: symbols.len() });
        }
        for (coord, (&symbol, &size)) in symbols.iter().zip(&self.sizes).enumerate() {
            if symbol >= size {
                return Err(Error::SymbolOutOfRange { coord, symbol, size });
            }
        }
        Ok(Point(symbols))
    }

    /// Alphabet of the first `n - 1` coordinates.
    pub fn drop_last(&self) -> Result<Alphabet> {
        if self.dim() < 2 {
            return Err(Error::InvalidAlphabet("cannot drop the only coordinate".into()));
        }
        Alphabet::new(self.sizes[..self.dim() - 1].to_vec())
    }

    /// Every point of the space in lexicographic order.
    pub fn points(&self, cap: u64) -> Result<PointIter> {
        let size = self.cardinality();
        if size > cap as u128 {
            return Err(Error::EnumerationCap { size, cap });
        }
        Ok(PointIter { sizes: self.sizes.clone(), next: Some(vec![0; self.dim()]) })
    }
}

/// Lexicographic odometer over a product of integer ranges.
#[derive(Debug, Clone)]
pub struct PointIter {
    sizes: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl Iterator for PointIter {
    type Item = Point;

    fn next(&mut self) -> Option<Point> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut i = succ.len();
        loop {
            if i == 0 {
                break;
            }
            i -= 1;
            succ[i] += 1;
            if succ[i] < self.sizes[i] {
                self.next = Some(succ);
                break;
            }
            succ[i] = 0;
        }
        Some(Point(current))
    }
}

/// A point `x = (x_1, …, x_n)` of a product space.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Point(Vec<usize>);

impl Point {
    /// Builds a point without alphabet validation. Use [`Alphabet::point`] for
    /// checked construction.
    pub fn from_symbols(symbols: Vec<usize>) -> Self {
        Point(symbols)
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Splits `x = (w, z)` into its prefix and last symbol.
    pub fn split_last(&self) -> Option<(Point, usize)> {
        let (&z, w) = self.0.split_last()?;
        Some((Point(w.to_vec()), z))
    }

    /// The point `(self, z)`.
    pub fn extended(&self, z: usize) -> Point {
        let mut s = self.0.clone();
        s.push(z);
        Point(s)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, ")")
    }
}

/// A finite subset `A` of the product space, kept sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSet {
    alphabet: Alphabet,
    points: Vec<Point>,
}

impl PointSet {
    /// Validates, sorts and deduplicates `points`. The result may be empty.
    pub fn new(alphabet: Alphabet, points: Vec<Point>) -> Result<Self> {
        let mut checked = points.into_iter().map(|p| alphabet.point(p.0)).collect::<Result<Vec<_>>>()?;
        checked.sort_unstable();
        checked.dedup();
        Ok(Self { alphabet, points: checked })
    }

    /// Convenience constructor from raw symbol vectors.
    pub fn from_symbols(alphabet: Alphabet, points: Vec<Vec<usize>>) -> Result<Self> {
        Self::new(alphabet, points.into_iter().map(Point).collect())
    }

    pub fn empty(alphabet: Alphabet) -> Self {
        Self { alphabet, points: Vec::new() }
    }

    /// The whole space.
    pub fn full(alphabet: Alphabet, cap: u64) -> Result<Self> {
        let points = alphabet.points(cap)?.collect();
        Ok(Self { alphabet, points })
    }

    /// All points satisfying `pred`, enumerated at construction time.
    pub fn from_predicate<F>(alphabet: Alphabet, cap: u64, pred: F) -> Result<Self>
    where
        F: Fn(&Point) -> bool,
    {
        let points = alphabet.points(cap)?.filter(|p| pred(p)).collect();
        Ok(Self { alphabet, points })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.points.binary_search(x).is_ok()
    }

    /// `true` when every point of `self` lies in `other`.
    pub fn is_subset(&self, other: &PointSet) -> bool {
        self.points.iter().all(|p| other.contains(p))
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point> {
        self.points.iter()
    }
}

/// The binary vector `h(x, y)` with `h_i = 1` iff `x_i ≠ y_i`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HammingPattern(Vec<u8>);

impl HammingPattern {
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidWeights("pattern entries must be 0 or 1".into()));
        }
        Ok(Self(bits))
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| f64::from(b)).collect()
    }
}

/// A weight vector `w ∈ W = {w ≥ 0, ‖w‖ ≤ 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some(bad) = w.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidWeights(format!("entry {bad} is not a finite nonnegative real")));
        }
        let norm2: f64 = w.iter().map(|v| v * v).sum();
        if norm2 > 1.0 + PROBABILITY_TOL {
            return Err(Error::InvalidWeights(format!("squared norm {norm2} exceeds 1")));
        }
        Ok(Self(w))
    }

    /// `v / ‖v‖` for a nonnegative, nonzero direction `v`.
    pub fn normalized(v: &[f64]) -> Result<Self> {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidWeights("cannot normalize a zero direction".into()));
        }
        Self::new(v.iter().map(|x| (x / norm).max(0.0)).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / (n as f64).sqrt(); n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Per-coordinate probability vectors defining `Q = ⊗ Q_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductMeasure {
    alphabet: Alphabet,
    marginals: Vec<Vec<f64>>,
}

impl ProductMeasure {
    /// Validates each marginal (nonnegative, sums to 1 within 1e-12) and
    /// renormalizes it once.
    pub fn new(alphabet: Alphabet, marginals: Vec<Vec<f64>>) -> Result<Self> {
        if marginals.len() != alphabet.dim() {
            return Err(Error::DimensionMismatch { expected: alphabet.dim(), found: marginals.len() });
        }
        let mut normalized = Vec::with_capacity(marginals.len());
        for (coord, (q, &size)) in marginals.into_iter().zip(alphabet.sizes()).enumerate() {
            if q.len() != size {
                return Err(Error::InvalidMarginal {
                    coord,
                    reason: format!("length {} does not match alphabet size {size}", q.len()),
                });
            }
            if q.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::InvalidMarginal { coord, reason: "entries must be finite and nonnegative".into() });
            }
            let total = compensated_sum(q.iter().copied());
            if (total - 1.0).abs() > PROBABILITY_TOL {
                return Err(Error::InvalidMarginal { coord, reason: format!("entries sum to {total}, not 1") });
            }
            normalized.push(q.into_iter().map(|p| p / total).collect());
        }
        Ok(Self { alphabet, marginals: normalized })
    }

    pub fn uniform(alphabet: Alphabet) -> Self {
        let marginals = alphabet.sizes().iter().map(|&s| vec![1.0 / s as f64; s]).collect();
        Self { alphabet, marginals }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn marginals(&self) -> &[Vec<f64>] {
        &self.marginals
    }

    pub fn dim(&self) -> usize {
        self.alphabet.dim()
    }

    /// `Π_i Q_i(x_i)`.
    pub fn probability(&self, x: &Point) -> f64 {
        x.symbols().iter().zip(&self.marginals).map(|(&s, q)| q[s]).product()
    }

    /// `true` when every marginal entry is strictly positive.
    pub fn is_strictly_positive(&self) -> bool {
        self.marginals.iter().flatten().all(|&p| p > 0.0)
    }

    /// Product measure of the first `n - 1` coordinates.
    pub fn drop_last(&self) -> Result<ProductMeasure> {
        let alphabet = self.alphabet.drop_last()?;
        let marginals = self.marginals[..self.dim() - 1].to_vec();
        Ok(ProductMeasure { alphabet, marginals })
    }
}

/// `h(x, y)`.
pub fn hamming_pattern(x: &Point, y: &Point) -> Result<HammingPattern> {
    check_dims(x.dim(), y.dim())?;
    Ok(HammingPattern(x.symbols().iter().zip(y.symbols()).map(|(a, b)| u8::from(a != b)).collect()))
}

/// `d_w(x, y) = Σ w_i h_i(x, y)`.
pub fn weighted_distance(x: &Point, y: &Point, w: &WeightVector) -> Result<f64> {
    check_dims(x.dim(), y.dim())?;
    check_dims(x.dim(), w.dim())?;
    Ok(x.symbols().iter().zip(y.symbols()).zip(w.as_slice()).filter(|((a, b), _)| a != b).map(|(_, wi)| wi).sum())
}

/// `d_w(x, A) = min_{y ∈ A} d_w(x, y)`.
pub fn weighted_set_distance(x: &Point, a: &PointSet, w: &WeightVector) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut best = f64::INFINITY;
    for y in a.iter() {
        best = best.min(weighted_distance(x, y, w)?);
    }
    Ok(best)
}

/// `A_z = {w : (w, z) ∈ A}`, a subset of the first `n - 1` coordinates.
/// May be empty.
pub fn cross_section(a: &PointSet, z: usize) -> Result<PointSet> {
    let alphabet = a.alphabet();
    let n = alphabet.dim();
    if n < 2 {
        return Err(Error::InvalidAlphabet("cross-section needs at least two coordinates".into()));
    }
    let size = alphabet.sizes()[n - 1];
    if z >= size {
        return Err(Error::SymbolOutOfRange { coord: n - 1, symbol: z, size });
    }
    let prefix = alphabet.drop_last()?;
    let points = a.iter().filter_map(|p| p.split_last()).filter(|(_, last)| *last == z).map(|(w, _)| w).collect();
    // Prefixes of a sorted set filtered on the last symbol stay sorted and distinct.
    Ok(PointSet { alphabet: prefix, points })
}

/// `Q(A) = Σ_{y ∈ A} Π_i Q_i(y_i)`.
pub fn measure_of_set(q: &ProductMeasure, a: &PointSet) -> Result<f64> {
    if q.alphabet() != a.alphabet() {
        return Err(Error::InvalidScenario("measure and set are over different alphabets".into()));
    }
    Ok(compensated_sum(a.iter().map(|y| q.probability(y))))
}

/// Every point of the space with its product probability, in lexicographic
/// order.
pub fn enumerate_points(q: &ProductMeasure, cap: u64) -> Result<impl Iterator<Item = (Point, f64)> + '_> {
    Ok(q.alphabet().points(cap)?.map(move |x| {
        let p = q.probability(&x);
        (x, p)
    }))
}

/// Total mass yielded by [`enumerate_points`]; equals 1 up to rounding.
pub fn total_mass(q: &ProductMeasure, cap: u64) -> Result<f64> {
    let mut acc = CompensatedSum::new();
    for (_, p) in enumerate_points(q, cap)? {
        acc.add(p);
    }
    Ok(acc.value())
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
