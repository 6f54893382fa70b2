//! Dyadic intervals and finite unions of half-open subintervals of `[0, 1)`.
//!
//! Endpoints that are dyadic rationals of level at most [`MAX_LEVEL`] are
//! exact in `f64`, so all dyadic bookkeeping below is exact. Other endpoints
//! carry whatever rounding the caller introduced; comparisons that need a
//! tolerance use [`MEASURE_SLACK`].

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Deepest dyadic level whose endpoints stay exact in binary floating point.
pub const MAX_LEVEL: u32 = 40;

/// Absolute slack for measure comparisons involving non-dyadic endpoints.
pub const MEASURE_SLACK: f64 = 1e-12;

/// `2^-n` as an exact `f64`.
#[inline]
pub fn pow2_neg(n: u32) -> f64 {
    f64::powi(2.0, -(n as i32))
}

/// `2^n` as an exact `f64`.
#[inline]
pub fn pow2(n: u32) -> f64 {
    f64::powi(2.0, n as i32)
}

/// Half-open interval `[lo, hi)` inside `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi > 1.0 || lo > hi {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    pub(crate) fn new_unchecked(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi);
        Interval { lo, hi }
    }

    pub fn unit() -> Self {
        Interval { lo: 0.0, hi: 1.0 }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn measure(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x < self.hi
    }

    /// `self ⊆ other`, treating empty intervals as contained everywhere.
    pub fn is_subset_of(&self, other: &Interval) -> bool {
        self.is_empty() || (other.lo <= self.lo && self.hi <= other.hi)
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo < hi).then_some(Interval { lo, hi })
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.lo, self.hi)
    }
}

/// Index `(n, k)` of the dyadic interval `I^n_k = [(k-1)/2^n, k/2^n)`, `k` 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicIndex {
    pub level: u32,
    pub index: u64,
}

impl DyadicIndex {
    pub fn new(level: u32, index: u64) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::LevelOverflow(level));
        }
        if index == 0 || index > (1u64 << level) {
            return Err(Error::OutOfRange { n: level, k: index });
        }
        Ok(DyadicIndex { level, index })
    }

    pub fn interval(&self) -> Interval {
        let w = pow2_neg(self.level);
        Interval::new_unchecked((self.index - 1) as f64 * w, self.index as f64 * w)
    }

    /// The level-`level` dyadic cell containing `x ∈ [0, 1)`.
    pub fn containing(level: u32, x: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&x) {
            return Err(Error::InvalidInterval { lo: x, hi: x });
        }
        let k = (x * pow2(level)).floor() as u64 + 1;
        DyadicIndex::new(level, k.min(1u64 << level))
    }
}

impl fmt::Display for DyadicIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "I^{}_{}", self.level, self.index)
    }
}

pub fn dyadic_interval(d: DyadicIndex) -> Result<Interval> {
    let d = DyadicIndex::new(d.level, d.index)?;
    Ok(d.interval())
}

/// Coarsest dyadic interval `I^m_j ⊆ i`; ties at that level resolve to the
/// leftmost cell. The result always satisfies `4 · 2^-m ≥ μ(i)`.
pub fn find_inner_dyadic(i: &Interval) -> Result<DyadicIndex> {
    if i.measure() <= 0.0 {
        return Err(Error::DegenerateInterval { lo: i.lo, hi: i.hi });
    }
    for m in 0..=MAX_LEVEL {
        let scale = pow2(m);
        // first cell whose left end is >= lo; both products are exact
        let first = (i.lo * scale).ceil();
        if (first + 1.0) <= i.hi * scale {
            let found = DyadicIndex { level: m, index: first as u64 + 1 };
            debug_assert!(4.0 * pow2_neg(m) >= i.measure());
            return Ok(found);
        }
    }
    Err(Error::LevelOverflow(MAX_LEVEL + 1))
}

/// Finite disjoint union of half-open intervals in canonical form: parts are
/// non-empty, sorted, and no two touch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalSet {
    parts: Vec<Interval>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet { parts: Vec::new() }
    }

    pub fn full() -> Self {
        IntervalSet { parts: vec![Interval::unit()] }
    }

    pub fn from_interval(i: Interval) -> Self {
        Self::from_intervals([i])
    }

    /// Normalizes an arbitrary collection: drops empties, sorts, merges
    /// overlapping and adjacent parts.
    pub fn from_intervals<I: IntoIterator<Item = Interval>>(items: I) -> Self {
        let mut v: Vec<Interval> = items.into_iter().filter(|i| !i.is_empty()).collect();
        v.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)));
        let mut parts: Vec<Interval> = Vec::with_capacity(v.len());
        for i in v {
            match parts.last_mut() {
                Some(last) if i.lo <= last.hi => last.hi = last.hi.max(i.hi),
                _ => parts.push(i),
            }
        }
        IntervalSet { parts }
    }

    pub fn from_pairs(pairs: &[[f64; 2]]) -> Result<Self> {
        let items = pairs
            .iter()
            .map(|[lo, hi]| Interval::new(*lo, *hi))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_intervals(items))
    }

    pub fn parts(&self) -> &[Interval] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.parts.iter().map(Interval::measure).sum()
    }

    pub fn contains(&self, x: f64) -> bool {
        let idx = self.parts.partition_point(|p| p.hi <= x);
        self.parts.get(idx).is_some_and(|p| p.contains(x))
    }

    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let (a, b) = (&self.parts, &other.parts);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            if let Some(x) = a[i].intersect(&b[j]) {
                out.push(x);
            }
            if a[i].hi < b[j].hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        // pieces cut from canonical inputs are already sorted and separated
        IntervalSet { parts: out }
    }

    /// Measure of `self ∩ i` without allocating.
    pub fn measure_within(&self, i: &Interval) -> f64 {
        let start = self.parts.partition_point(|p| p.hi <= i.lo);
        self.parts[start..]
            .iter()
            .take_while(|p| p.lo < i.hi)
            .filter_map(|p| p.intersect(i))
            .map(|x| x.measure())
            .sum()
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        Self::from_intervals(self.parts.iter().chain(other.parts.iter()).copied())
    }

    pub fn difference(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        let mut j = 0;
        for p in &self.parts {
            let mut lo = p.lo;
            while j < other.parts.len() && other.parts[j].hi <= lo {
                j += 1;
            }
            let mut jj = j;
            while jj < other.parts.len() && other.parts[jj].lo < p.hi {
                let cut = other.parts[jj];
                if cut.lo > lo {
                    out.push(Interval::new_unchecked(lo, cut.lo));
                }
                lo = lo.max(cut.hi);
                if lo >= p.hi {
                    break;
                }
                jj += 1;
            }
            if lo < p.hi {
                out.push(Interval::new_unchecked(lo, p.hi));
            }
        }
        IntervalSet { parts: out }
    }

    pub fn is_subset_of(&self, other: &IntervalSet) -> bool {
        self.difference(other).is_empty()
    }

    pub fn to_pairs(&self) -> Vec<[f64; 2]> {
        self.parts.iter().map(|p| [p.lo, p.hi]).collect()
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parts.is_empty() {
            return write!(f, "{{}}");
        }
        write!(f, "{{")?;
        for (i, p) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "}}")
    }
}

impl Serialize for IntervalSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_pairs().serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntervalSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        IntervalSet::from_pairs(&pairs).map_err(serde::de::Error::custom)
    }
}
