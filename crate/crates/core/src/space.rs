//! The `ℓ_p` direct sum of finite-dimensional coordinate blocks.
//!
//! Block `n` is `ℓ_p^{dims(n)}` with unit vectors `e^n_k`; the whole space
//! carries the `ℓ_p` norm over all coordinates, so block projections have
//! norm exactly 1 and norms of vectors on disjoint levels combine
//! p-additively.
//!
//! Vectors are stored per level as sorted runs of equal coefficients. A
//! Pettis integral over a long interval puts the same value on millions of
//! consecutive coordinates, which is a single run here.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::carriers::parse_key;
use crate::error::{Error, Result};

/// Norm exponent `p ∈ [1, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Exponent(f64);

impl Exponent {
    pub const ONE: Exponent = Exponent(1.0);
    pub const TWO: Exponent = Exponent(2.0);
    pub const INFINITY: Exponent = Exponent(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::Config(format!("norm exponent must lie in [1, inf], got {p}")));
        }
        Ok(Exponent(p))
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    pub fn is_infinite(&self) -> bool {
        self.0.is_infinite()
    }

    /// `1/p`, with `1/∞ = 0`.
    pub fn reciprocal(&self) -> f64 {
        if self.is_infinite() {
            0.0
        } else {
            1.0 / self.0
        }
    }

    /// Conjugate exponent `q` with `1/p + 1/q = 1`.
    pub fn dual(&self) -> Exponent {
        if self.is_infinite() {
            Exponent::ONE
        } else if self.0 == 1.0 {
            Exponent::INFINITY
        } else {
            Exponent(self.0 / (self.0 - 1.0))
        }
    }

    /// `ℓ_p` norm of a coefficient list given as `(multiplicity, value)` pairs.
    pub fn norm_of<I: IntoIterator<Item = (u64, f64)>>(&self, items: I) -> f64 {
        if self.is_infinite() {
            items
                .into_iter()
                .filter(|(m, _)| *m > 0)
                .fold(0.0, |acc, (_, v)| acc.max(v.abs()))
        } else if self.0 == 1.0 {
            items.into_iter().map(|(m, v)| m as f64 * v.abs()).sum()
        } else {
            let p = self.0;
            let items: Vec<(u64, f64)> = items.into_iter().filter(|(m, _)| *m > 0).collect();
            // scale by the largest entry to keep |v|^p in range
            let big = items.iter().fold(0.0f64, |acc, (_, v)| acc.max(v.abs()));
            if big == 0.0 {
                return 0.0;
            }
            let s: f64 = items.iter().map(|(m, v)| *m as f64 * (v.abs() / big).powf(p)).sum();
            big * s.powf(1.0 / p)
        }
    }

    /// Combine norms of vectors with disjoint supports.
    pub fn combine(&self, norms: &[f64]) -> f64 {
        self.norm_of(norms.iter().map(|&x| (1, x)))
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let p = match Raw::deserialize(d)? {
            Raw::Num(x) => x,
            Raw::Text(t) => match t.to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "∞" => f64::INFINITY,
                other => other.parse::<f64>().map_err(serde::de::Error::custom)?,
            },
        };
        Exponent::new(p).map_err(serde::de::Error::custom)
    }
}

/// Exponent plus the dimension of every block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLayout {
    p: Exponent,
    dims: BTreeMap<u32, u64>,
}

impl BlockLayout {
    pub fn new(p: Exponent, dims: BTreeMap<u32, u64>) -> Result<Self> {
        if let Some((n, _)) = dims.iter().find(|(_, d)| **d == 0) {
            return Err(Error::Config(format!("block {n} has dimension 0")));
        }
        Ok(BlockLayout { p, dims })
    }

    /// `dims(n) = 2^n` for `n = 1..=depth`.
    pub fn dyadic(p: Exponent, depth: u32) -> Self {
        BlockLayout { p, dims: (1..=depth).map(|n| (n, 1u64 << n)).collect() }
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn dim(&self, n: u32) -> Option<u64> {
        self.dims.get(&n).copied()
    }

    pub fn levels(&self) -> impl Iterator<Item = u32> + '_ {
        self.dims.keys().copied()
    }

    fn check(&self, n: u32, k: u64) -> Result<()> {
        match self.dim(n) {
            Some(d) if k >= 1 && k <= d => Ok(()),
            _ => Err(Error::OutOfRange { n, k }),
        }
    }
}

/// Coefficient `value` on coordinates `start..start + len` of one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Run {
    pub start: u64,
    pub len: u64,
    pub value: f64,
}

impl Run {
    fn end(&self) -> u64 {
        self.start + self.len
    }
}

#[derive(Debug, Clone)]
pub struct BlockVector {
    layout: Arc<BlockLayout>,
    levels: BTreeMap<u32, Vec<Run>>,
}

impl PartialEq for BlockVector {
    fn eq(&self, other: &Self) -> bool {
        same_layout(&self.layout, &other.layout) && self.levels == other.levels
    }
}

fn same_layout(a: &Arc<BlockLayout>, b: &Arc<BlockLayout>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Sorts, rejects overlaps, drops zeros, merges touching runs of equal value.
fn canonical_runs(n: u32, mut runs: Vec<Run>, layout: &BlockLayout) -> Result<Vec<Run>> {
    let dim = layout.dim(n).ok_or(Error::OutOfRange { n, k: 0 })?;
    runs.retain(|r| r.len > 0 && r.value != 0.0);
    runs.sort_by_key(|r| r.start);
    let mut out: Vec<Run> = Vec::with_capacity(runs.len());
    for r in runs {
        if r.start == 0 || r.end() - 1 > dim {
            return Err(Error::OutOfRange { n, k: r.start.max(r.end() - 1) });
        }
        match out.last_mut() {
            Some(last) if r.start < last.end() => {
                return Err(Error::Config(format!("overlapping runs at level {n}, coordinate {}", r.start)));
            }
            Some(last) if r.start == last.end() && r.value == last.value => last.len += r.len,
            _ => out.push(r),
        }
    }
    Ok(out)
}

impl BlockVector {
    pub fn zero(layout: Arc<BlockLayout>) -> Self {
        BlockVector { layout, levels: BTreeMap::new() }
    }

    pub fn from_entries<I>(layout: Arc<BlockLayout>, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, u64, f64)>,
    {
        let mut acc: BTreeMap<(u32, u64), f64> = BTreeMap::new();
        for (n, k, v) in entries {
            layout.check(n, k)?;
            *acc.entry((n, k)).or_insert(0.0) += v;
        }
        Self::from_runs(
            layout,
            acc.into_iter().map(|((n, k), v)| (n, Run { start: k, len: 1, value: v })),
        )
    }

    /// Runs must not overlap within a level.
    pub fn from_runs<I>(layout: Arc<BlockLayout>, runs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, Run)>,
    {
        let mut by_level: BTreeMap<u32, Vec<Run>> = BTreeMap::new();
        for (n, r) in runs {
            by_level.entry(n).or_default().push(r);
        }
        let mut levels = BTreeMap::new();
        for (n, runs) in by_level {
            let runs = canonical_runs(n, runs, &layout)?;
            if !runs.is_empty() {
                levels.insert(n, runs);
            }
        }
        Ok(BlockVector { layout, levels })
    }

    pub fn layout(&self) -> &Arc<BlockLayout> {
        &self.layout
    }

    pub fn p(&self) -> Exponent {
        self.layout.p
    }

    pub fn is_zero(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn get(&self, n: u32, k: u64) -> f64 {
        let Some(runs) = self.levels.get(&n) else { return 0.0 };
        let i = runs.partition_point(|r| r.end() <= k);
        runs.get(i).filter(|r| r.start <= k).map_or(0.0, |r| r.value)
    }

    pub fn runs(&self) -> impl Iterator<Item = (u32, &Run)> + '_ {
        self.levels.iter().flat_map(|(n, rs)| rs.iter().map(move |r| (*n, r)))
    }

    /// Every nonzero coordinate; expands runs, so only for small supports.
    pub fn entries(&self) -> impl Iterator<Item = (u32, u64, f64)> + '_ {
        self.runs().flat_map(|(n, r)| (r.start..r.end()).map(move |k| (n, k, r.value)))
    }

    pub fn support_len(&self) -> u64 {
        self.runs().map(|(_, r)| r.len).sum()
    }

    pub fn active_levels(&self) -> impl Iterator<Item = u32> + '_ {
        self.levels.keys().copied()
    }

    pub fn norm(&self) -> f64 {
        self.layout.p.norm_of(self.runs().map(|(_, r)| (r.len, r.value)))
    }

    /// Norm of the level-`n` block alone.
    pub fn block_norm(&self, n: u32) -> f64 {
        self.levels
            .get(&n)
            .map_or(0.0, |rs| self.layout.p.norm_of(rs.iter().map(|r| (r.len, r.value))))
    }

    /// Sum of all coefficients (with multiplicity).
    pub fn coefficient_sum(&self) -> f64 {
        self.runs().map(|(_, r)| r.len as f64 * r.value).sum()
    }

    pub fn project_block(&self, n: u32) -> BlockVector {
        let levels = self.levels.get(&n).map(|rs| (n, rs.clone())).into_iter().collect();
        BlockVector { layout: self.layout.clone(), levels }
    }

    /// Keep only levels `<= n`.
    pub fn truncate(&self, n: u32) -> BlockVector {
        let levels = self.levels.range(..=n).map(|(a, b)| (*a, b.clone())).collect();
        BlockVector { layout: self.layout.clone(), levels }
    }

    pub fn scale(&self, t: f64) -> BlockVector {
        if t == 0.0 {
            return BlockVector::zero(self.layout.clone());
        }
        let levels = self
            .levels
            .iter()
            .map(|(n, rs)| (*n, rs.iter().map(|r| Run { value: r.value * t, ..*r }).collect()))
            .collect();
        BlockVector { layout: self.layout.clone(), levels }
    }

    pub fn add(&self, other: &BlockVector) -> Result<BlockVector> {
        if !same_layout(&self.layout, &other.layout) {
            return Err(Error::LayoutMismatch);
        }
        let mut levels = BTreeMap::new();
        let keys: std::collections::BTreeSet<u32> =
            self.levels.keys().chain(other.levels.keys()).copied().collect();
        for n in keys {
            let a = self.levels.get(&n).map_or(&[][..], Vec::as_slice);
            let b = other.levels.get(&n).map_or(&[][..], Vec::as_slice);
            let merged = canonical_runs(n, merge_runs(a, b), &self.layout)?;
            if !merged.is_empty() {
                levels.insert(n, merged);
            }
        }
        Ok(BlockVector { layout: self.layout.clone(), levels })
    }

    pub fn sub(&self, other: &BlockVector) -> Result<BlockVector> {
        self.add(&other.scale(-1.0))
    }

    pub fn to_json(&self) -> BlockVectorJson {
        BlockVectorJson {
            p: self.layout.p,
            coeffs: self.entries().map(|(n, k, v)| (format!("{n},{k}"), v)).collect(),
        }
    }

    pub fn from_json(layout: Arc<BlockLayout>, j: &BlockVectorJson) -> Result<Self> {
        if j.p != layout.p {
            return Err(Error::LayoutMismatch);
        }
        let entries = j
            .coeffs
            .iter()
            .map(|(key, v)| parse_key(key).map(|(n, k)| (n, k, *v)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_entries(layout, entries)
    }
}

/// Coordinatewise sum of two sorted run lists.
fn merge_runs(a: &[Run], b: &[Run]) -> Vec<Run> {
    let mut cuts: Vec<u64> = a.iter().chain(b).flat_map(|r| [r.start, r.end()]).collect();
    cuts.sort_unstable();
    cuts.dedup();
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        while i < a.len() && a[i].end() <= lo {
            i += 1;
        }
        while j < b.len() && b[j].end() <= lo {
            j += 1;
        }
        let va = a.get(i).filter(|r| r.start <= lo).map_or(0.0, |r| r.value);
        let vb = b.get(j).filter(|r| r.start <= lo).map_or(0.0, |r| r.value);
        let v = va + vb;
        if v != 0.0 {
            out.push(Run { start: lo, len: hi - lo, value: v });
        }
    }
    out
}

/// `{p, coeffs: {"n,k": value}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockVectorJson {
    pub p: Exponent,
    pub coeffs: BTreeMap<String, f64>,
}

/// Finite-support functional acting by coordinate pairing. Its norm is the
/// `ℓ_q` norm of its coefficients, `q` conjugate to the layout's `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Functional {
    layout: Arc<BlockLayout>,
    coeffs: BTreeMap<(u32, u64), f64>,
}

impl Functional {
    pub fn new<I>(layout: Arc<BlockLayout>, coeffs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, u64, f64)>,
    {
        let mut map = BTreeMap::new();
        for (n, k, v) in coeffs {
            layout.check(n, k)?;
            *map.entry((n, k)).or_insert(0.0) += v;
        }
        map.retain(|_, v| *v != 0.0);
        Ok(Functional { layout, coeffs: map })
    }

    pub fn unit(layout: Arc<BlockLayout>, n: u32, k: u64) -> Result<Self> {
        Self::new(layout, [(n, k, 1.0)])
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (u32, u64, f64)> + '_ {
        self.coeffs.iter().map(|(&(n, k), &v)| (n, k, v))
    }

    pub fn max_level(&self) -> Option<u32> {
        self.coeffs.keys().map(|(n, _)| *n).max()
    }

    pub fn dual_norm(&self) -> f64 {
        self.layout.p.dual().norm_of(self.coeffs.values().map(|v| (1, *v)))
    }

    pub fn apply(&self, v: &BlockVector) -> Result<f64> {
        if !same_layout(&self.layout, &v.layout) {
            return Err(Error::LayoutMismatch);
        }
        Ok(self.coeffs.iter().map(|(&(n, k), &x)| x * v.get(n, k)).sum())
    }
}

pub fn apply_functional(x: &Functional, v: &BlockVector) -> Result<f64> {
    x.apply(v)
}
