//! Disjoint positive-measure carriers `A^n_k ⊂ I^n_k`, one per dyadic cell of
//! levels `1..=depth`.
//!
//! Three allocation schemes are available:
//!
//! * [`CarrierScheme::LeafGap`] (default): every carrier lives inside a single
//!   finest-level cell. A coarse cell `(n, k)` with `n < depth` is hosted by
//!   the finest cell immediately left of its midpoint; inside each finest cell
//!   the hosted carrier (if any) takes the middle half, then the cell's own
//!   carrier takes the middle half of the leftmost remaining gap. Every
//!   finest cell hosts at most one coarse carrier, so the family is given in
//!   closed form and never runs out of room.
//! * [`CarrierScheme::FatCantorStage`]: same slots, each filled with a
//!   finite-stage Smith–Volterra–Cantor set instead of the whole slot.
//! * [`CarrierScheme::GreedyGap`]: the middle half of the largest free gap of
//!   the whole cell. It stalls at depth 3, where `I^3_2` lies inside
//!   `A^1_1 = [1/8, 3/8)`, and reports `AllocationExhausted` there.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{pow2, pow2_neg, DyadicIndex, Interval, IntervalSet, MAX_LEVEL};

/// Components shorter than this cannot host a carrier.
pub const POSITIVITY_FLOOR: f64 = 8.271_806_125_530_277e-25; // 2^-80

/// Largest depth for which archives embed the explicit carrier sets.
pub const MAX_SERIALIZED_DEPTH: u32 = 16;

const MAX_CANTOR_STAGES: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CarrierScheme {
    #[default]
    LeafGap,
    FatCantorStage { stages: u32 },
    GreedyGap,
}

impl CarrierScheme {
    pub fn tag(&self) -> &'static str {
        match self {
            CarrierScheme::LeafGap => "leaf-gap",
            CarrierScheme::FatCantorStage { .. } => "fat-cantor-stage",
            CarrierScheme::GreedyGap => "greedy-gap",
        }
    }

    fn params(&self) -> BTreeMap<String, u32> {
        match self {
            CarrierScheme::FatCantorStage { stages } => [("stages".to_string(), *stages)].into(),
            _ => BTreeMap::new(),
        }
    }

    fn from_parts(tag: &str, params: &BTreeMap<String, u32>) -> Result<Self> {
        match tag {
            "leaf-gap" => Ok(CarrierScheme::LeafGap),
            "greedy-gap" => Ok(CarrierScheme::GreedyGap),
            "fat-cantor-stage" => {
                let stages = params.get("stages").copied().unwrap_or(3);
                if stages == 0 || stages > MAX_CANTOR_STAGES {
                    return Err(Error::Config(format!(
                        "fat-cantor-stage needs 1..={MAX_CANTOR_STAGES} stages, got {stages}"
                    )));
                }
                Ok(CarrierScheme::FatCantorStage { stages })
            }
            other => Err(Error::Config(format!("unknown carrier scheme `{other}`"))),
        }
    }
}

/// `{scheme, params}` as it appears in model configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub scheme: String,
    #[serde(default)]
    pub params: BTreeMap<String, u32>,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig::from(CarrierScheme::default())
    }
}

impl From<CarrierScheme> for SchemeConfig {
    fn from(s: CarrierScheme) -> Self {
        SchemeConfig { scheme: s.tag().to_string(), params: s.params() }
    }
}

impl TryFrom<&SchemeConfig> for CarrierScheme {
    type Error = Error;

    fn try_from(c: &SchemeConfig) -> Result<Self> {
        CarrierScheme::from_parts(&c.scheme, &c.params)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Store {
    /// Closed-form slots; nothing materialized.
    Slotted,
    /// Explicit sets plus a position index of every part, sorted by `lo`.
    Explicit {
        sets: BTreeMap<(u32, u64), IntervalSet>,
        index: Vec<(Interval, u32, u64)>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarrierFamily {
    depth: u32,
    scheme: CarrierScheme,
    store: Store,
}

/// One problem found by [`CarrierFamily::verify_disjointness`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    Overlap { a: (u32, u64), b: (u32, u64) },
    NotContained { cell: (u32, u64) },
    NonPositive { cell: (u32, u64) },
    Missing { cell: (u32, u64) },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisjointnessReport {
    pub pass: bool,
    pub carriers_checked: u64,
    pub violations: Vec<Violation>,
}

pub fn allocate_carriers(depth: u32, scheme: CarrierScheme) -> Result<CarrierFamily> {
    if depth == 0 {
        return Err(Error::Config("carrier depth must be at least 1".into()));
    }
    if depth > MAX_LEVEL {
        return Err(Error::LevelOverflow(depth));
    }
    match scheme {
        CarrierScheme::LeafGap => Ok(CarrierFamily { depth, scheme, store: Store::Slotted }),
        CarrierScheme::FatCantorStage { stages } => {
            CarrierScheme::from_parts(scheme.tag(), &scheme.params())?;
            // Cantor endpoints need about depth + 5 + 2·stages bits to stay exact
            if depth + 5 + 2 * stages > 52 {
                return Err(Error::AllocationExhausted { n: depth, k: 1 });
            }
            Ok(CarrierFamily { depth, scheme, store: Store::Slotted })
        }
        CarrierScheme::GreedyGap => allocate_greedy_gap(depth),
    }
}

fn allocate_greedy_gap(depth: u32) -> Result<CarrierFamily> {
    let mut occupied = IntervalSet::empty();
    let mut sets = BTreeMap::new();
    for n in 1..=depth {
        for k in 1..=(1u64 << n) {
            let cell = IntervalSet::from_interval(DyadicIndex { level: n, index: k }.interval());
            let free = cell.difference(&occupied);
            // largest component, leftmost on ties
            let best = free
                .parts()
                .iter()
                .fold(None::<Interval>, |acc, p| match acc {
                    Some(a) if a.measure() >= p.measure() => Some(a),
                    _ => Some(*p),
                })
                .filter(|c| c.measure() >= POSITIVITY_FLOOR)
                .ok_or(Error::AllocationExhausted { n, k })?;
            let q = best.measure() / 4.0;
            let a = IntervalSet::from_interval(Interval::new_unchecked(best.lo() + q, best.hi() - q));
            occupied = occupied.union(&a);
            sets.insert((n, k), a);
        }
    }
    Ok(CarrierFamily::explicit(depth, CarrierScheme::GreedyGap, sets))
}

/// Coarse cell hosted by finest cell `j` (1-based) at depth `depth`.
fn hosted_by(depth: u32, j: u64) -> Option<(u32, u64)> {
    if j >= (1u64 << depth) {
        return None;
    }
    let t = j.trailing_zeros();
    if t + 2 > depth {
        // j = 2^(depth-1): hosts the root cell, which carries no mass
        return None;
    }
    let n = depth - 1 - t;
    let k = (j >> t).div_ceil(2);
    Some((n, k))
}

/// Finest cell hosting coarse cell `(n, k)`.
fn host_of(depth: u32, n: u32, k: u64) -> u64 {
    (2 * k - 1) << (depth - n - 1)
}

fn cantor_stage(slot: Interval, stages: u32, out: &mut Vec<Interval>) {
    let len = slot.measure();
    let mut pieces = vec![slot];
    for i in 1..=stages {
        let cut = len * pow2_neg(2 * i);
        let mut next = Vec::with_capacity(pieces.len() * 2);
        for p in &pieces {
            let mid = 0.5 * (p.lo() + p.hi());
            next.push(Interval::new_unchecked(p.lo(), mid - cut / 2.0));
            next.push(Interval::new_unchecked(mid + cut / 2.0, p.hi()));
        }
        pieces = next;
    }
    out.extend(pieces);
}

impl CarrierFamily {
    fn explicit(depth: u32, scheme: CarrierScheme, sets: BTreeMap<(u32, u64), IntervalSet>) -> Self {
        let mut index: Vec<(Interval, u32, u64)> = sets
            .iter()
            .flat_map(|(&(n, k), s)| s.parts().iter().map(move |p| (*p, n, k)))
            .collect();
        index.sort_by(|a, b| a.0.lo().total_cmp(&b.0.lo()));
        CarrierFamily { depth, scheme, store: Store::Explicit { sets, index } }
    }

    /// Family backed by explicit sets, e.g. loaded from an archive. No
    /// structural checks happen here; run [`Self::verify_disjointness`].
    pub fn from_sets(
        depth: u32,
        scheme: CarrierScheme,
        sets: BTreeMap<(u32, u64), IntervalSet>,
    ) -> Result<Self> {
        if depth == 0 || depth > MAX_LEVEL {
            return Err(Error::Config(format!("carrier depth {depth} out of range")));
        }
        for &(n, k) in sets.keys() {
            if n == 0 || n > depth || k == 0 || k > (1u64 << n) {
                return Err(Error::OutOfRange { n, k });
            }
        }
        Ok(Self::explicit(depth, scheme, sets))
    }

    /// Copy with every carrier materialized as an explicit set.
    pub fn materialize(&self) -> CarrierFamily {
        let mut sets = BTreeMap::new();
        for n in 1..=self.depth {
            for k in 1..=(1u64 << n) {
                sets.insert((n, k), self.carrier_unchecked(n, k));
            }
        }
        Self::explicit(self.depth, self.scheme, sets)
    }

    /// Replace one carrier (materializing the family if necessary).
    pub fn with_carrier(&self, n: u32, k: u64, set: IntervalSet) -> Result<CarrierFamily> {
        self.check_index(n, k)?;
        let mut base = match &self.store {
            Store::Explicit { sets, .. } => sets.clone(),
            Store::Slotted => match self.materialize().store {
                Store::Explicit { sets, .. } => sets,
                Store::Slotted => unreachable!(),
            },
        };
        base.insert((n, k), set);
        Ok(Self::explicit(self.depth, self.scheme, base))
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn scheme(&self) -> CarrierScheme {
        self.scheme
    }

    pub fn is_explicit(&self) -> bool {
        matches!(self.store, Store::Explicit { .. })
    }

    fn check_index(&self, n: u32, k: u64) -> Result<()> {
        if n == 0 || n > self.depth || k == 0 || k > (1u64 << n) {
            return Err(Error::OutOfRange { n, k });
        }
        Ok(())
    }

    /// `A^n_k`.
    pub fn carrier(&self, n: u32, k: u64) -> Result<IntervalSet> {
        self.check_index(n, k)?;
        Ok(self.carrier_unchecked(n, k))
    }

    pub(crate) fn carrier_unchecked(&self, n: u32, k: u64) -> IntervalSet {
        match &self.store {
            Store::Explicit { sets, .. } => sets.get(&(n, k)).cloned().unwrap_or_default(),
            Store::Slotted => {
                let mut out = Vec::new();
                self.slot_parts(n, k, &mut out);
                IntervalSet::from_intervals(out)
            }
        }
    }

    fn slot(&self, n: u32, k: u64) -> Interval {
        let h = pow2_neg(self.depth);
        if n < self.depth {
            let lo = (host_of(self.depth, n, k) - 1) as f64 * h;
            Interval::new_unchecked(lo + h / 4.0, lo + 3.0 * h / 4.0)
        } else {
            let lo = (k - 1) as f64 * h;
            if hosted_by(self.depth, k).is_some() {
                Interval::new_unchecked(lo + h / 16.0, lo + 3.0 * h / 16.0)
            } else {
                Interval::new_unchecked(lo + h / 4.0, lo + 3.0 * h / 4.0)
            }
        }
    }

    fn slot_parts(&self, n: u32, k: u64, out: &mut Vec<Interval>) {
        let slot = self.slot(n, k);
        match self.scheme {
            CarrierScheme::FatCantorStage { stages } => cantor_stage(slot, stages, out),
            _ => out.push(slot),
        }
    }

    pub fn carrier_measure(&self, n: u32, k: u64) -> Result<f64> {
        Ok(self.carrier(n, k)?.measure())
    }

    /// The unique carrier containing `omega`, if any.
    pub fn locate(&self, omega: f64) -> Option<DyadicIndex> {
        if !(0.0..1.0).contains(&omega) {
            return None;
        }
        match &self.store {
            Store::Explicit { index, .. } => {
                let i = index.partition_point(|(p, _, _)| p.lo() <= omega);
                // parts may overlap in a corrupted family; scan back over candidates
                index[..i]
                    .iter()
                    .rev()
                    .find(|(p, _, _)| p.contains(omega))
                    .map(|&(_, n, k)| DyadicIndex { level: n, index: k })
            }
            Store::Slotted => {
                let j = ((omega * pow2(self.depth)).floor() as u64 + 1).min(1u64 << self.depth);
                let mut parts = Vec::new();
                let candidates = hosted_by(self.depth, j).into_iter().chain([(self.depth, j)]);
                for (n, k) in candidates {
                    parts.clear();
                    self.slot_parts(n, k, &mut parts);
                    if parts.iter().any(|p| p.contains(omega)) {
                        return Some(DyadicIndex { level: n, index: k });
                    }
                }
                None
            }
        }
    }

    /// Union of all carriers. Materializes `~2^(depth+1)` parts; intended for
    /// small depths.
    pub fn occupied(&self) -> IntervalSet {
        let mut all = Vec::new();
        for n in 1..=self.depth {
            for k in 1..=(1u64 << n) {
                all.extend_from_slice(self.carrier_unchecked(n, k).parts());
            }
        }
        IntervalSet::from_intervals(all)
    }

    /// Total carrier measure through level `up_to` (sum over carriers).
    pub fn total_measure(&self, up_to: u32) -> f64 {
        let up_to = up_to.min(self.depth);
        match (&self.store, self.scheme) {
            (Store::Slotted, CarrierScheme::LeafGap) => {
                // per-level closed form: coarse slots are h/2; finest cells
                // hosting a coarse carrier keep h/8, the other two keep h/2
                let h = pow2_neg(self.depth);
                (1..=up_to)
                    .map(|n| {
                        if n < self.depth {
                            pow2(n) * h / 2.0
                        } else {
                            let hosts = (1u64 << n) - 2;
                            hosts as f64 * h / 8.0 + 2.0 * h / 2.0
                        }
                    })
                    .sum()
            }
            _ => (1..=up_to)
                .flat_map(|n| (1..=(1u64 << n)).map(move |k| (n, k)))
                .map(|(n, k)| self.carrier_unchecked(n, k).measure())
                .sum(),
        }
    }

    /// Checks positivity, containment `A^n_k ⊆ I^n_k` and pairwise
    /// disjointness across the whole family.
    ///
    /// Carriers are bucketed by the dyadic cells of a fixed chunk level, and
    /// within each bucket the parts are sorted and swept; any overlap of
    /// positive measure shows up as two consecutive parts in some bucket.
    pub fn verify_disjointness(&self) -> DisjointnessReport {
        let depth = self.depth;
        let chunk = depth.min(12);
        let mut violations = BTreeSet::new();
        let mut checked = 0u64;
        let mut buf = Vec::new();

        let check_cell = |n: u32, k: u64, parts: &[Interval], v: &mut BTreeSet<Violation>| {
            let cell = DyadicIndex { level: n, index: k }.interval();
            let m: f64 = parts.iter().map(Interval::measure).sum();
            if parts.is_empty() && self.is_explicit() {
                let present = matches!(&self.store, Store::Explicit { sets, .. } if sets.contains_key(&(n, k)));
                if !present {
                    v.insert(Violation::Missing { cell: (n, k) });
                    return;
                }
            }
            if m.is_nan() || m <= 0.0 {
                v.insert(Violation::NonPositive { cell: (n, k) });
            }
            if parts.iter().any(|p| !p.is_subset_of(&cell)) {
                v.insert(Violation::NotContained { cell: (n, k) });
            }
        };

        // coarse carriers (levels below the chunk level) span several buckets
        let mut coarse: Vec<(Interval, u32, u64)> = Vec::new();
        for n in 1..chunk {
            for k in 1..=(1u64 << n) {
                buf.clear();
                self.parts_into(n, k, &mut buf);
                check_cell(n, k, &buf, &mut violations);
                checked += 1;
                coarse.extend(buf.iter().map(|p| (*p, n, k)));
            }
        }
        coarse.sort_by(|a, b| a.0.lo().total_cmp(&b.0.lo()));

        let mut bucket: Vec<(Interval, u32, u64)> = Vec::new();
        for c in 1..=(1u64 << chunk) {
            let span = DyadicIndex { level: chunk, index: c }.interval();
            bucket.clear();
            let start = coarse.partition_point(|(p, _, _)| p.hi() <= span.lo());
            for &(p, n, k) in &coarse[start..] {
                if p.lo() >= span.hi() {
                    break;
                }
                if let Some(x) = p.intersect(&span) {
                    bucket.push((x, n, k));
                }
            }
            for n in chunk..=depth {
                let per = 1u64 << (n - chunk);
                for k in (c - 1) * per + 1..=c * per {
                    buf.clear();
                    self.parts_into(n, k, &mut buf);
                    check_cell(n, k, &buf, &mut violations);
                    checked += 1;
                    for p in &buf {
                        // anything escaping the bucket is already a containment violation
                        if let Some(x) = p.intersect(&span) {
                            bucket.push((x, n, k));
                        }
                    }
                }
            }
            sweep(&mut bucket, &mut violations);
        }

        let violations: Vec<Violation> = violations.into_iter().collect();
        DisjointnessReport { pass: violations.is_empty(), carriers_checked: checked, violations }
    }

    fn parts_into(&self, n: u32, k: u64, out: &mut Vec<Interval>) {
        match &self.store {
            Store::Explicit { sets, .. } => {
                if let Some(s) = sets.get(&(n, k)) {
                    out.extend_from_slice(s.parts());
                }
            }
            Store::Slotted => self.slot_parts(n, k, out),
        }
    }

    pub fn to_json(&self) -> CarrierFamilyJson {
        let sets = (self.depth <= MAX_SERIALIZED_DEPTH).then(|| {
            let mut m = BTreeMap::new();
            for n in 1..=self.depth {
                for k in 1..=(1u64 << n) {
                    m.insert(format!("{n},{k}"), self.carrier_unchecked(n, k));
                }
            }
            m
        });
        CarrierFamilyJson {
            depth: self.depth,
            scheme: self.scheme.tag().to_string(),
            params: self.scheme.params(),
            sets,
        }
    }

    /// Rebuild from JSON. Explicit sets, when present, are taken verbatim.
    pub fn from_json(j: &CarrierFamilyJson) -> Result<Self> {
        let scheme = CarrierScheme::from_parts(&j.scheme, &j.params)?;
        match &j.sets {
            None => allocate_carriers(j.depth, scheme),
            Some(raw) => {
                let mut sets = BTreeMap::new();
                for (key, set) in raw {
                    sets.insert(parse_key(key)?, set.clone());
                }
                CarrierFamily::from_sets(j.depth, scheme, sets)
            }
        }
    }
}

fn sweep(bucket: &mut [(Interval, u32, u64)], out: &mut BTreeSet<Violation>) {
    bucket.sort_by(|a, b| a.0.lo().total_cmp(&b.0.lo()));
    let mut reach: Option<(f64, (u32, u64))> = None;
    for &(p, n, k) in bucket.iter() {
        if let Some((hi, owner)) = reach {
            if p.lo() < hi && owner != (n, k) {
                let (a, b) = if owner < (n, k) { (owner, (n, k)) } else { ((n, k), owner) };
                out.insert(Violation::Overlap { a, b });
            }
        }
        if reach.is_none_or(|(hi, _)| p.hi() > hi) {
            reach = Some((p.hi(), (n, k)));
        }
    }
}

pub(crate) fn parse_key(key: &str) -> Result<(u32, u64)> {
    let bad = || Error::Config(format!("bad coordinate key `{key}`"));
    let (a, b) = key.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

/// `{depth, scheme, params, sets: {"n,k": [[lo, hi], ...]}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarrierFamilyJson {
    pub depth: u32,
    pub scheme: String,
    #[serde(default)]
    pub params: BTreeMap<String, u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sets: Option<BTreeMap<String, IntervalSet>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(pairs: &[[f64; 2]]) -> IntervalSet {
        IntervalSet::from_pairs(pairs).unwrap()
    }

    #[test]
    fn greedy_gap_depth_one_and_two() {
        let f = allocate_carriers(1, CarrierScheme::GreedyGap).unwrap();
        assert_eq!(f.carrier(1, 1).unwrap(), set(&[[0.125, 0.375]]));
        assert_eq!(f.carrier(1, 2).unwrap(), set(&[[0.625, 0.875]]));

        let f = allocate_carriers(2, CarrierScheme::GreedyGap).unwrap();
        assert_eq!(f.carrier(1, 1).unwrap(), set(&[[0.125, 0.375]]));
        assert_eq!(f.carrier(2, 1).unwrap(), set(&[[0.03125, 0.09375]]));
        assert!(f.verify_disjointness().pass);
    }

    #[test]
    fn greedy_gap_stalls_at_depth_three() {
        // I^3_2 = [1/8, 1/4) is covered by A^1_1 = [1/8, 3/8)
        assert_eq!(
            allocate_carriers(3, CarrierScheme::GreedyGap),
            Err(Error::AllocationExhausted { n: 3, k: 2 })
        );
    }

    #[test]
    fn leaf_gap_depth_one_matches_middle_halves() {
        let f = allocate_carriers(1, CarrierScheme::LeafGap).unwrap();
        assert_eq!(f.carrier(1, 1).unwrap(), set(&[[0.125, 0.375]]));
        assert_eq!(f.carrier(1, 2).unwrap(), set(&[[0.625, 0.875]]));
        assert!(f.verify_disjointness().pass);
    }

    #[test]
    fn leaf_gap_hosting_is_a_bijection() {
        for depth in 1..=10u32 {
            let mut seen = BTreeSet::new();
            for j in 1..=(1u64 << depth) {
                if let Some((n, k)) = hosted_by(depth, j) {
                    assert!(n >= 1 && n < depth);
                    assert_eq!(host_of(depth, n, k), j);
                    assert!(seen.insert((n, k)));
                }
            }
            // every coarse cell of levels 1..depth-1 is hosted exactly once
            assert_eq!(seen.len() as u64, (1u64 << depth) - 2);
        }
    }

    #[test]
    fn zero_depth_rejected() {
        assert!(allocate_carriers(0, CarrierScheme::LeafGap).is_err());
        assert!(allocate_carriers(41, CarrierScheme::LeafGap).is_err());
    }

    #[test]
    fn carrier_index_errors() {
        let f = allocate_carriers(1, CarrierScheme::LeafGap).unwrap();
        assert_eq!(f.carrier(1, 3), Err(Error::OutOfRange { n: 1, k: 3 }));
        assert_eq!(f.carrier(2, 1), Err(Error::OutOfRange { n: 2, k: 1 }));
    }

    #[test]
    fn schemes_verify_at_moderate_depth() {
        for scheme in [CarrierScheme::LeafGap, CarrierScheme::FatCantorStage { stages: 3 }] {
            let f = allocate_carriers(10, scheme).unwrap();
            let r = f.verify_disjointness();
            assert!(r.pass, "{scheme:?}: {:?}", &r.violations[..r.violations.len().min(4)]);
            assert_eq!(r.carriers_checked, (1u64 << 11) - 2);
            assert!(f.total_measure(10) < 1.0);
        }
    }

    #[test]
    fn closed_form_total_measure_matches_sum() {
        for depth in 1..=8 {
            let f = allocate_carriers(depth, CarrierScheme::LeafGap).unwrap();
            let direct: f64 = f.materialize().total_measure(depth);
            assert!((f.total_measure(depth) - direct).abs() < 1e-15);
            assert!((f.occupied().measure() - direct).abs() < 1e-15);
            for n in 1..=depth {
                assert!(f.total_measure(n) < 1.0);
            }
        }
    }

    #[test]
    fn corrupted_family_is_reported() {
        let f = allocate_carriers(3, CarrierScheme::LeafGap).unwrap();
        let bad = f.carrier(1, 1).unwrap().union(&f.carrier(2, 1).unwrap());
        let g = f.with_carrier(1, 1, bad).unwrap();
        let r = g.verify_disjointness();
        assert!(!r.pass);
        assert!(r.violations.contains(&Violation::Overlap { a: (1, 1), b: (2, 1) }));
    }

    #[test]
    fn out_of_cell_carrier_is_reported() {
        let f = allocate_carriers(2, CarrierScheme::LeafGap).unwrap();
        let g = f.with_carrier(2, 1, set(&[[0.9, 0.95]])).unwrap();
        let r = g.verify_disjointness();
        assert!(r.violations.contains(&Violation::NotContained { cell: (2, 1) }));
        let g = f.with_carrier(2, 2, IntervalSet::empty()).unwrap();
        assert!(g.verify_disjointness().violations.contains(&Violation::NonPositive { cell: (2, 2) }));
    }

    #[test]
    fn locate_agrees_with_materialized_family() {
        let f = allocate_carriers(6, CarrierScheme::FatCantorStage { stages: 2 }).unwrap();
        let m = f.materialize();
        for i in 0..4096 {
            let omega = (i as f64 + 0.37) / 4096.0;
            assert_eq!(f.locate(omega), m.locate(omega), "omega = {omega}");
        }
        let g = allocate_carriers(1, CarrierScheme::LeafGap).unwrap();
        assert_eq!(g.locate(0.2), Some(DyadicIndex { level: 1, index: 1 }));
        assert_eq!(g.locate(0.5), None);
        assert_eq!(g.locate(0.99999), None);
    }

    #[test]
    fn deterministic_and_json_roundtrip() {
        let a = allocate_carriers(5, CarrierScheme::LeafGap).unwrap();
        let b = allocate_carriers(5, CarrierScheme::LeafGap).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let j = serde_json::to_string(&a.to_json()).unwrap();
        let back = CarrierFamily::from_json(&serde_json::from_str(&j).unwrap()).unwrap();
        assert!(back.is_explicit());
        assert_eq!(back.materialize(), a.materialize());
        assert!(j.contains("\"1,1\""));
    }
}
