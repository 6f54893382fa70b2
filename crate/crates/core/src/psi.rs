//! Gauge functions `ψ`, their growth condition, and the coefficient schedule
//! `c_{p_n} = 2K·ψ(4·2^{-p_{n-1}})`.
//!
//! Growth is certified by an eventual-ratio test on
//! `term_n = ψ(4·2^{-p_{n-1}})·(2^{p_n})^{1/p}`: once every ratio
//! `term_{n+1}/term_n` on `[n0, n_max]` is at most `r < 1`, the tail beyond
//! `n` is bounded by the geometric series `term_{n+1}/(1 - r)`.

use std::collections::BTreeMap;
use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::Exponent;

pub const DEFAULT_N_MAX: usize = 48;
pub const DEFAULT_R_MAX: f64 = 0.95;

/// Largest `p_n` a sequence may reach; keeps `2^{p_n}` finite in `f64`.
const MAX_SEQUENCE_VALUE: i64 = 900;

#[derive(Debug, Clone, PartialEq)]
pub enum PsiFamily {
    /// `s^e`.
    Power { exponent: f64 },
    /// `s^{1/2}·[1/log(1/s)]^{1+ε}`.
    SqrtLog { epsilon: f64 },
    /// `s^{1/2}·[1/log(1/s)]·[1/log log(1/s)]^{1+ε}`.
    SqrtLogLog { epsilon: f64 },
    /// Piecewise-linear through `(s, ψ(s))` points, constant past the last.
    CustomTable { points: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiSpec {
    pub family: PsiFamily,
    pub p: Exponent,
}

impl PsiSpec {
    pub fn new(family: PsiFamily, p: Exponent) -> Result<Self> {
        match &family {
            PsiFamily::Power { exponent } if !(*exponent > 0.0 && exponent.is_finite()) => {
                return Err(Error::Config(format!("power exponent must be positive, got {exponent}")));
            }
            PsiFamily::SqrtLog { epsilon } | PsiFamily::SqrtLogLog { epsilon }
                if !(*epsilon > 0.0 && epsilon.is_finite()) =>
            {
                return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
            }
            PsiFamily::CustomTable { points } => check_table(points)?,
            _ => {}
        }
        Ok(PsiSpec { family, p })
    }

    pub fn power(exponent: f64) -> Self {
        PsiSpec::new(PsiFamily::Power { exponent }, Exponent::TWO).expect("positive exponent")
    }

    /// Upper end of the domain for the log families.
    pub fn domain_limit(&self) -> Option<f64> {
        match self.family {
            PsiFamily::SqrtLog { .. } => Some(1.0 / E),
            PsiFamily::SqrtLogLog { .. } => Some((-E).exp()),
            _ => None,
        }
    }

    /// `ψ(s)`. Log families reject `s` at or beyond their domain limit.
    pub fn eval(&self, s: f64) -> Result<f64> {
        if s.is_nan() || s < 0.0 {
            return Err(Error::Domain(s));
        }
        if let Some(limit) = self.domain_limit() {
            if s >= limit {
                return Err(Error::Domain(s));
            }
        }
        Ok(self.formula(s))
    }

    /// `ψ` extended to all of `[0, ∞)`: log families are held constant at
    /// their value on the domain limit, which keeps them nondecreasing.
    pub fn eval_extended(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        match self.domain_limit() {
            Some(limit) if s >= limit => self.formula(limit),
            _ => self.formula(s),
        }
    }

    fn formula(&self, s: f64) -> f64 {
        if s == 0.0 {
            return match &self.family {
                PsiFamily::CustomTable { points } => points[0].1,
                _ => 0.0,
            };
        }
        match &self.family {
            PsiFamily::Power { exponent } => s.powf(*exponent),
            PsiFamily::SqrtLog { epsilon } => {
                let l = (1.0 / s).ln();
                s.sqrt() * l.recip().powf(1.0 + epsilon)
            }
            PsiFamily::SqrtLogLog { epsilon } => {
                let l = (1.0 / s).ln();
                s.sqrt() * l.recip() * l.ln().recip().powf(1.0 + epsilon)
            }
            PsiFamily::CustomTable { points } => interpolate(points, s),
        }
    }
}

fn check_table(points: &[(f64, f64)]) -> Result<()> {
    let bad = |m: &str| Err(Error::Config(format!("custom psi table: {m}")));
    match points.first() {
        None => return bad("empty table"),
        Some((s, _)) if *s != 0.0 => return bad("first point must be at s = 0"),
        _ => {}
    }
    for w in points.windows(2) {
        if w[1].0.partial_cmp(&w[0].0) != Some(std::cmp::Ordering::Greater) {
            return bad("abscissae must be strictly increasing");
        }
        if w[1].1 < w[0].1 {
            return bad("values must be nondecreasing");
        }
    }
    if points.iter().any(|(s, v)| !s.is_finite() || !v.is_finite() || *v < 0.0) {
        return bad("values must be finite and nonnegative");
    }
    Ok(())
}

fn interpolate(points: &[(f64, f64)], s: f64) -> f64 {
    let i = points.partition_point(|(x, _)| *x <= s);
    if i >= points.len() {
        return points[points.len() - 1].1;
    }
    let (x0, y0) = points[i - 1];
    let (x1, y1) = points[i];
    y0 + (y1 - y0) * (s - x0) / (x1 - x0)
}

/// Rule producing the increasing integer sequence `{p_n}` with `p_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum SequenceRule {
    /// `p_n = ⌈a·n⌉ + b` for `n ≥ 1`.
    Affine { a: f64, b: i64 },
    /// `p_1, p_2, ...` given explicitly.
    List(Vec<u32>),
}

impl SequenceRule {
    pub fn identity() -> Self {
        SequenceRule::Affine { a: 1.0, b: 0 }
    }

    /// `p_n`, or `None` past the end of an explicit list.
    pub fn value(&self, n: usize) -> Option<i64> {
        if n == 0 {
            return Some(0);
        }
        match self {
            SequenceRule::Affine { a, b } => Some((a * n as f64).ceil() as i64 + b),
            SequenceRule::List(list) => list.get(n - 1).map(|&v| v as i64),
        }
    }

    pub fn known_len(&self) -> Option<usize> {
        match self {
            SequenceRule::Affine { .. } => None,
            SequenceRule::List(l) => Some(l.len() + 1),
        }
    }

    /// `p_0..=p_n_max`, checked strictly increasing.
    pub fn sequence(&self, n_max: usize) -> Result<Vec<u32>> {
        let mut out = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            let v = self
                .value(n)
                .ok_or_else(|| Error::Config(format!("sequence list has no entry p_{n}")))?;
            if !(0..=MAX_SEQUENCE_VALUE).contains(&v) {
                return Err(Error::Config(format!("p_{n} = {v} out of range")));
            }
            if let Some(&prev) = out.last() {
                if v <= prev as i64 {
                    return Err(Error::Config(format!("sequence not strictly increasing at n = {n}")));
                }
            }
            out.push(v as u32);
        }
        Ok(out)
    }

    /// Largest prefix `p_0..=p_m` that is available (for explicit lists).
    fn available(&self, want: usize) -> Result<Vec<u32>> {
        let n = self.known_len().map_or(want, |len| want.min(len - 1));
        self.sequence(n)
    }
}

/// Outcome of the eventual-ratio test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub pass: bool,
    /// `terms[i]` is `term_{i+1}`.
    pub terms: Vec<f64>,
    /// `ratios[i] = term_{i+2} / term_{i+1}`.
    pub ratios: Vec<f64>,
    pub n0: usize,
    /// Certified ratio: the largest observed ratio on `[n0, n_max]`.
    pub r: f64,
    pub r_max: f64,
    pub n_max: usize,
}

impl ValidationReport {
    pub fn term(&self, n: usize) -> f64 {
        self.terms[n - 1]
    }

    /// `T(N) = term_{N+1} / (1 - r)`, valid for `N ≥ n0 - 1` when `pass`.
    pub fn geometric_tail(&self, n: usize) -> f64 {
        self.terms[n] / (1.0 - self.r)
    }
}

/// Eventual-ratio certificate on an already computed term list (`terms[0]`
/// is the first term, index 1).
pub fn certify_ratio(terms: Vec<f64>, n_max: usize, r_max: f64) -> ValidationReport {
    let ratios: Vec<f64> = terms.windows(2).map(|w| w[1] / w[0]).collect();
    let ok = |x: &f64| x.is_finite() && *x <= r_max;
    // ratios[n - 1] is term_{n+1}/term_n; need all n in [n0, n_max]
    let mut n0 = None;
    let usable = ratios.len().min(n_max);
    if terms.iter().all(|t| t.is_finite() && *t > 0.0) && usable == n_max {
        let mut start = n_max + 1;
        while start > 1 && ok(&ratios[start - 2]) {
            start -= 1;
        }
        if start <= n_max / 2 {
            n0 = Some(start.max(1));
        }
    }
    match n0 {
        Some(n0) => {
            let r = ratios[n0 - 1..n_max].iter().copied().fold(0.0, f64::max);
            ValidationReport { pass: true, terms, ratios, n0, r, r_max, n_max }
        }
        None => ValidationReport {
            pass: false,
            terms,
            ratios,
            n0: 0,
            r: f64::NAN,
            r_max,
            n_max,
        },
    }
}

fn term(spec: &PsiSpec, p: Exponent, pn: &[u32], n: usize) -> f64 {
    let arg = 4.0 * f64::powi(2.0, -(pn[n - 1] as i32));
    spec.eval_extended(arg) * f64::powf(2.0, pn[n] as f64 * p.reciprocal())
}

pub fn validate_growth(
    spec: &PsiSpec,
    p: Exponent,
    rule: &SequenceRule,
    n_max: usize,
    r_max: f64,
) -> Result<ValidationReport> {
    if !(2..=64).contains(&n_max) {
        return Err(Error::Config(format!("n_max must lie in [2, 64], got {n_max}")));
    }
    if !(r_max > 0.0 && r_max < 1.0) {
        return Err(Error::Config(format!("r_max must lie in (0, 1), got {r_max}")));
    }
    let pn = rule.available(n_max + 1)?;
    let terms = (1..pn.len()).map(|n| term(spec, p, &pn, n)).collect();
    Ok(certify_ratio(terms, n_max, r_max))
}

/// Growth-validation knobs carried in model configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthSettings {
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
}

fn default_n_max() -> usize {
    DEFAULT_N_MAX
}

fn default_r_max() -> f64 {
    DEFAULT_R_MAX
}

impl Default for GrowthSettings {
    fn default() -> Self {
        GrowthSettings { n_max: DEFAULT_N_MAX, r_max: DEFAULT_R_MAX }
    }
}

/// Coefficients `c_m`, nonzero only at `m = p_n ≤ depth`, together with the
/// certificate needed to bound everything past the truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    spec: PsiSpec,
    rule: SequenceRule,
    k_const: f64,
    p: Exponent,
    depth: u32,
    /// `p_0..` up to the first value beyond `depth` (when available).
    pn: Vec<u32>,
    c: BTreeMap<u32, f64>,
    report: ValidationReport,
}

pub fn coefficients(
    spec: &PsiSpec,
    k_const: f64,
    p: Exponent,
    rule: &SequenceRule,
    depth: u32,
    growth: GrowthSettings,
) -> Result<CoefficientTable> {
    if !(k_const >= 1.0 && k_const.is_finite()) {
        return Err(Error::Config(format!("basis constant K must be >= 1, got {k_const}")));
    }
    let report = validate_growth(spec, p, rule, growth.n_max, growth.r_max)?;
    if !report.pass {
        return Err(Error::GrowthFailed(format!(
            "no eventual term ratio <= {} on [n0, {}] (last ratio {:.6})",
            growth.r_max,
            growth.n_max,
            report.ratios.last().copied().unwrap_or(f64::NAN)
        )));
    }
    let pn = rule.available(report.terms.len())?;
    let mut c = BTreeMap::new();
    for n in 1..pn.len() {
        if pn[n] > depth {
            break;
        }
        let arg = 4.0 * f64::powi(2.0, -(pn[n - 1] as i32));
        c.insert(pn[n], 2.0 * k_const * spec.eval_extended(arg));
    }
    Ok(CoefficientTable {
        spec: spec.clone(),
        rule: rule.clone(),
        k_const,
        p,
        depth,
        pn,
        c,
        report,
    })
}

impl CoefficientTable {
    pub fn spec(&self) -> &PsiSpec {
        &self.spec
    }

    pub fn rule(&self) -> &SequenceRule {
        &self.rule
    }

    pub fn k_const(&self) -> f64 {
        self.k_const
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn report(&self) -> &ValidationReport {
        &self.report
    }

    pub fn ratio(&self) -> f64 {
        self.report.r
    }

    pub fn n0(&self) -> usize {
        self.report.n0
    }

    /// `p_n` for the indices computed so far.
    pub fn sequence(&self) -> &[u32] {
        &self.pn
    }

    /// `c_m` (zero off the sequence).
    pub fn c(&self, m: u32) -> f64 {
        self.c.get(&m).copied().unwrap_or(0.0)
    }

    /// `(level p_n, c_{p_n})` for every level carrying mass.
    pub fn active(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.c.iter().map(|(m, c)| (*m, *c))
    }

    /// Index `n` such that `p_n = level`, if any.
    pub fn index_of_level(&self, level: u32) -> Option<usize> {
        self.pn.iter().position(|&v| v == level).filter(|&n| n > 0)
    }

    /// `c_{p_n}·(2^{p_n})^{1/p} = 2K·term_n`, extrapolated geometrically past
    /// the computed terms.
    fn weighted(&self, n: usize) -> f64 {
        let last = self.report.terms.len();
        if n <= last {
            2.0 * self.k_const * self.report.term(n)
        } else {
            2.0 * self.k_const * self.report.term(last) * self.report.r.powi((n - last) as i32)
        }
    }

    fn first_index_beyond(&self, level: u32) -> usize {
        match self.pn.iter().position(|&v| v > level) {
            Some(i) => i.max(1),
            None => {
                // past the computed prefix: only affine rules reach here
                let mut n = self.pn.len();
                while self.rule.value(n).is_some_and(|v| v <= level as i64) {
                    n += 1;
                }
                n
            }
        }
    }

    /// Upper bound on `Σ_{p_n > level} c_{p_n}·(2^{p_n})^{1/p}`, which in turn
    /// bounds the norm of every block of the series beyond `level`.
    pub fn tail_bound(&self, level: u32) -> f64 {
        let first = self.first_index_beyond(level);
        let start = first.max(self.report.n0);
        let exact: f64 = (first..start).map(|n| self.weighted(n)).sum();
        exact + self.weighted(start) / (1.0 - self.report.r)
    }

    pub fn to_json(&self) -> CoefficientTableJson {
        CoefficientTableJson {
            k: self.k_const,
            p: self.p,
            depth: self.depth,
            pn: self.pn.clone(),
            c: self.c.iter().map(|(m, c)| (m.to_string(), *c)).collect(),
            ratio: self.report.r,
            n0: self.report.n0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTableJson {
    #[serde(rename = "K")]
    pub k: f64,
    pub p: Exponent,
    pub depth: u32,
    pub pn: Vec<u32>,
    pub c: BTreeMap<String, f64>,
    pub ratio: f64,
    pub n0: usize,
}

/// `{family, exponent | epsilon | points, p}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsiSpecJson {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<[f64; 2]>>,
    #[serde(default = "default_p")]
    pub p: Exponent,
}

fn default_p() -> Exponent {
    Exponent::TWO
}

impl TryFrom<PsiSpecJson> for PsiSpec {
    type Error = Error;

    fn try_from(j: PsiSpecJson) -> Result<Self> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::Config(format!("psi family `{}` needs `{name}`", j.family)))
        };
        let family = match j.family.as_str() {
            "power" => PsiFamily::Power { exponent: need(j.exponent, "exponent")? },
            "sqrt-log" => PsiFamily::SqrtLog { epsilon: need(j.epsilon, "epsilon")? },
            "sqrt-loglog" => PsiFamily::SqrtLogLog { epsilon: need(j.epsilon, "epsilon")? },
            "custom-table" => PsiFamily::CustomTable {
                points: j
                    .points
                    .as_ref()
                    .ok_or_else(|| Error::Config("custom-table needs `points`".into()))?
                    .iter()
                    .map(|[s, v]| (*s, *v))
                    .collect(),
            },
            other => return Err(Error::Config(format!("unknown psi family `{other}`"))),
        };
        PsiSpec::new(family, j.p)
    }
}

impl From<&PsiSpec> for PsiSpecJson {
    fn from(s: &PsiSpec) -> Self {
        let mut j = PsiSpecJson { family: String::new(), exponent: None, epsilon: None, points: None, p: s.p };
        match &s.family {
            PsiFamily::Power { exponent } => {
                j.family = "power".into();
                j.exponent = Some(*exponent);
            }
            PsiFamily::SqrtLog { epsilon } => {
                j.family = "sqrt-log".into();
                j.epsilon = Some(*epsilon);
            }
            PsiFamily::SqrtLogLog { epsilon } => {
                j.family = "sqrt-loglog".into();
                j.epsilon = Some(*epsilon);
            }
            PsiFamily::CustomTable { points } => {
                j.family = "custom-table".into();
                j.points = Some(points.iter().map(|(a, b)| [*a, *b]).collect());
            }
        }
        j
    }
}

impl Serialize for PsiSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PsiSpecJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for PsiSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        PsiSpec::try_from(PsiSpecJson::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// `{kind: "affine", a, b}` or `{list: [p_1, p_2, ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum SequenceRuleJson {
    Affine {
        #[serde(default = "affine_tag")]
        kind: String,
        a: f64,
        #[serde(default)]
        b: i64,
    },
    List {
        list: Vec<u32>,
    },
}

fn affine_tag() -> String {
    "affine".into()
}

impl Serialize for SequenceRule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SequenceRule::Affine { a, b } => {
                SequenceRuleJson::Affine { kind: affine_tag(), a: *a, b: *b }.serialize(s)
            }
            SequenceRule::List(list) => SequenceRuleJson::List { list: list.clone() }.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for SequenceRule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match SequenceRuleJson::deserialize(d)? {
            SequenceRuleJson::Affine { kind, a, b } => {
                if kind != "affine" {
                    return Err(serde::de::Error::custom(format!("unknown sequence kind `{kind}`")));
                }
                if !(a > 0.0 && a.is_finite()) {
                    return Err(serde::de::Error::custom("affine slope must be positive"));
                }
                Ok(SequenceRule::Affine { a, b })
            }
            SequenceRuleJson::List { list } => Ok(SequenceRule::List(list)),
        }
    }
}
