//! The Pettis-integrable function
//!
//! ```text
//! f(ω) = Σ_n Σ_k c_n · 1_{A^n_k}(ω) / μ(A^n_k) · e^n_k
//! ```
//!
//! and its integrals. Carriers are globally disjoint, so `f(ω)` has at most
//! one nonzero coordinate and is evaluated exactly. The Pettis integral over
//! `E` is the coordinate vector with entries `c_n·μ(E ∩ A^n_k)/μ(A^n_k)`;
//! it is truncated at the model depth and the remainder is bounded by the
//! certified geometric tail of the coefficient table.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::carriers::{allocate_carriers, CarrierFamily, CarrierFamilyJson, CarrierScheme, SchemeConfig};
use crate::error::{Error, Result};
use crate::interval::{find_inner_dyadic, pow2, DyadicIndex, Interval, IntervalSet, MEASURE_SLACK};
use crate::psi::{coefficients, CoefficientTable, CoefficientTableJson, GrowthSettings, PsiSpec, SequenceRule};
use crate::space::{BlockLayout, BlockVector, Exponent, Functional, Run};

fn default_k() -> f64 {
    1.0
}

/// `{psi, K, p, rule, depth, carriers: {scheme, params}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub psi: PsiSpec,
    #[serde(rename = "K", default = "default_k")]
    pub k: f64,
    pub p: Exponent,
    pub rule: SequenceRule,
    pub depth: u32,
    #[serde(default)]
    pub carriers: SchemeConfig,
    #[serde(default)]
    pub growth: GrowthSettings,
}

impl ModelConfig {
    /// `ψ(s) = s^{3/4}` in `ℓ_2` blocks with `p_n = n`.
    pub fn three_quarter_power(depth: u32) -> Self {
        ModelConfig {
            psi: PsiSpec::power(0.75),
            k: 1.0,
            p: Exponent::TWO,
            rule: SequenceRule::identity(),
            depth,
            carriers: SchemeConfig::default(),
            growth: GrowthSettings::default(),
        }
    }

    pub fn build(&self) -> Result<PettisModel> {
        let scheme = CarrierScheme::try_from(&self.carriers)?;
        let carriers = allocate_carriers(self.depth, scheme)?;
        build_model_with(carriers, self.clone())
    }
}

#[derive(Debug, Clone)]
pub struct PettisModel {
    config: ModelConfig,
    carriers: CarrierFamily,
    table: CoefficientTable,
    layout: Arc<BlockLayout>,
}

/// Certified bracket `[lower, upper]` on the norm of a Pettis integral.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralEnclosure {
    pub truncated: BlockVector,
    pub lower: f64,
    pub upper: f64,
    /// Bound on the norm of everything past the truncation level.
    pub tail: f64,
    /// Measure ratios that fell outside `[0, 1]` by more than the slack.
    pub anomalies: usize,
}

/// The chain of choices behind the lower bound on one interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProofChain {
    pub inner: DyadicIndex,
    /// Index `n` with `p_{n-1} ≤ m < p_n`.
    pub n: usize,
    /// Block level `p_n` used by the projection.
    pub level: u32,
    /// `ψ(4·2^{-p_{n-1}})`, the guaranteed lower bound.
    pub bound: f64,
}

pub fn build_model(
    carriers: CarrierFamily,
    spec: &PsiSpec,
    k: f64,
    p: Exponent,
    rule: &SequenceRule,
    depth: u32,
) -> Result<PettisModel> {
    let config = ModelConfig {
        psi: spec.clone(),
        k,
        p,
        rule: rule.clone(),
        depth,
        carriers: SchemeConfig::from(carriers.scheme()),
        growth: GrowthSettings::default(),
    };
    build_model_with(carriers, config)
}

fn build_model_with(carriers: CarrierFamily, config: ModelConfig) -> Result<PettisModel> {
    if carriers.depth() != config.depth {
        return Err(Error::DepthMismatch(format!(
            "carrier depth {} differs from model depth {}",
            carriers.depth(),
            config.depth
        )));
    }
    let table = coefficients(&config.psi, config.k, config.p, &config.rule, config.depth, config.growth)?;
    if table.active().next().is_none() {
        return Err(Error::DepthMismatch(format!(
            "no p_n lies within depth {} (p_1 = {})",
            config.depth,
            table.sequence().get(1).copied().unwrap_or(0)
        )));
    }
    let layout = Arc::new(BlockLayout::dyadic(config.p, config.depth));
    Ok(PettisModel { config, carriers, table, layout })
}

impl PettisModel {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn carriers(&self) -> &CarrierFamily {
        &self.carriers
    }

    pub fn table(&self) -> &CoefficientTable {
        &self.table
    }

    pub fn layout(&self) -> &Arc<BlockLayout> {
        &self.layout
    }

    pub fn depth(&self) -> u32 {
        self.config.depth
    }

    pub fn p(&self) -> Exponent {
        self.config.p
    }

    pub fn psi(&self, s: f64) -> f64 {
        self.config.psi.eval_extended(s)
    }

    /// `f(ω)`: at most one nonzero coordinate.
    pub fn evaluate_f(&self, omega: f64) -> BlockVector {
        let hit = self.carriers.locate(omega).and_then(|d| {
            let c = self.table.c(d.level);
            (c != 0.0).then_some((d, c))
        });
        match hit {
            Some((d, c)) => {
                let m = self.carriers.carrier_unchecked(d.level, d.index).measure();
                BlockVector::from_entries(self.layout.clone(), [(d.level, d.index, c / m)])
                    .expect("carrier index lies in layout")
            }
            None => BlockVector::zero(self.layout.clone()),
        }
    }

    /// Truncated integral vector over levels `<= max_level`, plus the number
    /// of clamped measure ratios.
    fn integral_vector(&self, e: &IntervalSet, max_level: u32) -> (BlockVector, usize) {
        let mut runs: Vec<(u32, Run)> = Vec::new();
        let mut anomalies = 0;
        for (n, c) in self.table.active().take_while(|(n, _)| *n <= max_level) {
            let scale = pow2(n);
            let cells = 1u64 << n;
            let mut boundary = std::collections::BTreeMap::new();
            for part in e.parts() {
                let (a, b) = (part.lo() * scale, part.hi() * scale);
                // cells [first, last] lie entirely inside the part
                let first = a.ceil() as u64 + 1;
                let last = b.floor() as u64;
                if first <= last {
                    runs.push((n, Run { start: first, len: last - first + 1, value: c }));
                }
                let mut edges = Vec::with_capacity(2);
                if a.fract() != 0.0 {
                    edges.push(a.floor() as u64 + 1);
                }
                if b.fract() != 0.0 {
                    edges.push(b.floor() as u64 + 1);
                }
                for k in edges.into_iter().filter(|k| *k <= cells) {
                    if boundary.contains_key(&k) {
                        continue;
                    }
                    let carrier = self.carriers.carrier_unchecked(n, k);
                    let (ratio, clamped) = clamp_ratio(e.intersect(&carrier).measure() / carrier.measure());
                    anomalies += usize::from(clamped);
                    boundary.insert(k, ratio);
                }
            }
            runs.extend(
                boundary
                    .into_iter()
                    .filter(|(_, r)| *r > 0.0)
                    .map(|(k, r)| (n, Run { start: k, len: 1, value: c * r })),
            );
        }
        let v = BlockVector::from_runs(self.layout.clone(), runs).expect("runs built inside the layout");
        (v, anomalies)
    }

    /// `P-∫_E f dμ` with its norm enclosure.
    pub fn pettis_integral(&self, e: &IntervalSet) -> IntegralEnclosure {
        self.pettis_integral_to(e, self.depth())
    }

    /// Same, truncating the series after block `level`.
    pub fn pettis_integral_to(&self, e: &IntervalSet, level: u32) -> IntegralEnclosure {
        let level = level.min(self.depth());
        let (truncated, anomalies) = self.integral_vector(e, level);
        let lower = truncated.norm();
        let tail = if e.is_empty() { 0.0 } else { self.set_tail(e, level) };
        let upper = self.p().combine(&[lower, tail]);
        IntegralEnclosure { truncated, lower, upper, tail, anomalies }
    }

    /// Tail bound past `level` for the integral over `e`. A block `m > level`
    /// has at most `μ(E)·2^m + 2·parts` nonzero coordinates, each at most
    /// `c_m`, so its norm is at most `c_m·2^{m/p}·(μ(E) + 2·parts·2^{-m})^{1/p}`.
    fn set_tail(&self, e: &IntervalSet, level: u32) -> f64 {
        let parts = e.parts().len() as f64;
        let share = (e.measure() + 2.0 * parts * crate::interval::pow2_neg(level + 1)).min(1.0);
        share.powf(self.p().reciprocal()) * self.table.tail_bound(level)
    }

    /// `∫_E x*(f) dμ`, computed coordinate by coordinate from carrier
    /// intersections.
    pub fn scalar_integral(&self, x: &Functional, e: &IntervalSet) -> Result<f64> {
        let mut total = 0.0;
        for (n, k, xv) in x.coeffs() {
            if n > self.depth() {
                return Err(Error::SupportExceedsDepth { level: n, depth: self.depth() });
            }
            let c = self.table.c(n);
            if c == 0.0 {
                continue;
            }
            let a = self.carriers.carrier(n, k)?;
            let (ratio, _) = clamp_ratio(e.intersect(&a).measure() / a.measure());
            total += xv * c * ratio;
        }
        Ok(total)
    }

    /// `∫_E ‖f_{≤N}(ω)‖ dμ`, where `f_{≤N}` keeps blocks up to level `N`.
    pub fn bochner_partial(&self, e: &IntervalSet, level: u32) -> Result<f64> {
        if level > self.depth() {
            return Err(Error::LevelOutOfRange(level));
        }
        Ok(self.integral_vector(e, level).0.coefficient_sum())
    }

    /// Dyadic interval inside `i`, then the block level the lower bound uses.
    pub fn proof_chain(&self, i: &Interval) -> Result<ProofChain> {
        let inner = find_inner_dyadic(i)?;
        let pn = self.table.sequence();
        let n = (1..pn.len())
            .find(|&n| pn[n - 1] <= inner.level && inner.level < pn[n])
            .filter(|&n| pn[n] <= self.depth())
            .ok_or_else(|| {
                Error::DepthInsufficient(format!(
                    "interval of measure {} needs a block beyond depth {}",
                    i.measure(),
                    self.depth()
                ))
            })?;
        let bound = self.psi(4.0 * f64::powi(2.0, -(pn[n - 1] as i32)));
        Ok(ProofChain { inner, n, level: pn[n], bound })
    }

    /// Smallest measure for which every interval has its proof chain inside
    /// the truncated model: `4·2^{-p_{k-1}}` with `p_k` the last level `<= depth`.
    pub fn min_provable_measure(&self) -> f64 {
        let pn = self.table.sequence();
        let k = (1..pn.len()).rev().find(|&n| pn[n] <= self.depth()).expect("model has an active level");
        4.0 * f64::powi(2.0, -(pn[k - 1] as i32))
    }

    pub fn to_archive(&self) -> ModelArchive {
        ModelArchive {
            kind: "pettis".into(),
            config: self.config.clone(),
            carriers: self.carriers.to_json(),
            table: self.table.to_json(),
        }
    }

    /// Rebuild from an archive. Embedded carrier sets are used verbatim and
    /// must pass the disjointness check.
    pub fn from_archive(a: &ModelArchive) -> Result<Self> {
        if a.kind != "pettis" {
            return Err(Error::Config(format!("archive kind `{}` is not a Pettis model", a.kind)));
        }
        let carriers = CarrierFamily::from_json(&a.carriers)?;
        if carriers.is_explicit() {
            let report = carriers.verify_disjointness();
            if !report.pass {
                let first = report.violations.first().map(|v| format!("{v:?}")).unwrap_or_default();
                return Err(Error::DisjointnessViolated(format!(
                    "{} violation(s), first: {first}",
                    report.violations.len()
                )));
            }
        }
        let model = build_model_with(carriers, a.config.clone())?;
        let stored = &a.table;
        let rebuilt = model.table.to_json();
        let drift = stored.c.iter().any(|(m, c)| rebuilt.c.get(m).is_none_or(|r| (r - c).abs() > 1e-12 * c.abs()));
        if drift || stored.c.len() != rebuilt.c.len() {
            return Err(Error::Config("archived coefficient table does not match its config".into()));
        }
        Ok(model)
    }
}

fn clamp_ratio(r: f64) -> (f64, bool) {
    let clamped = !(-MEASURE_SLACK..=1.0 + MEASURE_SLACK).contains(&r);
    (r.clamp(0.0, 1.0), clamped)
}

/// Config plus the materialized carrier sets and coefficient table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArchive {
    pub kind: String,
    pub config: ModelConfig,
    pub carriers: CarrierFamilyJson,
    pub table: CoefficientTableJson,
}
