//! Continuous `f = Σ_{n≥2} c_n f_n` with `‖f(s) − f(t)‖ ≥ ψ(|s − t|)`.
//!
//! `f_n` is the piecewise-linear path through the unit vectors of block `n`
//! at the nodes `(k−1)/2^{p_n}`; block `n` has `2^{p_n} + 1` coordinates so
//! the right end of the last cell still has a coordinate to move towards.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{pow2, pow2_neg, MAX_LEVEL};
use crate::psi::{certify_ratio, GrowthSettings, PsiSpec, SequenceRule, ValidationReport};
use crate::space::{BlockLayout, BlockVector, Exponent, Run};

fn default_k() -> f64 {
    1.0
}

fn default_p() -> Exponent {
    Exponent::TWO
}

/// `{psi, K, p, rule, depth}`; `p` is the block exponent, in `[1, 2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousConfig {
    pub psi: PsiSpec,
    #[serde(rename = "K", default = "default_k")]
    pub k: f64,
    #[serde(default = "default_p")]
    pub p: Exponent,
    pub rule: SequenceRule,
    pub depth: u32,
    #[serde(default)]
    pub growth: GrowthSettings,
}

impl ContinuousConfig {
    pub fn build(&self) -> Result<ContinuousModel> {
        ContinuousModel::new(self.clone())
    }
}

#[derive(Debug, Clone)]
pub struct ContinuousModel {
    config: ContinuousConfig,
    /// `p_0..=p_{n_max}`.
    pn: Vec<u32>,
    /// `c_n` for `n = 2..=depth`.
    c: BTreeMap<u32, f64>,
    /// Certificate for `Σ_m ψ(2^{-p_m})`; `term(m + 1) = ψ(2^{-p_m})`.
    report: ValidationReport,
    layout: Arc<BlockLayout>,
}

/// Outcome of one `‖f(s) − f(t)‖ ≥ ψ(|s − t|)` check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCheck {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// Distance in the single block the separation argument uses.
    pub separation: f64,
}

/// `p_0..` and the ratio certificate for the terms `ψ(2^{-p_m})`, `m = 0..`
/// (report index `m + 1`).
pub fn series_certificate(config: &ContinuousConfig) -> Result<(Vec<u32>, ValidationReport)> {
    let GrowthSettings { n_max, r_max } = config.growth;
    let want = n_max.max(config.depth as usize);
    let avail = config.rule.known_len().map_or(want, |len| want.min(len - 1));
    let pn = config.rule.sequence(avail)?;
    let terms: Vec<f64> = pn.iter().map(|&v| config.psi.eval_extended(pow2_neg(v))).collect();
    let report = certify_ratio(terms, n_max.min(pn.len() - 1), r_max);
    Ok((pn, report))
}

impl ContinuousModel {
    pub fn new(config: ContinuousConfig) -> Result<Self> {
        let p = config.p.value();
        if !(1.0..=2.0).contains(&p) {
            return Err(Error::Config(format!("continuous model needs block exponent p in [1, 2], got {p}")));
        }
        if !(config.k >= 1.0 && config.k.is_finite()) {
            return Err(Error::Config(format!("basis constant K must be >= 1, got {}", config.k)));
        }
        if config.depth < 2 {
            return Err(Error::Config(format!("continuous model needs depth >= 2, got {}", config.depth)));
        }
        let (pn, report) = series_certificate(&config)?;
        if pn.len() <= config.depth as usize {
            return Err(Error::Config(format!("sequence list too short for depth {}", config.depth)));
        }
        let top = pn[config.depth as usize];
        if top > MAX_LEVEL {
            return Err(Error::LevelOverflow(top));
        }
        if !report.pass {
            return Err(Error::GrowthFailed(format!(
                "Σ ψ(2^-p_n) has no eventual ratio <= {} on the computed terms",
                report.r_max
            )));
        }
        let c = (2..=config.depth).map(|n| (n, 2.0 * config.k * report.term(n as usize - 1))).collect();
        let dims = (2..=config.depth).map(|n| (n, (1u64 << pn[n as usize]) + 1)).collect();
        let layout = Arc::new(BlockLayout::new(config.p, dims)?);
        Ok(ContinuousModel { config, pn, c, report, layout })
    }

    pub fn config(&self) -> &ContinuousConfig {
        &self.config
    }

    pub fn layout(&self) -> &Arc<BlockLayout> {
        &self.layout
    }

    pub fn depth(&self) -> u32 {
        self.config.depth
    }

    pub fn sequence(&self) -> &[u32] {
        &self.pn
    }

    pub fn report(&self) -> &ValidationReport {
        &self.report
    }

    pub fn psi(&self, s: f64) -> f64 {
        self.config.psi.eval_extended(s)
    }

    /// `c_n` for `2 <= n <= depth`, zero elsewhere.
    pub fn c(&self, n: u32) -> f64 {
        self.c.get(&n).copied().unwrap_or(0.0)
    }

    fn check_omega(omega: f64) -> Result<()> {
        if (0.0..1.0).contains(&omega) {
            Ok(())
        } else {
            Err(Error::Domain(omega))
        }
    }

    /// The two nonzero coordinates of `f_n(ω)`: `(k, α)` and `(k + 1, 1 − α)`.
    fn nodes(&self, n: u32, omega: f64) -> (u64, f64) {
        let x = omega * pow2(self.pn[n as usize]);
        let k = x.floor() as u64 + 1;
        (k, k as f64 - x)
    }

    fn block_runs(&self, n: u32, omega: f64, scale: f64) -> impl Iterator<Item = (u32, Run)> {
        let (k, alpha) = self.nodes(n, omega);
        [(k, alpha), (k + 1, 1.0 - alpha)]
            .into_iter()
            .filter(|(_, v)| *v != 0.0)
            .map(move |(start, v)| (n, Run { start, len: 1, value: scale * v }))
    }

    pub fn eval_fn(&self, n: u32, omega: f64) -> Result<BlockVector> {
        if !(2..=self.depth()).contains(&n) {
            return Err(Error::LevelOutOfRange(n));
        }
        Self::check_omega(omega)?;
        BlockVector::from_runs(self.layout.clone(), self.block_runs(n, omega, 1.0))
    }

    /// Truncated `f(ω)` and the bound on the norm of the rest.
    pub fn eval_f(&self, omega: f64) -> Result<(BlockVector, f64)> {
        Self::check_omega(omega)?;
        let runs: Vec<_> = (2..=self.depth()).flat_map(|n| self.block_runs(n, omega, self.c(n))).collect();
        Ok((BlockVector::from_runs(self.layout.clone(), runs)?, self.tail(self.depth())))
    }

    /// `Σ_{n > level} c_n`, exact up to the certified start and geometric after.
    pub fn tail(&self, level: u32) -> f64 {
        // c_n = 2K·term(n − 1), so the tail is 2K·Σ_{j ≥ level} term(j)
        let first = (level as usize).max(1);
        let start = first.max(self.report.n0);
        let last = self.report.terms.len();
        let term = |j: usize| {
            if j <= last {
                self.report.term(j)
            } else {
                self.report.term(last) * self.report.r.powi((j - last) as i32)
            }
        };
        let exact: f64 = (first..start).map(term).sum();
        2.0 * self.config.k * (exact + term(start) / (1.0 - self.report.r))
    }

    /// `Σ_{n=2}^{level} c_n·2^{p_n}·2^{1/p}`, a Lipschitz constant for the
    /// truncation at `level`.
    pub fn lipschitz(&self, level: u32) -> f64 {
        let edge = f64::powf(2.0, self.config.p.reciprocal());
        (2..=level.min(self.depth())).map(|n| self.c(n) * pow2(self.pn[n as usize]) * edge).sum()
    }

    /// Upper modulus of the full function at the truncation `level`.
    pub fn modulus_bound(&self, level: u32, d: f64) -> f64 {
        self.lipschitz(level) * d + 2.0 * self.tail(level)
    }

    /// Best modulus bound over all truncation levels: for every `N`, the
    /// truncated function moves at most `L_N·d + 2·tail(N)`.
    pub fn modulus(&self, d: f64) -> f64 {
        (2..=self.depth()).map(|n| self.modulus_bound(n, d)).fold(f64::INFINITY, f64::min)
    }

    fn check_pair_args(&self, s: f64, t: f64) -> Result<(f64, u32)> {
        Self::check_omega(s)?;
        Self::check_omega(t)?;
        if s == t {
            return Err(Error::CoincidentPoints(s));
        }
        let d = (s - t).abs();
        // 2^{-p_n} < d <= 2^{-p_{n-1}}, and block n + 1 must exist
        let n = (1..self.depth() as usize)
            .find(|&n| pow2_neg(self.pn[n]) < d && d <= pow2_neg(self.pn[n - 1]))
            .ok_or(Error::PairTooClose(d))?;
        Ok((d, n as u32 + 1))
    }

    /// Exact distance of `f(s)` and `f(t)` in the separating block.
    pub fn separation_lower_bound(&self, s: f64, t: f64) -> Result<f64> {
        let (_, block) = self.check_pair_args(s, t)?;
        let c = self.c(block);
        let fs = BlockVector::from_runs(self.layout.clone(), self.block_runs(block, s, c))?;
        let ft = BlockVector::from_runs(self.layout.clone(), self.block_runs(block, t, c))?;
        Ok(fs.sub(&ft)?.norm())
    }

    pub fn check_pair(&self, s: f64, t: f64) -> Result<PairCheck> {
        let (d, _) = self.check_pair_args(s, t)?;
        let separation = self.separation_lower_bound(s, t)?;
        let lhs = self.eval_f(s)?.0.sub(&self.eval_f(t)?.0)?.norm();
        let rhs = self.psi(d);
        Ok(PairCheck { holds: lhs >= rhs - 1e-12, lhs, rhs, separation })
    }

    /// Smallest distance accepted by [`check_pair`](Self::check_pair).
    pub fn min_separation(&self) -> f64 {
        pow2_neg(self.pn[self.depth() as usize - 1])
    }
}
