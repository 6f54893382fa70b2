use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

use super::config::{CampaignConfig, CampaignKind, Model, ModelSpec};
use super::report::*;
use super::sampling;
use crate::continuous::{series_certificate, ContinuousModel};
use crate::error::{Error, Result};
use crate::interval::{pow2_neg, DyadicIndex, Interval, IntervalSet};
use crate::pettis::PettisModel;
use crate::psi::{validate_growth, ValidationReport};
use crate::space::Exponent;

/// Absolute slack on every `lower >= ψ` assertion.
pub const BOUND_TOL: f64 = 1e-12;
/// Relative slack on the pairing identity.
pub const PAIRING_TOL: f64 = 1e-9;

const MAX_PARTS: usize = 4;
const MAX_SUPPORT: usize = 8;

fn stream(kind: CampaignKind) -> u64 {
    CampaignKind::ALL.iter().position(|k| *k == kind).expect("listed") as u64
}

fn violations<R>(rows: &[R], pass: impl Fn(&R) -> bool) -> usize {
    rows.iter().filter(|r| !pass(r)).count()
}

fn depth_guard(m: &PettisModel, smallest: f64, what: &str) -> Result<()> {
    let floor = m.min_provable_measure();
    if smallest < floor {
        return Err(Error::DepthInsufficient(format!(
            "{what} reach measure {smallest:e}, below the provable floor {floor:e} of depth {}",
            m.depth()
        )));
    }
    Ok(())
}

fn pettis(model: &Model, kind: CampaignKind) -> Result<&PettisModel> {
    match model {
        Model::Pettis(m) => Ok(m),
        Model::Continuous(_) => Err(Error::Config(format!("campaign `{kind}` needs a pettis model"))),
    }
}

/// Build the model named by `spec` and run one campaign on it.
pub fn run(spec: &ModelSpec, base: &std::path::Path, kind: CampaignKind, cfg: &CampaignConfig) -> Result<Report> {
    cfg.validate(kind)?;
    if kind == CampaignKind::PsiValidate {
        return psi_validate(spec, base, cfg);
    }
    let model = spec.build(base)?;
    run_on(&model, kind, cfg)
}

pub fn run_on(model: &Model, kind: CampaignKind, cfg: &CampaignConfig) -> Result<Report> {
    cfg.validate(kind)?;
    match kind {
        CampaignKind::LowerBound => lower_bound(pettis(model, kind)?, cfg),
        CampaignKind::Pairing => pairing(pettis(model, kind)?, cfg),
        CampaignKind::Blowup => blowup(pettis(model, kind)?, cfg),
        CampaignKind::Halfpower => halfpower(pettis(model, kind)?, cfg),
        CampaignKind::Bochner => bochner(pettis(model, kind)?, cfg),
        CampaignKind::Continuous => match model {
            Model::Continuous(m) => continuous(m, cfg),
            Model::Pettis(_) => Err(Error::Config("campaign `continuous` needs a continuous model".into())),
        },
        CampaignKind::PsiValidate => match model {
            Model::Pettis(m) => psi_rows(m.table().report(), m.table().sequence(), cfg),
            Model::Continuous(m) => psi_rows(m.report(), &shifted(m.sequence()), cfg),
        },
    }
}

/// All dyadic intervals up to `dyadic_level` (including `[0, 1)`), then
/// `samples` random intervals above the provable floor.
pub fn lower_bound(m: &PettisModel, cfg: &CampaignConfig) -> Result<Report> {
    let level = cfg.dyadic_level;
    depth_guard(m, pow2_neg(level), &format!("dyadic intervals of level {level}"))?;
    let floor = m.min_provable_measure();
    let mut intervals: Vec<Interval> = (0..=level)
        .flat_map(|n| (1..=1u64 << n).map(move |k| DyadicIndex { level: n, index: k }.interval()))
        .collect();
    let mut rng = sampling::rng(cfg.seed, stream(CampaignKind::LowerBound));
    let mut rejected = 0;
    for _ in 0..cfg.samples {
        let (i, r) = sampling::interval(&mut rng, floor);
        intervals.push(i);
        rejected += r;
    }
    let rows: Vec<LowerBoundRow> = intervals
        .par_iter()
        .enumerate()
        .map(|(idx, i)| {
            let enc = m.pettis_integral(&IntervalSet::from_interval(*i));
            let psi = m.psi(i.measure());
            LowerBoundRow {
                idx,
                lo: i.lo(),
                hi: i.hi(),
                measure: i.measure(),
                psi,
                lower: enc.lower,
                upper: enc.upper,
                pass: enc.lower >= psi - BOUND_TOL,
            }
        })
        .collect();
    let v = violations(&rows, |r| r.pass);
    let mut report = Report::new(CampaignKind::LowerBound, cfg.seed, Rows::LowerBound(rows), v);
    report.summary.skipped = rejected;
    report.summary.notes.push(format!(
        "{} dyadic intervals to level {level}, {} random intervals; {rejected} random draws below measure {floor:e} rejected",
        (1u64 << (level + 1)) - 1,
        cfg.samples
    ));
    Ok(report)
}

/// `samples` functionals against `sets` random interval sets.
pub fn pairing(m: &PettisModel, cfg: &CampaignConfig) -> Result<Report> {
    let mut rng = sampling::rng(cfg.seed, stream(CampaignKind::Pairing));
    let functionals: Vec<_> =
        (0..cfg.samples).map(|_| sampling::functional(&mut rng, m.layout(), m.depth(), MAX_SUPPORT)).collect();
    let sets: Vec<IntervalSet> = (0..cfg.sets).map(|_| sampling::interval_set(&mut rng, MAX_PARTS)).collect();
    let integrals: Vec<_> = sets.par_iter().map(|e| m.pettis_integral(e).truncated).collect();
    let rows = (0..functionals.len() * sets.len())
        .into_par_iter()
        .map(|idx| {
            let (x, j) = (&functionals[idx / sets.len()], idx % sets.len());
            let lhs = x.apply(&integrals[j])?;
            let rhs = m.scalar_integral(x, &sets[j])?;
            let norm = x.dual_norm();
            let tol = PAIRING_TOL * (1.0 + norm);
            let abs_err = (lhs - rhs).abs();
            Ok(PairingRow { idx, functional_norm: norm, lhs, rhs, abs_err, tol, pass: abs_err <= tol })
        })
        .collect::<Result<Vec<_>>>()?;
    let v = violations(&rows, |r| r.pass);
    let mut report = Report::new(CampaignKind::Pairing, cfg.seed, Rows::Pairing(rows), v);
    report.summary.notes.push(format!(
        "{} functionals (support <= {MAX_SUPPORT}) x {} interval sets (<= {MAX_PARTS} parts)",
        cfg.samples, cfg.sets
    ));
    Ok(report)
}

/// `(1/h)·lower` over `[t, t + h)` for `h = 2^{-j}`.
pub fn blowup(m: &PettisModel, cfg: &CampaignConfig) -> Result<Report> {
    let (jl, jh) = cfg.j_range(CampaignKind::Blowup);
    depth_guard(m, pow2_neg(jh), &format!("blow-up intervals of length 2^-{jh}"))?;
    let mut grid = Vec::new();
    let mut skipped = 0;
    for &t in &cfg.t_values {
        for j in jl..=jh {
            if t + pow2_neg(j) > 1.0 {
                skipped += 1;
            } else {
                grid.push((t, j));
            }
        }
    }
    let rows: Vec<BlowupRow> = grid
        .par_iter()
        .map(|&(t, j)| {
            let h = pow2_neg(j);
            let e = IntervalSet::from_interval(Interval::new(t, t + h).expect("t + h <= 1"));
            let v = m.pettis_integral(&e).lower / h;
            let floor = m.psi(h) / h;
            BlowupRow { t, j, h, lower_over_h: v, floor, pass: v >= floor - BOUND_TOL / h }
        })
        .collect();
    let mut trend = serde_json::Map::new();
    let mut notes = Vec::new();
    for &t in &cfg.t_values {
        let vs: Vec<f64> = rows.iter().filter(|r| r.t == t).map(|r| r.lower_over_h).collect();
        let monotone = vs.windows(2).all(|w| w[1] >= w[0]);
        notes.push(format!(
            "t = {t}: (1/h)·lower {} in j",
            if monotone { "nondecreasing" } else { "not monotone" }
        ));
        trend.insert(t.to_string(), json!({ "values": vs, "monotone": monotone }));
    }
    if skipped > 0 {
        notes.push(format!("{skipped} grid points with t + h > 1 skipped"));
    }
    let v = violations(&rows, |r| r.pass);
    let mut report = Report::new(CampaignKind::Blowup, cfg.seed, Rows::Blowup(rows), v);
    report.summary.skipped = skipped;
    report.summary.notes = notes;
    report.summary.tables.insert("trend".into(), trend.into());
    Ok(report)
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// `h^{-1/2}·upper` at `samples` random `t`. Only the floor is asserted.
pub fn halfpower(m: &PettisModel, cfg: &CampaignConfig) -> Result<Report> {
    if m.p() != Exponent::TWO {
        return Err(Error::Config(format!("halfpower statistic needs p = 2, model has p = {}", m.p())));
    }
    let (jl, jh) = cfg.j_range(CampaignKind::Halfpower);
    depth_guard(m, pow2_neg(jh), &format!("intervals of length 2^-{jh}"))?;
    let mut rng = sampling::rng(cfg.seed, stream(CampaignKind::Halfpower));
    let ts: Vec<f64> = (0..cfg.samples).map(|_| rng.random()).collect();
    let mut grid = Vec::new();
    let mut skipped = 0;
    for &t in &ts {
        for j in jl..=jh {
            if t + pow2_neg(j) > 1.0 {
                skipped += 1;
            } else {
                grid.push((t, j));
            }
        }
    }
    let rows: Vec<HalfpowerRow> = grid
        .par_iter()
        .enumerate()
        .map(|(idx, &(t, j))| {
            let h = pow2_neg(j);
            let e = IntervalSet::from_interval(Interval::new(t, t + h).expect("t + h <= 1"));
            let root = h.sqrt();
            let r = m.pettis_integral(&e).upper / root;
            let floor = m.psi(h) / root;
            let tol = BOUND_TOL / root;
            HalfpowerRow { idx, t, j, h, r, floor, tol, pass: r >= floor - tol }
        })
        .collect();
    let medians: Vec<_> = (jl..=jh)
        .map(|j| {
            let med = median(rows.iter().filter(|r| r.j == j).map(|r| r.r).collect());
            json!({ "j": j, "median_r": med })
        })
        .collect();
    let v = violations(&rows, |r| r.pass);
    let mut report = Report::new(CampaignKind::Halfpower, cfg.seed, Rows::Halfpower(rows), v);
    report.summary.skipped = skipped;
    report.summary.notes.push(
        "the almost-everywhere o(h^{1/2}) limit is not decidable from finite truncations; \
         the median trend is informative only and only the floor is asserted"
            .into(),
    );
    report.summary.tables.insert("median_trend".into(), medians.into());
    Ok(report)
}

/// `S_N = ∫_I ‖f_{≤N}‖ dμ` for every `N <= depth`.
pub fn bochner(m: &PettisModel, cfg: &CampaignConfig) -> Result<Report> {
    let [lo, hi] = cfg.interval;
    let i = Interval::new(lo, hi).map_err(|_| Error::ZeroMeasure)?;
    if i.measure() <= 0.0 {
        return Err(Error::ZeroMeasure);
    }
    let e = IntervalSet::from_interval(i);
    let depth = m.depth();
    let s: Vec<f64> =
        (1..=depth).into_par_iter().map(|n| m.bochner_partial(&e, n)).collect::<Result<Vec<_>>>()?;
    let rows: Vec<BochnerRow> = (1..=depth)
        .map(|n| {
            let idx = n as usize - 1;
            let s_n = s[idx];
            let s_prev = idx.checked_sub(1).map(|p| s[p]);
            let s_n_plus_4 = (n >= 8 && n + 4 <= depth).then(|| s[idx + 4]);
            let pass = s_prev.is_none_or(|p| s_n >= p) && s_n_plus_4.is_none_or(|q| q >= 1.5 * s_n);
            BochnerRow { n, s_n, s_prev, s_n_plus_4, pass }
        })
        .collect();
    let v = violations(&rows, |r| r.pass);
    let mut report = Report::new(CampaignKind::Bochner, cfg.seed, Rows::Bochner(rows), v);
    if depth >= 5 {
        report.summary.notes.push(format!(
            "S_N on [{lo}, {hi}) keeps growing: S_{depth} / S_{} = {:.4}",
            depth - 4,
            s[depth as usize - 1] / s[depth as usize - 5]
        ));
    }
    Ok(report)
}

/// Pair sampling: even rows draw `s, t` uniformly, odd rows draw the
/// distance log-uniformly so that short distances are exercised too.
fn sample_pairs(m: &ContinuousModel, cfg: &CampaignConfig) -> (Vec<(f64, f64)>, usize) {
    let mut rng = sampling::rng(cfg.seed, stream(CampaignKind::Continuous));
    let floor = m.min_separation();
    let span = -floor.log2();
    let mut pairs = Vec::with_capacity(cfg.samples);
    let mut rejected = 0;
    while pairs.len() < cfg.samples {
        let s: f64 = rng.random();
        let t = if pairs.len() % 2 == 0 {
            rng.random()
        } else {
            let d = (-rng.random_range(0.0..=span)).exp2();
            if s + d < 1.0 {
                s + d
            } else {
                s - d
            }
        };
        if !(0.0..1.0).contains(&t) || s == t || (s - t).abs() < floor {
            rejected += 1;
            continue;
        }
        pairs.push((s, t));
    }
    (pairs, rejected)
}

fn default_delta_exponents(m: &ContinuousModel) -> Vec<u32> {
    let top = m.sequence()[m.depth() as usize - 1];
    let mut v: Vec<u32> = (0..=top).step_by(2).collect();
    if v.last() != Some(&top) {
        v.push(top);
    }
    v
}

pub fn continuous(m: &ContinuousModel, cfg: &CampaignConfig) -> Result<Report> {
    let (pairs, rejected) = sample_pairs(m, cfg);
    let rows = pairs
        .par_iter()
        .enumerate()
        .map(|(idx, &(s, t))| {
            let r = m.check_pair(s, t)?;
            let dist = (s - t).abs();
            let modulus = m.modulus(dist);
            Ok(ContinuousRow {
                idx,
                s,
                t,
                dist,
                lhs: r.lhs,
                rhs: r.rhs,
                separation: r.separation,
                modulus,
                pass: r.lhs >= r.rhs - BOUND_TOL && r.lhs <= modulus,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let exps = cfg.delta_exponents.clone().unwrap_or_else(|| default_delta_exponents(m));
    let table: Vec<_> = exps
        .iter()
        .map(|&i| {
            let delta = pow2_neg(i);
            let near: Vec<f64> = rows.iter().filter(|r| r.dist <= delta).map(|r| r.lhs).collect();
            let sup = near.iter().copied().fold(0.0, f64::max);
            let bound = m.modulus(delta);
            json!({ "delta_exp": i, "pairs": near.len(), "observed_sup": sup, "bound": bound, "holds": sup <= bound })
        })
        .collect();
    let table_fail = table.iter().filter(|r| r["holds"] == false).count();
    let v = violations(&rows, |r| r.pass) + table_fail;
    let mut report = Report::new(CampaignKind::Continuous, cfg.seed, Rows::Continuous(rows), v);
    report.summary.skipped = rejected;
    report.summary.notes.push(format!(
        "pairs with |s - t| >= {:e}; {rejected} draws rejected",
        m.min_separation()
    ));
    report.summary.tables.insert("modulus".into(), table.into());
    Ok(report)
}

/// Row `n` of the continuous series carries `p_{n-1}`.
fn shifted(pn: &[u32]) -> Vec<u32> {
    std::iter::once(0).chain(pn.iter().copied()).collect()
}

fn psi_rows(report: &ValidationReport, pn: &[u32], cfg: &CampaignConfig) -> Result<Report> {
    let rows: Vec<PsiRow> = (1..=report.terms.len())
        .map(|n| PsiRow {
            n,
            p_n: pn.get(n).copied().unwrap_or(0),
            term: report.term(n),
            ratio: report.ratios.get(n - 1).copied(),
            in_window: report.pass && n >= report.n0 && n <= report.n_max,
        })
        .collect();
    let mut out = Report::new(CampaignKind::PsiValidate, cfg.seed, Rows::Psi(rows), usize::from(!report.pass));
    out.summary.notes.push(if report.pass {
        format!("PASS: ratio <= {} from n0 = {} to {}, certified r = {}", report.r_max, report.n0, report.n_max, report.r)
    } else {
        format!("FAIL: no eventual ratio <= {} on [n0, {}]", report.r_max, report.n_max)
    });
    Ok(out)
}

/// Growth validation straight from the config, so a failing schedule still
/// produces a report instead of a build error.
pub fn psi_validate(spec: &ModelSpec, base: &std::path::Path, cfg: &CampaignConfig) -> Result<Report> {
    match spec {
        ModelSpec::Pettis(c) => {
            let g = c.growth;
            let report = validate_growth(&c.psi, c.p, &c.rule, g.n_max, g.r_max)?;
            let pn = c.rule.sequence(report.terms.len())?;
            psi_rows(&report, &pn, cfg)
        }
        ModelSpec::Continuous(c) => {
            let (pn, report) = series_certificate(c)?;
            psi_rows(&report, &shifted(&pn), cfg)
        }
        ModelSpec::Archive { .. } => run_on(&spec.build(base)?, CampaignKind::PsiValidate, cfg),
    }
}
