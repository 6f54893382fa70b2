use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{CampaignKind, Format};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundRow {
    pub idx: usize,
    pub lo: f64,
    pub hi: f64,
    pub measure: f64,
    pub psi: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairingRow {
    pub idx: usize,
    pub functional_norm: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_err: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupRow {
    pub t: f64,
    pub j: u32,
    pub h: f64,
    pub lower_over_h: f64,
    pub floor: f64,
    pub pass: bool,
}

/// `r = h^{-1/2}·upper`; `pass = r >= floor - tol`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalfpowerRow {
    pub idx: usize,
    pub t: f64,
    pub j: u32,
    pub h: f64,
    pub r: f64,
    pub floor: f64,
    pub tol: f64,
    pub pass: bool,
}

/// `pass = lhs >= rhs - 1e-12 && lhs <= modulus`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuousRow {
    pub idx: usize,
    pub s: f64,
    pub t: f64,
    pub dist: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub separation: f64,
    pub modulus: f64,
    pub pass: bool,
}

/// `pass` requires `s_n >= s_prev` and `s_n_plus_4 >= 1.5·s_n` where present.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BochnerRow {
    pub n: u32,
    pub s_n: f64,
    pub s_prev: Option<f64>,
    pub s_n_plus_4: Option<f64>,
    pub pass: bool,
}

/// `pass` marks ratios inside the certified window `[n0, n_max]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiRow {
    pub n: usize,
    pub p_n: u32,
    pub term: f64,
    pub ratio: Option<f64>,
    pub in_window: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Rows {
    LowerBound(Vec<LowerBoundRow>),
    Pairing(Vec<PairingRow>),
    Blowup(Vec<BlowupRow>),
    Halfpower(Vec<HalfpowerRow>),
    Continuous(Vec<ContinuousRow>),
    Bochner(Vec<BochnerRow>),
    Psi(Vec<PsiRow>),
}

impl Rows {
    pub fn len(&self) -> usize {
        match self {
            Rows::LowerBound(r) => r.len(),
            Rows::Pairing(r) => r.len(),
            Rows::Blowup(r) => r.len(),
            Rows::Halfpower(r) => r.len(),
            Rows::Continuous(r) => r.len(),
            Rows::Bochner(r) => r.len(),
            Rows::Psi(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        fn put<W: Write, R: Serialize>(w: W, rows: &[R]) -> Result<()> {
            let mut out = csv::Writer::from_writer(w);
            for r in rows {
                out.serialize(r)?;
            }
            out.flush()?;
            Ok(())
        }
        match self {
            Rows::LowerBound(r) => put(w, r),
            Rows::Pairing(r) => put(w, r),
            Rows::Blowup(r) => put(w, r),
            Rows::Halfpower(r) => put(w, r),
            Rows::Continuous(r) => put(w, r),
            Rows::Bochner(r) => put(w, r),
            Rows::Psi(r) => put(w, r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub campaign: CampaignKind,
    pub seed: u64,
    pub rows: usize,
    pub violations: usize,
    /// Samples or grid points dropped by a domain guard.
    pub skipped: usize,
    pub pass: bool,
    pub notes: Vec<String>,
    /// Auxiliary tables (median trend, modulus of continuity, ...).
    pub tables: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub summary: Summary,
    pub rows: Rows,
}

impl Report {
    /// Assemble a report; violations are counted from the row pass flags.
    pub(crate) fn new(campaign: CampaignKind, seed: u64, rows: Rows, violations: usize) -> Self {
        Report {
            summary: Summary {
                campaign,
                seed,
                rows: rows.len(),
                violations,
                skipped: 0,
                pass: violations == 0,
                notes: Vec::new(),
                tables: BTreeMap::new(),
            },
            rows,
        }
    }

    pub fn pass(&self) -> bool {
        self.summary.pass
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.rows.write_csv(&mut buf)?;
        Ok(buf)
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut buf = serde_json::to_vec_pretty(self)?;
        buf.push(b'\n');
        Ok(buf)
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    pub fn summary_json(&self) -> Result<Vec<u8>> {
        let mut buf = serde_json::to_vec_pretty(&self.summary)?;
        buf.push(b'\n');
        Ok(buf)
    }

    /// Write the report; CSV output gets a `<out>.summary.json` sidecar.
    /// Returns the paths written.
    pub fn write(&self, out: &Path, format: Format) -> Result<Vec<PathBuf>> {
        std::fs::write(out, self.render(format)?)?;
        let mut written = vec![out.to_path_buf()];
        if format == Format::Csv {
            let mut side = out.as_os_str().to_owned();
            side.push(".summary.json");
            let side = PathBuf::from(side);
            std::fs::write(&side, self.summary_json()?)?;
            written.push(side);
        }
        Ok(written)
    }
}
