use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::continuous::{ContinuousConfig, ContinuousModel};
use crate::error::{Error, Result};
use crate::interval::MAX_LEVEL;
use crate::pettis::{ModelArchive, ModelConfig, PettisModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CampaignKind {
    LowerBound,
    Pairing,
    Blowup,
    Halfpower,
    Continuous,
    Bochner,
    PsiValidate,
}

impl CampaignKind {
    pub const ALL: [CampaignKind; 7] = [
        CampaignKind::LowerBound,
        CampaignKind::Pairing,
        CampaignKind::Blowup,
        CampaignKind::Halfpower,
        CampaignKind::Continuous,
        CampaignKind::Bochner,
        CampaignKind::PsiValidate,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CampaignKind::LowerBound => "lower-bound",
            CampaignKind::Pairing => "pairing",
            CampaignKind::Blowup => "blowup",
            CampaignKind::Halfpower => "halfpower",
            CampaignKind::Continuous => "continuous",
            CampaignKind::Bochner => "bochner",
            CampaignKind::PsiValidate => "psi-validate",
        }
    }
}

impl fmt::Display for CampaignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CampaignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CampaignKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown campaign `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Config(format!("unknown format `{s}`"))),
        }
    }
}

/// The `model` section: an inline config or a built archive on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Pettis(ModelConfig),
    Continuous(ContinuousConfig),
    /// Path is resolved against the config file's directory.
    Archive { path: PathBuf },
}

#[derive(Debug, Clone)]
pub enum Model {
    Pettis(Box<PettisModel>),
    Continuous(Box<ContinuousModel>),
}

/// Archive written by `build`, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnyArchive {
    Pettis(Box<ModelArchive>),
    Continuous(ContinuousArchive),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousArchive {
    pub kind: String,
    pub config: ContinuousConfig,
    pub pn: Vec<u32>,
    pub c: std::collections::BTreeMap<String, f64>,
}

impl ContinuousArchive {
    pub fn from_model(m: &ContinuousModel) -> Self {
        ContinuousArchive {
            kind: "continuous".into(),
            config: m.config().clone(),
            pn: m.sequence()[..=m.depth() as usize].to_vec(),
            c: (2..=m.depth()).map(|n| (n.to_string(), m.c(n))).collect(),
        }
    }
}

impl Model {
    pub fn archive(&self) -> AnyArchive {
        match self {
            Model::Pettis(m) => AnyArchive::Pettis(Box::new(m.to_archive())),
            Model::Continuous(m) => AnyArchive::Continuous(ContinuousArchive::from_model(m)),
        }
    }
}

pub fn load_archive(path: &Path) -> Result<Model> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    match value.get("kind").and_then(|k| k.as_str()) {
        Some("pettis") => {
            let a: ModelArchive = serde_json::from_value(value)?;
            Ok(Model::Pettis(Box::new(PettisModel::from_archive(&a)?)))
        }
        Some("continuous") => {
            let a: ContinuousArchive = serde_json::from_value(value)?;
            Ok(Model::Continuous(Box::new(a.config.build()?)))
        }
        other => Err(Error::Config(format!("archive has unknown kind {other:?}"))),
    }
}

impl ModelSpec {
    pub fn build(&self, base: &Path) -> Result<Model> {
        match self {
            ModelSpec::Pettis(c) => Ok(Model::Pettis(Box::new(c.build()?))),
            ModelSpec::Continuous(c) => Ok(Model::Continuous(Box::new(c.build()?))),
            ModelSpec::Archive { path } => load_archive(&base.join(path)),
        }
    }
}

fn default_samples() -> usize {
    1000
}

fn default_dyadic_level() -> u32 {
    12
}

fn default_sets() -> usize {
    50
}

fn default_t_values() -> Vec<f64> {
    vec![0.0, 0.3, 1.0 / 3.0, 0.9]
}

fn default_interval() -> [f64; 2] {
    [0.25, 0.5]
}

/// The `campaign` section. Unset grid bounds fall back to per-campaign
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(default)]
    pub kind: Option<CampaignKind>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Lower-bound sweep: every dyadic interval up to this level.
    #[serde(default = "default_dyadic_level")]
    pub dyadic_level: u32,
    /// Pairing: interval sets paired with every sampled functional.
    #[serde(default = "default_sets")]
    pub sets: usize,
    /// Blow-up: left endpoints `t`.
    #[serde(default = "default_t_values")]
    pub t_values: Vec<f64>,
    #[serde(default)]
    pub j_min: Option<u32>,
    #[serde(default)]
    pub j_max: Option<u32>,
    /// Bochner: the interval `I`.
    #[serde(default = "default_interval")]
    pub interval: [f64; 2],
    /// Continuous: `δ = 2^{-i}` for each listed `i` in the modulus table.
    #[serde(default)]
    pub delta_exponents: Option<Vec<u32>>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all campaign fields have defaults")
    }
}

impl CampaignConfig {
    pub fn for_kind(kind: CampaignKind) -> Self {
        CampaignConfig { kind: Some(kind), ..Default::default() }
    }

    /// `[j_min, j_max]` with the campaign's default where unset.
    pub fn j_range(&self, kind: CampaignKind) -> (u32, u32) {
        let (lo, hi) = match kind {
            CampaignKind::Halfpower => (8, 20),
            _ => (4, 20),
        };
        (self.j_min.unwrap_or(lo), self.j_max.unwrap_or(hi))
    }

    pub fn validate(&self, kind: CampaignKind) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Config("samples must be >= 1".into()));
        }
        let (lo, hi) = self.j_range(kind);
        if !(lo < hi && hi <= MAX_LEVEL) {
            return Err(Error::Config(format!("need j_min < j_max <= {MAX_LEVEL}, got [{lo}, {hi}]")));
        }
        if self.dyadic_level > MAX_LEVEL {
            return Err(Error::LevelOverflow(self.dyadic_level));
        }
        if let Some(t) = self.t_values.iter().find(|t| !(0.0..1.0).contains(*t)) {
            return Err(Error::Config(format!("t value {t} outside [0, 1)")));
        }
        Ok(())
    }
}

/// Top-level `{model, campaign}` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub campaign: CampaignConfig,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let text = r#"{
            "model": {"kind": "pettis", "psi": {"family": "power", "exponent": 0.75},
                      "K": 1, "p": 2, "rule": {"a": 1, "b": 0}, "depth": 12},
            "campaign": {"samples": 10, "seed": 7}
        }"#;
        let cfg: RunConfig = serde_json::from_str(text).unwrap();
        assert!(matches!(cfg.model, ModelSpec::Pettis(ref m) if m.depth == 12));
        assert_eq!(cfg.campaign.samples, 10);
        assert_eq!(cfg.campaign.j_range(CampaignKind::Blowup), (4, 20));
        assert_eq!(cfg.campaign.j_range(CampaignKind::Halfpower), (8, 20));
    }

    #[test]
    fn validation_guards() {
        let mut c = CampaignConfig::default();
        assert!(c.validate(CampaignKind::Blowup).is_ok());
        c.samples = 0;
        assert!(c.validate(CampaignKind::Blowup).is_err());
        let c = CampaignConfig { j_min: Some(20), j_max: Some(10), ..Default::default() };
        assert!(c.validate(CampaignKind::Blowup).is_err());
        let c = CampaignConfig { j_max: Some(41), ..Default::default() };
        assert!(c.validate(CampaignKind::Blowup).is_err());
    }

    #[test]
    fn kind_names_roundtrip() {
        for k in CampaignKind::ALL {
            assert_eq!(k.as_str().parse::<CampaignKind>().unwrap(), k);
            assert_eq!(serde_json::to_value(k).unwrap(), serde_json::json!(k.as_str()));
        }
    }
}
