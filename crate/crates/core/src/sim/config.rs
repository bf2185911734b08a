//! Simulation configuration: a sectioned TOML file plus `section.key=value`
//! overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{Scenario, Scheme};
use crate::error::{Error, Result};
use crate::modem::Modulation;
use crate::phy::llr::LlrMethod;
use crate::phy::quant::DEFAULT_CLIP;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub modulation: Modulation,
    pub mts: usize,
    pub aps: usize,
    pub schemes: Vec<Scheme>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            modulation: Modulation::Qam4,
            mts: 2,
            aps: 2,
            schemes: vec![Scheme::Bmas, Scheme::CompIdeal, Scheme::CompQuant(2), Scheme::CompQuant(4)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub snr_db: Vec<f64>,
    pub frames: u64,
    pub info_bits: usize,
    pub seed: u64,
    pub coding: bool,
    /// Enables early stopping when positive.
    pub target_p: f64,
    /// Worker threads; 0 uses all available.
    pub workers: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            snr_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0],
            frames: 1000,
            info_bits: 120,
            seed: 1,
            coding: true,
            target_p: 0.0,
            workers: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    pub llr: LlrMethod,
    pub clip: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            llr: LlrMethod::Exact,
            clip: DEFAULT_CLIP,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AtlasSection {
    /// One atlas per block height needed by the scenario.
    pub paths: Vec<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub scenario: ScenarioSection,
    pub run: RunSection,
    pub detector: DetectorSection,
    pub atlas: AtlasSection,
}

/// Every configuration key with its default and meaning.
pub const CONFIG_KEYS: &[(&str, &str, &str)] = &[
    ("scenario.modulation", "\"qam4\"", "constellation: qam4 or qam16"),
    ("scenario.mts", "2", "number of terminals"),
    ("scenario.aps", "2", "number of access points"),
    (
        "scenario.schemes",
        "[\"bmas\", \"comp-ideal\", \"comp-quant2\", \"comp-quant4\"]",
        "schemes to simulate",
    ),
    ("run.snr_db", "[0, 5, 10, 15, 20, 25]", "per-terminal Es/N0 grid in dB, strictly increasing"),
    ("run.frames", "1000", "frames per SNR point (minimum when early stopping)"),
    ("run.info_bits", "120", "information bits per terminal per frame"),
    ("run.seed", "1", "master seed"),
    ("run.coding", "true", "rate-2/3 convolutional coding on or off"),
    ("run.target_p", "0", "smallest outage of interest; positive values enable early stopping"),
    ("run.workers", "0", "worker threads, 0 for all cores"),
    ("detector.llr", "\"exact\"", "LLR computation: exact or max-log"),
    ("detector.clip", "8", "LLR quantizer clipping level"),
    ("atlas.paths", "[]", "candidate table files, one per rows-per-AP value"),
];

pub fn config_help() -> String {
    let width = CONFIG_KEYS.iter().map(|(k, _, _)| k.len()).max().unwrap_or(0);
    CONFIG_KEYS
        .iter()
        .map(|(k, d, h)| format!("  {k:width$}  {h} (default {d})"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl SimConfig {
    pub fn scenario(&self) -> Scenario {
        Scenario {
            modulation: self.scenario.modulation,
            mts: self.scenario.mts,
            aps: self.scenario.aps,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_table(toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        // Relative atlas paths are relative to the config file.
        if let Some(dir) = path.parent() {
            for p in &mut cfg.atlas.paths {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: SimConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `section.key=value` overrides; values are TOML literals, and
    /// bare words are taken as strings.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut table = toml::Table::try_from(self).map_err(|e| Error::Internal(e.to_string()))?;
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            let key = key.trim();
            if !CONFIG_KEYS.iter().any(|(k, _, _)| *k == key) {
                return Err(Error::Config(format!("unknown configuration key `{key}`")));
            }
            let value = parse_value(raw.trim());
            let (section, field) = key.split_once('.').expect("keys are dotted");
            let sec = table
                .entry(section)
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            match sec {
                toml::Value::Table(t) => {
                    t.insert(field.to_string(), value);
                }
                _ => return Err(Error::Config(format!("`{section}` is not a section"))),
            }
        }
        Self::from_table(table)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        let r = &self.run;
        if s.schemes.is_empty() {
            return Err(Error::Config("scenario.schemes is empty".into()));
        }
        if s.mts < 2 {
            return Err(Error::Config(format!("scenario.mts must be at least 2, got {}", s.mts)));
        }
        let bits = s.modulation.bits_per_symbol() * s.mts;
        if bits > crate::modem::MAX_JOINT_BITS {
            return Err(Error::Config(format!("{bits} joint message bits is too many")));
        }
        if s.aps == 0 || s.aps > bits {
            return Err(Error::Config(format!(
                "scenario.aps must be in 1..={bits}, got {}",
                s.aps
            )));
        }
        if r.frames == 0 {
            return Err(Error::Config("run.frames must be at least 1".into()));
        }
        if r.snr_db.is_empty() || r.snr_db.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("run.snr_db must be a non-empty list of numbers".into()));
        }
        if r.snr_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("run.snr_db must be strictly increasing".into()));
        }
        let m = s.modulation.bits_per_symbol();
        if r.info_bits == 0 || !r.info_bits.is_multiple_of(m) {
            return Err(Error::Config(format!(
                "run.info_bits must be a positive multiple of {m}, got {}",
                r.info_bits
            )));
        }
        if r.coding && !(r.info_bits / m).is_multiple_of(2) {
            return Err(Error::Config(format!(
                "with coding, run.info_bits / {m} must be even, got {}",
                r.info_bits
            )));
        }
        if !(r.target_p >= 0.0 && r.target_p < 1.0) {
            return Err(Error::Config(format!("run.target_p must be in [0, 1), got {}", r.target_p)));
        }
        if !(self.detector.clip > 0.0) {
            return Err(Error::Config("detector.clip must be positive".into()));
        }
        Ok(())
    }
}

fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = SimConfig::default();
        assert_eq!(SimConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
        assert_eq!(SimConfig::from_toml_str("").unwrap(), cfg);
    }

    #[test]
    fn overrides_take_precedence() {
        let cfg = SimConfig::default()
            .with_overrides(&[
                "run.frames=500",
                "scenario.modulation=qam16",
                "scenario.schemes=[\"bmas\"]",
                "run.snr_db=[1, 2.5]",
            ])
            .unwrap();
        assert_eq!(cfg.run.frames, 500);
        assert_eq!(cfg.scenario.modulation, Modulation::Qam16);
        assert_eq!(cfg.scenario.schemes, vec![Scheme::Bmas]);
        assert_eq!(cfg.run.snr_db, vec![1.0, 2.5]);
        assert!(SimConfig::default().with_overrides(&["run.nope=1"]).is_err());
        assert!(SimConfig::default().with_overrides(&["run.frames"]).is_err());
    }

    #[test]
    fn validation_errors() {
        let bad = |o: &str| SimConfig::default().with_overrides(&[o]).is_err();
        assert!(bad("scenario.schemes=[]"));
        assert!(bad("run.frames=0"));
        assert!(bad("run.snr_db=[5, 5]"));
        assert!(bad("run.info_bits=121"));
        assert!(bad("run.info_bits=122"));
        assert!(bad("scenario.schemes=[\"comp-quant3\"]"));
        assert!(SimConfig::from_toml_str("[run]\nbogus = 1").is_err());
        assert_eq!(CONFIG_KEYS.len(), 14);
    }
}
