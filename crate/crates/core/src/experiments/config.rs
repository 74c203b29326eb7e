//! Flat key-value run configuration.
//!
//! A TOML file supplies defaults for a run and command-line flags override
//! individual keys. Angles accept numbers or expressions such as `"pi"`,
//! `"3pi/2"` or `"1.9pi"`.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AngleValue {
    Number(f64),
    Text(String),
}

impl AngleValue {
    pub fn radians(&self) -> Result<f64> {
        match self {
            AngleValue::Number(x) => Ok(*x),
            AngleValue::Text(s) => parse_angle(s),
        }
    }
}

/// Parse `"pi"`, `"pi/2"`, `"3pi/2"`, `"1.9*pi"`, `"0.75"`.
pub fn parse_angle(text: &str) -> Result<f64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_lowercase();
    let bad = || Error::Config(format!("cannot parse angle {text:?}"));
    let Some(at) = s.find("pi").or_else(|| s.find('π')) else {
        return s.parse::<f64>().map_err(|_| bad());
    };
    let width = if s[at..].starts_with("pi") { 2 } else { 'π'.len_utf8() };
    let head = s[..at].trim_end_matches('*');
    let tail = &s[at + width..];
    let coef = if head.is_empty() { 1.0 } else { head.parse::<f64>().map_err(|_| bad())? };
    let div = match tail.strip_prefix('/') {
        Some(d) => d.parse::<f64>().map_err(|_| bad())?,
        None if tail.is_empty() => 1.0,
        None => return Err(bad()),
    };
    Ok(coef * PI / div)
}

/// Every recognised key; all optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub kappa: Option<AngleValue>,
    pub alpha_cap: Option<AngleValue>,
    pub p: Option<f64>,
    pub theta: Option<f64>,
    #[serde(rename = "Theta")]
    pub big_theta: Option<f64>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub samples: Option<usize>,
    pub levels: Option<u32>,
    pub grid: Option<String>,
    pub allow_infeasible: Option<bool>,
    pub plot: Option<bool>,
    pub method: Option<String>,
    pub coefficients: Option<String>,
    pub nu1: Option<f64>,
    pub nu2: Option<f64>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub r_min: Option<f64>,
    pub r_out: Option<f64>,
    pub n_r: Option<usize>,
    pub n_eta: Option<usize>,
    pub source_x: Option<f64>,
    pub source_y: Option<f64>,
    pub source_width: Option<f64>,
    pub time_profile: Option<String>,
    pub t: Option<f64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Keys set in `over` replace those in `self`.
    pub fn overlay(&self, over: &ConfigFile) -> Result<ConfigFile> {
        let mut base = serde_json::to_value(self)?;
        let top = serde_json::to_value(over)?;
        if let (Some(b), Some(t)) = (base.as_object_mut(), top.as_object()) {
            for (k, v) in t {
                if !v.is_null() {
                    b.insert(k.clone(), v.clone());
                }
            }
        }
        Ok(serde_json::from_value(base)?)
    }

    pub fn kappa_or(&self, default: f64) -> Result<f64> {
        self.kappa.as_ref().map_or(Ok(default), AngleValue::radians)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_parse() {
        for (s, v) in [("pi", PI), ("pi/2", PI / 2.0), ("3pi/2", 1.5 * PI), ("1.9*pi", 1.9 * PI), ("0.75", 0.75), (" 2 π ", 2.0 * PI)] {
            assert!((parse_angle(s).unwrap() - v).abs() < 1e-15, "{s}");
        }
        for s in ["", "pie", "x", "pi/", "2pi3"] {
            assert!(parse_angle(s).is_err(), "{s}");
        }
    }

    #[test]
    fn file_then_flags() {
        let file = ConfigFile::parse("kappa = \"3pi/2\"\np = 2.0\nTheta = 2.0\nseed = 5\n").unwrap();
        assert!((file.kappa_or(0.0).unwrap() - 1.5 * PI).abs() < 1e-15);
        let flags = ConfigFile { p: Some(4.0), kappa: Some(AngleValue::Number(1.0)), ..Default::default() };
        let merged = file.overlay(&flags).unwrap();
        assert_eq!(merged.p, Some(4.0));
        assert_eq!(merged.big_theta, Some(2.0));
        assert_eq!(merged.seed, Some(5));
        assert_eq!(merged.kappa_or(0.0).unwrap(), 1.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(ConfigFile::parse("kapa = 1.0"), Err(Error::Config(_))));
        assert!(matches!(ConfigFile::parse("p = \"two\""), Err(Error::Config(_))));
    }
}
