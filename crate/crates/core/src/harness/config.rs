use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::costmodel::CostConfig;
use crate::error::{Error, Result};
use crate::frontend::FrontendConfig;
use crate::matcher::MatcherConfig;
use crate::vq::LbgConfig;

/// Threshold calibration on the train split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Fraction of correct-keyword train scores the threshold must accept.
    pub target_acceptance: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig { target_acceptance: 0.95 }
    }
}

/// Everything `train` and `evaluate` depend on, as read from TOML.
///
/// ```toml
/// seed = 7
/// [frontend]
/// n_mfcc = 12
/// [vq]
/// codebook_size = 64
/// [matcher]
/// mode = "diagonal"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub frontend: FrontendConfig,
    pub vq: LbgConfig,
    pub matcher: MatcherConfig,
    pub calibration: CalibrationConfig,
    pub cost: CostConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 1,
            frontend: FrontendConfig::default(),
            vq: LbgConfig::default(),
            matcher: MatcherConfig::default(),
            calibration: CalibrationConfig::default(),
            cost: CostConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.frontend.validate()?;
        self.vq.validate()?;
        self.matcher.validate()?;
        let a = self.calibration.target_acceptance;
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::config(format!("target_acceptance must be in (0, 1], got {a}")));
        }
        if !(self.cost.clock_hz > 0.0) {
            return Err(Error::config(format!("clock_hz must be positive, got {}", self.cost.clock_hz)));
        }
        if self.cost.fft_lanes == 0 {
            return Err(Error::config("fft_lanes must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcher::MatchMode;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(Config::from_toml("").unwrap(), Config::default());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = Config::default();
        cfg.seed = 99;
        cfg.matcher.mode = MatchMode::FullDtw;
        cfg.vq.codebook_size = 32;
        assert_eq!(Config::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_sections() {
        let cfg = Config::from_toml("seed = 3\n[matcher]\nmode = \"full_dtw\"\ntemplate_len = 32\n").unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.matcher.template_len, 32);
        assert_eq!(cfg.matcher.mode, MatchMode::FullDtw);
        assert_eq!(cfg.frontend, FrontendConfig::default());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(Config::from_toml("[vq]\ncodebook_size = 48\n"), Err(Error::Config(_))));
        assert!(matches!(Config::from_toml("[matcher]\ntemplate_len = 1\n"), Err(Error::Config(_))));
        assert!(matches!(Config::from_toml("[frontend]\nbogus = 1\n"), Err(Error::Config(_))));
        assert!(matches!(Config::from_toml("[cost]\nclock_hz = 0.0\n"), Err(Error::Config(_))));
        assert!(matches!(Config::from_toml("seed = \"x\""), Err(Error::Config(_))));
    }
}
