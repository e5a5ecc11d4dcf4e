//! Codec configuration and the plain-text `key = value` config format.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("invalid value `{value}` for `{key}`")]
    BadValue { key: String, value: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Every tunable of the encoder, controller and solver.
///
/// Pixel values are on the 0..=255 scale throughout; `lambda_init` is
/// expressed on that scale as well.
#[derive(Debug, Clone, PartialEq)]
pub struct CodecConfig {
    pub block_size: usize,
    pub high_sr: f64,
    pub target_sr: f64,
    /// Number of frames in the sequence. Encoders use the actual input
    /// length; this value sizes planar raw input and synthetic sequences.
    pub frame_count: usize,
    /// Frame geometry for planar raw input (0 = unset).
    pub width: usize,
    pub height: usize,
    pub threshold_init: f64,
    pub threshold_gamma: f64,
    pub threshold_min: f64,
    pub threshold_max: f64,
    pub cut_fraction: f64,
    pub initial_storage_fraction: f64,
    pub iterations: usize,
    pub step_size: f64,
    pub lambda_init: f64,
    pub lambda_decay: f64,
    pub seed: u64,
    /// Block storage controller. When off, moving blocks always go out at `high_sr`.
    pub block_storage: bool,
    /// Per-frame threshold adaptation. When off, `threshold_init` is used for every frame.
    pub dynamic_threshold: bool,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            block_size: 32,
            high_sr: 0.20,
            target_sr: 0.01,
            frame_count: 100,
            width: 0,
            height: 0,
            threshold_init: 0.04,
            threshold_gamma: 0.1,
            threshold_min: 0.005,
            threshold_max: 0.5,
            cut_fraction: 0.25,
            initial_storage_fraction: 0.5,
            iterations: 60,
            step_size: 1.0,
            lambda_init: 20.0,
            lambda_decay: 0.9,
            seed: 0x5eed,
            block_storage: true,
            dynamic_threshold: true,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "block_size",
    "high_sr",
    "target_sr",
    "frame_count",
    "width",
    "height",
    "threshold_init",
    "threshold_gamma",
    "threshold_min",
    "threshold_max",
    "cut_fraction",
    "initial_storage_fraction",
    "iterations",
    "step_size",
    "lambda_init",
    "lambda_decay",
    "seed",
    "block_storage",
    "dynamic_threshold",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

impl CodecConfig {
    /// Pixels per block, `B²`.
    pub fn block_pixels(&self) -> usize {
        self.block_size * self.block_size
    }

    /// Rows of the full-rate operator, `floor(SR_h · B²)`.
    pub fn high_rows(&self) -> usize {
        (self.high_sr * self.block_pixels() as f64).floor() as usize
    }

    /// Checks every invariant that does not depend on the input sequence.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.block_size < 8 {
            return bad(format!("block_size must be >= 8, got {}", self.block_size));
        }
        if self.block_size > u16::MAX as usize {
            return bad("block_size does not fit the stream header".into());
        }
        if !(self.high_sr > 0.0 && self.high_sr <= 1.0) {
            return bad(format!("high_sr must be in (0, 1], got {}", self.high_sr));
        }
        if !(self.target_sr > 0.0 && self.target_sr < 1.0) {
            return bad(format!("target_sr must be in (0, 1), got {}", self.target_sr));
        }
        if self.high_sr <= self.target_sr {
            return bad(format!(
                "high_sr ({}) must exceed target_sr ({})",
                self.high_sr, self.target_sr
            ));
        }
        if self.high_rows() < 2 {
            return bad(format!(
                "high_sr * block_size^2 must be >= 2 (got {} rows)",
                self.high_rows()
            ));
        }
        if !(self.threshold_min > 0.0
            && self.threshold_min <= self.threshold_init
            && self.threshold_init <= self.threshold_max
            && self.threshold_max.is_finite())
        {
            return bad(format!(
                "thresholds must satisfy 0 < min <= init <= max, got {} / {} / {}",
                self.threshold_min, self.threshold_init, self.threshold_max
            ));
        }
        if !(self.threshold_gamma > 0.0 && self.threshold_gamma < 1.0) {
            return bad(format!("threshold_gamma must be in (0, 1), got {}", self.threshold_gamma));
        }
        if !(self.cut_fraction > 0.0 && self.cut_fraction <= 1.0) {
            return bad(format!("cut_fraction must be in (0, 1], got {}", self.cut_fraction));
        }
        if !(self.initial_storage_fraction >= 0.0 && self.initial_storage_fraction.is_finite()) {
            return bad("initial_storage_fraction must be a nonnegative number".into());
        }
        if self.iterations == 0 {
            return bad("iterations must be >= 1".into());
        }
        if !(self.step_size > 0.0 && self.step_size <= 1.0) {
            return bad(format!("step_size must be in (0, 1], got {}", self.step_size));
        }
        if !(self.lambda_init >= 0.0 && self.lambda_init.is_finite()) {
            return bad("lambda_init must be a nonnegative number".into());
        }
        if !(self.lambda_decay > 0.0 && self.lambda_decay <= 1.0) {
            return bad(format!("lambda_decay must be in (0, 1], got {}", self.lambda_decay));
        }
        Ok(())
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "block_size" => self.block_size = parse(key, value)?,
            "high_sr" => self.high_sr = parse(key, value)?,
            "target_sr" => self.target_sr = parse(key, value)?,
            "frame_count" => self.frame_count = parse(key, value)?,
            "width" => self.width = parse(key, value)?,
            "height" => self.height = parse(key, value)?,
            "threshold_init" => self.threshold_init = parse(key, value)?,
            "threshold_gamma" => self.threshold_gamma = parse(key, value)?,
            "threshold_min" => self.threshold_min = parse(key, value)?,
            "threshold_max" => self.threshold_max = parse(key, value)?,
            "cut_fraction" => self.cut_fraction = parse(key, value)?,
            "initial_storage_fraction" => self.initial_storage_fraction = parse(key, value)?,
            "iterations" => self.iterations = parse(key, value)?,
            "step_size" => self.step_size = parse(key, value)?,
            "lambda_init" => self.lambda_init = parse(key, value)?,
            "lambda_decay" => self.lambda_decay = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "block_storage" => self.block_storage = parse(key, value)?,
            "dynamic_threshold" => self.dynamic_threshold = parse(key, value)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line: 0,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Parses a config file on top of the defaults. Blank lines and `#`
    /// comments are ignored; unknown or repeated keys are rejected.
    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `key = value` lines onto `self` without validating.
    pub fn apply_str(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut seen: Vec<&str> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: line_no })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax { line: line_no });
            }
            if seen.contains(&key) {
                return Err(ConfigError::DuplicateKey {
                    line: line_no,
                    key: key.to_string(),
                });
            }
            seen.push(key);
            self.set(key, value).map_err(|e| match e {
                ConfigError::UnknownKey { key, .. } => ConfigError::UnknownKey { line: line_no, key },
                other => other,
            })?;
        }
        Ok(())
    }

    /// Renders every field, one `key = value` per line, in [`CONFIG_KEYS`] order.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "block_size = {}", self.block_size);
        let _ = writeln!(out, "high_sr = {}", self.high_sr);
        let _ = writeln!(out, "target_sr = {}", self.target_sr);
        let _ = writeln!(out, "frame_count = {}", self.frame_count);
        let _ = writeln!(out, "width = {}", self.width);
        let _ = writeln!(out, "height = {}", self.height);
        let _ = writeln!(out, "threshold_init = {}", self.threshold_init);
        let _ = writeln!(out, "threshold_gamma = {}", self.threshold_gamma);
        let _ = writeln!(out, "threshold_min = {}", self.threshold_min);
        let _ = writeln!(out, "threshold_max = {}", self.threshold_max);
        let _ = writeln!(out, "cut_fraction = {}", self.cut_fraction);
        let _ = writeln!(out, "initial_storage_fraction = {}", self.initial_storage_fraction);
        let _ = writeln!(out, "iterations = {}", self.iterations);
        let _ = writeln!(out, "step_size = {}", self.step_size);
        let _ = writeln!(out, "lambda_init = {}", self.lambda_init);
        let _ = writeln!(out, "lambda_decay = {}", self.lambda_decay);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "block_storage = {}", self.block_storage);
        let _ = writeln!(out, "dynamic_threshold = {}", self.dynamic_threshold);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = CodecConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.high_rows(), 204);
    }

    #[test]
    fn round_trips_through_text() {
        let mut cfg = CodecConfig::default();
        cfg.target_sr = 0.05;
        cfg.seed = 99;
        cfg.dynamic_threshold = false;
        let back = CodecConfig::parse_str(&cfg.to_config_string()).unwrap();
        assert_eq!(back, cfg);
        // every documented key is emitted exactly once
        let text = cfg.to_config_string();
        for key in CONFIG_KEYS {
            assert_eq!(text.matches(&format!("{key} =")).count(), 1, "{key}");
        }
    }

    #[test]
    fn comments_and_blank_lines() {
        let cfg = CodecConfig::parse_str("# header\n\nhigh_sr = 0.3 # inline\n").unwrap();
        assert_eq!(cfg.high_sr, 0.3);
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let err = CodecConfig::parse_str("high_sr = 0.2\nfoo = 1\n").unwrap_err();
        assert_eq!(err, ConfigError::UnknownKey { line: 2, key: "foo".into() });
    }

    #[test]
    fn duplicate_and_syntax_errors() {
        assert!(matches!(
            CodecConfig::parse_str("seed = 1\nseed = 2"),
            Err(ConfigError::DuplicateKey { line: 2, .. })
        ));
        assert!(matches!(
            CodecConfig::parse_str("seed 1"),
            Err(ConfigError::Syntax { line: 1 })
        ));
        assert!(matches!(
            CodecConfig::parse_str("seed = x"),
            Err(ConfigError::BadValue { .. })
        ));
    }

    #[test]
    fn infeasible_rates_rejected() {
        let mut cfg = CodecConfig::default();
        cfg.target_sr = 0.2;
        assert!(cfg.validate().is_err());
        cfg.target_sr = 0.3;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn threshold_ordering_enforced() {
        let mut cfg = CodecConfig::default();
        cfg.threshold_min = 0.05;
        assert!(cfg.validate().is_err());
        cfg.threshold_min = 0.0;
        assert!(cfg.validate().is_err());
        cfg.threshold_min = 0.01;
        cfg.threshold_max = 0.03;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn geometry_limits() {
        let mut cfg = CodecConfig::default();
        cfg.block_size = 4;
        assert!(cfg.validate().is_err());
        cfg.block_size = 8;
        cfg.high_sr = 0.03; // floor(0.03 * 64) = 1 row
        cfg.target_sr = 0.01;
        assert!(cfg.validate().is_err());
        cfg.high_sr = 0.04; // 2 rows
        cfg.validate().unwrap();
    }
}
