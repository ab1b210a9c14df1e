//! Run configuration and its `key = value` file format.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: cannot parse `{value}` for `{key}`")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
}

/// How per-cluster growth multipliers are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaMode {
    /// Same multiplier for every cluster.
    Uniform,
    /// Smaller clusters grow more: `min(alpha_max, (n_max / n_k)^gamma)`.
    Adaptive,
}

impl FromStr for AlphaMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(Self::Uniform),
            "adaptive" => Ok(Self::Adaptive),
            other => Err(format!("unknown alpha mode `{other}`")),
        }
    }
}

impl fmt::Display for AlphaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Uniform => "uniform",
            Self::Adaptive => "adaptive",
        })
    }
}

pub const DEFAULT_SEED: u64 = 42;

/// Recommended hyperparameter ranges. Values outside are accepted but
/// reported by [`RunConfig::range_warnings`].
pub const K_RANGE: (usize, usize) = (2, 6);
pub const MULTIPLIER_RANGE: (f64, f64) = (1.0, 3.0);
pub const BANDWIDTH_SCALE_RANGE: (f64, f64) = (0.1, 2.0);

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub k_min: usize,
    pub k_max: usize,
    /// Elbow threshold on the relative SSE improvement.
    pub elbow_threshold: f64,
    pub alpha_mode: AlphaMode,
    pub alpha: f64,
    pub alpha_max: f64,
    pub gamma: f64,
    pub bandwidth_scale: f64,
    /// Smallest ridge added to a cluster covariance before factoring.
    pub lambda_floor: f64,
    pub seed: u64,
    pub restarts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Clamp synthetic values to each column's observed range.
    pub clip_to_range: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            k_min: 2,
            k_max: 6,
            elbow_threshold: 0.10,
            alpha_mode: AlphaMode::Uniform,
            alpha: 2.0,
            alpha_max: 3.0,
            gamma: 0.5,
            bandwidth_scale: 1.0,
            lambda_floor: 1e-8,
            seed: DEFAULT_SEED,
            restarts: 10,
            max_iterations: 300,
            tolerance: 1e-6,
            clip_to_range: false,
        }
    }
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        reason: reason.into(),
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k_min < 1 {
            return Err(invalid("k_min", "must be at least 1"));
        }
        if self.k_max < self.k_min {
            return Err(invalid("k_max", "must be at least k_min"));
        }
        if !(self.elbow_threshold > 0.0 && self.elbow_threshold < 1.0) {
            return Err(invalid("elbow_threshold", "must lie in (0, 1)"));
        }
        if !(self.alpha >= 1.0) || !self.alpha.is_finite() {
            return Err(invalid("alpha", "must be a finite value >= 1"));
        }
        if !(self.alpha_max >= 1.0) || !self.alpha_max.is_finite() {
            return Err(invalid("alpha_max", "must be a finite value >= 1"));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(invalid("gamma", "must be a finite value >= 0"));
        }
        if !(self.bandwidth_scale > 0.0) || !self.bandwidth_scale.is_finite() {
            return Err(invalid("bandwidth_scale", "must be positive"));
        }
        if !(self.lambda_floor >= 0.0) || !self.lambda_floor.is_finite() {
            return Err(invalid("lambda_floor", "must be >= 0"));
        }
        if self.restarts < 1 {
            return Err(invalid("restarts", "must be at least 1"));
        }
        if self.max_iterations < 1 {
            return Err(invalid("max_iterations", "must be at least 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("tolerance", "must be positive"));
        }
        Ok(())
    }

    /// Human-readable notes for settings outside the recommended ranges.
    pub fn range_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let (klo, khi) = K_RANGE;
        if self.k_min < klo || self.k_max > khi {
            out.push(format!(
                "k range [{}, {}] outside recommended [{klo}, {khi}]",
                self.k_min, self.k_max
            ));
        }
        let (alo, ahi) = MULTIPLIER_RANGE;
        let mut check_mult = |name: &str, v: f64| {
            if v < alo || v > ahi {
                out.push(format!("{name} {v} outside recommended [{alo}, {ahi}]"));
            }
        };
        match self.alpha_mode {
            AlphaMode::Uniform => check_mult("alpha", self.alpha),
            AlphaMode::Adaptive => check_mult("alpha_max", self.alpha_max),
        }
        let (blo, bhi) = BANDWIDTH_SCALE_RANGE;
        if self.bandwidth_scale < blo || self.bandwidth_scale > bhi {
            out.push(format!(
                "bandwidth_scale {} outside recommended [{blo}, {bhi}]",
                self.bandwidth_scale
            ));
        }
        out
    }

    /// Applies one `key = value` setting. Keys accept either `_` or `-`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), SetError> {
        fn parse<T: FromStr>(v: &str) -> Result<T, SetError> {
            v.trim().parse().map_err(|_| SetError::BadValue)
        }
        match key.trim().replace('-', "_").as_str() {
            "k_min" => self.k_min = parse(value)?,
            "k_max" => self.k_max = parse(value)?,
            "elbow_threshold" | "delta" => self.elbow_threshold = parse(value)?,
            "alpha_mode" => self.alpha_mode = parse(value)?,
            "alpha" => self.alpha = parse(value)?,
            "alpha_max" => self.alpha_max = parse(value)?,
            "gamma" => self.gamma = parse(value)?,
            "bandwidth_scale" => self.bandwidth_scale = parse(value)?,
            "lambda_floor" => self.lambda_floor = parse(value)?,
            "seed" => self.seed = parse(value)?,
            "restarts" => self.restarts = parse(value)?,
            "max_iterations" => self.max_iterations = parse(value)?,
            "tolerance" => self.tolerance = parse(value)?,
            "clip_to_range" => self.clip_to_range = parse(value)?,
            _ => return Err(SetError::UnknownKey),
        }
        Ok(())
    }

    /// Overlays settings from a line-oriented `key = value` text with `#`
    /// comments. Validation is left to the caller.
    pub fn apply_kv_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (idx, pair) in parse_kv_lines(text)? {
            let (key, value) = pair;
            self.set(&key, &value).map_err(|e| match e {
                SetError::UnknownKey => ConfigError::UnknownKey { line: idx, key },
                SetError::BadValue => ConfigError::BadValue {
                    line: idx,
                    key,
                    value,
                },
            })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetError {
    UnknownKey,
    BadValue,
}

/// Splits `key = value` lines, skipping blanks and `#` comments. Returns
/// 1-based line numbers alongside each pair.
pub fn parse_kv_lines(text: &str) -> Result<Vec<(usize, (String, String))>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or(ConfigError::Syntax { line: i + 1 })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1 });
        }
        out.push((i + 1, (k.to_string(), v.to_string())));
    }
    Ok(out)
}
