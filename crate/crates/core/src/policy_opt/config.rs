use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Overlong buffer used for full-size LLM rollouts. The toy task uses a
/// buffer scaled to its own `max_len` instead.
pub const FULL_SCALE_OVERLONG_BUFFER: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioMode {
    /// One importance ratio per token.
    Token,
    /// `exp(mean_t log ratio)` shared by every token of a sequence.
    Sequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdvantageMode {
    /// `(r - mean) / std`
    Standardized,
    /// `r - mean`
    MeanOnly,
}

impl FromStr for RatioMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "token" => Ok(RatioMode::Token),
            "sequence" => Ok(RatioMode::Sequence),
            _ => Err(Error::InvalidConfig(format!("unknown ratio_mode {s:?} (token|sequence)"))),
        }
    }
}

impl fmt::Display for RatioMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RatioMode::Token => "token",
            RatioMode::Sequence => "sequence",
        })
    }
}

impl FromStr for AdvantageMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standardized" => Ok(AdvantageMode::Standardized),
            "mean_only" => Ok(AdvantageMode::MeanOnly),
            _ => Err(Error::InvalidConfig(format!("unknown advantage_mode {s:?} (standardized|mean_only)"))),
        }
    }
}

impl fmt::Display for AdvantageMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdvantageMode::Standardized => "standardized",
            AdvantageMode::MeanOnly => "mean_only",
        })
    }
}

/// Training and toy-task settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub clip_epsilon: f64,
    /// Weight of the advantage-gated SFT term.
    pub gamma: f64,
    pub group_size: usize,
    pub learning_rate: f64,
    pub steps: usize,
    pub ratio_mode: RatioMode,
    pub advantage_mode: AdvantageMode,
    pub kl_enabled: bool,
    pub kl_coef: f64,
    pub max_len: usize,
    pub overlong_buffer: usize,
    pub seed: u64,
    /// Sequence length of the toy task.
    pub positions: usize,
    pub vocab: usize,
    pub num_sources: usize,
    /// Standard deviation of the initial logits.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            clip_epsilon: 0.2,
            gamma: 1.0,
            group_size: 4,
            learning_rate: 12.0,
            steps: 300,
            ratio_mode: RatioMode::Token,
            advantage_mode: AdvantageMode::Standardized,
            kl_enabled: false,
            kl_coef: 0.04,
            max_len: 10,
            overlong_buffer: 2,
            seed: 0,
            positions: 4,
            vocab: 8,
            num_sources: 16,
            init_scale: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.clip_epsilon > 0.0) {
            return fail(format!("clip_epsilon must be > 0, got {}", self.clip_epsilon));
        }
        if !(self.gamma >= 0.0) {
            return fail(format!("gamma must be >= 0, got {}", self.gamma));
        }
        if self.group_size < 2 {
            return fail(format!("group_size must be >= 2, got {}", self.group_size));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return fail(format!("learning_rate must be finite and >= 0, got {}", self.learning_rate));
        }
        if !(self.kl_coef >= 0.0) {
            return fail(format!("kl_coef must be >= 0, got {}", self.kl_coef));
        }
        if self.max_len <= self.overlong_buffer {
            return Err(Error::InvalidBufferConfig { max_len: self.max_len, buffer: self.overlong_buffer });
        }
        if self.positions == 0 || self.vocab < 2 || self.num_sources == 0 {
            return fail("toy task needs positions >= 1, vocab >= 2, num_sources >= 1".into());
        }
        if !(self.init_scale >= 0.0) || !self.init_scale.is_finite() {
            return fail(format!("init_scale must be finite and >= 0, got {}", self.init_scale));
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {value:?}")))
        }
        fn boolean(key: &str, value: &str) -> Result<bool> {
            match value {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(Error::InvalidConfig(format!("{key}: expected a boolean, got {value:?}"))),
            }
        }
        match key {
            "clip_epsilon" => self.clip_epsilon = num(key, value)?,
            "gamma" => self.gamma = num(key, value)?,
            "group_size" => self.group_size = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "steps" => self.steps = num(key, value)?,
            "ratio_mode" => self.ratio_mode = value.parse()?,
            "advantage_mode" => self.advantage_mode = value.parse()?,
            "kl_enabled" => self.kl_enabled = boolean(key, value)?,
            "kl_coef" => self.kl_coef = num(key, value)?,
            "max_len" => self.max_len = num(key, value)?,
            "overlong_buffer" => self.overlong_buffer = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "positions" => self.positions = num(key, value)?,
            "vocab" => self.vocab = num(key, value)?,
            "num_sources" => self.num_sources = num(key, value)?,
            "init_scale" => self.init_scale = num(key, value)?,
            _ => return Err(Error::InvalidConfig(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines on top of the defaults. Blank lines and
    /// `#` comments are ignored; unknown keys are errors.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::InvalidConfig(format!("line {}: {e}", n + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serializes every field as `key = value` lines.
    pub fn to_kv_string(&self) -> String {
        format!(
            "clip_epsilon = {}\ngamma = {}\ngroup_size = {}\nlearning_rate = {}\nsteps = {}\n\
             ratio_mode = {}\nadvantage_mode = {}\nkl_enabled = {}\nkl_coef = {}\nmax_len = {}\n\
             overlong_buffer = {}\nseed = {}\npositions = {}\nvocab = {}\nnum_sources = {}\ninit_scale = {}\n",
            self.clip_epsilon,
            self.gamma,
            self.group_size,
            self.learning_rate,
            self.steps,
            self.ratio_mode,
            self.advantage_mode,
            self.kl_enabled,
            self.kl_coef,
            self.max_len,
            self.overlong_buffer,
            self.seed,
            self.positions,
            self.vocab,
            self.num_sources,
            self.init_scale,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = TrainConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.group_size, 4);
        assert_eq!(cfg.clip_epsilon, 0.2);
        assert!(!cfg.kl_enabled);
    }

    #[test]
    fn kv_round_trip() {
        let mut cfg = TrainConfig::default();
        cfg.gamma = 1.0;
        cfg.ratio_mode = RatioMode::Sequence;
        cfg.advantage_mode = AdvantageMode::MeanOnly;
        cfg.seed = 42;
        assert_eq!(TrainConfig::from_kv_str(&cfg.to_kv_string()).unwrap(), cfg);
    }

    #[test]
    fn kv_parsing() {
        let cfg = TrainConfig::from_kv_str("# comment\n\ngamma = 0.2  # trailing\nsteps=5\n").unwrap();
        assert_eq!(cfg.gamma, 0.2);
        assert_eq!(cfg.steps, 5);
        assert!(TrainConfig::from_kv_str("bogus = 1").is_err());
        assert!(TrainConfig::from_kv_str("gamma").is_err());
        assert!(TrainConfig::from_kv_str("gamma = x").is_err());
        assert!(TrainConfig::from_kv_str("group_size = 1").is_err());
        assert!(matches!(
            TrainConfig::from_kv_str("max_len = 2\noverlong_buffer = 2"),
            Err(Error::InvalidBufferConfig { .. })
        ));
    }
}
