//! Flat key-value run configuration.
//!
//! A config file is UTF-8 text, one `key = value` per line, `#` comments.
//! Unknown keys are errors (listing the valid keys), so typos surface
//! instead of silently using defaults.

use std::path::PathBuf;

use thiserror::Error;

use crate::ars::ArsConfig;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "TASKMON_OUT";

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Point-robot dynamics noise standard deviation.
    pub noise_sigma: f64,
    /// Episode horizon override; each environment has its own default.
    pub horizon: Option<usize>,
    pub ars: ArsConfig,
    /// Run a satisfaction estimate every this many iterations.
    pub eval_every: usize,
    /// Rollouts per satisfaction estimate.
    pub eval_rollouts: usize,
    /// Finite stand-in for +∞ register initialization.
    pub sentinel: f64,
    /// One constraint register per top-level conjunct of an `ensuring`.
    pub split_conjuncts: bool,
    /// Overrides for the estimated shaping constants.
    pub c_upper: Option<f64>,
    pub c_lower: Option<f64>,
    /// Opt-in policy input scaling.
    pub normalize_inputs: bool,
    /// Training-rollout budget override; benchmarks carry their own.
    pub budget: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            noise_sigma: 0.05,
            horizon: None,
            ars: ArsConfig::default(),
            eval_every: 25,
            eval_rollouts: 100,
            sentinel: crate::monitor::DEFAULT_SENTINEL,
            split_conjuncts: true,
            c_upper: None,
            c_lower: None,
            normalize_inputs: false,
            budget: None,
            out_dir: None,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "noise_sigma",
    "horizon",
    "directions",
    "top_directions",
    "step_size",
    "perturb_stddev",
    "rollouts_per_eval",
    "eval_every",
    "eval_rollouts",
    "sentinel",
    "split_conjuncts",
    "c_upper",
    "c_lower",
    "normalize_inputs",
    "budget",
    "out_dir",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown key `{key}` (valid keys: {})", CONFIG_KEYS.join(", "))]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {value}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
}

impl RunConfig {
    pub fn apply(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let bad = |k: &str, v: &str| ConfigError::BadValue {
            line,
            key: k.to_string(),
            value: v.to_string(),
        };
        match key {
            "noise_sigma" => self.noise_sigma = value.parse().map_err(|_| bad(key, value))?,
            "horizon" => self.horizon = Some(value.parse().map_err(|_| bad(key, value))?),
            "directions" => self.ars.directions = value.parse().map_err(|_| bad(key, value))?,
            "top_directions" => {
                self.ars.top_directions = value.parse().map_err(|_| bad(key, value))?
            }
            "step_size" => self.ars.step_size = value.parse().map_err(|_| bad(key, value))?,
            "perturb_stddev" => {
                self.ars.perturb_stddev = value.parse().map_err(|_| bad(key, value))?
            }
            "rollouts_per_eval" => {
                self.ars.rollouts_per_eval = value.parse().map_err(|_| bad(key, value))?
            }
            "eval_every" => self.eval_every = value.parse().map_err(|_| bad(key, value))?,
            "eval_rollouts" => self.eval_rollouts = value.parse().map_err(|_| bad(key, value))?,
            "sentinel" => self.sentinel = value.parse().map_err(|_| bad(key, value))?,
            "split_conjuncts" => {
                self.split_conjuncts = value.parse().map_err(|_| bad(key, value))?
            }
            "c_upper" => self.c_upper = Some(value.parse().map_err(|_| bad(key, value))?),
            "c_lower" => self.c_lower = Some(value.parse().map_err(|_| bad(key, value))?),
            "normalize_inputs" => {
                self.normalize_inputs = value.parse().map_err(|_| bad(key, value))?
            }
            "budget" => self.budget = Some(value.parse().map_err(|_| bad(key, value))?),
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let stripped = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            let stripped = stripped.trim();
            if stripped.is_empty() {
                continue;
            }
            let Some((key, value)) = stripped.split_once('=') else {
                return Err(ConfigError::Malformed {
                    line,
                    text: stripped.to_string(),
                });
            };
            self.apply(key.trim(), value.trim(), line)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Output directory: explicit setting, then the environment variable,
    /// then `./taskmon-out`.
    pub fn resolve_out_dir(&self) -> PathBuf {
        if let Some(dir) = &self.out_dir {
            return dir.clone();
        }
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            if !dir.is_empty() {
                return PathBuf::from(dir);
            }
        }
        PathBuf::from("taskmon-out")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_overrides_and_comments() {
        let text = "\
# run setup
noise_sigma = 0.1
directions = 8
top_directions = 4
split_conjuncts = false
budget = 5000   # small smoke run
";
        let cfg = RunConfig::from_text(text).unwrap();
        assert_eq!(cfg.noise_sigma, 0.1);
        assert_eq!(cfg.ars.directions, 8);
        assert_eq!(cfg.ars.top_directions, 4);
        assert!(!cfg.split_conjuncts);
        assert_eq!(cfg.budget, Some(5000));
        // untouched defaults
        assert_eq!(cfg.eval_every, 25);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = RunConfig::from_text("directiosn = 8").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown key `directiosn`"));
        assert!(msg.contains("directions"));
    }

    #[test]
    fn bad_value_reports_line() {
        let err = RunConfig::from_text("\n\nbudget = lots").unwrap_err();
        assert!(err.to_string().contains("line 3"));
    }
}
