//! Flat `key = value` configuration.
//!
//! One assignment per line, `#` starts a comment. Every key is optional and
//! falls back to the shipped experiment. `variants` is a semicolon separated
//! list of `A,B` speed-law pairs.

use std::fmt;
use std::path::PathBuf;

use crate::continuation::ContinuationConfig;
use crate::min_time::{MinTimeParams, SpeedLaw};
use crate::particle::ParticleConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Horizon grid steps `N`.
    pub n_steps: usize,
    /// Sampling step of the closed loop.
    pub dt: f64,
    pub h: f64,
    pub gmres_tol_abs: f64,
    pub gmres_max_iter: usize,
    pub precond_period: f64,
    pub precond_enabled: bool,
    pub admissibility_threshold: f64,
    /// The loop stops once the remaining-time parameter falls to this value.
    pub p_stop: f64,
    pub max_steps: usize,
    pub problem: MinTimeParams,
    pub output_dir: PathBuf,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_steps: 20,
            dt: 1.0 / 200.0,
            h: 1e-8,
            gmres_tol_abs: 1e-5,
            gmres_max_iter: 30,
            precond_period: 0.2,
            precond_enabled: true,
            admissibility_threshold: 1e-1,
            p_stop: 0.005,
            max_steps: 400,
            problem: MinTimeParams::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl SimConfig {
    pub fn continuation(&self) -> ContinuationConfig {
        ContinuationConfig {
            h: self.h,
            gmres_tol_abs: self.gmres_tol_abs,
            gmres_max_iter: self.gmres_max_iter,
            precond_period: self.precond_period,
            ..ContinuationConfig::default()
        }
    }

    pub fn particle(&self) -> ParticleConfig {
        ParticleConfig {
            admissibility_threshold: self.admissibility_threshold,
            ..ParticleConfig::default()
        }
    }

    /// Keeps only variant `k` (0-based).
    pub fn with_single_variant(mut self, k: usize) -> Result<Self, ConfigError> {
        let law = *self.problem.variants.get(k).ok_or_else(|| ConfigError {
            line: 0,
            key: "variants".into(),
            message: format!(
                "variant {} requested but only {} configured",
                k + 1,
                self.problem.variants.len()
            ),
        })?;
        self.problem.variants = vec![law];
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |key: &str, message: &str| {
            Err(ConfigError {
                line: 0,
                key: key.into(),
                message: message.into(),
            })
        };
        let positive = [
            ("dt", self.dt),
            ("h", self.h),
            ("gmres_tol_abs", self.gmres_tol_abs),
            ("precond_period", self.precond_period),
            ("admissibility_threshold", self.admissibility_threshold),
            ("p_stop", self.p_stop),
            ("r_u", self.problem.r_u),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return fail(key, "must be positive and finite");
            }
        }
        if self.n_steps < 2 {
            return fail("N", "must be at least 2");
        }
        if self.gmres_max_iter < 1 {
            return fail("gmres_max_iter", "must be at least 1");
        }
        if self.max_steps < 1 {
            return fail("max_steps", "must be at least 1");
        }
        if self.problem.variants.is_empty() {
            return fail("variants", "at least one A,B pair is required");
        }
        Ok(())
    }
}

/// Rejected configuration, with the offending key and 1-based line
/// (0 when the problem is not tied to a line).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: ", self.line)?;
        }
        write!(f, "key `{}`: {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError {
        line,
        key: key.into(),
        message: format!("cannot parse `{value}`"),
    })
}

fn parse_bool(key: &str, value: &str, line: usize) -> Result<bool, ConfigError> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(ConfigError {
            line,
            key: key.into(),
            message: format!("expected true or false, got `{value}`"),
        }),
    }
}

fn parse_variants(value: &str, line: usize) -> Result<Vec<SpeedLaw>, ConfigError> {
    let err = |message: String| ConfigError {
        line,
        key: "variants".into(),
        message,
    };
    value
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let (a, b) = pair
                .split_once(',')
                .ok_or_else(|| err(format!("expected `A,B`, got `{pair}`")))?;
            let a = a.trim().parse().map_err(|_| err(format!("cannot parse `{a}`")))?;
            let b = b.trim().parse().map_err(|_| err(format!("cannot parse `{b}`")))?;
            Ok(SpeedLaw { a, b })
        })
        .collect()
}

pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let mut cfg = SimConfig::default();
    let mut seen: Vec<String> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError {
            line,
            key: content.into(),
            message: "expected `key = value`".into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if seen.iter().any(|k| k == key) {
            return Err(ConfigError {
                line,
                key: key.into(),
                message: "duplicate key".into(),
            });
        }
        match key {
            "N" => cfg.n_steps = parse_num(key, value, line)?,
            "dt" => cfg.dt = parse_num(key, value, line)?,
            "h" => cfg.h = parse_num(key, value, line)?,
            "gmres_tol_abs" => cfg.gmres_tol_abs = parse_num(key, value, line)?,
            "gmres_max_iter" => cfg.gmres_max_iter = parse_num(key, value, line)?,
            "precond_period" => cfg.precond_period = parse_num(key, value, line)?,
            "precond_enabled" => cfg.precond_enabled = parse_bool(key, value, line)?,
            "admissibility_threshold" => cfg.admissibility_threshold = parse_num(key, value, line)?,
            "p_stop" => cfg.p_stop = parse_num(key, value, line)?,
            "max_steps" => cfg.max_steps = parse_num(key, value, line)?,
            "x0" => cfg.problem.start[0] = parse_num(key, value, line)?,
            "y0" => cfg.problem.start[1] = parse_num(key, value, line)?,
            "xf" => cfg.problem.target[0] = parse_num(key, value, line)?,
            "yf" => cfg.problem.target[1] = parse_num(key, value, line)?,
            "c_u" => cfg.problem.c_u = parse_num(key, value, line)?,
            "r_u" => cfg.problem.r_u = parse_num(key, value, line)?,
            "w_s" => cfg.problem.w_s = parse_num(key, value, line)?,
            "variants" => cfg.problem.variants = parse_variants(value, line)?,
            "output_dir" => cfg.output_dir = PathBuf::from(value),
            _ => {
                return Err(ConfigError {
                    line,
                    key: key.into(),
                    message: "unknown key".into(),
                })
            }
        }
        seen.push(key.to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}
