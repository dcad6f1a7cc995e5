//! Market parameters, operator strategy, and config parsing.
//!
//! [`MarketParams`] gathers the cost/value constants of the market and the
//! user-type distribution; [`OperatorStrategy`] is the operator's decision
//! pair (price `p`, free-quota ratio `delta`); [`RunSettings`] carries
//! run-level knobs (dynamics tolerance, iteration cap, damping, a concrete
//! strategy, and an optional explicit membership state).
//!
//! Configs are flat `key = value` text files with section prefixes:
//! `params.*` keys map onto [`MarketParams`] fields and `run.*` keys onto
//! [`RunSettings`] fields.  Blank lines and `#` comments are ignored.
//! Unknown keys are a hard error naming the key; so are unparsable values
//! and constraint violations.

use crate::dist::TypeDistribution;
use std::path::Path;
use thiserror::Error;

/// All market constants of the model.
///
/// Money fields are per byte except the per-slot membership costs `c_h`
/// and `c_c`; `lambda` is the average number of neighbours a user meets
/// per slot.
#[derive(Debug, Clone)]
pub struct MarketParams {
    /// Average data value per byte for a host.
    pub v_bar_h: f64,
    /// Average data value per byte for a client.
    pub v_bar_c: f64,
    /// Time-average cost per slot of being a host.
    pub c_h: f64,
    /// Time-average cost per slot of being a client.
    pub c_c: f64,
    /// Host transmission cost per byte of own data.
    pub gamma_h: f64,
    /// Host transmission cost per byte of client data.
    pub gamma_hc: f64,
    /// Client transmission cost per byte.
    pub gamma_c: f64,
    /// Operator's resource leasing cost per byte.
    pub omega: f64,
    /// Average neighbours met per slot (λ = N·ρ).
    pub lambda: f64,
    /// Upper bound of the operator's price search box.
    pub p_max: f64,
    /// Density of user types on [0, 1].
    pub type_distribution: TypeDistribution,
}

impl MarketParams {
    /// The evaluation setting used throughout: v̄_h=15, v̄_c=10, c_h=5,
    /// c_c=1, γ_h=0.5, γ_hc=1, γ_c=0.1, ω=0.5, λ=5, uniform types, and
    /// p_max defaulted to v̄_h.
    pub fn baseline() -> Self {
        MarketParams {
            v_bar_h: 15.0,
            v_bar_c: 10.0,
            c_h: 5.0,
            c_c: 1.0,
            gamma_h: 0.5,
            gamma_hc: 1.0,
            gamma_c: 0.1,
            omega: 0.5,
            lambda: 5.0,
            p_max: 15.0,
            type_distribution: TypeDistribution::Uniform,
        }
    }

    /// Returns a copy with a different λ, leaving everything else as is.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        let mut p = self.clone();
        p.lambda = lambda;
        p
    }

    /// Checks the structural invariants: nonnegative money fields and λ,
    /// strictly positive p_max, `c_h > c_c`, and a normalized type
    /// density.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let money = [
            ("v_bar_h", self.v_bar_h),
            ("v_bar_c", self.v_bar_c),
            ("c_h", self.c_h),
            ("c_c", self.c_c),
            ("gamma_h", self.gamma_h),
            ("gamma_hc", self.gamma_hc),
            ("gamma_c", self.gamma_c),
            ("omega", self.omega),
        ];
        for (name, v) in money {
            if !v.is_finite() || v < 0.0 {
                return Err(ConfigError::Constraint(format!(
                    "params.{name} must be a finite nonnegative number, got {v}"
                )));
            }
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(ConfigError::Constraint(format!(
                "params.lambda must be finite and ≥ 0, got {}",
                self.lambda
            )));
        }
        if !self.p_max.is_finite() || self.p_max <= 0.0 {
            return Err(ConfigError::Constraint(format!(
                "params.p_max must be finite and > 0, got {}",
                self.p_max
            )));
        }
        if self.c_h <= self.c_c {
            return Err(ConfigError::Constraint(format!(
                "params.c_h must exceed params.c_c (hosting is the costlier membership), got c_h={} c_c={}",
                self.c_h, self.c_c
            )));
        }
        if !self.type_distribution.is_normalized() {
            return Err(ConfigError::Constraint(
                "params.type_distribution does not integrate to 1 over [0,1]".into(),
            ));
        }
        Ok(())
    }
}

impl Default for MarketParams {
    fn default() -> Self {
        MarketParams::baseline()
    }
}

/// The operator's decision pair: unit price and free-quota ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorStrategy {
    /// Unit price per byte, within [0, p_max].
    pub p: f64,
    /// Free-quota ratio δ ∈ [0, 1]: a host is rebated δ·p per client byte
    /// it forwards.
    pub delta: f64,
}

impl OperatorStrategy {
    /// Creates a strategy without box checks (use [`validate`] against
    /// concrete params).
    ///
    /// [`validate`]: OperatorStrategy::validate
    pub fn new(p: f64, delta: f64) -> Self {
        OperatorStrategy { p, delta }
    }

    /// Checks the strategy box 0 ≤ p ≤ p_max, 0 ≤ δ ≤ 1.
    pub fn validate(&self, params: &MarketParams) -> Result<(), ConfigError> {
        if !self.p.is_finite() || self.p < 0.0 || self.p > params.p_max {
            return Err(ConfigError::Constraint(format!(
                "run.p must lie in [0, p_max={}], got {}",
                params.p_max, self.p
            )));
        }
        if !self.delta.is_finite() || !(0.0..=1.0).contains(&self.delta) {
            return Err(ConfigError::Constraint(format!(
                "run.delta must lie in [0, 1], got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Run-level knobs parsed from the `run.*` config section.
#[derive(Debug, Clone)]
pub struct RunSettings {
    /// Strategy price, if supplied (`run.p`).
    pub p: Option<f64>,
    /// Strategy free-quota ratio, if supplied (`run.delta`).
    pub delta: Option<f64>,
    /// Sup-norm stopping tolerance for the best-response dynamics.
    pub tol: f64,
    /// Iteration cap for the dynamics.
    pub max_iter: usize,
    /// Damping factor α ∈ (0, 1]; 1 is the undamped update.
    pub damping: f64,
    /// Explicit client fraction for Monte-Carlo validation (`run.mu_c`).
    pub mu_c: Option<f64>,
    /// Explicit host fraction for Monte-Carlo validation (`run.mu_h`).
    pub mu_h: Option<f64>,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            p: None,
            delta: None,
            tol: 1e-9,
            max_iter: 10_000,
            damping: 1.0,
            mu_c: None,
            mu_h: None,
        }
    }
}

impl RunSettings {
    /// The strategy from `run.p` / `run.delta`, or an error naming the
    /// first missing key.
    pub fn strategy(&self) -> Result<OperatorStrategy, ConfigError> {
        match (self.p, self.delta) {
            (Some(p), Some(delta)) => Ok(OperatorStrategy::new(p, delta)),
            (None, _) => Err(ConfigError::MissingKey { key: "run.p".into() }),
            (_, None) => Err(ConfigError::MissingKey { key: "run.delta".into() }),
        }
    }
}

/// Errors raised while loading or validating a config.
#[derive(Debug, Error)]
pub enum ConfigError {
    /// A key not belonging to the schema.
    #[error("unknown config key `{key}`")]
    UnknownKey { key: String },
    /// A value that failed to parse for its key.
    #[error("invalid value `{value}` for config key `{key}`: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    /// A required key that was not supplied.
    #[error("missing required config key `{key}`")]
    MissingKey { key: String },
    /// A line without a `key = value` shape.
    #[error("malformed config line {line}: expected `key = value`")]
    MalformedLine { line: usize },
    /// A structural invariant violation after parsing.
    #[error("config constraint violated: {0}")]
    Constraint(String),
    /// Failure to read the config file.
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
}

/// Parses a flat `key = value` config text into parameters and run
/// settings.
///
/// Every key is optional; omitted `params.*` keys keep their baseline
/// values and omitted `run.*` keys keep the documented defaults.  When
/// `params.p_max` is not set explicitly it tracks `params.v_bar_h`.  A
/// repeated key keeps its last assignment.
pub fn parse_config(text: &str) -> Result<(MarketParams, RunSettings), ConfigError> {
    let mut params = MarketParams::baseline();
    let mut run = RunSettings::default();
    let mut p_max_explicit = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or(ConfigError::MalformedLine { line: idx + 1 })?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "params.v_bar_h" => params.v_bar_h = parse_f64(key, value)?,
            "params.v_bar_c" => params.v_bar_c = parse_f64(key, value)?,
            "params.c_h" => params.c_h = parse_f64(key, value)?,
            "params.c_c" => params.c_c = parse_f64(key, value)?,
            "params.gamma_h" => params.gamma_h = parse_f64(key, value)?,
            "params.gamma_hc" => params.gamma_hc = parse_f64(key, value)?,
            "params.gamma_c" => params.gamma_c = parse_f64(key, value)?,
            "params.omega" => params.omega = parse_f64(key, value)?,
            "params.lambda" => params.lambda = parse_f64(key, value)?,
            "params.p_max" => {
                params.p_max = parse_f64(key, value)?;
                p_max_explicit = true;
            }
            "params.type_distribution" => {
                params.type_distribution = parse_distribution(key, value)?;
            }
            "run.p" => run.p = Some(parse_f64(key, value)?),
            "run.delta" => run.delta = Some(parse_f64(key, value)?),
            "run.tol" => run.tol = parse_f64(key, value)?,
            "run.max_iter" => {
                run.max_iter = value.parse().map_err(|e| ConfigError::InvalidValue {
                    key: key.into(),
                    value: value.into(),
                    reason: format!("{e}"),
                })?;
            }
            "run.damping" => run.damping = parse_f64(key, value)?,
            "run.mu_c" => run.mu_c = Some(parse_f64(key, value)?),
            "run.mu_h" => run.mu_h = Some(parse_f64(key, value)?),
            other => return Err(ConfigError::UnknownKey { key: other.into() }),
        }
    }

    if !p_max_explicit {
        params.p_max = params.v_bar_h;
    }
    params.validate()?;
    if !run.tol.is_finite() || run.tol <= 0.0 {
        return Err(ConfigError::Constraint(format!(
            "run.tol must be finite and > 0, got {}",
            run.tol
        )));
    }
    if run.max_iter == 0 {
        return Err(ConfigError::Constraint("run.max_iter must be ≥ 1".into()));
    }
    if !run.damping.is_finite() || run.damping <= 0.0 || run.damping > 1.0 {
        return Err(ConfigError::Constraint(format!(
            "run.damping must lie in (0, 1], got {}",
            run.damping
        )));
    }
    for (name, v) in [("run.mu_c", run.mu_c), ("run.mu_h", run.mu_h)] {
        if let Some(v) = v {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::Constraint(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
    }
    if let (Some(mc), Some(mh)) = (run.mu_c, run.mu_h) {
        if mc + mh > 1.0 + 1e-12 {
            return Err(ConfigError::Constraint(format!(
                "run.mu_c + run.mu_h must not exceed 1, got {}",
                mc + mh
            )));
        }
    }
    Ok((params, run))
}

/// Loads and parses a config file from disk.
pub fn load_config(path: &Path) -> Result<(MarketParams, RunSettings), ConfigError> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    value.parse::<f64>().map_err(|e| ConfigError::InvalidValue {
        key: key.into(),
        value: value.into(),
        reason: format!("{e}"),
    })
}

/// Parses a distribution spec: `uniform` or `beta:<alpha>,<beta>`.
fn parse_distribution(key: &str, value: &str) -> Result<TypeDistribution, ConfigError> {
    if value == "uniform" {
        return Ok(TypeDistribution::Uniform);
    }
    if let Some(rest) = value.strip_prefix("beta:") {
        let bad = |reason: &str| ConfigError::InvalidValue {
            key: key.into(),
            value: value.into(),
            reason: reason.into(),
        };
        let (a, b) = rest.split_once(',').ok_or_else(|| bad("expected `beta:<alpha>,<beta>`"))?;
        let alpha: f64 = a.trim().parse().map_err(|_| bad("alpha is not a number"))?;
        let beta: f64 = b.trim().parse().map_err(|_| bad("beta is not a number"))?;
        return TypeDistribution::beta(alpha, beta)
            .ok_or_else(|| bad("shape parameters must be positive and finite"));
    }
    Err(ConfigError::InvalidValue {
        key: key.into(),
        value: value.into(),
        reason: "expected `uniform` or `beta:<alpha>,<beta>`".into(),
    })
}
