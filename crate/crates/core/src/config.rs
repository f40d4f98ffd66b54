//! Run configuration: one TOML file, `PROPEL_*` environment overrides, and a
//! global `scale` that maps full-size budgets and counts to desk size.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drl::{RewardMode, RlHyper};
use crate::learn::{HyperGrid, ModelScope, RcSign, TrainConfig};
use crate::scp::{DemandModel, NoiseParams};
use crate::solve::SolveLimits;

pub const ENV_PREFIX: &str = "PROPEL_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
    #[error("toml: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("toml: {0}")]
    Write(#[from] toml::ser::Error),
    #[error("override {key}: {msg}")]
    Override { key: String, msg: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "OPT")]
    Opt,
    #[serde(rename = "PROPB")]
    PropB,
    #[serde(rename = "PROP")]
    Prop,
    #[serde(rename = "PROPEL")]
    Propel,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Opt, Method::PropB, Method::Prop, Method::Propel];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Opt => "OPT",
            Method::PropB => "PROPB",
            Method::Prop => "PROP",
            Method::Propel => "PROPEL",
        }
    }

    pub fn needs_models(self) -> bool {
        self != Method::Opt
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ConfigError::Invalid(format!("unknown method {s:?}")))
    }
}

/// Budgets are in seconds at `scale = 1`; counts are full-size counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub scale: f64,

    pub products: usize,
    pub parts: usize,
    pub periods: usize,
    pub snapshots: usize,
    pub demand_window: bool,

    pub gauss_mean_scale: f64,
    pub gauss_sd_scale: f64,
    pub uniform_halfwidth: f64,
    pub noise_absolute: bool,

    pub train_sl: usize,
    pub train_rl: usize,
    pub test: usize,
    /// Unscaled number of additional test instances.
    pub extra_test: usize,

    pub prop_budget: f64,
    pub total_budget: f64,
    pub step_budget: f64,
    pub label_budget: f64,
    /// Node-count clock instead of wall time.
    pub deterministic: bool,
    pub ticks_per_second: f64,
    pub rel_gap: f64,

    pub tau: f64,
    pub rc_sign: RcSign,
    pub shared_model: bool,
    pub weights_by_value: bool,
    pub lrs: Vec<f64>,
    pub layers: Vec<usize>,
    pub hiddens: Vec<usize>,
    pub epochs: usize,
    pub batch: usize,

    pub m: usize,
    pub t_max: usize,
    pub eps_tolerance: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub rl_lr: f64,
    pub rl_hidden: usize,
    /// Full-size episode count, scaled like the instance counts.
    pub rl_episodes: usize,
    pub reward: RewardMode,
    pub raw_reward: bool,

    pub methods: Vec<Method>,
    /// Evaluation worker threads; 0 uses every core.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let grid = HyperGrid::default();
        let rl = RlHyper::default();
        let noise = NoiseParams::default();
        RunConfig {
            seed: 0,
            scale: 1.0,
            products: 20,
            parts: 10,
            periods: 8,
            snapshots: 20,
            demand_window: false,
            gauss_mean_scale: noise.gauss_mean_scale,
            gauss_sd_scale: noise.gauss_sd_scale,
            uniform_halfwidth: noise.uniform_halfwidth,
            noise_absolute: noise.absolute,
            train_sl: 500,
            train_rl: 100,
            test: 60,
            extra_test: 0,
            prop_budget: 600.0,
            total_budget: 1000.0,
            step_budget: 100.0,
            label_budget: 3000.0,
            deterministic: true,
            ticks_per_second: 100.0,
            rel_gap: 0.01,
            tau: 0.9,
            rc_sign: RcSign::default(),
            shared_model: false,
            weights_by_value: false,
            lrs: grid.lrs,
            layers: grid.layers,
            hiddens: grid.hiddens,
            epochs: grid.epochs,
            batch: grid.batch,
            m: rl.m,
            t_max: rl.t_max,
            eps_tolerance: rl.eps_tolerance,
            gamma: rl.gamma,
            alpha: rl.alpha,
            rl_lr: rl.lr,
            rl_hidden: rl.hidden,
            rl_episodes: 1000,
            reward: rl.reward,
            raw_reward: false,
            methods: Method::ALL.to_vec(),
            workers: 0,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    /// Defaults, then the file at `path` (if any), then `PROPEL_*` variables.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let base = match path {
            Some(p) => std::fs::read_to_string(p)?,
            None => String::new(),
        };
        let cfg: RunConfig = toml::from_str(&base)?;
        let env: HashMap<String, String> = std::env::vars().collect();
        let cfg = cfg.with_overrides(&env)?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Apply `PROPEL_<FIELD>` entries of `vars`. Values are read as TOML
    /// literals, falling back to plain strings.
    pub fn with_overrides(&self, vars: &HashMap<String, String>) -> Result<Self, ConfigError> {
        let mut table: toml::Table = toml::from_str(&self.to_toml()?)?;
        let mut keys: Vec<&String> = vars.keys().filter(|k| k.starts_with(ENV_PREFIX)).collect();
        keys.sort();
        for k in keys {
            let field = k[ENV_PREFIX.len()..].to_ascii_lowercase();
            if !table.contains_key(&field) {
                // Tolerate unrelated variables such as a log filter.
                continue;
            }
            let raw = &vars[k];
            let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.clone()));
            table.insert(field, value);
        }
        toml::Table::try_into(table).map_err(|e: toml::de::Error| ConfigError::Override {
            key: "PROPEL_*".into(),
            msg: e.to_string(),
        })
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return bad(format!("scale must be positive, got {}", self.scale));
        }
        for (name, v) in [
            ("prop_budget", self.prop_budget),
            ("total_budget", self.total_budget),
            ("step_budget", self.step_budget),
            ("label_budget", self.label_budget),
            ("ticks_per_second", self.ticks_per_second),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("products", self.products),
            ("parts", self.parts),
            ("periods", self.periods),
            ("snapshots", self.snapshots),
            ("train_sl", self.train_sl),
            ("train_rl", self.train_rl),
            ("test", self.test),
            ("m", self.m),
            ("epochs", self.epochs),
            ("batch", self.batch),
            ("rl_hidden", self.rl_hidden),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad(format!("tau must lie in (0,1), got {}", self.tau));
        }
        if !(0.0..1.0).contains(&self.rel_gap) {
            return bad(format!("rel_gap must lie in [0,1), got {}", self.rel_gap));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must lie in (0,1], got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0,1], got {}", self.alpha));
        }
        if self.lrs.is_empty() || self.layers.is_empty() || self.hiddens.is_empty() {
            return bad("hyperparameter grid must be nonempty".into());
        }
        if self.methods.is_empty() {
            return bad("method list is empty".into());
        }
        Ok(())
    }

    /// `max(1, floor(n * scale))`.
    pub fn scaled(&self, n: usize) -> usize {
        ((n as f64 * self.scale).floor() as usize).max(1)
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (
            self.scaled(self.train_sl),
            self.scaled(self.train_rl),
            self.scaled(self.test) + self.extra_test,
        )
    }

    /// Clock units per scaled second: ticks in deterministic mode, else 1.
    pub fn clock_rate(&self) -> f64 {
        if self.deterministic {
            self.ticks_per_second
        } else {
            1.0
        }
    }

    /// Scaled budget in clock units (whole ticks, at least one, when deterministic).
    pub fn budget(&self, seconds: f64) -> f64 {
        let b = seconds * self.scale * self.clock_rate();
        if self.deterministic {
            b.floor().max(1.0)
        } else {
            b
        }
    }

    pub fn limits(&self, seconds: f64) -> SolveLimits {
        SolveLimits {
            time_limit: self.budget(seconds),
            rel_gap: self.rel_gap,
            node_limit: None,
            deterministic_clock: self.deterministic,
        }
    }

    pub fn demand_model(&self) -> DemandModel {
        if self.demand_window {
            DemandModel::Window
        } else {
            DemandModel::PerPeriod
        }
    }

    /// Noise for one instance; the meta seed is shared by the dataset.
    pub fn noise(&self, meta_seed: u64, seed: u64) -> NoiseParams {
        NoiseParams {
            gauss_mean_scale: self.gauss_mean_scale,
            gauss_sd_scale: self.gauss_sd_scale,
            uniform_halfwidth: self.uniform_halfwidth,
            absolute: self.noise_absolute,
            meta_seed,
            seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            grid: HyperGrid {
                lrs: self.lrs.clone(),
                layers: self.layers.clone(),
                hiddens: self.hiddens.clone(),
                epochs: self.epochs,
                batch: self.batch,
            },
            scope: if self.shared_model {
                ModelScope::Shared
            } else {
                ModelScope::PerVariable
            },
            weights_by_value: self.weights_by_value,
            val_fraction: 0.2,
            seed: self.seed,
        }
    }

    pub fn rl_hyper(&self) -> RlHyper {
        RlHyper {
            gamma: self.gamma,
            alpha: self.alpha,
            lr: self.rl_lr,
            t_max: self.t_max,
            eps_tolerance: self.eps_tolerance,
            episodes: self.scaled(self.rl_episodes),
            m: self.m,
            hidden: self.rl_hidden,
            reward: self.reward,
            normalize_reward: !self.raw_reward,
            seed: self.seed,
            ..RlHyper::default()
        }
    }
}
