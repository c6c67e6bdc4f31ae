//! Run configuration as flat `section.key = value` text.
//!
//! Every key has a default; a file overrides defaults and `XIRPGAN_*`
//! environment variables override the file (`gan.batch_size` is read from
//! `XIRPGAN_GAN_BATCH_SIZE`). [`RunConfig::to_text`] prints every key so a
//! manifest records the full effective configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;
use xirpgan_core::eval::{default_alpha_grid, EvalConfig};
use xirpgan_core::series::Frequency;
use xirpgan_core::shapley::SurrogateConfig;
use xirpgan_core::wgan::GanConfig;
use xirpgan_core::xirp::DecodeMode;

pub const ENV_PREFIX: &str = "XIRPGAN_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Per-frequency number of trailing observations kept at ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truncation {
    pub daily: usize,
    pub weekly: usize,
    pub monthly: usize,
    pub quarterly: usize,
    pub yearly: usize,
    pub other: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { daily: 1000, weekly: 500, monthly: 250, quarterly: 100, yearly: 75, other: 1000 }
    }
}

impl Truncation {
    pub fn length(&self, f: Frequency) -> usize {
        match f {
            Frequency::Daily => self.daily,
            Frequency::Weekly => self.weekly,
            Frequency::Monthly => self.monthly,
            Frequency::Quarterly => self.quarterly,
            Frequency::Yearly => self.yearly,
            Frequency::Other => self.other,
        }
    }
}

/// Which optional score columns enter the surrogate for each target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureSets {
    pub s_p: bool,
    pub s_d: bool,
    pub s_a: bool,
    pub alpha_star: bool,
}

impl Default for FeatureSets {
    fn default() -> Self {
        Self { s_p: false, s_d: false, s_a: true, alpha_star: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub output: PathBuf,
    pub inputs: Vec<PathBuf>,
    pub frequency: Frequency,
    /// Dataset ids to keep; empty keeps all.
    pub select: Vec<String>,
    pub jobs: usize,
    pub window: usize,
    pub stride: usize,
    /// Shortest accepted series; 0 means `window + 1`.
    pub min_length: usize,
    pub truncation: Truncation,
    pub scale_lo: f64,
    pub scale_hi: f64,
    pub decode: DecodeMode,
    /// Synthetic windows generated per real window.
    pub synthetic_multiplier: f64,
    /// Sampled XIRPs written per dataset for inspection.
    pub xirp_exports: usize,
    pub gan: GanConfig,
    pub eval: EvalConfig,
    pub surrogate: SurrogateConfig,
    /// Ljung-Box lags for the attribution features; 0 picks `min(10, n/5)`.
    pub lags: usize,
    pub feature_sets: FeatureSets,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output: PathBuf::from("out"),
            inputs: Vec::new(),
            frequency: Frequency::Daily,
            select: Vec::new(),
            jobs: 1,
            window: 28,
            stride: 1,
            min_length: 0,
            truncation: Truncation::default(),
            scale_lo: 0.1,
            scale_hi: 1.0,
            decode: DecodeMode::Average,
            synthetic_multiplier: 2.0,
            xirp_exports: 4,
            gan: GanConfig::default(),
            eval: EvalConfig::default(),
            surrogate: SurrogateConfig::default(),
            lags: 0,
            feature_sets: FeatureSets::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::InvalidValue { key: key.into(), value: value.into(), reason: e.to_string() })
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse(key, s)).collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

pub fn parse_alpha_grid(value: &str) -> Result<Vec<f64>, ConfigError> {
    parse_list("eval.alpha_grid", value)
}

impl RunConfig {
    /// Shortest series accepted at ingestion.
    pub fn effective_min_length(&self) -> usize {
        if self.min_length == 0 {
            self.window + 1
        } else {
            self.min_length
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "run.seed" => self.seed = parse(key, v)?,
            "run.output" => self.output = PathBuf::from(v),
            "run.inputs" => self.inputs = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(PathBuf::from).collect(),
            "run.frequency" => self.frequency = parse(key, v)?,
            "run.select" => self.select = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect(),
            "run.jobs" => self.jobs = parse(key, v)?,
            "series.window" => self.window = parse(key, v)?,
            "series.stride" => self.stride = parse(key, v)?,
            "series.min_length" => self.min_length = parse(key, v)?,
            "series.scale_lo" => self.scale_lo = parse(key, v)?,
            "series.scale_hi" => self.scale_hi = parse(key, v)?,
            "truncate.daily" => self.truncation.daily = parse(key, v)?,
            "truncate.weekly" => self.truncation.weekly = parse(key, v)?,
            "truncate.monthly" => self.truncation.monthly = parse(key, v)?,
            "truncate.quarterly" => self.truncation.quarterly = parse(key, v)?,
            "truncate.yearly" => self.truncation.yearly = parse(key, v)?,
            "truncate.other" => self.truncation.other = parse(key, v)?,
            "sample.decode" => self.decode = parse(key, v)?,
            "sample.multiplier" => self.synthetic_multiplier = parse(key, v)?,
            "sample.xirp_exports" => self.xirp_exports = parse(key, v)?,
            "gan.latent_dim" => self.gan.latent_dim = parse(key, v)?,
            "gan.lambda" => self.gan.lambda = parse(key, v)?,
            "gan.critic_steps" => self.gan.critic_steps_per_gen = parse(key, v)?,
            "gan.batch_size" => self.gan.batch_size = parse(key, v)?,
            "gan.generator_steps" => self.gan.generator_steps = parse(key, v)?,
            "gan.generator_lr" => self.gan.generator_lr = parse(key, v)?,
            "gan.critic_lr" => self.gan.critic_lr = parse(key, v)?,
            "gan.beta1" => self.gan.beta1 = parse(key, v)?,
            "gan.beta2" => self.gan.beta2 = parse(key, v)?,
            "gan.generator_hidden" => self.gan.generator_hidden = parse_list(key, v)?,
            "gan.critic_hidden" => self.gan.critic_hidden = parse_list(key, v)?,
            "eval.repetitions" => self.eval.repetitions = parse(key, v)?,
            "eval.patience" => self.eval.patience = parse(key, v)?,
            "eval.train_fraction" => self.eval.train_fraction = parse(key, v)?,
            "eval.alpha_grid" => self.eval.alpha_grid = parse_alpha_grid(v)?,
            "eval.forecaster_hidden" => self.eval.forecaster_hidden = parse_list(key, v)?,
            "eval.classifier_hidden" => self.eval.classifier_hidden = parse_list(key, v)?,
            "eval.max_epochs" => self.eval.max_epochs = parse(key, v)?,
            "eval.batch_size" => self.eval.batch_size = parse(key, v)?,
            "eval.learning_rate" => self.eval.learning_rate = parse(key, v)?,
            "eval.knn_k" => self.eval.knn_k = parse(key, v)?,
            "eval.mixing_cap" => self.eval.mixing_cap = parse(key, v)?,
            "shapley.hidden" => self.surrogate.hidden = parse_list(key, v)?,
            "shapley.max_epochs" => self.surrogate.max_epochs = parse(key, v)?,
            "shapley.batch_size" => self.surrogate.batch_size = parse(key, v)?,
            "shapley.learning_rate" => self.surrogate.learning_rate = parse(key, v)?,
            "shapley.patience" => self.surrogate.patience = parse(key, v)?,
            "shapley.train_fraction" => self.surrogate.train_fraction = parse(key, v)?,
            "shapley.min_instances" => self.surrogate.min_instances = parse(key, v)?,
            "shapley.lags" => self.lags = parse(key, v)?,
            "shapley.scores_for.s_p" => self.feature_sets.s_p = parse(key, v)?,
            "shapley.scores_for.s_d" => self.feature_sets.s_d = parse(key, v)?,
            "shapley.scores_for.s_a" => self.feature_sets.s_a = parse(key, v)?,
            "shapley.scores_for.alpha_star" => self.feature_sets.alpha_star = parse(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Every key with its current value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let t = &self.truncation;
        let g = &self.gan;
        let e = &self.eval;
        let s = &self.surrogate;
        let f = &self.feature_sets;
        vec![
            ("run.seed", self.seed.to_string()),
            ("run.output", self.output.display().to_string()),
            ("run.inputs", self.inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",")),
            ("run.frequency", self.frequency.to_string()),
            ("run.select", self.select.join(",")),
            ("run.jobs", self.jobs.to_string()),
            ("series.window", self.window.to_string()),
            ("series.stride", self.stride.to_string()),
            ("series.min_length", self.min_length.to_string()),
            ("series.scale_lo", self.scale_lo.to_string()),
            ("series.scale_hi", self.scale_hi.to_string()),
            ("truncate.daily", t.daily.to_string()),
            ("truncate.weekly", t.weekly.to_string()),
            ("truncate.monthly", t.monthly.to_string()),
            ("truncate.quarterly", t.quarterly.to_string()),
            ("truncate.yearly", t.yearly.to_string()),
            ("truncate.other", t.other.to_string()),
            ("sample.decode", self.decode.to_string()),
            ("sample.multiplier", self.synthetic_multiplier.to_string()),
            ("sample.xirp_exports", self.xirp_exports.to_string()),
            ("gan.latent_dim", g.latent_dim.to_string()),
            ("gan.lambda", g.lambda.to_string()),
            ("gan.critic_steps", g.critic_steps_per_gen.to_string()),
            ("gan.batch_size", g.batch_size.to_string()),
            ("gan.generator_steps", g.generator_steps.to_string()),
            ("gan.generator_lr", g.generator_lr.to_string()),
            ("gan.critic_lr", g.critic_lr.to_string()),
            ("gan.beta1", g.beta1.to_string()),
            ("gan.beta2", g.beta2.to_string()),
            ("gan.generator_hidden", join(&g.generator_hidden)),
            ("gan.critic_hidden", join(&g.critic_hidden)),
            ("eval.repetitions", e.repetitions.to_string()),
            ("eval.patience", e.patience.to_string()),
            ("eval.train_fraction", e.train_fraction.to_string()),
            ("eval.alpha_grid", join(&e.alpha_grid)),
            ("eval.forecaster_hidden", join(&e.forecaster_hidden)),
            ("eval.classifier_hidden", join(&e.classifier_hidden)),
            ("eval.max_epochs", e.max_epochs.to_string()),
            ("eval.batch_size", e.batch_size.to_string()),
            ("eval.learning_rate", e.learning_rate.to_string()),
            ("eval.knn_k", e.knn_k.to_string()),
            ("eval.mixing_cap", e.mixing_cap.to_string()),
            ("shapley.hidden", join(&s.hidden)),
            ("shapley.max_epochs", s.max_epochs.to_string()),
            ("shapley.batch_size", s.batch_size.to_string()),
            ("shapley.learning_rate", s.learning_rate.to_string()),
            ("shapley.patience", s.patience.to_string()),
            ("shapley.train_fraction", s.train_fraction.to_string()),
            ("shapley.min_instances", s.min_instances.to_string()),
            ("shapley.lags", self.lags.to_string()),
            ("shapley.scores_for.s_p", f.s_p.to_string()),
            ("shapley.scores_for.s_d", f.s_d.to_string()),
            ("shapley.scores_for.s_a", f.s_a.to_string()),
            ("shapley.scores_for.alpha_star", f.alpha_star.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        self.apply_text(&text)
    }

    /// Applies `XIRPGAN_<SECTION>_<KEY>` variables from `vars`.
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(&mut self, vars: I) -> Result<(), ConfigError> {
        let by_env: BTreeMap<String, &'static str> = self.entries().into_iter().map(|(k, _)| (env_name(k), k)).collect();
        let mut hits: Vec<(&'static str, String)> = vars.into_iter().filter_map(|(name, v)| by_env.get(&name).map(|k| (*k, v))).collect();
        hits.sort();
        for (k, v) in hits {
            self.set(k, &v)?;
        }
        Ok(())
    }

    /// Copies the master seed into the nested configs.
    pub fn sync_seeds(&mut self) {
        self.gan.seed = self.seed;
        self.eval.seed = self.seed;
        self.surrogate.seed = self.seed;
        self.eval.window = self.window;
    }
}

/// `gan.batch_size` becomes `XIRPGAN_GAN_BATCH_SIZE`.
pub fn env_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.replace('.', "_").to_uppercase())
}

/// Reduced configuration for quick end-to-end runs on small synthetic data.
pub fn smoke_config() -> RunConfig {
    let mut c = RunConfig::default();
    c.gan.generator_steps = 1000;
    c.gan.batch_size = 16;
    c.gan.generator_hidden = vec![128, 256];
    c.gan.critic_hidden = vec![256, 128];
    c.eval.repetitions = 3;
    c.eval.alpha_grid = (0..=5).map(|i| i as f64 / 10.0).collect();
    c.surrogate.min_instances = 6;
    c
}

/// `0, 0.05, ..., 0.5` rendered for help texts.
pub fn default_alpha_grid_text() -> String {
    join(&default_alpha_grid())
}
