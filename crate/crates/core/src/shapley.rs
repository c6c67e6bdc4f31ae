//! Per-dataset return statistics, a small MLP surrogate from statistics to a
//! score, and exact Shapley attributions of the surrogate by coalition
//! enumeration.

use std::fmt::Write as _;

use ndarray::Array2;
use thiserror::Error;

use crate::eval::{csv_field, split_indices};
use crate::nn::{fit, Activation, Dataset, LossKind, Network, NetworkParams, NetworkSpec, NnError, TrainConfig};
use crate::seed::derive_seed;
use crate::series::{default_lags, ljung_box, log_returns, moments, scale_values, SeriesError, TimeSeries, DEFAULT_SCALE_HI, DEFAULT_SCALE_LO};

#[derive(Debug, Error)]
pub enum ShapleyError {
    #[error("dataset {id} is degenerate: {reason}")]
    DegenerateDataset { id: String, reason: String },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("{0} features exceed the exact-enumeration limit of {MAX_EXACT_FEATURES}")]
    TooManyFeatures(usize),
    #[error("feature count mismatch: expected {expected}, got {got}")]
    FeatureMismatch { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Nn(#[from] NnError),
}

pub type Result<T> = std::result::Result<T, ShapleyError>;

pub const MAX_EXACT_FEATURES: usize = 12;

/// Statistic columns, in fixed order.
pub const BASE_FEATURES: [&str; 6] = ["mean", "variance", "skewness", "kurtosis", "q_raw", "q_abs"];
/// Prior scores appended after the statistics when requested.
pub const SCORE_FEATURES: [&str; 2] = ["s_p", "s_d"];

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub dataset_id: String,
    pub names: Vec<&'static str>,
    pub values: Vec<f64>,
    /// Ljung-Box lag count used for `q_raw` and `q_abs`.
    pub lags: usize,
}

/// Return statistics of a dataset, optionally followed by `(s_p, s_d)`.
///
/// Returns are taken on the raw values when they are all positive and on
/// the positively scaled series otherwise.
pub fn build_features(series: &TimeSeries, scores: Option<(f64, f64)>, lags: Option<usize>) -> Result<FeatureVector> {
    let id = series.id().to_string();
    let degenerate = |reason: String| ShapleyError::DegenerateDataset { id: id.clone(), reason };
    let v = series.values();
    let positive: Vec<f64> = if v.iter().all(|x| *x > 0.0) {
        v.to_vec()
    } else {
        scale_values(v, DEFAULT_SCALE_LO, DEFAULT_SCALE_HI).map_err(|e| degenerate(e.to_string()))?.into_values()
    };
    let r = log_returns(&positive).map_err(|e| degenerate(e.to_string()))?;
    let m = moments(&r).map_err(|e| degenerate(e.to_string()))?;
    let (skew, kurt) = m.higher().map_err(|_| degenerate("returns have zero variance".into()))?;
    let h = lags.unwrap_or_else(|| default_lags(r.len()));
    let lb = |abs| ljung_box(&r, h, abs).map_err(|e: SeriesError| degenerate(e.to_string()));
    let (q_raw, q_abs) = (lb(false)?.q, lb(true)?.q);
    let mut names = BASE_FEATURES.to_vec();
    let mut values = vec![m.mean, m.variance, skew, kurt, q_raw, q_abs];
    if let Some((sp, sd)) = scores {
        names.extend(SCORE_FEATURES);
        values.extend([sp, sd]);
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(degenerate("non-finite statistic".into()));
    }
    Ok(FeatureVector { dataset_id: id, names, values, lags: h })
}

/// Column-wise z-scoring; constant columns map to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let n = rows.len() as f64;
        let m = rows[0].len();
        let mean: Vec<f64> = (0..m).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scale = (0..m)
            .map(|j| {
                let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| if *s > 0.0 { (v - m) / s } else { 0.0 })
            .collect()
    }
}

/// A scalar model over feature vectors.
pub trait Predictor {
    fn n_features(&self) -> usize;

    fn predict_rows(&self, rows: &Array2<f64>) -> Vec<f64>;

    fn predict(&self, x: &[f64]) -> f64 {
        let rows = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("one row");
        self.predict_rows(&rows)[0]
    }
}

impl<F: Fn(&[f64]) -> f64> Predictor for (usize, F) {
    fn n_features(&self) -> usize {
        self.0
    }

    fn predict_rows(&self, rows: &Array2<f64>) -> Vec<f64> {
        rows.rows().into_iter().map(|r| (self.1)(r.as_slice().expect("standard layout"))).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateConfig {
    pub hidden: Vec<usize>,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub train_fraction: f64,
    pub min_instances: usize,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            hidden: vec![10, 10],
            max_epochs: 500,
            batch_size: 16,
            learning_rate: 1e-2,
            patience: 5,
            train_fraction: 0.8,
            min_instances: 10,
            seed: 0,
        }
    }
}

/// MLP on z-scored features predicting a z-scored target, mapped back to the
/// target's units. A constant target yields a constant predictor.
#[derive(Debug, Clone)]
pub struct Surrogate {
    pub network: Network,
    pub params: NetworkParams,
    pub features: Standardizer,
    pub target_mean: f64,
    pub target_scale: f64,
    pub test_mse: f64,
    pub epochs: usize,
}

impl Predictor for Surrogate {
    fn n_features(&self) -> usize {
        self.features.mean.len()
    }

    fn predict_rows(&self, rows: &Array2<f64>) -> Vec<f64> {
        if self.target_scale == 0.0 {
            return vec![self.target_mean; rows.nrows()];
        }
        let z = standardized_matrix(&self.features, rows.rows().into_iter().map(|r| r.to_vec()));
        let out = self.network.forward_flat(&self.params, &z).expect("shape checked at fit time");
        out.iter().map(|o| self.target_mean + self.target_scale * o).collect()
    }
}

fn standardized_matrix(st: &Standardizer, rows: impl ExactSizeIterator<Item = Vec<f64>>) -> Array2<f64> {
    let n = rows.len();
    let m = st.mean.len();
    let flat: Vec<f64> = rows.flat_map(|r| st.apply(&r)).collect();
    Array2::from_shape_vec((n, m), flat).expect("rectangular rows")
}

pub fn fit_surrogate(features: &[Vec<f64>], target: &[f64], cfg: &SurrogateConfig) -> Result<Surrogate> {
    let n = features.len();
    if n < cfg.min_instances.max(2) {
        return Err(ShapleyError::InsufficientData(format!("{n} instances; need at least {}", cfg.min_instances.max(2))));
    }
    if target.len() != n {
        return Err(ShapleyError::FeatureMismatch { expected: n, got: target.len() });
    }
    let m = features[0].len();
    if let Some(r) = features.iter().find(|r| r.len() != m) {
        return Err(ShapleyError::FeatureMismatch { expected: m, got: r.len() });
    }
    if features.iter().flatten().chain(target).any(|v| !v.is_finite()) {
        return Err(ShapleyError::NonFinite("surrogate inputs"));
    }
    let st = Standardizer::fit(features);
    let t_mean = target.iter().sum::<f64>() / n as f64;
    let t_var = target.iter().map(|t| (t - t_mean).powi(2)).sum::<f64>() / n as f64;
    let t_scale = if t_var > 0.0 { t_var.sqrt() } else { 0.0 };
    let spec = NetworkSpec::mlp(m, &cfg.hidden, Activation::Tanh, 1, Activation::Identity, derive_seed(cfg.seed, &["surrogate-init"]));
    let network = Network::new(spec)?;
    let (tr, te) = split_indices(n, cfg.train_fraction, derive_seed(cfg.seed, &["surrogate-split"]));
    let x = standardized_matrix(&st, features.iter().cloned());
    let y = Array2::from_shape_fn((n, 1), |(i, _)| if t_scale > 0.0 { (target[i] - t_mean) / t_scale } else { 0.0 });
    let all = Dataset::new(crate::nn::as_steps(&x), y)?;
    let (train, test) = (all.subset(&tr), all.subset(&te));
    let mse = |o: &Array2<f64>, t: &Array2<f64>| (o - t).mapv(|v| v * v).mean().expect("non-empty");
    let tc = TrainConfig {
        max_epochs: cfg.max_epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        patience: cfg.patience,
        loss: LossKind::Mse,
        seed: derive_seed(cfg.seed, &["surrogate-order"]),
    };
    let outcome = fit(&network, network.init_params(), &train, &test, &tc, mse)?;
    let mut s = Surrogate {
        network,
        params: outcome.params,
        features: st,
        target_mean: t_mean,
        target_scale: t_scale,
        test_mse: 0.0,
        epochs: outcome.epochs,
    };
    let test_rows: Vec<Vec<f64>> = te.iter().map(|&i| features[i].clone()).collect();
    let pred = s.predict_rows(&to_matrix(&test_rows));
    s.test_mse = te.iter().zip(&pred).map(|(&i, p)| (p - target[i]).powi(2)).sum::<f64>() / te.len() as f64;
    Ok(s)
}

pub fn to_matrix(rows: &[Vec<f64>]) -> Array2<f64> {
    let m = rows.first().map_or(0, Vec::len);
    Array2::from_shape_vec((rows.len(), m), rows.iter().flatten().copied().collect()).expect("rectangular rows")
}

fn factorials(m: usize) -> Vec<f64> {
    let mut f = vec![1.0; m + 1];
    for k in 1..=m {
        f[k] = f[k - 1] * k as f64;
    }
    f
}

/// Mean prediction over the background rows with the coalition's features
/// taken from `x`; one entry per coalition bitmask.
fn coalition_values<P: Predictor + ?Sized>(model: &P, x: &[f64], background: &Array2<f64>) -> Vec<f64> {
    let m = x.len();
    let b = background.nrows();
    let mut rows = Array2::zeros((b, m));
    (0..1usize << m)
        .map(|mask| {
            rows.assign(background);
            for j in (0..m).filter(|j| mask >> j & 1 == 1) {
                rows.column_mut(j).fill(x[j]);
            }
            model.predict_rows(&rows).iter().sum::<f64>() / b as f64
        })
        .collect()
}

/// Exact Shapley values of `model` at `x` under the background-substitution
/// value function.
pub fn shapley_exact<P: Predictor + ?Sized>(model: &P, x: &[f64], background: &Array2<f64>) -> Result<Vec<f64>> {
    let m = x.len();
    if m > MAX_EXACT_FEATURES {
        return Err(ShapleyError::TooManyFeatures(m));
    }
    if m != model.n_features() || background.ncols() != m {
        return Err(ShapleyError::FeatureMismatch { expected: model.n_features(), got: if m != model.n_features() { m } else { background.ncols() } });
    }
    if background.nrows() == 0 {
        return Err(ShapleyError::InsufficientData("empty background".into()));
    }
    let v = coalition_values(model, x, background);
    let fact = factorials(m);
    Ok((0..m)
        .map(|i| {
            let bit = 1usize << i;
            (0..1usize << m)
                .filter(|mask| mask & bit == 0)
                .map(|mask| {
                    let s = mask.count_ones() as usize;
                    fact[s] * fact[m - s - 1] / fact[m] * (v[mask | bit] - v[mask])
                })
                .sum()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceAttribution {
    pub dataset_id: String,
    pub phi: Vec<f64>,
    pub feature_values: Vec<f64>,
    pub standardized: Vec<f64>,
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionReport {
    pub target: String,
    pub feature_names: Vec<String>,
    /// Mean surrogate prediction over the background rows.
    pub baseline: f64,
    pub instances: Vec<InstanceAttribution>,
    /// Feature indices by mean |phi| descending, ties by index.
    pub ordering: Vec<usize>,
    pub mean_abs_phi: Vec<f64>,
}

/// Attributes every instance against the full cohort as background.
pub fn attribution_report<P: Predictor + ?Sized>(target: &str, model: &P, feature_names: &[&str], ids: &[String], rows: &[Vec<f64>]) -> Result<AttributionReport> {
    if rows.is_empty() || ids.len() != rows.len() {
        return Err(ShapleyError::InsufficientData("attribution needs one id per non-empty row".into()));
    }
    let background = to_matrix(rows);
    let preds = model.predict_rows(&background);
    let baseline = preds.iter().sum::<f64>() / preds.len() as f64;
    let st = Standardizer::fit(rows);
    let instances = rows
        .iter()
        .zip(ids)
        .zip(&preds)
        .map(|((x, id), p)| {
            Ok(InstanceAttribution {
                dataset_id: id.clone(),
                phi: shapley_exact(model, x, &background)?,
                feature_values: x.clone(),
                standardized: st.apply(x),
                prediction: *p,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let m = feature_names.len();
    let mean_abs_phi: Vec<f64> = (0..m).map(|j| instances.iter().map(|a| a.phi[j].abs()).sum::<f64>() / instances.len() as f64).collect();
    let mut ordering: Vec<usize> = (0..m).collect();
    ordering.sort_by(|&a, &b| mean_abs_phi[b].total_cmp(&mean_abs_phi[a]).then(a.cmp(&b)));
    Ok(AttributionReport {
        target: target.to_string(),
        feature_names: feature_names.iter().map(|s| s.to_string()).collect(),
        baseline,
        instances,
        ordering,
        mean_abs_phi,
    })
}

impl AttributionReport {
    pub fn rank_of(&self, feature: usize) -> usize {
        self.ordering.iter().position(|&j| j == feature).expect("feature index in range") + 1
    }

    /// Largest `|sum(phi) - (prediction - baseline)|` over instances.
    pub fn efficiency_gap(&self) -> f64 {
        self.instances.iter().map(|a| (a.phi.iter().sum::<f64>() - (a.prediction - self.baseline)).abs()).fold(0.0, f64::max)
    }

    /// One row per (instance, feature), grouped by feature rank.
    pub fn to_csv(&self) -> String {
        let mut s = format!("# target={} baseline={} features={}\n", self.target, self.baseline, self.feature_names.join(";"));
        s.push_str("dataset_id,feature,phi,feature_value,feature_rank,feature_z,prediction\n");
        for &j in &self.ordering {
            for a in &self.instances {
                writeln!(s, "{},{},{},{},{},{},{}", csv_field(&a.dataset_id), self.feature_names[j], a.phi[j], a.feature_values[j], self.rank_of(j), a.standardized[j], a.prediction)
                    .expect("string write");
            }
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = format!("# target={}\nfeature,mean_abs_phi,rank\n", self.target);
        for (r, &j) in self.ordering.iter().enumerate() {
            writeln!(s, "{},{},{}", self.feature_names[j], self.mean_abs_phi[j], r + 1).expect("string write");
        }
        s
    }
}
