//! Quality assessments of synthetic windows against real ones: a 2-D
//! principal-component embedding with a k-NN mixing score, the predictive
//! score (train on synthetic, test on real), the discriminative score
//! (held-out error of a real-vs-synthetic classifier) and the augmentation
//! sweep over synthetic fractions.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, Array3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::nn::{fit, sigmoid, Activation, Dataset, LossKind, Network, NetworkSpec, NnError, TrainConfig};
use crate::seed::derive_seed;
use crate::series::{spearman, SeriesError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("windows have inconsistent lengths")]
    RaggedWindows,
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub window: usize,
    pub repetitions: usize,
    pub patience: usize,
    pub train_fraction: f64,
    pub alpha_grid: Vec<f64>,
    pub forecaster_hidden: Vec<usize>,
    pub classifier_hidden: Vec<usize>,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub knn_k: usize,
    pub mixing_cap: usize,
    pub seed: u64,
}

/// `0, 0.05, ..., 0.50`.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 * 0.05).collect()
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            window: 28,
            repetitions: 10,
            patience: 5,
            train_fraction: 0.8,
            alpha_grid: default_alpha_grid(),
            forecaster_hidden: vec![7, 7, 7],
            classifier_hidden: vec![8, 8, 8],
            max_epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            knn_k: 10,
            mixing_cap: 500,
            seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(EvalError::InvalidConfig(m));
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return fail(format!("train fraction {} outside (0, 1)", self.train_fraction));
        }
        if let Some(a) = self.alpha_grid.iter().find(|a| !(**a >= 0.0 && **a < 1.0)) {
            return fail(format!("alpha {a} outside [0, 1)"));
        }
        if self.repetitions == 0 {
            return fail("repetitions must be >= 1".into());
        }
        if self.window < 2 {
            return fail("window must be >= 2".into());
        }
        if self.knn_k == 0 || self.batch_size == 0 {
            return fail("knn_k and batch_size must be >= 1".into());
        }
        Ok(())
    }
}

/// Origin of a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Real,
    Synthetic,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Real => "real",
            Source::Synthetic => "synthetic",
        }
    }
}

fn check_windows(windows: &[Vec<f64>], len: usize) -> Result<()> {
    if windows.iter().any(|w| w.len() != len) {
        return Err(EvalError::RaggedWindows);
    }
    Ok(())
}

fn subsample<T: Clone>(items: &[T], cap: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    if items.len() <= cap {
        return items.to_vec();
    }
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(rng);
    idx.truncate(cap);
    idx.sort_unstable();
    idx.into_iter().map(|i| items[i].clone()).collect()
}

// ---------------------------------------------------------------------------
// embedding + mixing

#[derive(Debug, Clone, PartialEq)]
pub struct MixingReport {
    pub coords: Vec<[f64; 2]>,
    pub labels: Vec<Source>,
    pub k: usize,
    /// Mean fraction of opposite-label points among each point's k nearest
    /// neighbours; about 0.5 for indistinguishable populations.
    pub knn_mixing: f64,
}

impl MixingReport {
    /// `x,y,label` rows followed by a `# knn_mixing=` summary line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,label\n");
        for (c, l) in self.coords.iter().zip(&self.labels) {
            writeln!(s, "{},{},{}", c[0], c[1], l.as_str()).expect("string write");
        }
        writeln!(s, "# knn_mixing={} k={} n={}", self.knn_mixing, self.k, self.coords.len()).expect("string write");
        s
    }
}

/// Projects rows onto the top two principal components of the pooled set.
pub fn principal_projection(rows: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let n = rows.len();
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for r in rows {
        mean.iter_mut().zip(r).for_each(|(m, v)| *m += v / n as f64);
    }
    let centered = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
    let cov = centered.transpose() * &centered / (n.max(2) - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut axes = Vec::with_capacity(2);
    for &k in order.iter().take(2) {
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        // fix the sign so the largest-magnitude loading is positive
        let pivot = v.iter().copied().fold(0.0, |a: f64, b| if b.abs() > a.abs() { b } else { a });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        axes.push(v);
    }
    while axes.len() < 2 {
        axes.push(vec![0.0; d]);
    }
    (0..n)
        .map(|i| {
            let row = centered.row(i);
            let p = |a: &[f64]| row.iter().zip(a).map(|(x, y)| x * y).sum::<f64>();
            [p(&axes[0]), p(&axes[1])]
        })
        .collect()
}

/// Mean fraction of opposite-label points among each point's `k` nearest
/// neighbours (Euclidean, self excluded, ties broken by index).
pub fn knn_mixing(coords: &[[f64; 2]], labels: &[Source], k: usize) -> f64 {
    let n = coords.len();
    let k = k.min(n.saturating_sub(1));
    if k == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        dist.clear();
        dist.extend((0..n).filter(|&j| j != i).map(|j| {
            let dx = coords[i][0] - coords[j][0];
            let dy = coords[i][1] - coords[j][1];
            (dx * dx + dy * dy, j)
        }));
        dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let opposite = dist[..k].iter().filter(|(_, j)| labels[*j] != labels[i]).count();
        total += opposite as f64 / k as f64;
    }
    total / n as f64
}

pub fn embedding_mixing(real: &[Vec<f64>], synthetic: &[Vec<f64>], cfg: &EvalConfig) -> Result<MixingReport> {
    if real.is_empty() || synthetic.is_empty() {
        return Err(EvalError::EmptyInput("embedding needs real and synthetic windows"));
    }
    let len = real[0].len();
    check_windows(real, len)?;
    check_windows(synthetic, len)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &["mixing"]));
    let r = subsample(real, cfg.mixing_cap, &mut rng);
    let s = subsample(synthetic, cfg.mixing_cap, &mut rng);
    let labels: Vec<Source> = std::iter::repeat_n(Source::Real, r.len()).chain(std::iter::repeat_n(Source::Synthetic, s.len())).collect();
    let pooled: Vec<Vec<f64>> = r.into_iter().chain(s).collect();
    let coords = principal_projection(&pooled);
    let knn_mixing = knn_mixing(&coords, &labels, cfg.knn_k);
    Ok(MixingReport { coords, labels, k: cfg.knn_k, knn_mixing })
}

// ---------------------------------------------------------------------------
// forecasting

/// Shuffled train/test index split; both parts non-empty.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((n as f64 * train_fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let test = idx.split_off(n_train);
    (idx, test)
}

/// Real train/test windows for repetition `rep`.
pub fn real_split(real: &[Vec<f64>], cfg: &EvalConfig, rep: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let (tr, te) = split_indices(real.len(), cfg.train_fraction, derive_seed(cfg.seed, &["split", &rep.to_string()]));
    (tr.iter().map(|&i| real[i].clone()).collect(), te.iter().map(|&i| real[i].clone()).collect())
}

/// Inputs are the first `len - 1` values, the target is the last one.
pub fn forecast_dataset(windows: &[&[f64]]) -> Dataset {
    let n = windows.len();
    let steps = windows[0].len() - 1;
    let inputs = Array3::from_shape_fn((n, steps, 1), |(i, t, _)| windows[i][t]);
    let targets = Array2::from_shape_fn((n, 1), |(i, _)| windows[i][steps]);
    Dataset { inputs, targets }
}

fn sequence_dataset(windows: &[&[f64]], labels: &[f64]) -> Dataset {
    let n = windows.len();
    let steps = windows[0].len();
    let inputs = Array3::from_shape_fn((n, steps, 1), |(i, t, _)| windows[i][t]);
    let targets = Array2::from_shape_fn((n, 1), |(i, _)| labels[i]);
    Dataset { inputs, targets }
}

fn mae(out: &Array2<f64>, target: &Array2<f64>) -> f64 {
    (out - target).mapv(f64::abs).mean().expect("non-empty")
}

fn rmse(out: &Array2<f64>, target: &Array2<f64>) -> f64 {
    (out - target).mapv(|v| v * v).mean().expect("non-empty").sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecastOutcome {
    pub mae: f64,
    pub rmse: f64,
    pub epochs: usize,
}

/// Trains the LSTM forecaster on `train`, early-stopping on MAE over `test`,
/// and reports the best snapshot's test errors.
pub fn train_forecaster(train: &[&[f64]], test: &[&[f64]], cfg: &EvalConfig, seed: u64) -> Result<ForecastOutcome> {
    if train.is_empty() || test.is_empty() {
        return Err(EvalError::InsufficientData("forecaster needs train and test windows".into()));
    }
    let spec = NetworkSpec::recurrent(1, &cfg.forecaster_hidden, 1, Activation::Identity, derive_seed(seed, &["init"]));
    let net = Network::new(spec)?;
    let train_ds = forecast_dataset(train);
    let test_ds = forecast_dataset(test);
    let tc = TrainConfig {
        max_epochs: cfg.max_epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        patience: cfg.patience,
        loss: LossKind::Mse,
        seed: derive_seed(seed, &["order"]),
    };
    let outcome = fit(&net, net.init_params(), &train_ds, &test_ds, &tc, mae)?;
    let out = net.forward(&outcome.params, &test_ds.inputs)?;
    Ok(ForecastOutcome { mae: mae(&out, &test_ds.targets), rmse: rmse(&out, &test_ds.targets), epochs: outcome.epochs })
}

/// Mean of per-repetition values, summed in repetition order.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatedScore {
    pub mean: f64,
    pub runs: Vec<f64>,
}

impl RepeatedScore {
    fn from_runs(runs: Vec<f64>) -> Self {
        let mean = runs.iter().sum::<f64>() / runs.len() as f64;
        Self { mean, runs }
    }
}

fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
    v.iter().map(Vec::as_slice).collect()
}

fn check_forecast_inputs(real: &[Vec<f64>], cfg: &EvalConfig) -> Result<usize> {
    cfg.validate()?;
    if real.len() < 2 {
        return Err(EvalError::InsufficientData(format!("{} real windows; need at least 2", real.len())));
    }
    let len = real[0].len();
    if len < 2 {
        return Err(EvalError::InsufficientData("windows need at least 2 values".into()));
    }
    check_windows(real, len)?;
    Ok(len)
}

/// Mean real-test MAE of forecasters trained only on synthetic windows.
pub fn predictive_score(real: &[Vec<f64>], synthetic: &[Vec<f64>], cfg: &EvalConfig) -> Result<RepeatedScore> {
    let len = check_forecast_inputs(real, cfg)?;
    if synthetic.is_empty() {
        return Err(EvalError::InsufficientData("no synthetic windows".into()));
    }
    check_windows(synthetic, len)?;
    let runs = (0..cfg.repetitions)
        .map(|rep| {
            let (_, test) = real_split(real, cfg, rep);
            let seed = derive_seed(cfg.seed, &["forecast", &rep.to_string()]);
            Ok(train_forecaster(&refs(synthetic), &refs(&test), cfg, seed)?.mae)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RepeatedScore::from_runs(runs))
}

/// Same protocol as [`predictive_score`] with the real training split as
/// training data.
pub fn real_baseline_score(real: &[Vec<f64>], cfg: &EvalConfig) -> Result<RepeatedScore> {
    check_forecast_inputs(real, cfg)?;
    let runs = (0..cfg.repetitions)
        .map(|rep| {
            let (train, test) = real_split(real, cfg, rep);
            let seed = derive_seed(cfg.seed, &["forecast", &rep.to_string()]);
            Ok(train_forecaster(&refs(&train), &refs(&test), cfg, seed)?.mae)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RepeatedScore::from_runs(runs))
}

// ---------------------------------------------------------------------------
// discrimination

/// Class-balanced labelled set for one repetition: the larger class is
/// subsampled to the size of the smaller one. Label 1 = real.
pub fn balanced_classes(real: &[Vec<f64>], synthetic: &[Vec<f64>], rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = real.len().min(synthetic.len());
    let r = subsample(real, n, rng);
    let s = subsample(synthetic, n, rng);
    let labels = std::iter::repeat_n(1.0, n).chain(std::iter::repeat_n(0.0, n)).collect();
    (r.into_iter().chain(s).collect(), labels)
}

/// Mean held-out error rate of real-vs-synthetic classifiers.
pub fn discriminative_score(real: &[Vec<f64>], synthetic: &[Vec<f64>], cfg: &EvalConfig) -> Result<RepeatedScore> {
    cfg.validate()?;
    if real.is_empty() || synthetic.is_empty() {
        return Err(EvalError::InsufficientData("both classes must be non-empty".into()));
    }
    let len = real[0].len();
    check_windows(real, len)?;
    check_windows(synthetic, len)?;
    let runs = (0..cfg.repetitions)
        .map(|rep| {
            let tag = rep.to_string();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &["balance", &tag]));
            let (windows, labels) = balanced_classes(real, synthetic, &mut rng);
            let (tr, te) = split_indices(windows.len(), cfg.train_fraction, derive_seed(cfg.seed, &["disc-split", &tag]));
            let pick = |idx: &[usize]| -> (Vec<&[f64]>, Vec<f64>) { (idx.iter().map(|&i| windows[i].as_slice()).collect(), idx.iter().map(|&i| labels[i]).collect()) };
            let (xtr, ytr) = pick(&tr);
            let (xte, yte) = pick(&te);
            let train_ds = sequence_dataset(&xtr, &ytr);
            let test_ds = sequence_dataset(&xte, &yte);
            let seed = derive_seed(cfg.seed, &["classifier", &tag]);
            let spec = NetworkSpec::recurrent(1, &cfg.classifier_hidden, 1, Activation::Identity, derive_seed(seed, &["init"]));
            let net = Network::new(spec)?;
            let tc = TrainConfig {
                max_epochs: cfg.max_epochs,
                batch_size: cfg.batch_size,
                learning_rate: cfg.learning_rate,
                patience: cfg.patience,
                loss: LossKind::Bce,
                seed: derive_seed(seed, &["order"]),
            };
            let bce = |o: &Array2<f64>, t: &Array2<f64>| crate::nn::loss_and_grad(LossKind::Bce, o, t).0;
            let outcome = fit(&net, net.init_params(), &train_ds, &test_ds, &tc, bce)?;
            let logits = net.forward(&outcome.params, &test_ds.inputs)?;
            let correct = logits.iter().zip(&yte).filter(|(z, y)| (sigmoid(**z) > 0.5) == (**y == 1.0)).count();
            Ok(1.0 - correct as f64 / yte.len() as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RepeatedScore::from_runs(runs))
}

// ---------------------------------------------------------------------------
// augmentation sweep

/// Train/test partition of one `(alpha, repetition)` cell. The test part is
/// drawn from real windows only.
#[derive(Debug, Clone)]
pub struct SweepCell<'a> {
    pub train: Vec<&'a [f64]>,
    pub train_sources: Vec<Source>,
    pub test: Vec<&'a [f64]>,
    pub test_sources: Vec<Source>,
}

/// Number of synthetic windows that makes them an `alpha` fraction of a
/// training set holding `n_real` real windows.
pub fn synthetic_count(alpha: f64, n_real: usize) -> usize {
    if alpha <= 0.0 {
        return 0;
    }
    // guard against 0.1 / 0.9 * 9 = 1.0000000000000002 style round-up
    let exact = alpha / (1.0 - alpha) * n_real as f64;
    let r = exact.round();
    if (exact - r).abs() < 1e-9 {
        r as usize
    } else {
        exact.ceil() as usize
    }
}

pub fn sweep_cell<'a>(real: &'a [Vec<f64>], synthetic: &'a [Vec<f64>], alpha: f64, rep: usize, cfg: &EvalConfig) -> SweepCell<'a> {
    let tag = rep.to_string();
    let (tr, te) = split_indices(real.len(), cfg.train_fraction, derive_seed(cfg.seed, &["split", &tag]));
    let mut train: Vec<&[f64]> = tr.iter().map(|&i| real[i].as_slice()).collect();
    let mut train_sources = vec![Source::Real; train.len()];
    let m = synthetic_count(alpha, train.len());
    if m > 0 && !synthetic.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &["pool", &tag, &format!("{alpha:.6}")]));
        let picks: Vec<usize> = if m <= synthetic.len() {
            let mut idx: Vec<usize> = (0..synthetic.len()).collect();
            idx.shuffle(&mut rng);
            idx.truncate(m);
            idx
        } else {
            log::warn!("synthetic pool of {} is smaller than the {m} windows needed for alpha={alpha}; sampling with replacement", synthetic.len());
            (0..m).map(|_| rng.gen_range(0..synthetic.len())).collect()
        };
        train.extend(picks.iter().map(|&i| synthetic[i].as_slice()));
        train_sources.extend(std::iter::repeat_n(Source::Synthetic, m));
    }
    let test: Vec<&[f64]> = te.iter().map(|&i| real[i].as_slice()).collect();
    let test_sources = vec![Source::Real; test.len()];
    SweepCell { train, train_sources, test, test_sources }
}

/// Mean real-test RMSE per realizable grid point. With an empty synthetic
/// pool only `alpha = 0` is realizable.
#[derive(Debug, Clone, PartialEq)]
pub struct RmseCurve {
    pub points: Vec<(f64, f64)>,
}

impl RmseCurve {
    pub fn at(&self, alpha: f64) -> Option<f64> {
        self.points.iter().find(|(a, _)| (*a - alpha).abs() < 1e-12).map(|p| p.1)
    }
}

pub fn augmentation_curve(real: &[Vec<f64>], synthetic: &[Vec<f64>], cfg: &EvalConfig) -> Result<RmseCurve> {
    let len = check_forecast_inputs(real, cfg)?;
    check_windows(synthetic, len)?;
    let mut points = Vec::new();
    for &alpha in &cfg.alpha_grid {
        if alpha > 0.0 && synthetic.is_empty() {
            continue;
        }
        let mut total = 0.0;
        for rep in 0..cfg.repetitions {
            let cell = sweep_cell(real, synthetic, alpha, rep, cfg);
            debug_assert!(cell.test_sources.iter().all(|s| *s == Source::Real));
            // paired across alphas: same split and initialization per repetition
            let seed = derive_seed(cfg.seed, &["forecast", &rep.to_string()]);
            total += train_forecaster(&cell.train, &cell.test, cfg, seed)?.rmse;
        }
        points.push((alpha, total / cfg.repetitions as f64));
    }
    Ok(RmseCurve { points })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub curve: RmseCurve,
    /// Best strictly positive grid fraction (ties go to the smaller one).
    pub alpha_star: f64,
    /// `1 - rmse(alpha_star) / rmse(0)`; negative when augmentation hurts.
    pub s_a: f64,
}

impl SweepSummary {
    /// `alpha_star` when augmentation helped, otherwise 0.
    pub fn optimal_level(&self) -> f64 {
        if self.s_a > 0.0 {
            self.alpha_star
        } else {
            0.0
        }
    }
}

pub fn summarize_curve(curve: RmseCurve) -> Result<SweepSummary> {
    let base = curve.at(0.0).ok_or_else(|| EvalError::InsufficientData("alpha grid lacks 0".into()))?;
    let best = curve
        .points
        .iter()
        .filter(|(a, _)| *a > 0.0)
        .fold(None, |best: Option<(f64, f64)>, &(a, r)| match best {
            Some((_, br)) if br <= r => best,
            _ => Some((a, r)),
        })
        .ok_or_else(|| EvalError::InsufficientData("no positive alpha evaluated; augmentation score undefined".into()))?;
    Ok(SweepSummary { s_a: 1.0 - best.1 / base, alpha_star: best.0, curve })
}

pub fn augmentation_sweep(real: &[Vec<f64>], synthetic: &[Vec<f64>], cfg: &EvalConfig) -> Result<SweepSummary> {
    summarize_curve(augmentation_curve(real, synthetic, cfg)?)
}

// ---------------------------------------------------------------------------
// records

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub dataset_id: String,
    pub s_p: f64,
    pub s_d: f64,
    pub s_a: f64,
    pub alpha_star: f64,
    pub rmse_curve: Vec<(f64, f64)>,
}

impl ScoreRecord {
    pub fn optimal_level(&self) -> f64 {
        if self.s_a > 0.0 {
            self.alpha_star
        } else {
            0.0
        }
    }
}

pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `dataset_id,s_p,s_d,s_a,alpha_star,rmse_a<alpha>...` with one column per
/// grid point; unevaluated points are left empty.
pub fn score_records_csv(records: &[ScoreRecord], alpha_grid: &[f64]) -> String {
    let mut s = String::from("dataset_id,s_p,s_d,s_a,alpha_star");
    for a in alpha_grid {
        write!(s, ",rmse_a{a}").expect("string write");
    }
    s.push('\n');
    for r in records {
        write!(s, "{},{},{},{},{}", csv_field(&r.dataset_id), r.s_p, r.s_d, r.s_a, r.alpha_star).expect("string write");
        for a in alpha_grid {
            match r.rmse_curve.iter().find(|(x, _)| (x - a).abs() < 1e-12) {
                Some((_, v)) => write!(s, ",{v}").expect("string write"),
                None => s.push(','),
            }
        }
        s.push('\n');
    }
    s
}

pub const SCORE_NAMES: [&str; 3] = ["s_a", "s_p", "s_d"];

/// Spearman correlations between `(s_a, s_p, s_d)` across records.
pub fn score_correlations(records: &[ScoreRecord]) -> Result<[[f64; 3]; 3]> {
    if records.len() < 3 {
        return Err(EvalError::InsufficientData(format!("{} records; need at least 3", records.len())));
    }
    let cols: [Vec<f64>; 3] = [
        records.iter().map(|r| r.s_a).collect(),
        records.iter().map(|r| r.s_p).collect(),
        records.iter().map(|r| r.s_d).collect(),
    ];
    let mut m = [[1.0; 3]; 3];
    for i in 0..3 {
        for j in i + 1..3 {
            let rho = spearman(&cols[i], &cols[j])?;
            m[i][j] = rho;
            m[j][i] = rho;
        }
    }
    Ok(m)
}

pub fn correlations_csv(m: &[[f64; 3]; 3]) -> String {
    let mut s = String::from("score,s_a,s_p,s_d\n");
    for (name, row) in SCORE_NAMES.iter().zip(m) {
        writeln!(s, "{name},{},{},{}", row[0], row[1], row[2]).expect("string write");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_counts() {
        assert_eq!(synthetic_count(0.0, 100), 0);
        assert_eq!(synthetic_count(0.5, 100), 100);
        assert_eq!(synthetic_count(0.1, 9), 1);
        assert_eq!(synthetic_count(0.2, 10), 3);
        assert_eq!(synthetic_count(0.05, 300), 16);
    }

    #[test]
    fn split_sizes() {
        let (a, b) = split_indices(10, 0.8, 1);
        assert_eq!((a.len(), b.len()), (8, 2));
        let (a, b) = split_indices(2, 0.8, 1);
        assert_eq!((a.len(), b.len()), (1, 1));
        let mut all: Vec<usize> = a.into_iter().chain(b).collect();
        all.sort();
        assert_eq!(all, vec![0, 1]);
    }

    #[test]
    fn summary_rules() {
        let curve = RmseCurve { points: vec![(0.0, 1.0), (0.1, 0.9), (0.2, 0.9), (0.3, 1.2)] };
        let s = summarize_curve(curve).unwrap();
        assert_eq!(s.alpha_star, 0.1);
        assert!((s.s_a - 0.1).abs() < 1e-12);
        assert_eq!(s.optimal_level(), 0.1);
        let worse = summarize_curve(RmseCurve { points: vec![(0.0, 1.0), (0.1, 1.5), (0.2, 1.1)] }).unwrap();
        assert_eq!(worse.alpha_star, 0.2);
        assert!(worse.s_a < 0.0);
        assert_eq!(worse.optimal_level(), 0.0);
        assert!(matches!(summarize_curve(RmseCurve { points: vec![(0.0, 1.0)] }), Err(EvalError::InsufficientData(_))));
    }

    #[test]
    fn knn_mixing_extremes() {
        let coords: Vec<[f64; 2]> = (0..20).map(|i| [i as f64, 0.0]).collect();
        let mut labels = vec![Source::Real; 10];
        labels.extend(vec![Source::Synthetic; 10]);
        let separated: Vec<[f64; 2]> = coords.iter().enumerate().map(|(i, c)| [c[0] + if i >= 10 { 1000.0 } else { 0.0 }, 0.0]).collect();
        assert_eq!(knn_mixing(&separated, &labels, 3), 0.0);
        let alternating: Vec<Source> = (0..20).map(|i| if i % 2 == 0 { Source::Real } else { Source::Synthetic }).collect();
        assert!(knn_mixing(&coords, &alternating, 2) > 0.9);
    }

    #[test]
    fn projection_recovers_dominant_axis() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, 0.01 * ((i * 7) % 5) as f64, 0.0]).collect();
        let p = principal_projection(&rows);
        let spread = p.iter().map(|c| c[0]).fold(f64::NEG_INFINITY, f64::max) - p.iter().map(|c| c[0]).fold(f64::INFINITY, f64::min);
        assert!((spread - 49.0).abs() < 0.05, "{spread}");
    }

    #[test]
    fn correlations_shape() {
        let recs: Vec<ScoreRecord> = (0..5)
            .map(|i| ScoreRecord {
                dataset_id: format!("d{i}"),
                s_p: i as f64,
                s_d: ((i * 3) % 5) as f64,
                s_a: (i as f64).exp(),
                alpha_star: 0.1,
                rmse_curve: vec![],
            })
            .collect();
        let m = score_correlations(&recs).unwrap();
        for i in 0..3 {
            assert_eq!(m[i][i], 1.0);
            for j in 0..3 {
                assert_eq!(m[i][j], m[j][i]);
            }
        }
        assert!((m[0][1] - 1.0).abs() < 1e-12);
        assert!(score_correlations(&recs[..2]).is_err());
        let csv = score_records_csv(&recs[..1], &[0.0, 0.5]);
        assert_eq!(csv.lines().next().unwrap(), "dataset_id,s_p,s_d,s_a,alpha_star,rmse_a0,rmse_a0.5");
        assert_eq!(csv.lines().nth(1).unwrap(), "d0,0,0,1,0.1,,");
    }
}
