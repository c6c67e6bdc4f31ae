//! Time-series primitives: positive scaling, log returns, windowing,
//! moments, the Ljung-Box statistic, Spearman rank correlation and
//! forecast-error metrics.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Default lower bound of the positive scaling range.
pub const DEFAULT_SCALE_LO: f64 = 0.1;
/// Default upper bound of the positive scaling range.
pub const DEFAULT_SCALE_HI: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("series must have at least {min} observations, got {got}")]
    TooShort { min: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("series is constant; cannot scale")]
    ConstantSeries,
    #[error("invalid scaling range [{lo}, {hi}]: need hi > lo > 0")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("non-positive value {value} at index {index}")]
    NonPositiveValue { index: usize, value: f64 },
    #[error("zero variance: higher moments undefined")]
    ZeroVariance,
    #[error("too few observations: n={n}, need more than {needed}")]
    TooFewObservations { n: usize, needed: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("series of length {len} is shorter than window {window}")]
    SeriesTooShort { len: usize, window: usize },
    #[error("stride must be at least 1")]
    InvalidStride,
    #[error("domain error: {0}")]
    DomainError(String),
}

pub type Result<T> = std::result::Result<T, SeriesError>;

/// Sampling frequency tag of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Frequency {
    Daily,
    Weekly,
    Monthly,
    Quarterly,
    Yearly,
    Other,
}

impl Frequency {
    pub const ALL: [Frequency; 6] = [
        Frequency::Daily,
        Frequency::Weekly,
        Frequency::Monthly,
        Frequency::Quarterly,
        Frequency::Yearly,
        Frequency::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Frequency::Daily => "daily",
            Frequency::Weekly => "weekly",
            Frequency::Monthly => "monthly",
            Frequency::Quarterly => "quarterly",
            Frequency::Yearly => "yearly",
            Frequency::Other => "other",
        }
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Frequency {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "daily" | "d" => Ok(Frequency::Daily),
            "weekly" | "w" => Ok(Frequency::Weekly),
            "monthly" | "m" => Ok(Frequency::Monthly),
            "quarterly" | "q" => Ok(Frequency::Quarterly),
            "yearly" | "y" => Ok(Frequency::Yearly),
            "other" | "o" => Ok(Frequency::Other),
            other => Err(format!("unknown frequency '{other}'")),
        }
    }
}

/// An ordered, finite series of at least two observations.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    id: String,
    frequency: Frequency,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(id: impl Into<String>, frequency: Frequency, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(SeriesError::TooShort { min: 2, got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SeriesError::NonFinite(i));
        }
        Ok(Self { id: id.into(), frequency, values })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Keeps only the last `n` observations (no-op when already shorter).
    pub fn truncate_tail(&mut self, n: usize) {
        if self.values.len() > n {
            self.values.drain(..self.values.len() - n);
        }
    }
}

/// Affine map between the original value range and `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleParams {
    pub original_min: f64,
    pub original_max: f64,
    pub lo: f64,
    pub hi: f64,
}

impl ScaleParams {
    pub fn forward(&self, v: f64) -> f64 {
        self.lo + (v - self.original_min) * (self.hi - self.lo) / (self.original_max - self.original_min)
    }

    pub fn inverse(&self, v: f64) -> f64 {
        self.original_min + (v - self.lo) * (self.original_max - self.original_min) / (self.hi - self.lo)
    }

    pub fn invert_all(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| self.inverse(v)).collect()
    }
}

/// Series mapped into a strictly positive range, with its inverse map.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledSeries {
    values: Vec<f64>,
    params: ScaleParams,
}

impl ScaledSeries {
    pub fn from_parts(values: Vec<f64>, params: ScaleParams) -> Self {
        Self { values, params }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn params(&self) -> &ScaleParams {
        &self.params
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Min-max scales `series` onto `[lo, hi]`.
pub fn scale_positive(series: &TimeSeries, lo: f64, hi: f64) -> Result<ScaledSeries> {
    scale_values(series.values(), lo, hi)
}

/// Slice form of [`scale_positive`].
pub fn scale_values(values: &[f64], lo: f64, hi: f64) -> Result<ScaledSeries> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(SeriesError::InvalidRange { lo, hi });
    }
    let (min, max) = min_max(values);
    if max <= min {
        return Err(SeriesError::ConstantSeries);
    }
    let params = ScaleParams { original_min: min, original_max: max, lo, hi };
    let mut scaled: Vec<f64> = values.iter().map(|&v| params.forward(v)).collect();
    // pin the endpoints so rounding never leaves the range
    for (v, &orig) in scaled.iter_mut().zip(values) {
        if orig == min {
            *v = lo;
        } else if orig == max {
            *v = hi;
        }
        *v = v.clamp(lo, hi);
    }
    Ok(ScaledSeries { values: scaled, params })
}

pub fn inverse_scale(scaled: &ScaledSeries) -> Vec<f64> {
    scaled.params.invert_all(&scaled.values)
}

pub(crate) fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Adjacent log returns `log(x[t+1] / x[t])`.
pub fn log_returns(values: &[f64]) -> Result<Vec<f64>> {
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(SeriesError::NonPositiveValue { index, value });
    }
    Ok(values.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

/// Sample moments of a return sequence.
///
/// Variance uses the `n - 1` divisor. Skewness and kurtosis are the
/// standardized third and fourth central moments `m3 / m2^1.5` and
/// `m4 / m2^2` (population central moments, non-excess kurtosis); they are
/// `None` when the sample has zero variance or fewer than four points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureMoments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
}

impl FeatureMoments {
    /// Skewness and kurtosis, or `ZeroVariance` when undefined.
    pub fn higher(&self) -> Result<(f64, f64)> {
        match (self.skewness, self.kurtosis) {
            (Some(s), Some(k)) => Ok((s, k)),
            _ => Err(SeriesError::ZeroVariance),
        }
    }
}

pub fn moments(returns: &[f64]) -> Result<FeatureMoments> {
    let n = returns.len();
    if n < 2 {
        return Err(SeriesError::TooFewObservations { n, needed: 1 });
    }
    let nf = n as f64;
    let mean = returns.iter().sum::<f64>() / nf;
    let (m2, m3, m4) = returns.iter().fold((0.0, 0.0, 0.0), |(a, b, c), &x| {
        let d = x - mean;
        let d2 = d * d;
        (a + d2, b + d2 * d, c + d2 * d2)
    });
    let (lo, hi) = min_max(returns);
    let m2 = if lo == hi { 0.0 } else { m2 };
    let variance = m2 / (nf - 1.0);
    let (skewness, kurtosis) = if m2 > 0.0 && n >= 4 {
        let m2 = m2 / nf;
        (Some((m3 / nf) / m2.powf(1.5)), Some((m4 / nf) / (m2 * m2)))
    } else {
        (None, None)
    };
    Ok(FeatureMoments { mean, variance, skewness, kurtosis })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LjungBoxResult {
    pub q: f64,
    pub lags: usize,
    pub n: usize,
}

/// `min(10, n / 5)`, at least 1.
pub fn default_lags(n: usize) -> usize {
    (n / 5).clamp(1, 10)
}

/// Sample autocorrelation at `lag`. Zero for a constant sequence.
pub fn autocorrelation(x: &[f64], lag: usize) -> f64 {
    let n = x.len();
    let (lo, hi) = min_max(x);
    if lag >= n || lo == hi {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let denom: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    if denom == 0.0 {
        return 0.0;
    }
    let num: f64 = (lag..n).map(|t| (x[t] - mean) * (x[t - lag] - mean)).sum();
    num / denom
}

/// Ljung-Box portmanteau statistic `Q = n(n+2) sum_k rho_k^2 / (n-k)` over
/// lags `1..=h`, on the raw or absolute returns.
pub fn ljung_box(returns: &[f64], h: usize, absolute: bool) -> Result<LjungBoxResult> {
    let n = returns.len();
    if h == 0 || n <= h {
        return Err(SeriesError::TooFewObservations { n, needed: h.max(1) });
    }
    let owned;
    let x: &[f64] = if absolute {
        owned = returns.iter().map(|r| r.abs()).collect::<Vec<_>>();
        &owned
    } else {
        returns
    };
    let nf = n as f64;
    let sum: f64 = (1..=h)
        .map(|k| {
            let rho = autocorrelation(x, k);
            rho * rho / (nf - k as f64)
        })
        .sum();
    Ok(LjungBoxResult { q: nf * (nf + 2.0) * sum, lags: h, n })
}

/// Ranks starting at 1; tied values share their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(SeriesError::LengthMismatch { left: a.len(), right: b.len() });
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(SeriesError::ZeroVariance);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(SeriesError::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.len() < 2 {
        return Err(SeriesError::TooFewObservations { n: a.len(), needed: 1 });
    }
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Overlapping windows of `length` at `stride`, in order.
pub fn windows(values: &[f64], length: usize, stride: usize) -> Result<Vec<Vec<f64>>> {
    if stride == 0 {
        return Err(SeriesError::InvalidStride);
    }
    if length == 0 || values.len() < length {
        return Err(SeriesError::SeriesTooShort { len: values.len(), window: length });
    }
    Ok((0..=values.len() - length)
        .step_by(stride)
        .map(|s| values[s..s + length].to_vec())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Rmse,
    Mae,
    Bce,
}

pub fn forecast_error(pred: &[f64], actual: &[f64], kind: ErrorKind) -> Result<f64> {
    if pred.len() != actual.len() {
        return Err(SeriesError::LengthMismatch { left: pred.len(), right: actual.len() });
    }
    if pred.is_empty() {
        return Err(SeriesError::TooFewObservations { n: 0, needed: 0 });
    }
    let n = pred.len() as f64;
    let pairs = pred.iter().zip(actual);
    Ok(match kind {
        ErrorKind::Rmse => (pairs.map(|(p, a)| (p - a).powi(2)).sum::<f64>() / n).sqrt(),
        ErrorKind::Mae => pairs.map(|(p, a)| (p - a).abs()).sum::<f64>() / n,
        ErrorKind::Bce => {
            let mut total = 0.0;
            for (&p, &a) in pairs {
                if !(p > 0.0 && p < 1.0) {
                    return Err(SeriesError::DomainError(format!("probability {p} outside (0, 1)")));
                }
                total -= if a == 1.0 {
                    p.ln()
                } else if a == 0.0 {
                    (1.0 - p).ln()
                } else {
                    return Err(SeriesError::DomainError(format!("label {a} not in {{0, 1}}")));
                };
            }
            total / n
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ts(v: &[f64]) -> TimeSeries {
        TimeSeries::new("t", Frequency::Other, v.to_vec()).unwrap()
    }

    #[test]
    fn scale_examples() {
        assert_eq!(scale_positive(&ts(&[1.0, 3.0]), 0.1, 1.0).unwrap().values(), &[0.1, 1.0]);
        let s = scale_positive(&ts(&[1.0, 2.0, 3.0]), 0.1, 1.0).unwrap();
        assert_abs_diff_eq!(s.values()[1], 0.55, epsilon = 1e-15);
        assert_eq!(scale_positive(&ts(&[5.0, 5.0, 5.0]), 0.1, 1.0), Err(SeriesError::ConstantSeries));
        assert!(matches!(scale_positive(&ts(&[1.0, 2.0]), 0.0, 1.0), Err(SeriesError::InvalidRange { .. })));
        assert!(matches!(scale_positive(&ts(&[1.0, 2.0]), 0.5, 0.5), Err(SeriesError::InvalidRange { .. })));
    }

    #[test]
    fn inverse_examples() {
        let p = ScaleParams { original_min: 1.0, original_max: 3.0, lo: 0.1, hi: 1.0 };
        let back = inverse_scale(&ScaledSeries::from_parts(vec![0.1, 1.0], p));
        assert_abs_diff_eq!(back[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(back[1], 3.0, epsilon = 1e-12);
        let id = ScaleParams { original_min: 0.1, original_max: 1.0, lo: 0.1, hi: 1.0 };
        assert_eq!(inverse_scale(&ScaledSeries::from_parts(vec![0.3, 0.7], id)), vec![0.3, 0.7]);
        assert_abs_diff_eq!(p.inverse(0.55), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn log_return_examples() {
        let e = std::f64::consts::E;
        let r = log_returns(&[1.0, e, e * e]).unwrap();
        assert_abs_diff_eq!(r[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r[1], 1.0, epsilon = 1e-15);
        assert_eq!(log_returns(&[2.0, 2.0, 2.0]).unwrap(), vec![0.0, 0.0]);
        let r = log_returns(&[1.0, 2.0, 1.0]).unwrap();
        assert_abs_diff_eq!(r[0], std::f64::consts::LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(r[1], -std::f64::consts::LN_2, epsilon = 1e-15);
        assert!(matches!(log_returns(&[1.0, 0.0]), Err(SeriesError::NonPositiveValue { index: 1, .. })));
    }

    #[test]
    fn moment_examples() {
        let m = moments(&[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert_eq!(m.mean, 0.0);
        assert_abs_diff_eq!(m.variance, 4.0 / 3.0, epsilon = 1e-15);
        let c = moments(&[0.3; 4]).unwrap();
        assert_eq!(c.variance, 0.0);
        assert_eq!(c.higher(), Err(SeriesError::ZeroVariance));
    }

    #[test]
    fn ljung_box_edges() {
        assert_eq!(ljung_box(&[0.3; 20], 3, false).unwrap().q, 0.0);
        assert!(matches!(ljung_box(&[0.0; 10], 10, false), Err(SeriesError::TooFewObservations { .. })));
        assert!(ljung_box(&[0.0; 10], 0, false).is_err());
        assert_eq!(default_lags(100), 10);
        assert_eq!(default_lags(27), 5);
        assert_eq!(default_lags(3), 1);
    }

    #[test]
    fn spearman_examples() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let rev: Vec<f64> = a.iter().rev().copied().collect();
        assert_abs_diff_eq!(spearman(&a, &a).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(spearman(&a, &rev).unwrap(), -1.0, epsilon = 1e-15);
        assert!(matches!(spearman(&a, &a[..4]), Err(SeriesError::LengthMismatch { .. })));
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn window_examples() {
        let v: Vec<f64> = (0..30).map(f64::from).collect();
        assert_eq!(windows(&v, 28, 1).unwrap().len(), 3);
        assert_eq!(windows(&v[..28], 28, 1).unwrap(), vec![v[..28].to_vec()]);
        assert!(matches!(windows(&v[..27], 28, 1), Err(SeriesError::SeriesTooShort { .. })));
        assert_eq!(windows(&v, 10, 7).unwrap().len(), 3);
        assert_eq!(windows(&v, 10, 0), Err(SeriesError::InvalidStride));
    }

    #[test]
    fn forecast_error_examples() {
        assert_eq!(forecast_error(&[1.0, 2.0], &[1.0, 2.0], ErrorKind::Rmse).unwrap(), 0.0);
        assert_eq!(forecast_error(&[1.0, 2.0], &[1.0, 2.0], ErrorKind::Mae).unwrap(), 0.0);
        assert_abs_diff_eq!(forecast_error(&[0.0, 2.0], &[0.0, 0.0], ErrorKind::Rmse).unwrap(), 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(forecast_error(&[0.0, 2.0], &[0.0, 0.0], ErrorKind::Mae).unwrap(), 1.0);
        assert_abs_diff_eq!(
            forecast_error(&[0.5, 0.5], &[0.0, 1.0], ErrorKind::Bce).unwrap(),
            2f64.ln(),
            epsilon = 1e-15
        );
        assert!(matches!(forecast_error(&[1.0], &[1.0], ErrorKind::Bce), Err(SeriesError::DomainError(_))));
        assert!(matches!(forecast_error(&[0.5], &[0.3], ErrorKind::Bce), Err(SeriesError::DomainError(_))));
        assert!(matches!(forecast_error(&[0.5], &[], ErrorKind::Mae), Err(SeriesError::LengthMismatch { .. })));
    }

    #[test]
    fn timeseries_validation() {
        assert!(TimeSeries::new("x", Frequency::Daily, vec![1.0]).is_err());
        assert_eq!(TimeSeries::new("x", Frequency::Daily, vec![1.0, f64::NAN]), Err(SeriesError::NonFinite(1)));
        let mut t = ts(&[1.0, 2.0, 3.0, 4.0]);
        t.truncate_tail(2);
        assert_eq!(t.values(), &[3.0, 4.0]);
        assert_eq!("Quarterly".parse::<Frequency>(), Ok(Frequency::Quarterly));
    }

    fn finite_series() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1e6f64..1e6, 2..200)
    }

    proptest! {
        #[test]
        fn scale_round_trip(v in finite_series()) {
            let (min, max) = min_max(&v);
            prop_assume!(max > min);
            let s = scale_values(&v, DEFAULT_SCALE_LO, DEFAULT_SCALE_HI).unwrap();
            prop_assert!(s.values().iter().all(|&x| (DEFAULT_SCALE_LO..=DEFAULT_SCALE_HI).contains(&x)));
            let back = inverse_scale(&s);
            let span = max - min;
            for (a, b) in back.iter().zip(&v) {
                prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(span));
            }
        }

        #[test]
        fn geometric_series_has_constant_returns(start in 0.01f64..100.0, ratio in 0.5f64..2.0, n in 3usize..60) {
            let v: Vec<f64> = (0..n).map(|i| start * ratio.powi(i as i32)).collect();
            let r = log_returns(&v).unwrap();
            for x in &r {
                prop_assert!((x - ratio.ln()).abs() < 1e-12);
            }
        }

        #[test]
        fn ljung_box_scale_free(v in prop::collection::vec(-1.0f64..1.0, 30..120), c in 1e-3f64..1e3) {
            let h = default_lags(v.len());
            let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
            for abs in [false, true] {
                let a = ljung_box(&v, h, abs).unwrap().q;
                let b = ljung_box(&scaled, h, abs).unwrap().q;
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
        }

        #[test]
        fn spearman_monotone_invariant(pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..50)) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assume!(spearman(&a, &b).is_ok());
            let ta: Vec<f64> = a.iter().map(|x| x.exp()).collect();
            let tb: Vec<f64> = b.iter().map(|x| x.powi(3) + 2.0 * x).collect();
            let r = spearman(&a, &b).unwrap();
            prop_assert!((r - spearman(&ta, &tb).unwrap()).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&r));
        }
    }
}
