//! Bundled synthetic corpus for quick end-to-end runs: six seeded positive
//! series of 200 to 400 points, alternating mean-reverting AR(1) paths and
//! AR(1) noise around a linear trend, split across a daily and a weekly file.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use xirpgan_core::seed::derive_seed;
use xirpgan_core::series::{Frequency, TimeSeries};

pub const SMOKE_DATASETS: usize = 6;

fn path(seed: u64, k: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["smoke", &k.to_string()]));
    let n = 200 + 40 * k;
    let phi = [0.3, 0.6, 0.9][k % 3];
    let sigma = 0.5 + 0.25 * (k / 2) as f64;
    let mut noise = 0.0;
    (0..n)
        .map(|t| {
            let e: f64 = rng.sample(StandardNormal);
            noise = phi * noise + sigma * e;
            let level = if k % 2 == 0 { 20.0 } else { 20.0 + 0.05 * t as f64 };
            (level + noise).max(1.0)
        })
        .collect()
}

pub fn smoke_series(seed: u64) -> Vec<TimeSeries> {
    (0..SMOKE_DATASETS)
        .map(|k| {
            let (freq, prefix) = if k < 3 { (Frequency::Daily, "D") } else { (Frequency::Weekly, "W") };
            TimeSeries::new(format!("{prefix}{}", k + 1), freq, path(seed, k)).expect("finite series")
        })
        .collect()
}

/// `(file name, series)` pairs, one file per frequency.
pub fn smoke_files(seed: u64) -> Vec<(String, Vec<TimeSeries>)> {
    let all = smoke_series(seed);
    [Frequency::Daily, Frequency::Weekly]
        .into_iter()
        .map(|f| {
            let name = format!("smoke-{}.csv", f.as_str());
            (name, all.iter().filter(|s| s.frequency() == f).cloned().collect())
        })
        .collect()
}
