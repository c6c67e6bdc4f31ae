#![allow(dead_code)]

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn normal_array3(rng: &mut ChaCha8Rng, shape: (usize, usize, usize)) -> Array3<f64> {
    Array3::from_shape_fn(shape, |_| rng.sample(StandardNormal))
}

pub fn normal_array2(rng: &mut ChaCha8Rng, shape: (usize, usize)) -> Array2<f64> {
    Array2::from_shape_fn(shape, |_| rng.sample(StandardNormal))
}

/// Central finite differences of `f` around `p`.
pub fn central_differences<F: FnMut(&[f64]) -> f64>(p: &[f64], step: f64, mut f: F) -> Vec<f64> {
    let mut q = p.to_vec();
    (0..p.len())
        .map(|i| {
            q[i] = p[i] + step;
            let up = f(&q);
            q[i] = p[i] - step;
            let down = f(&q);
            q[i] = p[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Largest violation of `|a - n| <= rel * max(|a|, |n|) + abs`, as a ratio (<= 1 passes).
pub fn worst_relative(analytic: &[f64], numeric: &[f64], rel: f64, abs: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / (rel * a.abs().max(n.abs()) + abs))
        .fold(0.0, f64::max)
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scalar reference LSTM stack followed by one identity dense output, using
/// the parameter layout: per LSTM layer `Wx[in][4H]`, `Wh[H][4H]`, `b[4H]`
/// with gate blocks (input, forget, candidate, output); then `W[H][out]`, `b[out]`.
pub fn scalar_lstm_stack(params: &[f64], input_dim: usize, widths: &[usize], out_dim: usize, seq: &[Vec<f64>]) -> Vec<f64> {
    let mut offset = 0;
    let mut inputs: Vec<Vec<f64>> = seq.to_vec();
    let mut in_dim = input_dim;
    for &h in widths {
        let wx = |r: usize, c: usize| params[offset + r * 4 * h + c];
        let wh_off = offset + in_dim * 4 * h;
        let b_off = wh_off + h * 4 * h;
        let mut hs = vec![0.0; h];
        let mut cs = vec![0.0; h];
        let mut outputs = Vec::new();
        for x in &inputs {
            let mut z = vec![0.0; 4 * h];
            for (c, zc) in z.iter_mut().enumerate() {
                let mut acc = params[b_off + c];
                for (r, xr) in x.iter().enumerate() {
                    acc += xr * wx(r, c);
                }
                for (r, hr) in hs.iter().enumerate() {
                    acc += hr * params[wh_off + r * 4 * h + c];
                }
                *zc = acc;
            }
            let mut new_h = vec![0.0; h];
            for k in 0..h {
                let i = sig(z[k]);
                let f = sig(z[h + k]);
                let g = z[2 * h + k].tanh();
                let o = sig(z[3 * h + k]);
                cs[k] = f * cs[k] + i * g;
                new_h[k] = o * cs[k].tanh();
            }
            hs = new_h;
            outputs.push(hs.clone());
        }
        offset = b_off + 4 * h;
        in_dim = h;
        inputs = outputs;
    }
    let last = inputs.last().unwrap();
    (0..out_dim)
        .map(|c| {
            let mut acc = params[offset + in_dim * out_dim + c];
            for (r, v) in last.iter().enumerate() {
                acc += v * params[offset + r * out_dim + c];
            }
            acc
        })
        .collect()
}

/// Positive AR(1) path `x_t = 1 + 0.6 (x_{t-1} - 1) + 0.1 e_t`, kept above 0.2.
pub fn ar1_path(seed: u64, n: usize) -> Vec<f64> {
    let mut r = rng(seed);
    let mut x = 1.0;
    (0..n)
        .map(|_| {
            let e: f64 = r.sample(StandardNormal);
            x = (1.0 + 0.6 * (x - 1.0) + 0.1 * e).max(0.2);
            x
        })
        .collect()
}

/// Stride-1 windows of an AR(1) path.
pub fn ar1_windows(seed: u64, n_points: usize, window: usize) -> Vec<Vec<f64>> {
    let path = ar1_path(seed, n_points);
    path.windows(window).map(<[f64]>::to_vec).collect()
}
