use ndarray::{Array2, Zip};

use super::activation::sigmoid;

/// Smoothing width of the pseudo-absolute loss.
pub const SMOOTH_MAE_DELTA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Mean squared error.
    Mse,
    /// `sqrt(d^2 + delta^2) - delta`, a differentiable absolute error.
    SmoothMae,
    /// Binary cross-entropy on logits; targets in {0, 1}.
    Bce,
    /// Critic score `-y * D(x)` with `y = +1` for real and `-1` for generated samples.
    Wasserstein,
}

/// Mean loss over every output element and its gradient w.r.t. the outputs.
pub fn loss_and_grad(kind: LossKind, out: &Array2<f64>, target: &Array2<f64>) -> (f64, Array2<f64>) {
    let n = out.len() as f64;
    let mut grad = Array2::zeros(out.dim());
    let mut total = 0.0;
    Zip::from(&mut grad).and(out).and(target).for_each(|g, &o, &t| {
        let (l, d) = match kind {
            LossKind::Mse => {
                let e = o - t;
                (e * e, 2.0 * e)
            }
            LossKind::SmoothMae => {
                let e = o - t;
                let r = (e * e + SMOOTH_MAE_DELTA * SMOOTH_MAE_DELTA).sqrt();
                (r - SMOOTH_MAE_DELTA, e / r)
            }
            LossKind::Bce => (o.max(0.0) - o * t + (-o.abs()).exp().ln_1p(), sigmoid(o) - t),
            LossKind::Wasserstein => (-t * o, -t),
        };
        total += l;
        *g = d / n;
    });
    (total / n, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn loss_values() {
        let out = array![[0.0], [2.0]];
        let tgt = array![[0.0], [0.0]];
        assert_eq!(loss_and_grad(LossKind::Mse, &out, &tgt).0, 2.0);
        let (l, _) = loss_and_grad(LossKind::Bce, &array![[0.0], [0.0]], &array![[0.0], [1.0]]);
        assert!((l - 2f64.ln()).abs() < 1e-15);
        let (l, g) = loss_and_grad(LossKind::Wasserstein, &array![[3.0], [1.0]], &array![[1.0], [-1.0]]);
        assert_eq!(l, -1.0);
        assert_eq!(g, array![[-0.5], [0.5]]);
    }
}
