//! Wasserstein GAN with gradient penalty over scaled XIRP images.
//!
//! The critic minimizes `mean D(fake) - mean D(real) + lambda * GP` where
//! `GP = mean (||grad D(x_hat)||_2 - 1)^2` at `x_hat = eps * real + (1 - eps) * fake`
//! with one `eps ~ U[0, 1]` per pair. The generator minimizes `-mean D(fake)`.

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::nn::{adam_step, Activation, AdamState, NetworkSpec, Network, NetworkParams, NnError};
use crate::seed::derive_seed;
use crate::xirp::{ScaledXirp, XirpScaler};

#[derive(Debug, Error)]
pub enum GanError {
    #[error("invalid GAN config: {0}")]
    InvalidConfig(String),
    #[error("need at least {need} training images, got {have}")]
    InsufficientData { have: usize, need: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training diverged at generator step {step}")]
    DivergenceDetected { step: usize, history: Vec<HistoryRow> },
    #[error(transparent)]
    Nn(#[from] NnError),
}

pub type Result<T> = std::result::Result<T, GanError>;

#[derive(Debug, Clone, PartialEq)]
pub struct GanConfig {
    pub latent_dim: usize,
    /// Gradient-penalty weight.
    pub lambda: f64,
    pub critic_steps_per_gen: usize,
    pub batch_size: usize,
    pub generator_steps: usize,
    pub generator_lr: f64,
    pub critic_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub generator_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            latent_dim: 64,
            lambda: 10.0,
            critic_steps_per_gen: 5,
            batch_size: 32,
            generator_steps: 2000,
            generator_lr: 1e-4,
            critic_lr: 1e-4,
            beta1: 0.0,
            beta2: 0.9,
            generator_hidden: vec![256, 512],
            critic_hidden: vec![512, 256],
            seed: 0,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(GanError::InvalidConfig(m.into()));
        if !(self.lambda >= 0.0) {
            return fail("lambda must be >= 0");
        }
        if self.critic_steps_per_gen == 0 {
            return fail("critic_steps_per_gen must be >= 1");
        }
        if self.latent_dim == 0 {
            return fail("latent_dim must be >= 1");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1");
        }
        if !(self.generator_lr > 0.0 && self.critic_lr > 0.0) {
            return fail("learning rates must be positive");
        }
        Ok(())
    }
}

/// Dense generator `latent -> hidden... -> S^2` with tanh output.
pub fn generator_spec(cfg: &GanConfig, image_size: usize) -> NetworkSpec {
    NetworkSpec::mlp(
        cfg.latent_dim,
        &cfg.generator_hidden,
        Activation::LeakyRelu(0.2),
        image_size * image_size,
        Activation::Tanh,
        derive_seed(cfg.seed, &["generator"]),
    )
}

/// Dense critic `S^2 -> hidden... -> 1`, linear output, no normalization.
pub fn critic_spec(cfg: &GanConfig, image_size: usize) -> NetworkSpec {
    NetworkSpec::mlp(
        image_size * image_size,
        &cfg.critic_hidden,
        Activation::LeakyRelu(0.2),
        1,
        Activation::Identity,
        derive_seed(cfg.seed, &["critic"]),
    )
}

/// Training-history entry, one per generator step.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub step: usize,
    /// Critic loss of the last critic update before this generator step.
    pub critic_loss: f64,
    pub generator_loss: f64,
    pub penalty: f64,
    /// `mean D(real) - mean D(fake)` on that critic batch.
    pub score_gap: f64,
}

#[derive(Debug, Clone)]
pub struct GanModel {
    pub generator: Network,
    pub generator_params: NetworkParams,
    pub critic: Network,
    pub critic_params: NetworkParams,
    pub config: GanConfig,
    pub image_size: usize,
    /// Scaling shared by every training image; attached to samples.
    pub scaler: XirpScaler,
    pub history: Vec<HistoryRow>,
}

impl GanModel {
    /// Fresh, untrained model.
    pub fn init(config: GanConfig, image_size: usize, scaler: XirpScaler) -> Result<Self> {
        config.validate()?;
        if image_size == 0 {
            return Err(GanError::InvalidConfig("image size must be >= 1".into()));
        }
        let generator = Network::new(generator_spec(&config, image_size))?;
        let critic = Network::new(critic_spec(&config, image_size))?;
        let generator_params = generator.init_params();
        let critic_params = critic.init_params();
        Ok(Self { generator, generator_params, critic, critic_params, config, image_size, scaler, history: Vec::new() })
    }
}

fn check_pair(real: &Array2<f64>, fake: &Array2<f64>, eps: &[f64]) -> Result<()> {
    if real.dim() != fake.dim() || eps.len() != real.nrows() {
        return Err(GanError::ShapeMismatch(format!(
            "real {:?}, fake {:?}, {} interpolation weights",
            real.dim(),
            fake.dim(),
            eps.len()
        )));
    }
    if real.nrows() == 0 {
        return Err(GanError::ShapeMismatch("empty batch".into()));
    }
    Ok(())
}

/// `eps_i * real_i + (1 - eps_i) * fake_i`, row by row.
pub fn interpolate(real: &Array2<f64>, fake: &Array2<f64>, eps: &[f64]) -> Array2<f64> {
    let mut out = fake.clone();
    for ((mut o, r), &e) in out.rows_mut().into_iter().zip(real.rows()).zip(eps) {
        o.zip_mut_with(&r, |f, &rv| *f = e * rv + (1.0 - e) * *f);
    }
    out
}

pub fn gradient_penalty(critic: &Network, params: &NetworkParams, real: &Array2<f64>, fake: &Array2<f64>, eps: &[f64]) -> Result<f64> {
    check_pair(real, fake, eps)?;
    Ok(critic.input_gradient_penalty(params, &interpolate(real, fake, eps))?.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticLoss {
    pub loss: f64,
    pub penalty: f64,
    pub real_score: f64,
    pub fake_score: f64,
}

fn mean_score(critic: &Network, params: &NetworkParams, x: &Array2<f64>) -> Result<f64> {
    Ok(critic.forward_flat(params, x)?.mean().expect("non-empty"))
}

pub fn critic_loss(critic: &Network, params: &NetworkParams, real: &Array2<f64>, fake: &Array2<f64>, lambda: f64, eps: &[f64]) -> Result<CriticLoss> {
    let penalty = gradient_penalty(critic, params, real, fake, eps)?;
    let real_score = mean_score(critic, params, real)?;
    let fake_score = mean_score(critic, params, fake)?;
    Ok(CriticLoss { loss: fake_score - real_score + lambda * penalty, penalty, real_score, fake_score })
}

pub fn critic_loss_and_grad(
    critic: &Network,
    params: &NetworkParams,
    real: &Array2<f64>,
    fake: &Array2<f64>,
    lambda: f64,
    eps: &[f64],
) -> Result<(CriticLoss, Vec<f64>)> {
    check_pair(real, fake, eps)?;
    let b = real.nrows() as f64;
    let mut grad = vec![0.0; critic.param_count()];
    let mut scores = [0.0; 2];
    for (k, (x, sign)) in [(real, -1.0), (fake, 1.0)].into_iter().enumerate() {
        let (out, cache) = critic.forward_cached(params, &crate::nn::as_steps(x))?;
        scores[k] = out.mean().expect("non-empty");
        let d = Array2::from_elem(out.dim(), sign / b);
        let (g, _) = critic.backward(params, &cache, &d)?;
        grad.iter_mut().zip(&g).for_each(|(a, v)| *a += v);
    }
    let (penalty, gp) = critic.input_gradient_penalty(params, &interpolate(real, fake, eps))?;
    grad.iter_mut().zip(&gp).for_each(|(a, v)| *a += lambda * v);
    let loss = CriticLoss { loss: scores[1] - scores[0] + lambda * penalty, penalty, real_score: scores[0], fake_score: scores[1] };
    Ok((loss, grad))
}

pub fn generator_loss(critic: &Network, params: &NetworkParams, fake: &Array2<f64>) -> Result<f64> {
    if fake.nrows() == 0 {
        return Err(GanError::ShapeMismatch("empty batch".into()));
    }
    Ok(-mean_score(critic, params, fake)?)
}

/// `-mean D(G(z))` and its gradient with respect to the generator parameters.
pub fn generator_loss_and_grad(
    generator: &Network,
    gen_params: &NetworkParams,
    critic: &Network,
    critic_params: &NetworkParams,
    z: &Array2<f64>,
) -> Result<(f64, Vec<f64>)> {
    let (fake, gcache) = generator.forward_cached(gen_params, &crate::nn::as_steps(z))?;
    let (scores, ccache) = critic.forward_cached(critic_params, &crate::nn::as_steps(&fake))?;
    let b = z.nrows() as f64;
    let d = Array2::from_elem(scores.dim(), -1.0 / b);
    let (_, d_fake) = critic.backward(critic_params, &ccache, &d)?;
    let d_fake = d_fake.index_axis_move(Axis(1), 0);
    let (grad, _) = generator.backward(gen_params, &gcache, &d_fake)?;
    Ok((-scores.mean().expect("non-empty"), grad))
}

/// Original minimax value `mean ln D(x) + mean ln(1 - D(G(z)))` for
/// probability-valued discriminator outputs.
pub fn minimax_value(real_prob: &[f64], fake_prob: &[f64]) -> f64 {
    let mean = |v: &[f64], f: &dyn Fn(f64) -> f64| v.iter().map(|&p| f(p)).sum::<f64>() / v.len() as f64;
    mean(real_prob, &|p| p.ln()) + mean(fake_prob, &|p| (1.0 - p).ln())
}

/// Wasserstein value `mean D(real) - mean D(fake)` for unbounded critic scores.
pub fn wasserstein_value(real_scores: &[f64], fake_scores: &[f64]) -> f64 {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    mean(real_scores) - mean(fake_scores)
}

pub fn sample_latent<R: Rng>(rng: &mut R, n: usize, dim: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, dim), |_| rng.sample(StandardNormal))
}

fn flatten(xirps: &[ScaledXirp], image_size: usize) -> Array2<f64> {
    let d = image_size * image_size;
    let mut m = Array2::zeros((xirps.len(), d));
    for (mut row, x) in m.rows_mut().into_iter().zip(xirps) {
        row.iter_mut().zip(x.matrix.iter()).for_each(|(r, &v)| *r = v);
    }
    m
}

/// Trains a WGAN-GP on `xirps`, which must all share one size and scaler.
pub fn train_wgan(xirps: &[ScaledXirp], config: GanConfig) -> Result<GanModel> {
    config.validate()?;
    let need = 2 * config.batch_size;
    if xirps.len() < need {
        return Err(GanError::InsufficientData { have: xirps.len(), need });
    }
    let size = xirps[0].size();
    if let Some(bad) = xirps.iter().find(|x| x.size() != size || x.matrix.ncols() != size) {
        return Err(GanError::ShapeMismatch(format!("image of size {:?} among size {size}", bad.matrix.dim())));
    }
    let mut model = GanModel::init(config, size, xirps[0].scaler)?;
    let data = flatten(xirps, size);
    let cfg = model.config.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &["train"]));
    let mut adam_g = AdamState::new(model.generator.param_count(), cfg.generator_lr, cfg.beta1, cfg.beta2);
    let mut adam_c = AdamState::new(model.critic.param_count(), cfg.critic_lr, cfg.beta1, cfg.beta2);
    let b = cfg.batch_size;
    for step in 0..cfg.generator_steps {
        let mut last = CriticLoss { loss: 0.0, penalty: 0.0, real_score: 0.0, fake_score: 0.0 };
        for _ in 0..cfg.critic_steps_per_gen {
            let idx: Vec<usize> = (0..b).map(|_| rng.gen_range(0..data.nrows())).collect();
            let real = data.select(Axis(0), &idx);
            let z = sample_latent(&mut rng, b, cfg.latent_dim);
            let fake = model.generator.forward_flat(&model.generator_params, &z)?;
            let eps: Vec<f64> = (0..b).map(|_| rng.gen::<f64>()).collect();
            let (loss, grad) = critic_loss_and_grad(&model.critic, &model.critic_params, &real, &fake, cfg.lambda, &eps)?;
            if !loss.loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(GanError::DivergenceDetected { step, history: model.history });
            }
            adam_step(&mut model.critic_params.0, &grad, &mut adam_c)?;
            last = loss;
        }
        let z = sample_latent(&mut rng, b, cfg.latent_dim);
        let (gen_loss, grad) = generator_loss_and_grad(&model.generator, &model.generator_params, &model.critic, &model.critic_params, &z)?;
        if !gen_loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(GanError::DivergenceDetected { step, history: model.history });
        }
        adam_step(&mut model.generator_params.0, &grad, &mut adam_g)?;
        model.history.push(HistoryRow {
            step,
            critic_loss: last.loss,
            generator_loss: gen_loss,
            penalty: last.penalty,
            score_gap: last.real_score - last.fake_score,
        });
    }
    Ok(model)
}

/// Draws `n` images `G(z)`, `z ~ N(0, I)`, deterministically per `seed`.
pub fn sample_xirps(model: &GanModel, n: usize, seed: u64) -> Result<Vec<ScaledXirp>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = sample_latent(&mut rng, n, model.config.latent_dim);
    let images = model.generator.forward_flat(&model.generator_params, &z)?;
    let s = model.image_size;
    Ok(images
        .rows()
        .into_iter()
        .map(|row| model.scaler.wrap(row.to_owned().into_shape_with_order((s, s)).expect("square image")))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xirp::PartitionScale;
    use ndarray::array;

    fn linear_critic(w: &[f64]) -> (Network, NetworkParams) {
        let net = Network::new(NetworkSpec::mlp(w.len(), &[], Activation::Identity, 1, Activation::Identity, 0)).unwrap();
        let mut p = w.to_vec();
        p.push(0.0);
        (net, NetworkParams(p))
    }

    #[test]
    fn unit_linear_critic_has_zero_penalty() {
        let (net, p) = linear_critic(&[0.6, 0.8]);
        let real = array![[1.0, 2.0], [0.3, -1.0]];
        let fake = array![[0.0, 5.0], [-2.0, 0.1]];
        let gp = gradient_penalty(&net, &p, &real, &fake, &[0.25, 0.9]).unwrap();
        assert!(gp.abs() < 1e-15);
        let cl = critic_loss(&net, &p, &real, &fake, 0.0, &[0.25, 0.9]).unwrap();
        let diff = (&fake.mean_axis(Axis(0)).unwrap() - &real.mean_axis(Axis(0)).unwrap()).dot(&array![0.6, 0.8]);
        assert!((cl.loss - diff).abs() < 1e-12);
    }

    #[test]
    fn zero_critic() {
        let (net, p) = linear_critic(&[0.0, 0.0]);
        let real = array![[1.0, 2.0]];
        let fake = array![[3.0, 4.0]];
        assert_eq!(gradient_penalty(&net, &p, &real, &fake, &[0.5]).unwrap(), 1.0);
        assert_eq!(critic_loss(&net, &p, &real, &fake, 10.0, &[0.5]).unwrap().loss, 10.0);
        assert_eq!(generator_loss(&net, &p, &fake).unwrap(), 0.0);
        let mut p5 = p.clone();
        p5.0[2] = 5.0;
        assert_eq!(generator_loss(&net, &p5, &fake).unwrap(), -5.0);
    }

    #[test]
    fn identical_batches_without_penalty() {
        let cfg = GanConfig { critic_hidden: vec![4], ..GanConfig::default() };
        let net = Network::new(critic_spec(&cfg, 2)).unwrap();
        let p = net.init_params();
        let real = Array2::from_shape_fn((3, 4), |(i, j)| (i * 4 + j) as f64 * 0.1 - 0.5);
        assert_eq!(critic_loss(&net, &p, &real, &real, 0.0, &[0.1, 0.2, 0.3]).unwrap().loss, 0.0);
    }

    #[test]
    fn shape_errors() {
        let (net, p) = linear_critic(&[1.0, 0.0]);
        let a = array![[1.0, 2.0]];
        let b = array![[1.0, 2.0], [3.0, 4.0]];
        assert!(matches!(gradient_penalty(&net, &p, &a, &b, &[0.5]), Err(GanError::ShapeMismatch(_))));
        assert!(matches!(gradient_penalty(&net, &p, &a, &a, &[0.5, 0.5]), Err(GanError::ShapeMismatch(_))));
    }

    #[test]
    fn config_validation() {
        assert!(GanConfig { lambda: -1.0, ..GanConfig::default() }.validate().is_err());
        assert!(GanConfig { critic_steps_per_gen: 0, ..GanConfig::default() }.validate().is_err());
        assert!(GanConfig { latent_dim: 0, ..GanConfig::default() }.validate().is_err());
        assert!(GanConfig::default().validate().is_ok());
    }

    #[test]
    fn objective_helpers() {
        assert!((minimax_value(&[0.5], &[0.5]) - 2.0 * 0.5f64.ln()).abs() < 1e-15);
        assert_eq!(wasserstein_value(&[1.0, 3.0], &[0.0, 0.0]), 2.0);
    }

    #[test]
    fn sampling_contract() {
        let cfg = GanConfig { latent_dim: 4, generator_hidden: vec![8], critic_hidden: vec![8], ..GanConfig::default() };
        let scaler = XirpScaler { diag: PartitionScale { min: 0.1, max: 1.0 }, offdiag: PartitionScale { min: -1.0, max: 1.0 } };
        let model = GanModel::init(cfg, 3, scaler).unwrap();
        assert!(sample_xirps(&model, 0, 1).unwrap().is_empty());
        let a = sample_xirps(&model, 5, 9).unwrap();
        assert_eq!(a, sample_xirps(&model, 5, 9).unwrap());
        assert!(a.iter().all(|x| x.size() == 3 && x.matrix.iter().all(|v| (-1.0..=1.0).contains(v))));
    }
}
