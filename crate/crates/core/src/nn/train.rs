use ndarray::{Array2, Array3, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::LossKind;
use super::network::{Network, NetworkParams};
use super::optim::{adam_step, early_stop_update, AdamState, EarlyStopState};
use super::{NnError, Result};

/// Inputs `(batch, steps, features)` paired with targets `(batch, outputs)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Array3<f64>,
    pub targets: Array2<f64>,
}

impl Dataset {
    pub fn new(inputs: Array3<f64>, targets: Array2<f64>) -> Result<Self> {
        if inputs.dim().0 != targets.nrows() {
            return Err(NnError::ShapeMismatch(format!("{} inputs vs {} targets", inputs.dim().0, targets.nrows())));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset { inputs: self.inputs.select(Axis(0), idx), targets: self.targets.select(Axis(0), idx) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub loss: LossKind,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Parameters at the best monitored epoch.
    pub params: NetworkParams,
    pub best_metric: f64,
    pub epochs: usize,
    pub metric_history: Vec<f64>,
}

/// Minibatch Adam training with early stopping on `metric(outputs, targets)`
/// evaluated over `monitor` after every epoch. Returns the best snapshot.
pub fn fit<M>(net: &Network, init: NetworkParams, train: &Dataset, monitor: &Dataset, cfg: &TrainConfig, metric: M) -> Result<FitOutcome>
where
    M: Fn(&Array2<f64>, &Array2<f64>) -> f64,
{
    if train.is_empty() || monitor.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = init;
    let mut adam = AdamState::new(params.len(), cfg.learning_rate, 0.9, 0.999);
    let mut stop = EarlyStopState::new(cfg.patience);
    let mut best = params.clone();
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let batch = cfg.batch_size.max(1);
    for _ in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let b = train.subset(chunk);
            let (loss, grad) = net.gradient(&params, &b.inputs, &b.targets, cfg.loss)?;
            if !loss.is_finite() {
                return Err(NnError::Diverged);
            }
            adam_step(&mut params.0, &grad, &mut adam)?;
        }
        let out = net.forward(&params, &monitor.inputs)?;
        let m = metric(&out, &monitor.targets);
        if !m.is_finite() {
            return Err(NnError::Diverged);
        }
        history.push(m);
        if early_stop_update(&mut stop, m) {
            best.0.copy_from_slice(&params.0);
        }
        if stop.should_stop() {
            break;
        }
    }
    Ok(FitOutcome { params: best, best_metric: stop.best, epochs: history.len(), metric_history: history })
}
