//! Adam optimization, learning-rate schedule, minibatching, early
//! stopping with best-weight restoration.

use alloc::format;
use alloc::vec::Vec;

use crate::augment::AugmentPipeline;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::ModelGraph;
use crate::image::{preprocess, stack_batch, NormStats};
use crate::metrics::{weighted_metrics, ConfusionMatrix};
use crate::rng::{tags, Rng};
use crate::scalar::Scalar;
use crate::tape::Tape;
use crate::tensor::Tensor;

/// Training hyperparameters. Defaults follow the study configuration:
/// Adam, 200 epochs, batch 64, weight decay 1e-4, patience 10.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f32,
    pub weight_decay: f32,
    pub patience: usize,
    /// Epoch indices at which the learning rate is multiplied by
    /// `gamma`; empty means a constant rate.
    pub milestones: Vec<usize>,
    pub gamma: f32,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 64,
            base_lr: 1e-3,
            weight_decay: 1e-4,
            patience: 10,
            milestones: Vec::new(),
            gamma: 0.1,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma must be in (0,1), got {}", self.gamma)));
        }
        if self.patience < 1 {
            return Err(Error::Config("patience must be >= 1".into()));
        }
        if !self.base_lr.is_finite() || self.base_lr <= 0.0 {
            return Err(Error::Config("base_lr must be positive".into()));
        }
        Ok(())
    }

    /// The multi-step preset used by the batchnorm variant.
    pub fn with_multistep(mut self) -> Self {
        self.milestones = alloc::vec![30, 60];
        self
    }
}

/// lr = base_lr * gamma^k with k = number of milestones <= epoch.
pub fn multistep_lr(epoch: usize, cfg: &TrainConfig) -> f32 {
    let k = cfg.milestones.iter().filter(|&&m| m <= epoch).count();
    let mut lr = cfg.base_lr;
    for _ in 0..k {
        lr *= cfg.gamma;
    }
    lr
}

/// Deterministic epoch shuffle, last partial batch retained.
pub fn minibatches(n: usize, batch_size: usize, epoch: usize, seed: u64) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1);
    let perm = Rng::stream(seed, tags::SHUFFLE, epoch as u64, 0).permutation(n);
    perm.chunks(batch_size).map(|c| c.to_vec()).collect()
}

/// One Adam update for a single parameter tensor. `bias1`/`bias2` are the
/// accumulated beta powers (beta^t). A non-finite gradient aborts the
/// step before any state is touched.
#[allow(clippy::too_many_arguments)]
pub fn adam_step<T: Scalar>(
    value: &mut Tensor<T>,
    grad: &Tensor<T>,
    m: &mut Tensor<T>,
    v: &mut Tensor<T>,
    bias1: T,
    bias2: T,
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    weight_decay: T,
) -> Result<()> {
    if value.shape() != grad.shape() {
        return Err(Error::Dim(format!(
            "adam: value shape {:?} vs grad shape {:?}",
            value.shape(),
            grad.shape()
        )));
    }
    if !grad.all_finite() {
        return Err(Error::Optim("non-finite gradient; step aborted".into()));
    }
    let one = T::ONE;
    let c1 = one / (one - bias1);
    let c2 = one / (one - bias2);
    let vd = value.data_mut();
    let md = m.data_mut();
    let nd = v.data_mut();
    for i in 0..vd.len() {
        let g = grad.data()[i] + weight_decay * vd[i];
        md[i] = beta1 * md[i] + (one - beta1) * g;
        nd[i] = beta2 * nd[i] + (one - beta2) * g * g;
        let mhat = md[i] * c1;
        let vhat = nd[i] * c2;
        vd[i] -= lr * mhat / (vhat.sqrt() + eps);
    }
    Ok(())
}

/// Per-parameter moments plus the shared step counter.
pub struct AdamState<T: Scalar> {
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    pub t: u64,
    beta1: T,
    beta2: T,
    eps: T,
    beta1_pow: T,
    beta2_pow: T,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(model: &ModelGraph<T>) -> Self {
        let m = model.params().iter().map(|p| Tensor::zeros(p.value.shape().to_vec())).collect();
        let v = model.params().iter().map(|p| Tensor::zeros(p.value.shape().to_vec())).collect();
        AdamState {
            m,
            v,
            t: 0,
            beta1: T::from_f64(0.9),
            beta2: T::from_f64(0.999),
            eps: T::from_f64(1e-8),
            beta1_pow: T::ONE,
            beta2_pow: T::ONE,
        }
    }

    /// Applies one step to every trainable parameter using the gradients
    /// accumulated in the model.
    pub fn step(&mut self, model: &mut ModelGraph<T>, lr: T, weight_decay: T) -> Result<()> {
        self.t += 1;
        self.beta1_pow *= self.beta1;
        self.beta2_pow *= self.beta2;
        for (i, p) in model.params_mut().iter_mut().enumerate() {
            if !p.trainable {
                continue;
            }
            adam_step(
                &mut p.value,
                &p.grad,
                &mut self.m[i],
                &mut self.v[i],
                self.beta1_pow,
                self.beta2_pow,
                lr,
                self.beta1,
                self.beta2,
                self.eps,
                weight_decay,
            )?;
        }
        Ok(())
    }
}

/// val-loss early stopping: improvement means dropping below the best
/// value by more than 1e-6.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: f64,
    pub best_epoch: usize,
    pub since_improvement: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: f64::INFINITY, best_epoch: 0, since_improvement: 0 }
    }

    /// Feeds one epoch's validation loss; returns true if it improved.
    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> bool {
        if self.best - val_loss > 1e-6 {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.since_improvement = 0;
            true
        } else {
            self.since_improvement += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.since_improvement >= self.patience
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_f1: f64,
    pub lr: f32,
}

#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Index into `epochs` of the restored best checkpoint.
    pub best_epoch: usize,
}

/// How images become model inputs during training and evaluation.
#[derive(Debug, Clone)]
pub struct DataConfig {
    pub target_res: usize,
    pub norm: Option<NormStats>,
    /// Route inputs through the three-channel 224x224 path used by
    /// models that expect photo-collection normalization.
    pub pretrained: bool,
}

impl DataConfig {
    pub fn grayscale(target_res: usize, norm: Option<NormStats>) -> Self {
        DataConfig { target_res, norm, pretrained: false }
    }
}

fn batch_tensors(
    ds: &Dataset,
    indices: &[usize],
    data_cfg: &DataConfig,
    augment: Option<(&AugmentPipeline, u64, usize)>,
) -> Result<(Tensor<f32>, Vec<usize>)> {
    let mut tensors = Vec::with_capacity(indices.len());
    let mut labels = Vec::with_capacity(indices.len());
    for &si in indices {
        let sample = &ds.samples[si];
        let t = match augment {
            Some((pipeline, seed, epoch)) => {
                let mut rng = AugmentPipeline::rng_for(seed, epoch, si);
                let img = pipeline.apply(&sample.image, &mut rng);
                preprocess(&img, data_cfg.target_res, data_cfg.pretrained, data_cfg.norm.as_ref())?
            }
            None => preprocess(
                &sample.image,
                data_cfg.target_res,
                data_cfg.pretrained,
                data_cfg.norm.as_ref(),
            )?,
        };
        tensors.push(t);
        labels.push(sample.label);
    }
    Ok((stack_batch(&tensors)?, labels))
}

/// Eval-mode loss, weighted F1, and accuracy over a dataset.
pub fn evaluate(
    model: &ModelGraph<f32>,
    ds: &Dataset,
    data_cfg: &DataConfig,
    batch_size: usize,
) -> Result<(f64, f64, f64)> {
    if ds.is_empty() {
        return Err(Error::Stats("cannot evaluate on an empty dataset".into()));
    }
    let mut loss_sum = 0f64;
    let mut preds = Vec::with_capacity(ds.len());
    let mut labels_all = Vec::with_capacity(ds.len());
    let indices: Vec<usize> = (0..ds.len()).collect();
    for chunk in indices.chunks(batch_size.max(1)) {
        let (x, labels) = batch_tensors(ds, chunk, data_cfg, None)?;
        let logits = model.forward_eval(&x)?;
        let (loss, _) = crate::ops::softmax_cross_entropy(&logits, &labels)?;
        loss_sum += loss as f64 * chunk.len() as f64;
        let (_, classes) = argmax_rows(&logits);
        preds.extend(classes);
        labels_all.extend(labels);
    }
    let cm = ConfusionMatrix::from_predictions(&preds, &labels_all, model.output_dim)?;
    let report = weighted_metrics(&cm)?;
    Ok((loss_sum / ds.len() as f64, report.f1, report.accuracy))
}

fn argmax_rows(logits: &Tensor<f32>) -> (usize, Vec<usize>) {
    let (n, c) = logits.dims2().expect("logits are 2-D");
    let mut out = Vec::with_capacity(n);
    for r in 0..n {
        let row = &logits.data()[r * c..(r + 1) * c];
        let mut best = 0;
        for (i, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = i;
            }
        }
        out.push(best);
    }
    (n, out)
}

/// Trains with Adam and early stopping; the model is left holding the
/// best-epoch weights.
pub fn train_model(
    model: &mut ModelGraph<f32>,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
    augment: Option<&AugmentPipeline>,
    data_cfg: &DataConfig,
) -> Result<TrainHistory> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Config("train and validation sets must be non-empty".into()));
    }
    if train.num_classes() != model.output_dim {
        return Err(Error::Config(format!(
            "model head has {} classes but dataset has {}",
            model.output_dim,
            train.num_classes()
        )));
    }

    let mut opt = AdamState::new(model);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut history = TrainHistory::default();
    let mut best_snapshot = model.snapshot();

    for epoch in 0..cfg.epochs {
        let lr = multistep_lr(epoch, cfg);
        let batches = minibatches(train.len(), cfg.batch_size, epoch, cfg.seed);
        let mut loss_sum = 0f64;
        for (bi, batch) in batches.iter().enumerate() {
            let (x, labels) =
                batch_tensors(train, batch, data_cfg, augment.map(|p| (p, cfg.seed, epoch)))?;
            let mut tape = Tape::new();
            let pass = model.forward_train(&mut tape, x)?;
            let (loss_node, _) = tape
                .softmax_cross_entropy(pass.output, &labels)
                .map_err(|e| train_error(e, epoch, bi))?;
            let loss = tape.value(loss_node).item()? as f64;
            if !loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    batch: bi,
                    msg: format!("non-finite loss {loss}"),
                });
            }
            loss_sum += loss * batch.len() as f64;
            let mut grads = tape.backward(loss_node)?;
            model.zero_grads();
            model.accumulate_grads(&pass, &mut grads);
            opt.step(model, lr, cfg.weight_decay).map_err(|e| train_error(e, epoch, bi))?;
        }
        let train_loss = loss_sum / train.len() as f64;
        let (val_loss, val_f1, _) = evaluate(model, val, data_cfg, cfg.batch_size)?;
        history.epochs.push(EpochRecord { epoch, train_loss, val_loss, val_f1, lr });

        if stopper.observe(epoch, val_loss) {
            best_snapshot = model.snapshot();
        }
        if stopper.should_stop() {
            break;
        }
    }
    model.restore(&best_snapshot);
    history.best_epoch = stopper.best_epoch;
    Ok(history)
}

fn train_error(e: Error, epoch: usize, batch: usize) -> Error {
    match e {
        Error::Optim(msg) | Error::State(msg) => Error::Training { epoch, batch, msg },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multistep_schedule_values() {
        let cfg = TrainConfig { base_lr: 0.001, ..TrainConfig::default() }.with_multistep();
        assert_eq!(multistep_lr(10, &cfg), 0.001);
        assert!((multistep_lr(45, &cfg) - 0.0001).abs() < 1e-9);
        assert!((multistep_lr(100, &cfg) - 0.00001).abs() < 1e-9);
        let flat = TrainConfig::default();
        assert_eq!(multistep_lr(150, &flat), flat.base_lr);
    }

    #[test]
    fn minibatch_sizes_and_determinism() {
        let b = minibatches(130, 64, 0, 9);
        let sizes: Vec<usize> = b.iter().map(|c| c.len()).collect();
        assert_eq!(sizes, [64, 64, 2]);
        assert_eq!(minibatches(130, 64, 0, 9), b);
        // all indices exactly once
        let mut all: Vec<usize> = b.into_iter().flatten().collect();
        all.sort_unstable();
        assert_eq!(all, (0..130).collect::<Vec<_>>());
    }

    #[test]
    fn epoch_orders_differ() {
        for seed in 0..20 {
            let a = minibatches(100, 100, 0, seed);
            let b = minibatches(100, 100, 1, seed);
            assert_ne!(a[0], b[0], "seed {seed}");
        }
    }

    #[test]
    fn adam_zero_grad_keeps_param() {
        let mut value = Tensor::<f32>::filled(alloc::vec![3], 2.0);
        let grad = Tensor::<f32>::zeros(alloc::vec![3]);
        let mut m = Tensor::<f32>::zeros(alloc::vec![3]);
        let mut v = Tensor::<f32>::zeros(alloc::vec![3]);
        adam_step(&mut value, &grad, &mut m, &mut v, 0.9, 0.999, 0.1, 0.9, 0.999, 1e-8, 0.0).unwrap();
        for &x in value.data() {
            assert_eq!(x, 2.0);
        }
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let mut value = Tensor::<f32>::filled(alloc::vec![1], 1.0);
        let grad = Tensor::<f32>::filled(alloc::vec![1], 0.3);
        let mut m = Tensor::<f32>::zeros(alloc::vec![1]);
        let mut v = Tensor::<f32>::zeros(alloc::vec![1]);
        adam_step(&mut value, &grad, &mut m, &mut v, 0.9, 0.999, 0.1, 0.9, 0.999, 1e-8, 0.0).unwrap();
        // first step moves by ~lr in the negative gradient direction
        assert!((value.data()[0] - (1.0 - 0.1)).abs() < 1e-4, "{}", value.data()[0]);
    }

    #[test]
    fn adam_rejects_non_finite_grad() {
        let mut value = Tensor::<f32>::filled(alloc::vec![1], 1.0);
        let mut grad = Tensor::<f32>::zeros(alloc::vec![1]);
        grad.data_mut()[0] = f32::NAN;
        let mut m = Tensor::<f32>::zeros(alloc::vec![1]);
        let mut v = Tensor::<f32>::zeros(alloc::vec![1]);
        let err = adam_step(&mut value, &grad, &mut m, &mut v, 0.9, 0.999, 0.1, 0.9, 0.999, 1e-8, 0.0)
            .unwrap_err();
        assert!(matches!(err, Error::Optim(_)));
        assert_eq!(value.data()[0], 1.0, "aborted step must not move the parameter");
    }

    #[test]
    fn adam_converges_on_quadratic() {
        // f(w) = (w-3)^2, the recursion run straight from the update rule
        let mut w = Tensor::<f64>::filled(alloc::vec![1], 0.0);
        let mut m = Tensor::<f64>::zeros(alloc::vec![1]);
        let mut v = Tensor::<f64>::zeros(alloc::vec![1]);
        let (mut b1p, mut b2p) = (1.0f64, 1.0f64);
        for _ in 0..200 {
            b1p *= 0.9;
            b2p *= 0.999;
            let g = 2.0 * (w.data()[0] - 3.0);
            let grad = Tensor::<f64>::filled(alloc::vec![1], g);
            adam_step(&mut w, &grad, &mut m, &mut v, b1p, b2p, 0.1, 0.9, 0.999, 1e-8, 0.0).unwrap();
        }
        assert!((w.data()[0] - 3.0).abs() < 0.05, "w = {}", w.data()[0]);
    }

    #[test]
    fn weight_decay_shrinks_params_with_zero_grads() {
        let mut value = Tensor::<f32>::filled(alloc::vec![4], 1.0);
        let grad = Tensor::<f32>::zeros(alloc::vec![4]);
        let mut m = Tensor::<f32>::zeros(alloc::vec![4]);
        let mut v = Tensor::<f32>::zeros(alloc::vec![4]);
        let (mut b1p, mut b2p) = (1.0f32, 1.0f32);
        let mut prev = 1.0f32;
        for _ in 0..5 {
            b1p *= 0.9;
            b2p *= 0.999;
            adam_step(&mut value, &grad, &mut m, &mut v, b1p, b2p, 0.01, 0.9, 0.999, 1e-8, 1e-2).unwrap();
            let now = value.data()[0].abs();
            assert!(now < prev, "norm must strictly decrease: {now} vs {prev}");
            prev = now;
        }
    }

    #[test]
    fn early_stopping_counts_patience() {
        // crafted sequence: 1.0, 0.9, then ten non-improving epochs
        let mut es = EarlyStopping::new(10);
        assert!(es.observe(0, 1.0));
        assert!(es.observe(1, 0.9));
        let mut stopped_at = None;
        for e in 2..30 {
            es.observe(e, 0.91);
            if es.should_stop() {
                stopped_at = Some(e);
                break;
            }
        }
        // epochs 2..=11 are the ten non-improving ones (0-based)
        assert_eq!(stopped_at, Some(11));
        assert_eq!(es.best_epoch, 1);
    }

    #[test]
    fn improvement_needs_margin() {
        let mut es = EarlyStopping::new(3);
        assert!(es.observe(0, 1.0));
        // within tolerance: not an improvement
        assert!(!es.observe(1, 1.0 - 5e-7));
        assert!(es.observe(2, 0.99));
    }
}
