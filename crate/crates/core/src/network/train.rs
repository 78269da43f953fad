//! Deterministic mini-batch training.
//!
//! Given the same seed, config, and dataset, the parameter trajectory is
//! bit-identical run to run: the RNG is a seeded ChaCha stream, per-sample
//! gradients may be computed in parallel but are reduced in index order, and
//! the optimizers are plain sequential updates.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::morph2d::ImageGrid;
use crate::parallel;
use crate::scalar::Real;

use super::loss::{grad_bce, grad_dssim, grad_mse, loss_bce, loss_dssim, loss_mse};
use super::{Gradients, Layer, Mode, Network};

/// Loss selector. DSSIM treats predictions and labels as flattened
/// `height x width` single-channel images.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    Mse,
    Bce,
    Dssim {
        height: usize,
        width: usize,
        patch: usize,
        stride: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    /// Adam with the standard defaults.
    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    fn lr(&self) -> f64 {
        match self {
            Optimizer::Sgd { lr } => *lr,
            Optimizer::Adam { lr, .. } => *lr,
        }
    }
}

/// Parameter (re-)initialization policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitScheme {
    /// Structuring elements ~ U(-0.5, 0.5); linear weights ~ U(+-1/sqrt(d_in));
    /// biases zero. Keeps initial dilation/erosion outputs in the data range.
    Default,
    /// Every structuring-element and weight entry ~ U(lo, hi); biases zero.
    Uniform { lo: f64, hi: f64 },
    Zeros,
}

/// Multiply every soft layer's beta by `factor` each `every` epochs, up to `cap`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaAnneal {
    pub factor: f64,
    pub every: usize,
    pub cap: f64,
}

impl Default for BetaAnneal {
    fn default() -> Self {
        BetaAnneal { factor: 1.5, every: 50, cap: 200.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub optimizer: Optimizer,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// `None` keeps the network's current parameters.
    pub init: Option<InitScheme>,
    pub beta_anneal: Option<BetaAnneal>,
}

impl TrainConfig {
    pub fn new(loss: LossKind, optimizer: Optimizer, epochs: usize, batch_size: usize, seed: u64) -> Self {
        TrainConfig {
            loss,
            optimizer,
            epochs,
            batch_size,
            seed,
            init: None,
            beta_anneal: None,
        }
    }
}

/// Trained network plus the mean training loss of each epoch.
#[derive(Debug, Clone)]
pub struct TrainReport<T> {
    pub network: Network<T>,
    pub loss_trace: Vec<T>,
}

impl<T: Real> Network<T> {
    /// Redraw all parameters from `scheme` using the given RNG stream.
    pub fn init_params<R: Rng>(&mut self, scheme: InitScheme, rng: &mut R) {
        for layer in self.layers_mut() {
            match layer {
                Layer::DilationErosion(de) => {
                    let (lo, hi) = match scheme {
                        InitScheme::Default => (-0.5, 0.5),
                        InitScheme::Uniform { lo, hi } => (lo, hi),
                        InitScheme::Zeros => (0.0, 0.0),
                    };
                    for v in de.s_plus_mut().data_mut() {
                        *v = T::of(uniform(rng, lo, hi));
                    }
                    for v in de.s_minus_mut().data_mut() {
                        *v = T::of(uniform(rng, lo, hi));
                    }
                }
                Layer::Linear(lin) => {
                    let d_in = lin.in_dim() as f64;
                    let (lo, hi) = match scheme {
                        InitScheme::Default => (-1.0 / d_in.sqrt(), 1.0 / d_in.sqrt()),
                        InitScheme::Uniform { lo, hi } => (lo, hi),
                        InitScheme::Zeros => (0.0, 0.0),
                    };
                    for v in lin.weights_mut().data_mut() {
                        *v = T::of(uniform(rng, lo, hi));
                    }
                    if let Some(b) = lin.bias_mut() {
                        for v in b.iter_mut() {
                            *v = T::zero();
                        }
                    }
                }
                Layer::Sigmoid => {}
            }
        }
    }
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    // always consume one draw so schemes differ only in scaling, not stream position
    let u = rng.random::<f64>();
    lo + (hi - lo) * u
}

/// Per-sample loss value and gradient with respect to the prediction.
fn loss_and_grad<T: Real>(kind: LossKind, pred: &[T], target: &[T]) -> Result<(T, Vec<T>)> {
    match kind {
        LossKind::Mse => Ok((loss_mse(pred, target)?, grad_mse(pred, target)?)),
        LossKind::Bce => Ok((loss_bce(pred, target)?, grad_bce(pred, target)?)),
        LossKind::Dssim { height, width, patch, stride } => {
            let p = ImageGrid::new(height, width, 1, pred.to_vec())?;
            let t = ImageGrid::new(height, width, 1, target.to_vec())?;
            let value = loss_dssim(&t, &p, patch, stride)?;
            let grad = grad_dssim(&t, &p, patch, stride)?;
            Ok((value, grad.data().to_vec()))
        }
    }
}

fn validate<T: Real>(net: &Network<T>, data: &Dataset<T>, cfg: &TrainConfig) -> Result<()> {
    if cfg.epochs == 0 {
        return Err(Error::invalid("epochs must be >= 1"));
    }
    if cfg.batch_size == 0 || cfg.batch_size > data.len() {
        return Err(Error::invalid(format!(
            "batch_size must be in 1..={}, got {}",
            data.len(),
            cfg.batch_size
        )));
    }
    if !(cfg.optimizer.lr() > 0.0 && cfg.optimizer.lr().is_finite()) {
        return Err(Error::invalid("learning rate must be > 0"));
    }
    if let Optimizer::Adam { beta1, beta2, eps, .. } = cfg.optimizer {
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps <= 0.0 {
            return Err(Error::invalid("adam moments must be in [0,1), eps > 0"));
        }
    }
    if let Some(anneal) = &cfg.beta_anneal {
        if anneal.factor <= 0.0 || anneal.every == 0 || anneal.cap <= 0.0 {
            return Err(Error::invalid("beta anneal needs factor > 0, every >= 1, cap > 0"));
        }
    }
    if data.dim() != net.input_dim() {
        return Err(Error::dim(format!(
            "dataset features have dim {}, network expects {}",
            data.dim(),
            net.input_dim()
        )));
    }
    let out = net.output_dim();
    let want = match cfg.loss {
        LossKind::Mse | LossKind::Bce => data.label_dim(),
        LossKind::Dssim { height, width, .. } => {
            if data.label_dim() != height * width {
                return Err(Error::dim(format!(
                    "dssim labels must flatten {height}x{width} images, label dim is {}",
                    data.label_dim()
                )));
            }
            height * width
        }
    };
    if out != want {
        return Err(Error::dim(format!(
            "network outputs {out} values, loss expects {want}"
        )));
    }
    Ok(())
}

/// Mini-batch gradient descent; deterministic given the seed.
pub fn train<T: Real>(
    net: &Network<T>,
    data: &Dataset<T>,
    cfg: &TrainConfig,
) -> Result<TrainReport<T>> {
    validate(net, data, cfg)?;
    let mut net = net.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    if let Some(scheme) = cfg.init {
        net.init_params(scheme, &mut rng);
    }

    let n_params = net.param_count();
    let mut adam_m = vec![T::zero(); n_params];
    let mut adam_v = vec![T::zero(); n_params];
    let mut step_count = 0u32;

    let mut indices: Vec<usize> = (0..data.len()).collect();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        if let Some(anneal) = &cfg.beta_anneal {
            if epoch > 0 && epoch % anneal.every == 0 {
                anneal_betas(&mut net, anneal);
            }
        }
        indices.shuffle(&mut rng);
        let mut epoch_loss = T::zero();
        for batch in indices.chunks(cfg.batch_size) {
            let per_sample = parallel::map_indexed(batch.len(), |k| {
                let (x, y) = data.row(batch[k]);
                let trace = net.forward_trace(x.as_slice())?;
                let pred = trace.activations.last().expect("trace non-empty");
                let (value, dpred) = loss_and_grad(cfg.loss, pred, y.as_slice())?;
                let (grads, _) = net.backward_from_trace(&trace, &dpred)?;
                Ok::<_, Error>((value, grads))
            });
            let mut batch_grads = Gradients::zeros_like(&net);
            for item in per_sample {
                let (value, grads) = item?;
                epoch_loss += value;
                batch_grads.add_assign(&grads);
            }
            batch_grads.scale(T::one() / T::of_usize(batch.len()));
            step_count += 1;
            apply_step(
                &mut net,
                &batch_grads,
                cfg.optimizer,
                step_count,
                &mut adam_m,
                &mut adam_v,
            );
        }
        loss_trace.push(epoch_loss / T::of_usize(data.len()));
    }

    Ok(TrainReport { network: net, loss_trace })
}

fn anneal_betas<T: Real>(net: &mut Network<T>, anneal: &BetaAnneal) {
    for layer in net.layers_mut() {
        if let Layer::DilationErosion(de) = layer {
            if let Mode::Soft(h) = de.mode() {
                let beta = (h.beta().as_f64() * anneal.factor).min(anneal.cap);
                de.set_mode(Mode::soft(T::of(beta)).expect("annealed beta stays positive"));
            }
        }
    }
}

fn apply_step<T: Real>(
    net: &mut Network<T>,
    grads: &Gradients<T>,
    optimizer: Optimizer,
    t: u32,
    adam_m: &mut [T],
    adam_v: &mut [T],
) {
    let mut params = net.params_to_vec();
    let flat = grads.to_vec();
    match optimizer {
        Optimizer::Sgd { lr } => {
            let lr = T::of(lr);
            for (p, g) in params.iter_mut().zip(&flat) {
                *p -= lr * *g;
            }
        }
        Optimizer::Adam { lr, beta1, beta2, eps } => {
            let (lr, b1, b2, eps) = (T::of(lr), T::of(beta1), T::of(beta2), T::of(eps));
            let one = T::one();
            let bc1 = one - b1.powi(t as i32);
            let bc2 = one - b2.powi(t as i32);
            for (i, p) in params.iter_mut().enumerate() {
                let g = flat[i];
                adam_m[i] = b1 * adam_m[i] + (one - b1) * g;
                adam_v[i] = b2 * adam_v[i] + (one - b2) * g * g;
                let m_hat = adam_m[i] / bc1;
                let v_hat = adam_v[i] / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
    net.set_params_from(&params).expect("step preserves shape");
}

/// Mean loss of a network over a dataset (no gradients).
pub fn mean_loss<T: Real>(net: &Network<T>, data: &Dataset<T>, kind: LossKind) -> Result<T> {
    let mut total = T::zero();
    for (x, y) in data.rows() {
        let pred = net.forward(x.as_slice())?;
        total += loss_and_grad(kind, &pred, y.as_slice())?.0;
    }
    Ok(total / T::of_usize(data.len()))
}

/// Fraction of rows whose thresholded scalar output matches the 0/1 label.
pub fn classification_accuracy<T: Real>(
    net: &Network<T>,
    data: &Dataset<T>,
    threshold: f64,
) -> Result<f64> {
    if net.output_dim() != 1 || data.label_dim() != 1 {
        return Err(Error::Unsupported(
            "accuracy is defined for scalar outputs and 0/1 labels".into(),
        ));
    }
    let thr = T::of(threshold);
    let mut correct = 0usize;
    for (x, y) in data.rows() {
        let pred = net.forward(x.as_slice())?[0];
        let label = if pred > thr { T::one() } else { T::zero() };
        if label == y[0] {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}
