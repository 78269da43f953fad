//! Morphological blocks, stacked networks, and reverse-mode gradients.
//!
//! A [`DilationErosionLayer`] holds `n` dilation and `m` erosion neurons,
//! each owning one structuring element (a row of `s_plus` / `s_minus`).
//! With `with_bias` set, the layer input is augmented with a trailing 0 and
//! every structuring element gains one learned column, which is what lets a
//! neuron place hyperplanes that do not pass through the data's max/min
//! envelope. A [`LinearLayer`] combines neuron outputs; the classic
//! morphological block is the pair (dilation-erosion layer, linear layer).
//!
//! [`Network`] stacks layers, checks that dimensions chain, and provides
//! `forward` plus a reverse-mode [`Network::backward`] producing one
//! gradient per parameter. In soft mode gradients are the exact softmax
//! weights; in hard mode they are the one-hot subgradients, so each neuron
//! updates exactly one structuring-element entry per example.

mod json;
mod loss;
mod train;

pub use json::{load_json, save_json};
pub use loss::{grad_bce, grad_dssim, grad_mse, loss_bce, loss_dssim, loss_mse};
pub use train::{
    classification_accuracy, mean_loss, train, BetaAnneal, InitScheme, LossKind, Optimizer,
    TrainConfig, TrainReport,
};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;
use crate::tropical::{
    argmax_value, argmin_value, log_sum_exp_scaled, Hardness, Vector,
};

/// Hard max/min or the log-sum-exp relaxation with fixed hardness.
///
/// `beta` is a per-layer hyperparameter, never a learned value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode<T> {
    Hard,
    Soft(Hardness<T>),
}

impl<T: Real> Mode<T> {
    pub fn soft(beta: T) -> Result<Self> {
        Ok(Mode::Soft(Hardness::new(beta)?))
    }

    pub fn is_hard(&self) -> bool {
        matches!(self, Mode::Hard)
    }
}

/// A layer of `n` dilation and `m` erosion neurons (`n + m >= 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct DilationErosionLayer<T> {
    s_plus: Matrix<T>,
    s_minus: Matrix<T>,
    with_bias: bool,
    mode: Mode<T>,
}

impl<T: Real> DilationErosionLayer<T> {
    /// `s_plus`: `n_dilation x cols`, `s_minus`: `n_erosion x cols`, where
    /// `cols = input_dim + 1` when `with_bias` else `input_dim`.
    pub fn new(s_plus: Matrix<T>, s_minus: Matrix<T>, with_bias: bool, mode: Mode<T>) -> Result<Self> {
        if s_plus.rows() + s_minus.rows() == 0 {
            return Err(Error::invalid("dilation-erosion layer needs at least one neuron"));
        }
        if s_plus.rows() > 0 && s_minus.rows() > 0 && s_plus.cols() != s_minus.cols() {
            return Err(Error::dim(format!(
                "s_plus has {} columns, s_minus {}",
                s_plus.cols(),
                s_minus.cols()
            )));
        }
        let cols = if s_plus.rows() > 0 { s_plus.cols() } else { s_minus.cols() };
        if cols < 1 + usize::from(with_bias) {
            return Err(Error::dim("structuring elements too narrow for bias column"));
        }
        Ok(DilationErosionLayer { s_plus, s_minus, with_bias, mode })
    }

    /// Fresh layer with all structuring elements zero.
    pub fn zeros(n_dilation: usize, n_erosion: usize, input_dim: usize, with_bias: bool, mode: Mode<T>) -> Result<Self> {
        let cols = input_dim + usize::from(with_bias);
        Self::new(
            Matrix::zeros(n_dilation, cols),
            Matrix::zeros(n_erosion, cols),
            with_bias,
            mode,
        )
    }

    pub fn n_dilation(&self) -> usize {
        self.s_plus.rows()
    }

    pub fn n_erosion(&self) -> usize {
        self.s_minus.rows()
    }

    fn cols(&self) -> usize {
        if self.s_plus.rows() > 0 {
            self.s_plus.cols()
        } else {
            self.s_minus.cols()
        }
    }

    pub fn in_dim(&self) -> usize {
        self.cols() - usize::from(self.with_bias)
    }

    pub fn out_dim(&self) -> usize {
        self.n_dilation() + self.n_erosion()
    }

    pub fn with_bias(&self) -> bool {
        self.with_bias
    }

    pub fn mode(&self) -> Mode<T> {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode<T>) {
        self.mode = mode;
    }

    pub fn s_plus(&self) -> &Matrix<T> {
        &self.s_plus
    }

    pub fn s_minus(&self) -> &Matrix<T> {
        &self.s_minus
    }

    pub fn s_plus_mut(&mut self) -> &mut Matrix<T> {
        &mut self.s_plus
    }

    pub fn s_minus_mut(&mut self) -> &mut Matrix<T> {
        &mut self.s_minus
    }

    /// The layer input after bias augmentation (identity when `with_bias` is off).
    fn augment(&self, x: &[T]) -> Vec<T> {
        let mut xa = Vec::with_capacity(self.cols());
        xa.extend_from_slice(x);
        if self.with_bias {
            xa.push(T::zero());
        }
        xa
    }

    /// Outputs `(z_1^+, ..., z_n^+, z_1^-, ..., z_m^-)`.
    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.in_dim() {
            return Err(Error::dim(format!(
                "dilation-erosion layer expects {} inputs, got {}",
                self.in_dim(),
                x.len()
            )));
        }
        let xa = self.augment(x);
        let mut out = Vec::with_capacity(self.out_dim());
        for i in 0..self.n_dilation() {
            let s = self.s_plus.row(i);
            out.push(match self.mode {
                Mode::Hard => argmax_value(xa.iter().zip(s).map(|(&a, &b)| a + b)).1,
                Mode::Soft(h) => {
                    let v: Vec<T> = xa.iter().zip(s).map(|(&a, &b)| a + b).collect();
                    log_sum_exp_scaled(&v, h.beta(), None)
                }
            });
        }
        for j in 0..self.n_erosion() {
            let s = self.s_minus.row(j);
            out.push(match self.mode {
                Mode::Hard => argmin_value(xa.iter().zip(s).map(|(&a, &b)| a - b)).1,
                Mode::Soft(h) => {
                    let v: Vec<T> = xa.iter().zip(s).map(|(&a, &b)| b - a).collect();
                    -log_sum_exp_scaled(&v, h.beta(), None)
                }
            });
        }
        Ok(out)
    }

    /// Reverse step: accumulates structuring-element gradients and returns
    /// the gradient with respect to the (un-augmented) input.
    fn backward(
        &self,
        x: &[T],
        upstream: &[T],
        gs_plus: &mut Matrix<T>,
        gs_minus: &mut Matrix<T>,
    ) -> Vec<T> {
        let xa = self.augment(x);
        let cols = self.cols();
        let mut dxa = vec![T::zero(); cols];
        let mut weights = Vec::new();
        for (i, &u) in upstream.iter().enumerate().take(self.n_dilation()) {
            let s = self.s_plus.row(i);
            match self.mode {
                Mode::Hard => {
                    let (k, _) = argmax_value(xa.iter().zip(s).map(|(&a, &b)| a + b));
                    dxa[k] += u;
                    gs_plus.set(i, k, gs_plus.get(i, k) + u);
                }
                Mode::Soft(h) => {
                    let v: Vec<T> = xa.iter().zip(s).map(|(&a, &b)| a + b).collect();
                    log_sum_exp_scaled(&v, h.beta(), Some(&mut weights));
                    for k in 0..cols {
                        dxa[k] += u * weights[k];
                        gs_plus.set(i, k, gs_plus.get(i, k) + u * weights[k]);
                    }
                }
            }
        }
        for j in 0..self.n_erosion() {
            let u = upstream[self.n_dilation() + j];
            let s = self.s_minus.row(j);
            match self.mode {
                Mode::Hard => {
                    let (k, _) = argmin_value(xa.iter().zip(s).map(|(&a, &b)| a - b));
                    dxa[k] += u;
                    gs_minus.set(j, k, gs_minus.get(j, k) - u);
                }
                Mode::Soft(h) => {
                    let v: Vec<T> = xa.iter().zip(s).map(|(&a, &b)| b - a).collect();
                    log_sum_exp_scaled(&v, h.beta(), Some(&mut weights));
                    for k in 0..cols {
                        dxa[k] += u * weights[k];
                        gs_minus.set(j, k, gs_minus.get(j, k) - u * weights[k]);
                    }
                }
            }
        }
        dxa.truncate(self.in_dim());
        dxa
    }
}

/// Plain affine layer `y = W x (+ b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer<T> {
    w: Matrix<T>,
    b: Option<Vec<T>>,
}

impl<T: Real> LinearLayer<T> {
    pub fn new(w: Matrix<T>, b: Option<Vec<T>>) -> Result<Self> {
        if w.rows() == 0 || w.cols() == 0 {
            return Err(Error::dim("linear layer weight matrix must be non-empty"));
        }
        if let Some(b) = &b {
            if b.len() != w.rows() {
                return Err(Error::dim(format!(
                    "bias has length {}, expected {}",
                    b.len(),
                    w.rows()
                )));
            }
            if let Some(bad) = b.iter().position(|v| !v.is_finite()) {
                return Err(Error::nonfinite(format!("bias entry {bad} is {}", b[bad])));
            }
        }
        Ok(LinearLayer { w, b })
    }

    pub fn zeros(out_dim: usize, in_dim: usize, with_bias: bool) -> Self {
        LinearLayer {
            w: Matrix::zeros(out_dim, in_dim),
            b: with_bias.then(|| vec![T::zero(); out_dim]),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn weights(&self) -> &Matrix<T> {
        &self.w
    }

    pub fn weights_mut(&mut self) -> &mut Matrix<T> {
        &mut self.w
    }

    pub fn bias(&self) -> Option<&[T]> {
        self.b.as_deref()
    }

    pub fn bias_mut(&mut self) -> Option<&mut Vec<T>> {
        self.b.as_mut()
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        let mut y = self.w.matvec(x)?;
        if let Some(b) = &self.b {
            for (yi, bi) in y.iter_mut().zip(b) {
                *yi += *bi;
            }
        }
        Ok(y)
    }

    fn backward(
        &self,
        x: &[T],
        upstream: &[T],
        gw: &mut Matrix<T>,
        gb: &mut Option<Vec<T>>,
    ) -> Vec<T> {
        let mut dx = vec![T::zero(); self.in_dim()];
        for i in 0..self.out_dim() {
            let u = upstream[i];
            for j in 0..self.in_dim() {
                dx[j] += self.w.get(i, j) * u;
                gw.set(i, j, gw.get(i, j) + u * x[j]);
            }
            if let Some(gb) = gb {
                gb[i] += u;
            }
        }
        dx
    }
}

pub(crate) fn sigmoid<T: Real>(v: T) -> T {
    // split on sign so exp never overflows
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

/// One stage of a [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    DilationErosion(DilationErosionLayer<T>),
    Linear(LinearLayer<T>),
    Sigmoid,
}

impl<T: Real> Layer<T> {
    /// Output dimension given the input dimension (sigmoid preserves it).
    pub fn out_dim_for(&self, in_dim: usize) -> Result<usize> {
        match self {
            Layer::DilationErosion(l) => {
                if l.in_dim() != in_dim {
                    return Err(Error::dim(format!(
                        "dilation-erosion layer expects {} inputs, previous layer provides {in_dim}",
                        l.in_dim()
                    )));
                }
                Ok(l.out_dim())
            }
            Layer::Linear(l) => {
                if l.in_dim() != in_dim {
                    return Err(Error::dim(format!(
                        "linear layer expects {} inputs, previous layer provides {in_dim}",
                        l.in_dim()
                    )));
                }
                Ok(l.out_dim())
            }
            Layer::Sigmoid => Ok(in_dim),
        }
    }
}

/// A stacked architecture with validated layer chaining.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    input_dim: usize,
    layers: Vec<Layer<T>>,
}

/// Per-layer parameter gradients, shaped exactly like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerGrad<T> {
    DilationErosion { s_plus: Matrix<T>, s_minus: Matrix<T> },
    Linear { w: Matrix<T>, b: Option<Vec<T>> },
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<LayerGrad<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(net: &Network<T>) -> Self {
        let layers = net
            .layers
            .iter()
            .map(|l| match l {
                Layer::DilationErosion(de) => LayerGrad::DilationErosion {
                    s_plus: Matrix::zeros(de.s_plus.rows(), de.s_plus.cols()),
                    s_minus: Matrix::zeros(de.s_minus.rows(), de.s_minus.cols()),
                },
                Layer::Linear(lin) => LayerGrad::Linear {
                    w: Matrix::zeros(lin.w.rows(), lin.w.cols()),
                    b: lin.b.as_ref().map(|b| vec![T::zero(); b.len()]),
                },
                Layer::Sigmoid => LayerGrad::Sigmoid,
            })
            .collect();
        Gradients { layers }
    }

    pub fn add_assign(&mut self, other: &Gradients<T>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            match (a, b) {
                (
                    LayerGrad::DilationErosion { s_plus: ap, s_minus: am },
                    LayerGrad::DilationErosion { s_plus: bp, s_minus: bm },
                ) => {
                    for (x, y) in ap.data_mut().iter_mut().zip(bp.data()) {
                        *x += *y;
                    }
                    for (x, y) in am.data_mut().iter_mut().zip(bm.data()) {
                        *x += *y;
                    }
                }
                (LayerGrad::Linear { w: aw, b: ab }, LayerGrad::Linear { w: bw, b: bb }) => {
                    for (x, y) in aw.data_mut().iter_mut().zip(bw.data()) {
                        *x += *y;
                    }
                    if let (Some(ab), Some(bb)) = (ab, bb) {
                        for (x, y) in ab.iter_mut().zip(bb) {
                            *x += *y;
                        }
                    }
                }
                (LayerGrad::Sigmoid, LayerGrad::Sigmoid) => {}
                _ => unreachable!("gradients built from the same network"),
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for layer in &mut self.layers {
            match layer {
                LayerGrad::DilationErosion { s_plus, s_minus } => {
                    for v in s_plus.data_mut() {
                        *v *= factor;
                    }
                    for v in s_minus.data_mut() {
                        *v *= factor;
                    }
                }
                LayerGrad::Linear { w, b } => {
                    for v in w.data_mut() {
                        *v *= factor;
                    }
                    if let Some(b) = b {
                        for v in b.iter_mut() {
                            *v *= factor;
                        }
                    }
                }
                LayerGrad::Sigmoid => {}
            }
        }
    }

    /// Flatten in the same order as [`Network::params_to_vec`].
    pub fn to_vec(&self) -> Vec<T> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                LayerGrad::DilationErosion { s_plus, s_minus } => {
                    out.extend_from_slice(s_plus.data());
                    out.extend_from_slice(s_minus.data());
                }
                LayerGrad::Linear { w, b } => {
                    out.extend_from_slice(w.data());
                    if let Some(b) = b {
                        out.extend_from_slice(b);
                    }
                }
                LayerGrad::Sigmoid => {}
            }
        }
        out
    }
}

/// Activations recorded by [`Network::forward_trace`]: the input of each layer
/// plus the final output.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    pub activations: Vec<Vec<T>>,
}

impl<T: Real> Network<T> {
    pub fn new(input_dim: usize, layers: Vec<Layer<T>>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::dim("input dimension must be >= 1"));
        }
        if layers.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        let mut dim = input_dim;
        for layer in &layers {
            dim = layer.out_dim_for(dim)?;
        }
        Ok(Network { input_dim, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        let mut dim = self.input_dim;
        for layer in &self.layers {
            dim = layer.out_dim_for(dim).expect("validated at construction");
        }
        dim
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    /// Rebuild with a different layer list (revalidates chaining).
    pub fn with_layers(&self, layers: Vec<Layer<T>>) -> Result<Self> {
        Network::new(self.input_dim, layers)
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::dim(format!(
                "network expects {} inputs, got {}",
                self.input_dim,
                x.len()
            )));
        }
        if let Some(bad) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::nonfinite(format!("input entry {bad} is {}", x[bad])));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        for layer in &self.layers {
            cur = match layer {
                Layer::DilationErosion(l) => l.forward(&cur)?,
                Layer::Linear(l) => l.forward(&cur)?,
                Layer::Sigmoid => cur.into_iter().map(sigmoid).collect(),
            };
        }
        Ok(cur)
    }

    pub fn forward_vector(&self, x: &Vector<T>) -> Result<Vector<T>> {
        let out = self.forward(x.as_slice())?;
        Vector::new(out)
    }

    /// Forward pass that records every layer input for the reverse pass.
    pub fn forward_trace(&self, x: &[T]) -> Result<Trace<T>> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for layer in &self.layers {
            let cur = activations.last().expect("non-empty");
            let next = match layer {
                Layer::DilationErosion(l) => l.forward(cur)?,
                Layer::Linear(l) => l.forward(cur)?,
                Layer::Sigmoid => cur.iter().map(|&v| sigmoid(v)).collect(),
            };
            activations.push(next);
        }
        Ok(Trace { activations })
    }

    /// Reverse-mode gradients of `upstream . output` with respect to every
    /// parameter; also returns the gradient with respect to the input.
    pub fn backward(&self, x: &[T], upstream: &[T]) -> Result<(Gradients<T>, Vec<T>)> {
        let trace = self.forward_trace(x)?;
        self.backward_from_trace(&trace, upstream)
    }

    /// Reverse pass reusing a recorded forward trace.
    pub fn backward_from_trace(
        &self,
        trace: &Trace<T>,
        upstream: &[T],
    ) -> Result<(Gradients<T>, Vec<T>)> {
        let out_dim = trace.activations.last().expect("non-empty").len();
        if upstream.len() != out_dim {
            return Err(Error::dim(format!(
                "upstream gradient has length {}, output has {out_dim}",
                upstream.len()
            )));
        }
        let mut grads = Gradients::zeros_like(self);
        let mut delta = upstream.to_vec();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let input = &trace.activations[idx];
            delta = match (layer, &mut grads.layers[idx]) {
                (Layer::DilationErosion(l), LayerGrad::DilationErosion { s_plus, s_minus }) => {
                    l.backward(input, &delta, s_plus, s_minus)
                }
                (Layer::Linear(l), LayerGrad::Linear { w, b }) => {
                    l.backward(input, &delta, w, b)
                }
                (Layer::Sigmoid, LayerGrad::Sigmoid) => {
                    let output = &trace.activations[idx + 1];
                    delta
                        .iter()
                        .zip(output)
                        .map(|(&u, &y)| u * y * (T::one() - y))
                        .collect()
                }
                _ => unreachable!("gradients built from this network"),
            };
        }
        Ok((grads, delta))
    }

    pub fn param_count(&self) -> usize {
        self.params_to_vec().len()
    }

    /// Flatten all parameters (per layer: `s_plus`, `s_minus`; `w`, `b`).
    pub fn params_to_vec(&self) -> Vec<T> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::DilationErosion(l) => {
                    out.extend_from_slice(l.s_plus.data());
                    out.extend_from_slice(l.s_minus.data());
                }
                Layer::Linear(l) => {
                    out.extend_from_slice(l.w.data());
                    if let Some(b) = &l.b {
                        out.extend_from_slice(b);
                    }
                }
                Layer::Sigmoid => {}
            }
        }
        out
    }

    /// Inverse of [`Network::params_to_vec`].
    pub fn set_params_from(&mut self, flat: &[T]) -> Result<()> {
        let mut it = flat.iter().copied();
        let mut take = |dst: &mut [T]| -> Result<()> {
            for d in dst {
                *d = it
                    .next()
                    .ok_or_else(|| Error::dim("parameter vector too short"))?;
            }
            Ok(())
        };
        for layer in &mut self.layers {
            match layer {
                Layer::DilationErosion(l) => {
                    take(l.s_plus.data_mut())?;
                    take(l.s_minus.data_mut())?;
                }
                Layer::Linear(l) => {
                    take(l.w.data_mut())?;
                    if let Some(b) = &mut l.b {
                        take(b)?;
                    }
                }
                Layer::Sigmoid => {}
            }
        }
        if it.next().is_some() {
            return Err(Error::dim("parameter vector too long"));
        }
        Ok(())
    }
}

/// Forward pass of one morphological block: a dilation-erosion layer feeding
/// a linear combination layer.
pub fn forward_block<T: Real>(
    de: &DilationErosionLayer<T>,
    lin: &LinearLayer<T>,
    x: &Vector<T>,
) -> Result<Vector<T>> {
    if lin.in_dim() != de.out_dim() {
        return Err(Error::dim(format!(
            "linear layer expects {} inputs, dilation-erosion layer outputs {}",
            lin.in_dim(),
            de.out_dim()
        )));
    }
    let z = de.forward(x.as_slice())?;
    Vector::new(lin.forward(&z)?)
}
