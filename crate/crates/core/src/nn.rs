//! Feed-forward regression networks mixing dense and tensor-train layers,
//! with exact backpropagation (including gradients with respect to TT
//! cores), MSE loss and Adam optimization.
//!
//! Batches are row-major `[batch, dim]` tensors. A network is an ordered
//! layer list whose parametric layers chain dimensions; activation layers
//! carry no parameters. Forward passes cache exactly what the backward
//! pass needs, so gradients are closed-form, never approximated.

mod adam;
mod arch;
mod train;

pub use adam::{adam_step, AdamState};
pub use arch::{build_network, ArchSpec, HiddenSpec, NetKind};
pub use train::{train, TrainConfig};

use crate::tensor::{DenseTensor, TensorError};
use crate::tt::{tt_random_init, tt_svd_decompose, ModeFactorization, TtCache, TtError, TtMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("layer {index} expects input dim {want}, previous layer produces {got}")]
    LayerChainMismatch {
        index: usize,
        want: usize,
        got: usize,
    },
    #[error("network has no parametric layers")]
    EmptyNetwork,
    #[error("batch width {got} does not match network input dim {want}")]
    BatchWidth { got: usize, want: usize },
    #[error("bias length {got} does not match layer output dim {want}")]
    BiasLength { got: usize, want: usize },
    #[error("shapes {0:?} and {1:?} differ")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
    #[error("forward cache does not match this network/batch (stale or missing)")]
    StaleCache,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset rows disagree: {inputs} inputs vs {targets} targets")]
    RowCountMismatch { inputs: usize, targets: usize },
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("invalid architecture spec: {0}")]
    BadArch(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Tt(#[from] TtError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

/// One network layer: an affine map stored dense or in TT form, or a
/// pointwise activation.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense {
        /// `[in, out]` kernel.
        weights: DenseTensor,
        /// Per-output bias; `None` for pure linear factors produced by SVD
        /// compression.
        bias: Option<Vec<f64>>,
    },
    Tt {
        tt: TtMatrix,
        bias: Vec<f64>,
    },
    Activation(Activation),
}

impl Layer {
    /// Dense layer with He-normal weights and zero bias.
    pub fn dense_random(in_dim: usize, out_dim: usize, seed: u64) -> Layer {
        let sigma = (2.0 / in_dim as f64).sqrt();
        let normal = Normal::new(0.0, sigma).expect("positive sigma");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..in_dim * out_dim)
            .map(|_| normal.sample(&mut rng))
            .collect();
        Layer::Dense {
            weights: DenseTensor::new(vec![in_dim, out_dim], data).unwrap(),
            bias: Some(vec![0.0; out_dim]),
        }
    }

    pub fn dense(weights: DenseTensor, bias: Option<Vec<f64>>) -> Result<Layer, NnError> {
        let (_, out) = weights.matrix_dims()?;
        if let Some(b) = &bias {
            if b.len() != out {
                return Err(NnError::BiasLength {
                    got: b.len(),
                    want: out,
                });
            }
        }
        Ok(Layer::Dense { weights, bias })
    }

    /// TT layer with randomly initialized cores (train-from-scratch path).
    pub fn tt_random(fact: &ModeFactorization, seed: u64) -> Layer {
        let tt = tt_random_init(fact, seed);
        let bias = vec![0.0; tt.output_dim()];
        Layer::Tt { tt, bias }
    }

    /// TT layer obtained by decomposing an existing dense kernel
    /// (decompose-then-train path).
    pub fn tt_from_dense(
        weights: &DenseTensor,
        bias: Vec<f64>,
        fact: &ModeFactorization,
        rel_tol: f64,
    ) -> Result<Layer, NnError> {
        let tt = tt_svd_decompose(weights, fact, rel_tol)?;
        if bias.len() != tt.output_dim() {
            return Err(NnError::BiasLength {
                got: bias.len(),
                want: tt.output_dim(),
            });
        }
        Ok(Layer::Tt { tt, bias })
    }

    pub fn relu() -> Layer {
        Layer::Activation(Activation::Relu)
    }

    /// Input width of a parametric layer; `None` for activations.
    pub fn in_dim(&self) -> Option<usize> {
        match self {
            Layer::Dense { weights, .. } => Some(weights.shape()[0]),
            Layer::Tt { tt, .. } => Some(tt.input_dim()),
            Layer::Activation(_) => None,
        }
    }

    pub fn out_dim(&self) -> Option<usize> {
        match self {
            Layer::Dense { weights, .. } => Some(weights.shape()[1]),
            Layer::Tt { tt, .. } => Some(tt.output_dim()),
            Layer::Activation(_) => None,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Layer::Dense { weights, bias } => weights.len() + bias.as_ref().map_or(0, |b| b.len()),
            Layer::Tt { tt, bias } => tt.param_count() + bias.len(),
            Layer::Activation(_) => 0,
        }
    }
}

/// Ordered layer list with validated dimension chaining.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    input_dim: usize,
    output_dim: usize,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self, NnError> {
        let mut input_dim = None;
        let mut current = None;
        for (index, layer) in layers.iter().enumerate() {
            if let (Some(want), Some(got)) = (layer.in_dim(), current) {
                if want != got {
                    return Err(NnError::LayerChainMismatch { index, want, got });
                }
            }
            if input_dim.is_none() {
                input_dim = layer.in_dim();
            }
            if let Some(out) = layer.out_dim() {
                current = Some(out);
            }
        }
        match (input_dim, current) {
            (Some(input_dim), Some(output_dim)) => Ok(Self {
                layers,
                input_dim,
                output_dim,
            }),
            _ => Err(NnError::EmptyNetwork),
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Total number of trainable scalars (kernels, TT cores, biases).
    pub fn count_params(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Forward pass without gradient bookkeeping.
    pub fn predict(&self, batch: &DenseTensor) -> Result<DenseTensor, NnError> {
        Ok(self.forward(batch)?.0)
    }

    /// Forward pass over a `[batch, input_dim]` tensor, returning the
    /// output and the per-layer cache the backward pass consumes.
    pub fn forward(&self, batch: &DenseTensor) -> Result<(DenseTensor, ForwardCache), NnError> {
        let (rows, width) = batch.matrix_dims()?;
        if width != self.input_dim {
            return Err(NnError::BatchWidth {
                got: width,
                want: self.input_dim,
            });
        }
        let mut x = batch.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            match layer {
                Layer::Dense { weights, bias } => {
                    let mut y = x.matmul(weights)?;
                    if let Some(b) = bias {
                        add_row_broadcast(&mut y, b);
                    }
                    caches.push(LayerCache::Dense { input: x });
                    x = y;
                }
                Layer::Tt { tt, bias } => {
                    let (mut y, cache) = tt.apply_batch_cached(&x)?;
                    add_row_broadcast(&mut y, bias);
                    caches.push(LayerCache::Tt { cache });
                    x = y;
                }
                Layer::Activation(kind) => {
                    let y = match kind {
                        Activation::Relu => {
                            let data = x.data().iter().map(|&v| v.max(0.0)).collect();
                            DenseTensor::new(x.shape().to_vec(), data)?
                        }
                        Activation::Identity => x.clone(),
                    };
                    caches.push(LayerCache::Activation { input: x });
                    x = y;
                }
            }
        }
        Ok((
            x,
            ForwardCache {
                layers: caches,
                batch: rows,
            },
        ))
    }

    /// Backpropagate a loss gradient at the output (`[batch, output_dim]`)
    /// through the cached forward pass, producing per-parameter gradients.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_output: &DenseTensor,
    ) -> Result<Gradients, NnError> {
        if cache.layers.len() != self.layers.len() {
            return Err(NnError::StaleCache);
        }
        let (rows, width) = grad_output.matrix_dims()?;
        if rows != cache.batch || width != self.output_dim {
            return Err(NnError::StaleCache);
        }
        let mut grads: Vec<LayerGrads> = Vec::with_capacity(self.layers.len());
        let mut dy = grad_output.clone();
        for (layer, lc) in self.layers.iter().zip(&cache.layers).rev() {
            match (layer, lc) {
                (Layer::Dense { weights, bias }, LayerCache::Dense { input }) => {
                    if input.shape()[0] != cache.batch {
                        return Err(NnError::StaleCache);
                    }
                    let dw = input.transpose()?.matmul(&dy)?;
                    let db = bias.as_ref().map(|_| column_sums(&dy));
                    let dx = dy.matmul(&weights.transpose()?)?;
                    grads.push(LayerGrads::Dense { dw, db });
                    dy = dx;
                }
                (Layer::Tt { tt, .. }, LayerCache::Tt { cache: tc }) => {
                    if tc.batch() != cache.batch {
                        return Err(NnError::StaleCache);
                    }
                    let (dcores, dx) = tt.grad_from_cache(tc, &dy)?;
                    let db = column_sums(&dy);
                    grads.push(LayerGrads::Tt { dcores, db });
                    dy = dx;
                }
                (Layer::Activation(kind), LayerCache::Activation { input }) => {
                    if let Activation::Relu = kind {
                        if input.shape() != dy.shape() {
                            return Err(NnError::StaleCache);
                        }
                        let data: Vec<f64> = dy
                            .data()
                            .iter()
                            .zip(input.data())
                            .map(|(&g, &v)| if v > 0.0 { g } else { 0.0 })
                            .collect();
                        dy = DenseTensor::new(dy.shape().to_vec(), data)?;
                    }
                    grads.push(LayerGrads::None);
                }
                _ => return Err(NnError::StaleCache),
            }
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    /// Flat, deterministic view of every trainable parameter slice
    /// (kernel/cores first, then bias, per layer in order).
    pub(crate) fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Dense { weights, bias } => {
                    out.push(weights.data_mut());
                    if let Some(b) = bias {
                        out.push(b.as_mut_slice());
                    }
                }
                Layer::Tt { tt, bias } => {
                    for core in tt.cores_mut() {
                        out.push(core.data_mut());
                    }
                    out.push(bias.as_mut_slice());
                }
                Layer::Activation(_) => {}
            }
        }
        out
    }
}

fn add_row_broadcast(m: &mut DenseTensor, bias: &[f64]) {
    let cols = bias.len();
    for row in m.data_mut().chunks_mut(cols) {
        for (v, b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

fn column_sums(m: &DenseTensor) -> Vec<f64> {
    let (_, cols) = m.matrix_dims().expect("matrix");
    let mut out = vec![0.0; cols];
    for row in m.data().chunks(cols) {
        for (acc, v) in out.iter_mut().zip(row) {
            *acc += v;
        }
    }
    out
}

/// Cached activations from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    batch: usize,
}

#[derive(Debug, Clone)]
enum LayerCache {
    Dense { input: DenseTensor },
    Tt { cache: TtCache },
    Activation { input: DenseTensor },
}

/// Per-layer parameter gradients, mirroring the network's layer list.
#[derive(Debug, Clone)]
pub struct Gradients {
    layers: Vec<LayerGrads>,
}

#[derive(Debug, Clone)]
pub enum LayerGrads {
    Dense {
        dw: DenseTensor,
        db: Option<Vec<f64>>,
    },
    Tt {
        dcores: Vec<DenseTensor>,
        db: Vec<f64>,
    },
    None,
}

impl Gradients {
    pub fn layers(&self) -> &[LayerGrads] {
        &self.layers
    }

    /// Flat view matching [`Network::param_slices_mut`].
    pub(crate) fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                LayerGrads::Dense { dw, db } => {
                    out.push(dw.data());
                    if let Some(b) = db {
                        out.push(b.as_slice());
                    }
                }
                LayerGrads::Tt { dcores, db } => {
                    for c in dcores {
                        out.push(c.data());
                    }
                    out.push(db.as_slice());
                }
                LayerGrads::None => {}
            }
        }
        out
    }
}

/// Mean over every entry of the squared difference.
pub fn mse_loss(pred: &DenseTensor, target: &DenseTensor) -> Result<f64, NnError> {
    if pred.shape() != target.shape() {
        return Err(NnError::ShapeMismatch(
            pred.shape().to_vec(),
            target.shape().to_vec(),
        ));
    }
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Gradient of [`mse_loss`] with respect to the prediction:
/// `2 (pred - target) / numel`.
pub fn mse_grad(pred: &DenseTensor, target: &DenseTensor) -> Result<DenseTensor, NnError> {
    if pred.shape() != target.shape() {
        return Err(NnError::ShapeMismatch(
            pred.shape().to_vec(),
            target.shape().to_vec(),
        ));
    }
    let scale = 2.0 / pred.len() as f64;
    let data: Vec<f64> = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(a, b)| scale * (a - b))
        .collect();
    Ok(DenseTensor::new(pred.shape().to_vec(), data)?)
}
