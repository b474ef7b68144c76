//! Mini-batch training loop: seeded shuffling, MSE loss, Adam updates.

use super::{adam_step, mse_grad, mse_loss, AdamState, Network, NnError};
use crate::tensor::DenseTensor;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.0002,
            batch_size: 32,
            epochs: 100,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), NnError> {
        if !(self.learning_rate > 0.0) {
            return Err(NnError::BadConfig(format!(
                "learning_rate {} must be > 0",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(NnError::BadConfig("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Train a network on `(inputs, targets)` rows; returns the trained network
/// and one mean training loss per epoch. Rows are reshuffled every epoch
/// from a ChaCha stream seeded by `cfg.seed`, so traces are reproducible
/// bit for bit.
pub fn train(
    net: Network,
    inputs: &DenseTensor,
    targets: &DenseTensor,
    cfg: &TrainConfig,
) -> Result<(Network, Vec<f64>), NnError> {
    cfg.validate()?;
    let (rows, in_width) = inputs.matrix_dims()?;
    let (t_rows, out_width) = targets.matrix_dims()?;
    if rows == 0 {
        return Err(NnError::EmptyDataset);
    }
    if rows != t_rows {
        return Err(NnError::RowCountMismatch {
            inputs: rows,
            targets: t_rows,
        });
    }
    if in_width != net.input_dim() || out_width != net.output_dim() {
        return Err(NnError::BatchWidth {
            got: in_width,
            want: net.input_dim(),
        });
    }

    let mut net = net;
    let mut state = AdamState::new(&mut net, cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..rows).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let x = gather_rows(inputs, chunk, in_width);
            let t = gather_rows(targets, chunk, out_width);
            let (y, cache) = net.forward(&x)?;
            let loss = mse_loss(&y, &t)?;
            let grads = net.backward(&cache, &mse_grad(&y, &t)?)?;
            adam_step(&mut net, &grads, &mut state)?;
            loss_sum += loss * chunk.len() as f64;
        }
        trace.push(loss_sum / rows as f64);
    }
    Ok((net, trace))
}

fn gather_rows(m: &DenseTensor, rows: &[usize], width: usize) -> DenseTensor {
    let mut data = Vec::with_capacity(rows.len() * width);
    for &r in rows {
        data.extend_from_slice(&m.data()[r * width..(r + 1) * width]);
    }
    DenseTensor::new(vec![rows.len(), width], data).unwrap()
}
