//! Post-hoc SVD compression of trained dense kernels: each eligible kernel
//! `W` (`in x out`) is split into two thin dense layers `A = U_r sqrt(S_r)`
//! (no bias) and `B = sqrt(S_r) V_r^T` (keeping the original bias), the
//! best rank-r approximation in Frobenius norm. The factored network is
//! then fine-tuned with the ordinary training loop.

use crate::nn::{Layer, Network, NnError};
use crate::tensor::{scale_rows, svd_truncated, TensorError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CompressError {
    #[error("rank {rank} out of range 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },
    #[error("layer is not dense")]
    NotDense,
    #[error("network has no dense kernels to compress")]
    NoDenseKernels,
    #[error("budget {budget} infeasible: rank-1 factorization already needs {min} parameters")]
    BudgetInfeasible { budget: usize, min: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Split one dense layer into `(A, B)` with `A*B` the best rank-`rank`
/// approximation of its kernel. `A` is `in x rank` with no bias; `B` is
/// `rank x out` and keeps the original bias, so the affine map is preserved
/// exactly at full rank.
pub fn svd_compress_layer(layer: &Layer, rank: usize) -> Result<(Layer, Layer), CompressError> {
    let Layer::Dense { weights, bias } = layer else {
        return Err(CompressError::NotDense);
    };
    let (rows, cols) = weights.matrix_dims()?;
    let max = rows.min(cols);
    if rank == 0 || rank > max {
        return Err(CompressError::RankOutOfRange { rank, max });
    }
    let svd = svd_truncated(weights, Some(rank), 0.0)?;
    let sqrt_s: Vec<f64> = svd.s.iter().map(|&v| v.sqrt()).collect();
    // A = U * diag(sqrt(s)): scale the columns of U.
    let a = scale_rows(&svd.u.transpose()?, &sqrt_s).transpose()?;
    let b = scale_rows(&svd.vt, &sqrt_s);
    Ok((Layer::dense(a, None)?, Layer::dense(b, bias.clone())?))
}

/// Parameter count of the whole network after factoring every dense kernel
/// at a uniform rank (kernels the rank would not shrink stay dense).
fn count_at_rank(net: &Network, rank: usize) -> usize {
    net.layers()
        .iter()
        .map(|layer| match layer {
            Layer::Dense { weights, bias } => {
                let (rows, cols) = weights.matrix_dims().unwrap();
                if rank < rows.min(cols) {
                    rank * (rows + cols) + bias.as_ref().map_or(0, |b| b.len())
                } else {
                    layer.param_count()
                }
            }
            other => other.param_count(),
        })
        .sum()
}

/// Factor every dense kernel of the network at the largest uniform rank
/// whose total parameter count fits the budget. Returns the factored
/// network ready for fine-tuning; a budget at or above the current count
/// returns the network unchanged.
pub fn compress_network(net: &Network, param_budget: usize) -> Result<Network, CompressError> {
    let max_rank = net
        .layers()
        .iter()
        .filter_map(|l| match l {
            Layer::Dense { weights, .. } => {
                let (r, c) = weights.matrix_dims().unwrap();
                Some(r.min(c))
            }
            _ => None,
        })
        .max()
        .ok_or(CompressError::NoDenseKernels)?;
    if net.count_params() <= param_budget {
        return Ok(net.clone());
    }
    let mut chosen = None;
    for rank in (1..max_rank).rev() {
        if count_at_rank(net, rank) <= param_budget {
            chosen = Some(rank);
            break;
        }
    }
    let Some(rank) = chosen else {
        return Err(CompressError::BudgetInfeasible {
            budget: param_budget,
            min: count_at_rank(net, 1),
        });
    };

    let mut layers = Vec::new();
    for layer in net.layers() {
        match layer {
            Layer::Dense { weights, .. } => {
                let (rows, cols) = weights.matrix_dims()?;
                if rank < rows.min(cols) {
                    let (a, b) = svd_compress_layer(layer, rank)?;
                    layers.push(a);
                    layers.push(b);
                } else {
                    layers.push(layer.clone());
                }
            }
            other => layers.push(other.clone()),
        }
    }
    Ok(Network::new(layers)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{mse_loss, train, TrainConfig};
    use crate::tensor::DenseTensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dense(rows: usize, cols: usize, seed: u64) -> Layer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..rows * cols)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let bias: Vec<f64> = (0..cols).map(|_| rng.random_range(-0.1..0.1)).collect();
        Layer::dense(DenseTensor::new(vec![rows, cols], data).unwrap(), Some(bias)).unwrap()
    }

    fn kernel(layer: &Layer) -> &DenseTensor {
        match layer {
            Layer::Dense { weights, .. } => weights,
            _ => panic!("dense expected"),
        }
    }

    #[test]
    fn full_rank_factorization_is_lossless() {
        let layer = random_dense(6, 6, 1);
        let (a, b) = svd_compress_layer(&layer, 6).unwrap();
        let product = kernel(&a).matmul(kernel(&b)).unwrap();
        assert!(product.rel_error(kernel(&layer)) < 1e-8);
    }

    #[test]
    fn rank_one_matrix_compresses_exactly() {
        let u = [0.3, -0.5, 0.7, 0.1];
        let v = [1.0, 2.0, -1.0];
        let data: Vec<f64> = u
            .iter()
            .flat_map(|&a| v.iter().map(move |&b| a * b))
            .collect();
        let layer = Layer::dense(
            DenseTensor::new(vec![4, 3], data).unwrap(),
            Some(vec![0.0; 3]),
        )
        .unwrap();
        let (a, b) = svd_compress_layer(&layer, 1).unwrap();
        let product = kernel(&a).matmul(kernel(&b)).unwrap();
        let diff: f64 = product
            .data()
            .iter()
            .zip(kernel(&layer).data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-10);
    }

    #[test]
    fn diag_321_at_rank_2_leaves_residual_1() {
        let layer = Layer::dense(
            DenseTensor::new(
                vec![3, 3],
                vec![3.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0],
            )
            .unwrap(),
            Some(vec![0.0; 3]),
        )
        .unwrap();
        let (a, b) = svd_compress_layer(&layer, 2).unwrap();
        let product = kernel(&a).matmul(kernel(&b)).unwrap();
        let resid: f64 = product
            .data()
            .iter()
            .zip(kernel(&layer).data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        assert!((resid - 1.0).abs() < 1e-10, "residual {resid}");
    }

    #[test]
    fn residual_equals_tail_energy_at_every_rank() {
        let layer = random_dense(10, 8, 2);
        let full = svd_truncated(kernel(&layer), None, 0.0).unwrap();
        for rank in 1..8 {
            let (a, b) = svd_compress_layer(&layer, rank).unwrap();
            let product = kernel(&a).matmul(kernel(&b)).unwrap();
            let resid2: f64 = product
                .data()
                .iter()
                .zip(kernel(&layer).data())
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            let tail: f64 = full.s[rank..].iter().map(|s| s * s).sum();
            assert!(
                (resid2 - tail).abs() <= 1e-8 * tail.max(1e-30),
                "rank {rank}: {resid2} vs {tail}"
            );
        }
    }

    #[test]
    fn rank_out_of_range_is_rejected() {
        let layer = random_dense(4, 6, 3);
        assert!(matches!(
            svd_compress_layer(&layer, 0),
            Err(CompressError::RankOutOfRange { .. })
        ));
        assert!(matches!(
            svd_compress_layer(&layer, 5),
            Err(CompressError::RankOutOfRange { .. })
        ));
    }

    #[test]
    fn budget_selects_expected_rank() {
        // One 64x64 kernel with bias: 4160 params. At rank 10 the factors
        // hold 64*10 + 10*64 = 1280 kernel params + 64 bias = 1344.
        let net = Network::new(vec![random_dense(64, 64, 4)]).unwrap();
        let compressed = compress_network(&net, 1350).unwrap();
        assert_eq!(compressed.count_params(), 1344);
        assert_eq!(compressed.layers().len(), 2);
        assert_eq!(kernel(&compressed.layers()[0]).shape(), &[64, 10]);
        assert_eq!(kernel(&compressed.layers()[1]).shape(), &[10, 64]);
    }

    #[test]
    fn generous_budget_returns_network_unchanged() {
        let net = Network::new(vec![random_dense(8, 8, 5)]).unwrap();
        let same = compress_network(&net, net.count_params()).unwrap();
        assert_eq!(same.count_params(), net.count_params());
        assert_eq!(same.layers().len(), 1);
    }

    #[test]
    fn zero_budget_is_infeasible() {
        let net = Network::new(vec![random_dense(8, 8, 6)]).unwrap();
        assert!(matches!(
            compress_network(&net, 0),
            Err(CompressError::BudgetInfeasible { .. })
        ));
    }

    #[test]
    fn budgets_are_respected_and_monotone_in_error() {
        let net = Network::new(vec![
            random_dense(16, 16, 7),
            Layer::relu(),
            random_dense(16, 16, 8),
        ])
        .unwrap();
        let x = {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let data: Vec<f64> = (0..8 * 16).map(|_| rng.random_range(-1.0..1.0)).collect();
            DenseTensor::new(vec![8, 16], data).unwrap()
        };
        let y_ref = net.predict(&x).unwrap();
        let mut last_err = f64::INFINITY;
        for budget in [200usize, 300, 400, 520] {
            let compressed = compress_network(&net, budget).unwrap();
            assert!(compressed.count_params() <= budget);
            let err = compressed.predict(&x).unwrap().rel_error(&y_ref);
            assert!(err <= last_err + 1e-12, "budget {budget}: {err} > {last_err}");
            last_err = err;
        }
    }

    #[test]
    fn finetuning_does_not_end_worse_on_training_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 128;
        let x_data: Vec<f64> = (0..n * 8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = DenseTensor::new(vec![n, 8], x_data).unwrap();
        let w = {
            let data: Vec<f64> = (0..8 * 4).map(|_| rng.random_range(-0.5..0.5)).collect();
            DenseTensor::new(vec![8, 4], data).unwrap()
        };
        let y = x.matmul(&w).unwrap();

        let cfg = TrainConfig {
            learning_rate: 0.002,
            epochs: 60,
            seed: 11,
            ..TrainConfig::default()
        };
        let net = Network::new(vec![
            random_dense(8, 8, 12),
            Layer::relu(),
            random_dense(8, 4, 13),
        ])
        .unwrap();
        let (trained, _) = train(net, &x, &y, &cfg).unwrap();

        let compressed = compress_network(&trained, trained.count_params() * 6 / 10).unwrap();
        let before = mse_loss(&compressed.predict(&x).unwrap(), &y).unwrap();
        let finetune_cfg = TrainConfig { epochs: 10, ..cfg };
        let (tuned, _) = train(compressed, &x, &y, &finetune_cfg).unwrap();
        let after = mse_loss(&tuned.predict(&x).unwrap(), &y).unwrap();
        assert!(
            after <= before,
            "fine-tuning made training loss worse: {before} -> {after}"
        );
    }
}
