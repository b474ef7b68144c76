//! Tensor-train matrices: a large matrix stored as a chain of 4-mode core
//! tensors `[r_k, m_k, n_k, r_{k+1}]` with boundary ranks fixed to 1.
//!
//! A matrix with rows factored as `m_1 * ... * m_K` and columns as
//! `n_1 * ... * n_K` is represented entrywise as the ordered product of one
//! slice per core:
//!
//! `W((i_1,j_1), ..., (i_K,j_K)) = C_1[:, i_1, j_1, :] * ... * C_K[:, i_K, j_K, :]`
//!
//! Storage drops from `prod m_k n_k` scalars to `sum m_k n_k r_k r_{k+1}`.
//! The module provides the TT-SVD sweep that converts a dense matrix into
//! this form with controlled error, the inverse reconstruction, a
//! matrix-by-tensor contraction that never materializes the dense matrix
//! (with a cached variant whose intermediates make exact core gradients a
//! pair of matrix products each), parameter accounting and seeded random
//! initialization for training cores from scratch.

use crate::tensor::{scale_rows, svd_truncated, DenseTensor, TensorError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TtError {
    #[error("input modes {modes:?} multiply to {got}, expected {want}")]
    InputDimMismatch {
        modes: Vec<usize>,
        got: usize,
        want: usize,
    },
    #[error("output modes {modes:?} multiply to {got}, expected {want}")]
    OutputDimMismatch {
        modes: Vec<usize>,
        got: usize,
        want: usize,
    },
    #[error("mode lists must be non-empty, equal length and all >= 1: m={0:?} n={1:?}")]
    InvalidModes(Vec<usize>, Vec<usize>),
    #[error("ranks {0:?} must have K+1 = {1} entries, ends fixed to 1, all >= 1")]
    InvalidRanks(Vec<usize>, usize),
    #[error("operand shape {got:?} does not match expected {want:?}")]
    ShapeMismatch { got: Vec<usize>, want: Vec<usize> },
    #[error("core {index} has shape {got:?}, expected {want:?}")]
    BadCoreShape {
        index: usize,
        got: Vec<usize>,
        want: Vec<usize>,
    },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// How a flat input/output dimension pair is factored into paired modes,
/// together with per-bond rank caps (`ranks[0] = ranks[K] = 1`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeFactorization {
    input_modes: Vec<usize>,
    output_modes: Vec<usize>,
    ranks: Vec<usize>,
}

fn check_modes(input_modes: &[usize], output_modes: &[usize]) -> Result<(), TtError> {
    if input_modes.is_empty()
        || input_modes.len() != output_modes.len()
        || input_modes.iter().chain(output_modes).any(|&m| m == 0)
    {
        return Err(TtError::InvalidModes(
            input_modes.to_vec(),
            output_modes.to_vec(),
        ));
    }
    Ok(())
}

fn check_ranks(ranks: &[usize], order: usize) -> Result<(), TtError> {
    if ranks.len() != order + 1
        || ranks[0] != 1
        || ranks[order] != 1
        || ranks.iter().any(|&r| r == 0)
    {
        return Err(TtError::InvalidRanks(ranks.to_vec(), order + 1));
    }
    Ok(())
}

impl ModeFactorization {
    pub fn new(
        input_modes: Vec<usize>,
        output_modes: Vec<usize>,
        ranks: Vec<usize>,
    ) -> Result<Self, TtError> {
        check_modes(&input_modes, &output_modes)?;
        check_ranks(&ranks, input_modes.len())?;
        Ok(Self {
            input_modes,
            output_modes,
            ranks,
        })
    }

    /// Factorization whose rank caps equal the largest rank any matrix of
    /// these modes can attain, i.e. effectively uncapped.
    pub fn with_full_ranks(
        input_modes: Vec<usize>,
        output_modes: Vec<usize>,
    ) -> Result<Self, TtError> {
        check_modes(&input_modes, &output_modes)?;
        let ranks = full_ranks(&input_modes, &output_modes);
        Ok(Self {
            input_modes,
            output_modes,
            ranks,
        })
    }

    /// Same modes, every interior bond capped at `rank`.
    pub fn with_uniform_rank(
        input_modes: Vec<usize>,
        output_modes: Vec<usize>,
        rank: usize,
    ) -> Result<Self, TtError> {
        check_modes(&input_modes, &output_modes)?;
        let order = input_modes.len();
        if rank == 0 {
            return Err(TtError::InvalidRanks(vec![rank], order + 1));
        }
        let mut ranks = vec![rank; order + 1];
        ranks[0] = 1;
        ranks[order] = 1;
        Ok(Self {
            input_modes,
            output_modes,
            ranks,
        })
    }

    pub fn order(&self) -> usize {
        self.input_modes.len()
    }

    pub fn input_modes(&self) -> &[usize] {
        &self.input_modes
    }

    pub fn output_modes(&self) -> &[usize] {
        &self.output_modes
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn input_dim(&self) -> usize {
        self.input_modes.iter().product()
    }

    pub fn output_dim(&self) -> usize {
        self.output_modes.iter().product()
    }
}

/// Largest achievable bond ranks for paired modes: at bond k the rank is
/// bounded by the smaller of the two unfolding dimensions.
fn full_ranks(input_modes: &[usize], output_modes: &[usize]) -> Vec<usize> {
    let order = input_modes.len();
    let mut ranks = vec![1usize; order + 1];
    for bond in 1..order {
        let left: usize = (0..bond)
            .map(|k| input_modes[k] * output_modes[k])
            .product();
        let right: usize = (bond..order)
            .map(|k| input_modes[k] * output_modes[k])
            .product();
        ranks[bond] = left.min(right);
    }
    ranks
}

/// A matrix in tensor-train form: `K` cores shaped `[r_k, m_k, n_k, r_{k+1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TtMatrix {
    input_modes: Vec<usize>,
    output_modes: Vec<usize>,
    ranks: Vec<usize>,
    cores: Vec<DenseTensor>,
}

impl TtMatrix {
    /// Assemble from parts, validating every core shape against the mode
    /// and rank lists.
    pub fn from_cores(
        input_modes: Vec<usize>,
        output_modes: Vec<usize>,
        ranks: Vec<usize>,
        cores: Vec<DenseTensor>,
    ) -> Result<Self, TtError> {
        check_modes(&input_modes, &output_modes)?;
        check_ranks(&ranks, input_modes.len())?;
        if cores.len() != input_modes.len() {
            return Err(TtError::InvalidModes(input_modes, output_modes));
        }
        for (k, core) in cores.iter().enumerate() {
            let want = [ranks[k], input_modes[k], output_modes[k], ranks[k + 1]];
            if core.shape() != want {
                return Err(TtError::BadCoreShape {
                    index: k,
                    got: core.shape().to_vec(),
                    want: want.to_vec(),
                });
            }
        }
        Ok(Self {
            input_modes,
            output_modes,
            ranks,
            cores,
        })
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn input_modes(&self) -> &[usize] {
        &self.input_modes
    }

    pub fn output_modes(&self) -> &[usize] {
        &self.output_modes
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn cores_mut(&mut self) -> &mut [DenseTensor] {
        &mut self.cores
    }

    pub fn input_dim(&self) -> usize {
        self.input_modes.iter().product()
    }

    pub fn output_dim(&self) -> usize {
        self.output_modes.iter().product()
    }

    /// The factorization this matrix realizes (achieved ranks, not caps).
    pub fn factorization(&self) -> ModeFactorization {
        ModeFactorization {
            input_modes: self.input_modes.clone(),
            output_modes: self.output_modes.clone(),
            ranks: self.ranks.clone(),
        }
    }

    /// Materialize the dense `prod(m) x prod(n)` matrix by chaining the
    /// cores and un-interleaving the paired indices.
    pub fn reconstruct(&self) -> DenseTensor {
        let k_modes = self.order();
        // Chain: g is [prod_{i<=k} (m_i n_i), r_{k+1}].
        let mut g = self.cores[0]
            .reshape(vec![
                self.input_modes[0] * self.output_modes[0],
                self.ranks[1],
            ])
            .unwrap();
        for k in 1..k_modes {
            let pairs = self.input_modes[k] * self.output_modes[k];
            let right = self.cores[k]
                .reshape(vec![self.ranks[k], pairs * self.ranks[k + 1]])
                .unwrap();
            let rows = g.shape()[0];
            g = g
                .matmul(&right)
                .unwrap()
                .into_reshape(vec![rows * pairs, self.ranks[k + 1]])
                .unwrap();
        }
        // g is [(m_1 n_1) ... (m_K n_K), 1] with interleaved pair ordering.
        let mut interleaved = Vec::with_capacity(2 * k_modes);
        for k in 0..k_modes {
            interleaved.push(self.input_modes[k]);
            interleaved.push(self.output_modes[k]);
        }
        let t = g.into_reshape(interleaved).unwrap();
        // Gather the m-modes first, then the n-modes (m_k sits at axis 2k,
        // n_k at axis 2k+1).
        let mut perm = Vec::with_capacity(2 * k_modes);
        perm.extend((0..k_modes).map(|k| 2 * k));
        perm.extend((0..k_modes).map(|k| 2 * k + 1));
        t.permute_axes(&perm)
            .unwrap()
            .into_reshape(vec![self.input_dim(), self.output_dim()])
            .unwrap()
    }

    /// Apply to a single tensor shaped like the input modes; the result is
    /// shaped like the output modes. Equal to applying the reconstructed
    /// dense matrix, but computed core by core.
    pub fn matvec(&self, x: &DenseTensor) -> Result<DenseTensor, TtError> {
        if x.shape() != self.input_modes.as_slice() {
            return Err(TtError::ShapeMismatch {
                got: x.shape().to_vec(),
                want: self.input_modes.clone(),
            });
        }
        let flat = x.reshape(vec![1, self.input_dim()])?;
        let y = self.apply_batch(&flat)?;
        Ok(y.into_reshape(self.output_modes.clone())?)
    }

    /// Batched contraction: rows of `x` (`batch x prod(m)`) are mapped to
    /// rows of the result (`batch x prod(n)`).
    pub fn apply_batch(&self, x: &DenseTensor) -> Result<DenseTensor, TtError> {
        let (y, _) = self.sweep(x, false)?;
        Ok(y)
    }

    /// Batched contraction that also returns the per-core intermediates
    /// needed for exact gradients.
    pub fn apply_batch_cached(&self, x: &DenseTensor) -> Result<(DenseTensor, TtCache), TtError> {
        let (y, cache) = self.sweep(x, true)?;
        Ok((y, cache.expect("cache requested")))
    }

    /// Left-to-right contraction sweep. The running tensor before step k
    /// has axes `[r_k, m_k, m_{k+1}, ..., m_K, batch, n_1, ..., n_{k-1}]`;
    /// step k contracts core k over `(r_k, m_k)` and rotates the fresh
    /// `n_k` axis to the back, so after the last step the data is laid out
    /// as `[batch, n_1, ..., n_K]` with no final shuffle.
    fn sweep(
        &self,
        x: &DenseTensor,
        keep_cache: bool,
    ) -> Result<(DenseTensor, Option<TtCache>), TtError> {
        let (batch, width) = x.matrix_dims().map_err(TtError::Tensor)?;
        if width != self.input_dim() {
            return Err(TtError::ShapeMismatch {
                got: x.shape().to_vec(),
                want: vec![batch, self.input_dim()],
            });
        }
        let k_modes = self.order();
        let mut axes: Vec<usize> = Vec::with_capacity(k_modes + 2);
        axes.push(1);
        axes.extend_from_slice(&self.input_modes);
        axes.push(batch);

        let mut p = x.transpose()?.into_reshape(axes.clone())?;
        let mut steps = Vec::with_capacity(if keep_cache { k_modes } else { 0 });
        for k in 0..k_modes {
            let (rk, mk, nk, rk1) = (
                self.ranks[k],
                self.input_modes[k],
                self.output_modes[k],
                self.ranks[k + 1],
            );
            let rest: usize = p.len() / (rk * mk);
            let u = p.into_reshape(vec![rk * mk, rest])?;
            // Core as [(n_k r_{k+1}) x (r_k m_k)].
            let a = self.cores[k]
                .permute_axes(&[2, 3, 0, 1])?
                .into_reshape(vec![nk * rk1, rk * mk])?;
            let v = a.matmul(&u)?;
            // Axes of v seen as a tensor: [n_k, r_{k+1}, remaining axes].
            let mut v_axes = vec![nk, rk1];
            v_axes.extend_from_slice(&axes[2..]);
            // Rotate axis 0 (n_k) to the back.
            let l = v_axes.len();
            let mut rot: Vec<usize> = (1..l).collect();
            rot.push(0);
            p = v.reshape(v_axes.clone())?.permute_axes(&rot)?;
            axes = rot.iter().map(|&d| v_axes[d]).collect();
            if keep_cache {
                steps.push(TtStep { u, v_axes });
            }
        }
        let y = p.into_reshape(vec![batch, self.output_dim()])?;
        let cache = keep_cache.then_some(TtCache { steps, batch });
        Ok((y, cache))
    }

    /// Gradients of a scalar loss with respect to every core entry and to
    /// the input batch, given the cache of the forward sweep and the loss
    /// gradient at the output (`batch x prod(n)`).
    ///
    /// Each forward step was the linear map `v = a * u`; its adjoints are
    /// `da = dv * u^T` and `du = a^T * dv`, so the sweep is replayed in
    /// reverse with two matrix products per core.
    pub fn grad_from_cache(
        &self,
        cache: &TtCache,
        dy: &DenseTensor,
    ) -> Result<(Vec<DenseTensor>, DenseTensor), TtError> {
        let (batch, width) = dy.matrix_dims().map_err(TtError::Tensor)?;
        if batch != cache.batch || width != self.output_dim() || cache.steps.len() != self.order()
        {
            return Err(TtError::ShapeMismatch {
                got: dy.shape().to_vec(),
                want: vec![cache.batch, self.output_dim()],
            });
        }
        let k_modes = self.order();
        let mut dcores: Vec<Option<DenseTensor>> = vec![None; k_modes];
        // dy already has the layout of the final running tensor.
        let mut dp = dy.clone();
        for k in (0..k_modes).rev() {
            let step = &cache.steps[k];
            let (rk, mk, nk, rk1) = (
                self.ranks[k],
                self.input_modes[k],
                self.output_modes[k],
                self.ranks[k + 1],
            );
            let l = step.v_axes.len();
            // Forward rotated axis 0 to the back; undo that on the gradient.
            let p_axes: Vec<usize> = (1..l)
                .map(|d| step.v_axes[d])
                .chain([step.v_axes[0]])
                .collect();
            let mut inv = vec![0usize; l];
            inv[0] = l - 1;
            for (d, slot) in inv.iter_mut().enumerate().skip(1) {
                *slot = d - 1;
            }
            let rest = step.u.shape()[1];
            let dv = dp
                .into_reshape(p_axes)?
                .permute_axes(&inv)?
                .into_reshape(vec![nk * rk1, rest])?;
            let da = dv.matmul(&step.u.transpose()?)?;
            dcores[k] = Some(
                da.into_reshape(vec![nk, rk1, rk, mk])?
                    .permute_axes(&[2, 3, 0, 1])?,
            );
            let a = self.cores[k]
                .permute_axes(&[2, 3, 0, 1])?
                .into_reshape(vec![nk * rk1, rk * mk])?;
            dp = a.transpose()?.matmul(&dv)?;
        }
        let dx = dp
            .into_reshape(vec![self.input_dim(), cache.batch])?
            .transpose()?;
        Ok((dcores.into_iter().map(|c| c.unwrap()).collect(), dx))
    }

    /// Number of stored scalars: `sum_k m_k n_k r_k r_{k+1}`.
    pub fn param_count(&self) -> usize {
        self.cores.iter().map(|c| c.len()).sum()
    }
}

/// Decompose a dense matrix (`prod(m) x prod(n)`) into TT form by the
/// left-to-right TT-SVD sweep.
///
/// The matrix is reshaped to the 2K-mode tensor indexed
/// `(i_1, ..., i_K, j_1, ..., j_K)`, permuted so each `(i_k, j_k)` pair is
/// adjacent, then split one bond at a time with a truncated SVD, absorbing
/// `diag(s) * vt` into the remainder. Rank caps come from the
/// factorization; `rel_tol` is the overall relative Frobenius budget,
/// distributed evenly across the `K - 1` truncations.
pub fn tt_svd_decompose(
    w: &DenseTensor,
    fact: &ModeFactorization,
    rel_tol: f64,
) -> Result<TtMatrix, TtError> {
    let (rows, cols) = w.matrix_dims().map_err(TtError::Tensor)?;
    if rows != fact.input_dim() {
        return Err(TtError::InputDimMismatch {
            modes: fact.input_modes.clone(),
            got: fact.input_dim(),
            want: rows,
        });
    }
    if cols != fact.output_dim() {
        return Err(TtError::OutputDimMismatch {
            modes: fact.output_modes.clone(),
            got: fact.output_dim(),
            want: cols,
        });
    }
    let k_modes = fact.order();
    let m = &fact.input_modes;
    let n = &fact.output_modes;

    if k_modes == 1 {
        let core = w.reshape(vec![1, m[0], n[0], 1])?;
        return TtMatrix::from_cores(m.clone(), n.clone(), vec![1, 1], vec![core]);
    }

    // [m_1, ..., m_K, n_1, ..., n_K] -> [m_1, n_1, m_2, n_2, ...]
    let mut split_shape: Vec<usize> = m.clone();
    split_shape.extend_from_slice(n);
    let mut perm = Vec::with_capacity(2 * k_modes);
    for k in 0..k_modes {
        perm.push(k);
        perm.push(k_modes + k);
    }
    let paired_shape: Vec<usize> = (0..k_modes).map(|k| m[k] * n[k]).collect();
    let mut cur = w
        .reshape(split_shape)?
        .permute_axes(&perm)?
        .into_reshape(paired_shape)?;

    let step_tol = rel_tol / ((k_modes - 1) as f64).sqrt();
    let mut cores = Vec::with_capacity(k_modes);
    let mut achieved = vec![1usize; k_modes + 1];
    for k in 0..k_modes - 1 {
        let lead = achieved[k] * m[k] * n[k];
        let rest = cur.len() / lead;
        let unfolding = cur.into_reshape(vec![lead, rest])?;
        let svd = svd_truncated(&unfolding, Some(fact.ranks[k + 1]), step_tol)?;
        achieved[k + 1] = svd.rank;
        cores.push(
            svd.u
                .into_reshape(vec![achieved[k], m[k], n[k], svd.rank])?,
        );
        cur = scale_rows(&svd.vt, &svd.s);
    }
    let last = k_modes - 1;
    cores.push(cur.into_reshape(vec![achieved[last], m[last], n[last], 1])?);
    TtMatrix::from_cores(m.clone(), n.clone(), achieved, cores)
}

/// Dense storage cost of a factorized matrix: `prod_k m_k n_k`.
pub fn dense_param_count(fact: &ModeFactorization) -> usize {
    fact.input_dim() * fact.output_dim()
}

/// TT storage cost implied by a factorization's ranks:
/// `sum_k m_k n_k r_k r_{k+1}`.
pub fn tt_param_count(fact: &ModeFactorization) -> usize {
    (0..fact.order())
        .map(|k| fact.input_modes[k] * fact.output_modes[k] * fact.ranks[k] * fact.ranks[k + 1])
        .sum()
}

/// Random TT matrix for training from scratch. Core entries are zero-mean
/// Gaussians with the per-core scale chosen (evenly in log-space) so the
/// reconstructed matrix has expected per-entry variance `2 / prod(m)`.
pub fn tt_random_init(fact: &ModeFactorization, seed: u64) -> TtMatrix {
    let k_modes = fact.order();
    let fan_in = fact.input_dim() as f64;
    let paths: f64 = fact.ranks[1..k_modes].iter().product::<usize>() as f64;
    let sigma = (2.0 / (fan_in * paths)).powf(1.0 / (2.0 * k_modes as f64));
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cores = (0..k_modes)
        .map(|k| {
            let shape = vec![
                fact.ranks[k],
                fact.input_modes[k],
                fact.output_modes[k],
                fact.ranks[k + 1],
            ];
            let len = shape.iter().product();
            let data: Vec<f64> = (0..len).map(|_| normal.sample(&mut rng)).collect();
            DenseTensor::new(shape, data).unwrap()
        })
        .collect();
    TtMatrix::from_cores(
        fact.input_modes.clone(),
        fact.output_modes.clone(),
        fact.ranks.clone(),
        cores,
    )
    .expect("shapes from factorization")
}

/// Per-core intermediates of a cached forward sweep.
#[derive(Debug, Clone)]
pub struct TtCache {
    steps: Vec<TtStep>,
    batch: usize,
}

#[derive(Debug, Clone)]
struct TtStep {
    /// Running tensor before step k, matricized to `[(r_k m_k), rest]`.
    u: DenseTensor,
    /// Axis sizes of the step's raw output `[n_k, r_{k+1}, rest axes...]`.
    v_axes: Vec<usize>,
}

impl TtCache {
    pub fn batch(&self) -> usize {
        self.batch
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..rows * cols)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        DenseTensor::new(vec![rows, cols], data).unwrap()
    }

    fn kronecker(a: &DenseTensor, b: &DenseTensor) -> DenseTensor {
        let (ar, ac) = a.matrix_dims().unwrap();
        let (br, bc) = b.matrix_dims().unwrap();
        let mut out = DenseTensor::zeros(vec![ar * br, ac * bc]);
        for i1 in 0..ar {
            for j1 in 0..ac {
                for i2 in 0..br {
                    for j2 in 0..bc {
                        let v = a.at(&[i1, j1]) * b.at(&[i2, j2]);
                        out.data_mut()[(i1 * br + i2) * (ac * bc) + (j1 * bc + j2)] = v;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn kronecker_product_has_unit_ranks() {
        let a = random_matrix(2, 2, 1);
        let b = random_matrix(2, 2, 2);
        let w = kronecker(&a, &b);
        let fact = ModeFactorization::with_full_ranks(vec![2, 2], vec![2, 2]).unwrap();
        let tt = tt_svd_decompose(&w, &fact, 0.0).unwrap();
        assert_eq!(tt.ranks(), &[1, 1, 1]);
        assert!(tt.reconstruct().rel_error(&w) < 1e-12);
    }

    #[test]
    fn identity_is_kronecker_of_identities() {
        let eye4 = {
            let mut t = DenseTensor::zeros(vec![4, 4]);
            for i in 0..4 {
                t.data_mut()[i * 4 + i] = 1.0;
            }
            t
        };
        let fact = ModeFactorization::with_full_ranks(vec![2, 2], vec![2, 2]).unwrap();
        let tt = tt_svd_decompose(&eye4, &fact, 0.0).unwrap();
        assert!(tt.reconstruct().rel_error(&eye4) < 1e-10);
    }

    #[test]
    fn full_rank_round_trip() {
        let w = random_matrix(16, 16, 5);
        let fact = ModeFactorization::with_full_ranks(vec![4, 4], vec![4, 4]).unwrap();
        let tt = tt_svd_decompose(&w, &fact, 0.0).unwrap();
        assert!(tt.reconstruct().rel_error(&w) < 1e-8);
    }

    #[test]
    fn three_mode_round_trip() {
        let w = random_matrix(24, 30, 6);
        let fact = ModeFactorization::with_full_ranks(vec![2, 3, 4], vec![5, 3, 2]).unwrap();
        let tt = tt_svd_decompose(&w, &fact, 0.0).unwrap();
        assert!(tt.reconstruct().rel_error(&w) < 1e-8);
    }

    #[test]
    fn single_core_is_the_matrix_itself() {
        let w = random_matrix(3, 5, 7);
        let fact = ModeFactorization::with_full_ranks(vec![3], vec![5]).unwrap();
        let tt = tt_svd_decompose(&w, &fact, 0.0).unwrap();
        assert_eq!(tt.order(), 1);
        assert_eq!(tt.ranks(), &[1, 1]);
        assert!(tt.reconstruct().rel_error(&w) < 1e-15);
    }

    #[test]
    fn zero_cores_reconstruct_to_zero() {
        let cores = vec![
            DenseTensor::zeros(vec![1, 2, 3, 2]),
            DenseTensor::zeros(vec![2, 3, 2, 1]),
        ];
        let tt = TtMatrix::from_cores(vec![2, 3], vec![3, 2], vec![1, 2, 1], cores).unwrap();
        assert!(tt.reconstruct().data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn decompose_rejects_dimension_mismatch() {
        let w = random_matrix(4, 4, 8);
        let fact = ModeFactorization::with_full_ranks(vec![2, 3], vec![2, 2]).unwrap();
        assert!(matches!(
            tt_svd_decompose(&w, &fact, 0.0),
            Err(TtError::InputDimMismatch { .. })
        ));
    }

    #[test]
    fn rank_caps_are_respected() {
        let w = random_matrix(16, 16, 9);
        let fact = ModeFactorization::new(vec![4, 4], vec![4, 4], vec![1, 3, 1]).unwrap();
        let tt = tt_svd_decompose(&w, &fact, 0.0).unwrap();
        assert!(tt.ranks()[1] <= 3);
    }

    #[test]
    fn rank_monotonicity() {
        let w = random_matrix(16, 16, 10);
        let mut last = f64::INFINITY;
        for r in 1..=16 {
            let fact = ModeFactorization::new(vec![4, 4], vec![4, 4], vec![1, r, 1]).unwrap();
            let tt = tt_svd_decompose(&w, &fact, 0.0).unwrap();
            let err = tt.reconstruct().rel_error(&w);
            assert!(err <= last + 1e-12, "rank {r}: {err} > {last}");
            last = err;
        }
    }

    #[test]
    fn matvec_of_identity_is_identity_map() {
        let eye4 = {
            let mut t = DenseTensor::zeros(vec![4, 4]);
            for i in 0..4 {
                t.data_mut()[i * 4 + i] = 1.0;
            }
            t
        };
        let fact = ModeFactorization::with_full_ranks(vec![2, 2], vec![2, 2]).unwrap();
        let tt = tt_svd_decompose(&eye4, &fact, 0.0).unwrap();
        let x = DenseTensor::new(vec![2, 2], vec![0.3, -1.2, 2.5, 0.7]).unwrap();
        let y = tt.matvec(&x).unwrap();
        assert!(y.rel_error(&x) < 1e-12);
    }

    #[test]
    fn matvec_matches_dense_kronecker_application() {
        let a = random_matrix(3, 2, 11);
        let b = random_matrix(4, 5, 12);
        let w = kronecker(&a, &b);
        let fact = ModeFactorization::with_full_ranks(vec![3, 4], vec![2, 5]).unwrap();
        let tt = tt_svd_decompose(&w, &fact, 0.0).unwrap();
        let x = random_matrix(3, 4, 13);
        let y = tt.matvec(&x).unwrap();
        // Dense oracle: y_flat = x_flat * W (rows of W index inputs).
        let dense = x
            .reshape(vec![1, 12])
            .unwrap()
            .matmul(&w)
            .unwrap()
            .into_reshape(vec![2, 5])
            .unwrap();
        assert!(y.rel_error(&dense) < 1e-10);
    }

    #[test]
    fn matvec_matches_reconstruct_then_multiply() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for trial in 0..20 {
            let fact = ModeFactorization::new(vec![3, 4], vec![2, 5], vec![1, 3, 1]).unwrap();
            let tt = tt_random_init(&fact, 100 + trial);
            let x_data: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x = DenseTensor::new(vec![3, 4], x_data).unwrap();
            let y = tt.matvec(&x).unwrap();
            let dense = x
                .reshape(vec![1, 12])
                .unwrap()
                .matmul(&tt.reconstruct())
                .unwrap()
                .into_reshape(vec![2, 5])
                .unwrap();
            assert!(y.rel_error(&dense) < 1e-10, "trial {trial}");
        }
    }

    #[test]
    fn matvec_rejects_shape_mismatch() {
        let fact = ModeFactorization::new(vec![3, 4], vec![2, 5], vec![1, 2, 1]).unwrap();
        let tt = tt_random_init(&fact, 0);
        let x = DenseTensor::zeros(vec![4, 3]);
        assert!(matches!(tt.matvec(&x), Err(TtError::ShapeMismatch { .. })));
    }

    #[test]
    fn param_counts_match_hand_arithmetic() {
        let paper = ModeFactorization::new(vec![32, 64], vec![32, 64], vec![1, 4, 1]).unwrap();
        assert_eq!(tt_param_count(&paper), 20_480);
        assert_eq!(dense_param_count(&paper), 4_194_304);

        let degenerate = ModeFactorization::new(vec![2], vec![3], vec![1, 1]).unwrap();
        assert_eq!(tt_param_count(&degenerate), 6);
        assert_eq!(dense_param_count(&degenerate), 6);

        let small = ModeFactorization::with_full_ranks(vec![4, 4], vec![4, 4]).unwrap();
        assert_eq!(dense_param_count(&small), 256);
    }

    #[test]
    fn tt_matrix_param_count_tracks_cores() {
        let fact = ModeFactorization::new(vec![32, 64], vec![32, 64], vec![1, 4, 1]).unwrap();
        let tt = tt_random_init(&fact, 1);
        assert_eq!(tt.param_count(), 20_480);
    }

    #[test]
    fn random_init_is_deterministic_per_seed() {
        let fact = ModeFactorization::new(vec![4, 4], vec![4, 4], vec![1, 2, 1]).unwrap();
        let a = tt_random_init(&fact, 42);
        let b = tt_random_init(&fact, 42);
        assert_eq!(a, b);
        let c = tt_random_init(&fact, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn random_init_variance_scaling() {
        // Monte-Carlo check that reconstructed entries have variance close
        // to 2/fan_in = 2/16.
        let fact = ModeFactorization::new(vec![4, 4], vec![4, 4], vec![1, 2, 1]).unwrap();
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        for seed in 0..1000 {
            let w = tt_random_init(&fact, seed).reconstruct();
            sum_sq += w.data().iter().map(|x| x * x).sum::<f64>();
            count += w.len();
        }
        let var = sum_sq / count as f64;
        let target = 2.0 / 16.0;
        assert!(
            (var - target).abs() < 0.3 * target,
            "empirical variance {var}, target {target}"
        );
    }

    #[test]
    fn batched_apply_matches_per_row_matvec() {
        let fact = ModeFactorization::new(vec![2, 3, 2], vec![3, 2, 2], vec![1, 2, 2, 1]).unwrap();
        let tt = tt_random_init(&fact, 7);
        let x = random_matrix(5, 12, 30);
        let y = tt.apply_batch(&x).unwrap();
        for row in 0..5 {
            let xr =
                DenseTensor::new(vec![2, 3, 2], x.data()[row * 12..(row + 1) * 12].to_vec())
                    .unwrap();
            let yr = tt.matvec(&xr).unwrap();
            for (a, b) in y.data()[row * 12..(row + 1) * 12].iter().zip(yr.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn compression_beats_dense_on_paper_shapes() {
        let fact = ModeFactorization::new(vec![32, 64], vec![32, 64], vec![1, 4, 1]).unwrap();
        assert!(tt_param_count(&fact) < dense_param_count(&fact));
    }
}
