//! Dense tensors and the linear-algebra primitives (reshape, permute,
//! matricize, truncated SVD) that the TT decomposition and training code
//! are built on.
//!
//! Tensors are immutable-after-construction value types: `f64` data in
//! row-major order (last index fastest) with an explicit mode-size list.
//! All operations are pure functions returning fresh tensors.

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape {shape:?} expects {expected} elements, got {actual}")]
    DataLength {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("shape must be non-empty with all mode sizes >= 1, got {0:?}")]
    InvalidShape(Vec<usize>),
    #[error("cannot reshape {from:?} ({from_len} elements) to {to:?} ({to_len} elements)")]
    ShapeMismatch {
        from: Vec<usize>,
        to: Vec<usize>,
        from_len: usize,
        to_len: usize,
    },
    #[error("{perm:?} is not a permutation of 0..{ndim}")]
    InvalidPermutation { perm: Vec<usize>, ndim: usize },
    #[error("matricize split {split} out of range 1..={max}")]
    SplitOutOfRange { split: usize, max: usize },
    #[error("expected a 2-mode tensor, got {0} modes")]
    NotAMatrix(usize),
    #[error("inner dimensions do not match: {0}x{1} vs {2}x{3}")]
    MatmulMismatch(usize, usize, usize, usize),
    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),
}

/// K-dimensional real array with explicit shape; the universal numeric
/// carrier for weights, feature batches and intermediates.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Row-major strides for a shape (last mode has stride 1).
fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for d in (0..shape.len().saturating_sub(1)).rev() {
        s[d] = s[d + 1] * shape[d + 1];
    }
    s
}

fn check_shape(shape: &[usize]) -> Result<(), TensorError> {
    if shape.is_empty() || shape.iter().any(|&m| m == 0) {
        return Err(TensorError::InvalidShape(shape.to_vec()));
    }
    Ok(())
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, TensorError> {
        check_shape(&shape)?;
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(TensorError::DataLength {
                shape,
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        assert!(!shape.is_empty() && n > 0, "invalid shape {shape:?}");
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    /// 1-mode tensor from a flat vector.
    pub fn from_vec(data: Vec<f64>) -> Self {
        assert!(!data.is_empty());
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Row/column sizes of a 2-mode tensor.
    pub fn matrix_dims(&self) -> Result<(usize, usize), TensorError> {
        if self.ndim() != 2 {
            return Err(TensorError::NotAMatrix(self.ndim()));
        }
        Ok((self.shape[0], self.shape[1]))
    }

    pub fn at(&self, idx: &[usize]) -> f64 {
        debug_assert_eq!(idx.len(), self.ndim());
        let st = strides(&self.shape);
        let flat: usize = idx.iter().zip(&st).map(|(i, s)| i * s).sum();
        self.data[flat]
    }

    /// Same data, new shape. The element count must be preserved.
    pub fn reshape(&self, new_shape: Vec<usize>) -> Result<Self, TensorError> {
        check_shape(&new_shape)?;
        let to_len: usize = new_shape.iter().product();
        if to_len != self.data.len() {
            return Err(TensorError::ShapeMismatch {
                from: self.shape.clone(),
                to: new_shape,
                from_len: self.data.len(),
                to_len,
            });
        }
        Ok(Self {
            shape: new_shape,
            data: self.data.clone(),
        })
    }

    /// Consuming reshape; avoids the data copy.
    pub fn into_reshape(self, new_shape: Vec<usize>) -> Result<Self, TensorError> {
        check_shape(&new_shape)?;
        let to_len: usize = new_shape.iter().product();
        if to_len != self.data.len() {
            return Err(TensorError::ShapeMismatch {
                from: self.shape.clone(),
                to: new_shape,
                from_len: self.data.len(),
                to_len,
            });
        }
        Ok(Self {
            shape: new_shape,
            data: self.data,
        })
    }

    /// Reorder modes: output mode `d` takes input mode `perm[d]`, so for a
    /// matrix `perm = [1, 0]` is the transpose. Output is contiguous
    /// row-major.
    pub fn permute_axes(&self, perm: &[usize]) -> Result<Self, TensorError> {
        let ndim = self.ndim();
        let mut seen = vec![false; ndim];
        let valid = perm.len() == ndim
            && perm.iter().all(|&p| {
                if p >= ndim || seen[p] {
                    false
                } else {
                    seen[p] = true;
                    true
                }
            });
        if !valid {
            return Err(TensorError::InvalidPermutation {
                perm: perm.to_vec(),
                ndim,
            });
        }
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let in_strides = strides(&self.shape);
        let src_strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();

        let mut out = vec![0.0; self.data.len()];
        let mut idx = vec![0usize; ndim];
        let mut src = 0usize;
        for slot in out.iter_mut() {
            *slot = self.data[src];
            for d in (0..ndim).rev() {
                idx[d] += 1;
                src += src_strides[d];
                if idx[d] < new_shape[d] {
                    break;
                }
                src -= src_strides[d] * new_shape[d];
                idx[d] = 0;
            }
        }
        Ok(Self {
            shape: new_shape,
            data: out,
        })
    }

    /// Unfold into a matrix: rows index modes `[0, split)`, columns index
    /// modes `[split, K)`, both row-major. With row-major storage this is a
    /// pure reshape.
    pub fn matricize(&self, split: usize) -> Result<Self, TensorError> {
        let ndim = self.ndim();
        if split == 0 || split >= ndim {
            return Err(TensorError::SplitOutOfRange {
                split,
                max: ndim - 1,
            });
        }
        let rows: usize = self.shape[..split].iter().product();
        let cols: usize = self.shape[split..].iter().product();
        self.reshape(vec![rows, cols])
    }

    /// Transpose of a 2-mode tensor.
    pub fn transpose(&self) -> Result<Self, TensorError> {
        self.matrix_dims()?;
        self.permute_axes(&[1, 0])
    }

    /// Matrix product of two 2-mode tensors. Every output element is
    /// accumulated over the inner index in ascending order on every code
    /// path, so results are bit-identical regardless of shape-based path
    /// selection or the rayon thread count.
    pub fn matmul(&self, other: &DenseTensor) -> Result<Self, TensorError> {
        let (m, k) = self.matrix_dims()?;
        let (k2, n) = other.matrix_dims()?;
        if k != k2 {
            return Err(TensorError::MatmulMismatch(m, k, k2, n));
        }
        let mut out = vec![0.0; m * n];
        let a = &self.data;
        let b = &other.data;
        let row_job = |(i, row): (usize, &mut [f64])| {
            for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
                let brow = &b[p * n..(p + 1) * n];
                for (o, &bv) in row.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        };
        if m * n * k < 32_768 {
            // Small products: plain serial row sweep.
            out.chunks_mut(n).enumerate().for_each(row_job);
        } else if m <= 64 {
            // Thin-batch case: too few rows to parallelize over, so split
            // the output columns into blocks instead. Within a block the
            // inner index runs outermost, streaming the right operand
            // through cache once. Column blocking never regroups a
            // reduction, so the result is bit-identical to the serial
            // sweep.
            const BLOCK: usize = 128;
            let starts: Vec<usize> = (0..n).step_by(BLOCK).collect();
            let blocks: Vec<(usize, usize, Vec<f64>)> = starts
                .into_par_iter()
                .map(|c0| {
                    let w = BLOCK.min(n - c0);
                    let mut buf = vec![0.0; m * w];
                    for p in 0..k {
                        let brow = &b[p * n + c0..p * n + c0 + w];
                        for (i, row) in buf.chunks_mut(w).enumerate() {
                            let av = a[i * k + p];
                            for (o, &bv) in row.iter_mut().zip(brow) {
                                *o += av * bv;
                            }
                        }
                    }
                    (c0, w, buf)
                })
                .collect();
            for (c0, w, buf) in blocks {
                for (i, row) in buf.chunks(w).enumerate() {
                    out[i * n + c0..i * n + c0 + w].copy_from_slice(row);
                }
            }
        } else {
            out.par_chunks_mut(n).enumerate().for_each(row_job);
        }
        Ok(Self {
            shape: vec![m, n],
            data: out,
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Relative Frobenius distance `|a - b| / |b|` (absolute when `b = 0`).
    pub fn rel_error(&self, reference: &DenseTensor) -> f64 {
        assert_eq!(self.len(), reference.len());
        let diff: f64 = self
            .data
            .iter()
            .zip(&reference.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let norm = reference.frobenius_norm();
        if norm == 0.0 {
            diff
        } else {
            diff / norm
        }
    }
}

/// Result of a truncated singular value decomposition: `u * diag(s) * vt`
/// reconstructs the input up to the discarded tail.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// Left singular vectors, `rows x rank`, orthonormal columns.
    pub u: DenseTensor,
    /// Singular values, descending, all non-negative.
    pub s: Vec<f64>,
    /// Right singular vectors, `rank x cols`, orthonormal rows.
    pub vt: DenseTensor,
    pub rank: usize,
}

/// Singular values at or below `NOISE_FLOOR * s_max` are treated as exact
/// zeros by the truncation rule, so structurally low-rank inputs decompose
/// to their true rank even at tolerance zero.
const NOISE_FLOOR: f64 = 1e-14;

/// Truncated SVD of a 2-mode tensor.
///
/// The kept rank is the smallest `r` whose discarded tail satisfies
/// `sum_{i>r} s_i^2 <= rel_tol^2 * sum_i s_i^2`, further capped by
/// `max_rank` (`None` = unlimited). At least one singular value is always
/// kept.
pub fn svd_truncated(
    m: &DenseTensor,
    max_rank: Option<usize>,
    rel_tol: f64,
) -> Result<SvdResult, TensorError> {
    let (rows, cols) = m.matrix_dims()?;
    if let Some(pos) = m.data().iter().position(|x| !x.is_finite()) {
        return Err(TensorError::NonFinite(pos));
    }
    let a = DMatrix::from_row_iterator(rows, cols, m.data().iter().copied());
    let svd = a.svd(true, true);
    let u_full = svd.u.expect("u requested");
    let vt_full = svd.v_t.expect("v_t requested");
    let k = svd.singular_values.len();

    // Sort descending; nalgebra does not guarantee an order.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap()
    });
    let s_sorted: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();

    let total: f64 = s_sorted.iter().map(|x| x * x).sum();
    let budget = rel_tol * rel_tol * total;
    let floor = NOISE_FLOOR * s_sorted[0];
    let mut rank = k;
    let mut tail = 0.0;
    while rank > 1 {
        let sv = s_sorted[rank - 1];
        if tail + sv * sv <= budget || sv <= floor {
            tail += sv * sv;
            rank -= 1;
        } else {
            break;
        }
    }
    if let Some(cap) = max_rank {
        rank = rank.min(cap.max(1));
    }

    let mut u = vec![0.0; rows * rank];
    for r in 0..rows {
        for (c, &src) in order[..rank].iter().enumerate() {
            u[r * rank + c] = u_full[(r, src)];
        }
    }
    let mut vt = vec![0.0; rank * cols];
    for (r, &src) in order[..rank].iter().enumerate() {
        for c in 0..cols {
            vt[r * cols + c] = vt_full[(src, c)];
        }
    }
    Ok(SvdResult {
        u: DenseTensor::new(vec![rows, rank], u)?,
        s: s_sorted[..rank].to_vec(),
        vt: DenseTensor::new(vec![rank, cols], vt)?,
        rank,
    })
}

impl SvdResult {
    /// `u * diag(s) * vt`.
    pub fn reconstruct(&self) -> DenseTensor {
        let scaled = scale_rows(&self.vt, &self.s);
        self.u.matmul(&scaled).expect("svd factor shapes")
    }
}

/// Multiply row `i` of a matrix by `scale[i]`.
pub fn scale_rows(m: &DenseTensor, scale: &[f64]) -> DenseTensor {
    let (rows, cols) = m.matrix_dims().expect("matrix");
    assert_eq!(rows, scale.len());
    let mut data = m.data().to_vec();
    for (i, &s) in scale.iter().enumerate() {
        for v in &mut data[i * cols..(i + 1) * cols] {
            *v *= s;
        }
    }
    DenseTensor::new(vec![rows, cols], data).unwrap()
}
