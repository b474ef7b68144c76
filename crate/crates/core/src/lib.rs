//! Tensor-train regression networks for spectral speech denoising.
//!
//! The crate is organized around three layers:
//!
//! * numeric primitives: [`tensor`] (dense tensors, truncated SVD) and
//!   [`tt`] (tensor-train matrices: decomposition, contraction, parameter
//!   accounting);
//! * learning machinery: [`nn`] (dense/TT feed-forward networks with exact
//!   backpropagation and Adam) and [`compress`] (post-hoc SVD factorization
//!   of trained dense kernels);
//! * the application pipeline: [`audio`] (synthetic multi-channel mixtures,
//!   STFT/log-power features, context windowing, enhancement), [`metrics`]
//!   (SI-SDR, segmental SNR), [`checkpoint`] (binary model/feature records)
//!   and [`experiment`] (the end-to-end dense-vs-TT trade-off run).

pub mod audio;
pub mod checkpoint;
pub mod compress;
pub mod experiment;
pub mod metrics;
pub mod nn;
pub mod tensor;
pub mod tt;

pub use tensor::{DenseTensor, SvdResult, TensorError};
pub use tt::{ModeFactorization, TtError, TtMatrix};

