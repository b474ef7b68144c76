//! Python bindings: dense tensors, TT decomposition and contraction,
//! dense/TT regression networks with training, mixture synthesis and the
//! SI-SDR / segmental-SNR metrics.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use ttn_core::audio;
use ttn_core::audio::Waveform;
use ttn_core::metrics;
use ttn_core::nn;
use ttn_core::tensor::DenseTensor;
use ttn_core::tt;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn wave(samples: Vec<f64>, sample_rate: u32) -> Waveform {
    Waveform::new(samples, sample_rate)
}

/// Dense row-major tensor.
#[pyclass(name = "Tensor", from_py_object)]
#[derive(Clone)]
struct PyTensor {
    inner: DenseTensor,
}

#[pymethods]
impl PyTensor {
    #[new]
    fn new(shape: Vec<usize>, data: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: DenseTensor::new(shape, data).map_err(err)?,
        })
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.inner.shape().to_vec()
    }

    fn data(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn reshape(&self, shape: Vec<usize>) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.reshape(shape).map_err(err)?,
        })
    }

    fn permute(&self, perm: Vec<usize>) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.permute_axes(&perm).map_err(err)?,
        })
    }

    fn matmul(&self, other: &PyTensor) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.matmul(&other.inner).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("Tensor(shape={:?})", self.inner.shape())
    }
}

/// Matrix in tensor-train form.
#[pyclass(name = "TtMatrix", from_py_object)]
#[derive(Clone)]
struct PyTtMatrix {
    inner: tt::TtMatrix,
}

#[pymethods]
impl PyTtMatrix {
    /// TT-SVD of a dense matrix. `max_rank=None` keeps full ranks.
    #[staticmethod]
    #[pyo3(signature = (matrix, input_modes, output_modes, max_rank=None, tol=0.0))]
    fn decompose(
        matrix: &PyTensor,
        input_modes: Vec<usize>,
        output_modes: Vec<usize>,
        max_rank: Option<usize>,
        tol: f64,
    ) -> PyResult<Self> {
        let fact = match max_rank {
            Some(r) => tt::ModeFactorization::with_uniform_rank(input_modes, output_modes, r),
            None => tt::ModeFactorization::with_full_ranks(input_modes, output_modes),
        }
        .map_err(err)?;
        Ok(Self {
            inner: tt::tt_svd_decompose(&matrix.inner, &fact, tol).map_err(err)?,
        })
    }

    /// Random cores scaled for training from scratch.
    #[staticmethod]
    fn random_init(
        input_modes: Vec<usize>,
        output_modes: Vec<usize>,
        ranks: Vec<usize>,
        seed: u64,
    ) -> PyResult<Self> {
        let fact = tt::ModeFactorization::new(input_modes, output_modes, ranks).map_err(err)?;
        Ok(Self {
            inner: tt::tt_random_init(&fact, seed),
        })
    }

    #[getter]
    fn ranks(&self) -> Vec<usize> {
        self.inner.ranks().to_vec()
    }

    #[getter]
    fn input_modes(&self) -> Vec<usize> {
        self.inner.input_modes().to_vec()
    }

    #[getter]
    fn output_modes(&self) -> Vec<usize> {
        self.inner.output_modes().to_vec()
    }

    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    fn reconstruct(&self) -> PyTensor {
        PyTensor {
            inner: self.inner.reconstruct(),
        }
    }

    fn matvec(&self, x: &PyTensor) -> PyResult<PyTensor> {
        Ok(PyTensor {
            inner: self.inner.matvec(&x.inner).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "TtMatrix(m={:?}, n={:?}, ranks={:?})",
            self.inner.input_modes(),
            self.inner.output_modes(),
            self.inner.ranks()
        )
    }
}

/// Storage cost of the dense matrix a factorization describes.
#[pyfunction]
fn dense_param_count(input_modes: Vec<usize>, output_modes: Vec<usize>) -> PyResult<usize> {
    let fact =
        tt::ModeFactorization::with_full_ranks(input_modes, output_modes).map_err(err)?;
    Ok(tt::dense_param_count(&fact))
}

/// Storage cost of TT cores with the given ranks.
#[pyfunction]
fn tt_param_count(
    input_modes: Vec<usize>,
    output_modes: Vec<usize>,
    ranks: Vec<usize>,
) -> PyResult<usize> {
    let fact = tt::ModeFactorization::new(input_modes, output_modes, ranks).map_err(err)?;
    Ok(tt::tt_param_count(&fact))
}

fn rows_to_tensor(rows: &[Vec<f64>]) -> PyResult<DenseTensor> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(PyValueError::new_err("empty batch"));
    }
    let width = rows[0].len();
    let mut data = Vec::with_capacity(rows.len() * width);
    for r in rows {
        if r.len() != width {
            return Err(PyValueError::new_err("ragged batch"));
        }
        data.extend_from_slice(r);
    }
    DenseTensor::new(vec![rows.len(), width], data).map_err(err)
}

fn tensor_to_rows(t: &DenseTensor) -> Vec<Vec<f64>> {
    let width = t.shape()[1];
    t.data().chunks(width).map(|c| c.to_vec()).collect()
}

/// Feed-forward regression network (dense and/or TT layers).
#[pyclass(name = "Network")]
struct PyNetwork {
    inner: nn::Network,
}

#[pymethods]
impl PyNetwork {
    /// ReLU MLP over `dims = [in, hidden..., out]` with a linear head.
    #[staticmethod]
    fn mlp(dims: Vec<usize>, seed: u64) -> PyResult<Self> {
        if dims.len() < 2 {
            return Err(PyValueError::new_err("dims needs at least [in, out]"));
        }
        let mut layers = Vec::new();
        for (i, pair) in dims.windows(2).enumerate() {
            layers.push(nn::Layer::dense_random(pair[0], pair[1], seed + i as u64));
            if i + 2 < dims.len() {
                layers.push(nn::Layer::relu());
            }
        }
        Ok(Self {
            inner: nn::Network::new(layers).map_err(err)?,
        })
    }

    /// Network described by an architecture spec (TOML text).
    #[staticmethod]
    fn from_arch_toml(text: &str, seed: u64) -> PyResult<Self> {
        let arch = nn::ArchSpec::from_toml(text).map_err(err)?;
        Ok(Self {
            inner: nn::build_network(&arch, seed).map_err(err)?,
        })
    }

    fn count_params(&self) -> usize {
        self.inner.count_params()
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    #[getter]
    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    fn predict(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let x = rows_to_tensor(&rows)?;
        Ok(tensor_to_rows(&self.inner.predict(&x).map_err(err)?))
    }

    /// Train in place with MSE + Adam; returns the per-epoch loss trace.
    #[pyo3(signature = (inputs, targets, epochs=100, batch_size=32, learning_rate=0.0002, seed=0))]
    fn fit(
        &mut self,
        inputs: Vec<Vec<f64>>,
        targets: Vec<Vec<f64>>,
        epochs: usize,
        batch_size: usize,
        learning_rate: f64,
        seed: u64,
    ) -> PyResult<Vec<f64>> {
        let x = rows_to_tensor(&inputs)?;
        let t = rows_to_tensor(&targets)?;
        let cfg = nn::TrainConfig {
            learning_rate,
            batch_size,
            epochs,
            seed,
            ..nn::TrainConfig::default()
        };
        let (net, trace) = nn::train(self.inner.clone(), &x, &t, &cfg).map_err(err)?;
        self.inner = net;
        Ok(trace)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        ttn_core::checkpoint::save_model(path.as_ref(), &self.inner, None).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let model = ttn_core::checkpoint::load_model(path.as_ref()).map_err(err)?;
        Ok(Self {
            inner: model.network,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Network({} -> {}, {} params)",
            self.inner.input_dim(),
            self.inner.output_dim(),
            self.inner.count_params()
        )
    }
}

#[pyfunction]
fn mse_loss(pred: Vec<Vec<f64>>, target: Vec<Vec<f64>>) -> PyResult<f64> {
    nn::mse_loss(&rows_to_tensor(&pred)?, &rows_to_tensor(&target)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (estimate, reference, sample_rate=16000))]
fn si_sdr(estimate: Vec<f64>, reference: Vec<f64>, sample_rate: u32) -> PyResult<f64> {
    metrics::si_sdr(&wave(estimate, sample_rate), &wave(reference, sample_rate)).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (estimate, reference, sample_rate=16000))]
fn segmental_snr(estimate: Vec<f64>, reference: Vec<f64>, sample_rate: u32) -> PyResult<f64> {
    metrics::segmental_snr(&wave(estimate, sample_rate), &wave(reference, sample_rate)).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (clean, noise, snr_db, sample_rate=16000))]
fn mix_at_snr(
    clean: Vec<f64>,
    noise: Vec<f64>,
    snr_db: f64,
    sample_rate: u32,
) -> PyResult<Vec<f64>> {
    Ok(
        audio::mix_at_snr(&wave(clean, sample_rate), &wave(noise, sample_rate), snr_db)
            .map_err(err)?
            .samples,
    )
}

#[pyfunction]
#[pyo3(signature = (duration_s, seed, sample_rate=16000))]
fn harmonic_voice(duration_s: f64, seed: u64, sample_rate: u32) -> Vec<f64> {
    audio::harmonic_voice(duration_s, sample_rate, seed).samples
}

#[pyfunction]
#[pyo3(signature = (len, seed, sample_rate=16000))]
fn white_noise(len: usize, seed: u64, sample_rate: u32) -> Vec<f64> {
    audio::white_noise(len, sample_rate, seed).samples
}

#[pymodule]
fn ttn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTensor>()?;
    m.add_class::<PyTtMatrix>()?;
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(dense_param_count, m)?)?;
    m.add_function(wrap_pyfunction!(tt_param_count, m)?)?;
    m.add_function(wrap_pyfunction!(mse_loss, m)?)?;
    m.add_function(wrap_pyfunction!(si_sdr, m)?)?;
    m.add_function(wrap_pyfunction!(segmental_snr, m)?)?;
    m.add_function(wrap_pyfunction!(mix_at_snr, m)?)?;
    m.add_function(wrap_pyfunction!(harmonic_voice, m)?)?;
    m.add_function(wrap_pyfunction!(white_noise, m)?)?;
    Ok(())
}
