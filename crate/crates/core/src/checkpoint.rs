//! Versioned binary records: weight tensors, TT checkpoints, model
//! checkpoints (layer list plus pipeline geometry) and feature-stats
//! caches. All numeric payloads are little-endian raw `f64` bits, so a
//! load reproduces forward outputs bit-exactly.

use crate::audio::{DatasetMode, FeatureStats, NormStats, PipelineSpec};
use crate::nn::{Activation, Layer, Network};
use crate::tensor::DenseTensor;
use crate::tt::{ModeFactorization, TtMatrix};
use std::path::Path;
use thiserror::Error;

const WEIGHTS_MAGIC: &[u8; 4] = b"TTNW";
const TT_MAGIC: &[u8; 4] = b"TTNM";
const MODEL_MAGIC: &[u8; 4] = b"TTNC";
const STATS_MAGIC: &[u8; 4] = b"TTNS";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad magic: expected {expected}, found {found}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported version {0}")]
    BadVersion(u32),
    #[error("corrupt record: {0}")]
    Corrupt(String),
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new(magic: &[u8; 4]) -> Self {
        let mut buf = Vec::with_capacity(64);
        buf.extend_from_slice(magic);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        Self { buf }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn usizes(&mut self, vs: &[usize]) {
        for &v in vs {
            self.u64(v as u64);
        }
    }

    fn f64s(&mut self, vs: &[f64]) {
        for &v in vs {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn tensor(&mut self, t: &DenseTensor) {
        self.u32(t.ndim() as u32);
        self.usizes(t.shape());
        self.f64s(t.data());
    }

    fn finish(self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, &self.buf).map_err(|e| CheckpointError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }
}

struct Reader {
    buf: Vec<u8>,
    pos: usize,
}

impl Reader {
    fn open(path: &Path, magic: &[u8; 4]) -> Result<Self, CheckpointError> {
        let buf = std::fs::read(path).map_err(|e| CheckpointError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut r = Self { buf, pos: 0 };
        let found = r.bytes(4)?;
        if found != magic {
            return Err(CheckpointError::BadMagic {
                expected: String::from_utf8_lossy(magic).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        let found = found.to_vec();
        drop(found);
        let version = r.u32()?;
        if version != VERSION {
            return Err(CheckpointError::BadVersion(version));
        }
        Ok(r)
    }

    fn bytes(&mut self, n: usize) -> Result<&[u8], CheckpointError> {
        if self.pos + n > self.buf.len() {
            return Err(CheckpointError::Corrupt(format!(
                "truncated at byte {} (wanted {n} more)",
                self.pos
            )));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.bytes(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn usizes(&mut self, n: usize) -> Result<Vec<usize>, CheckpointError> {
        (0..n).map(|_| self.u64().map(|v| v as usize)).collect()
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, CheckpointError> {
        let bytes = self.bytes(8 * n)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn tensor(&mut self) -> Result<DenseTensor, CheckpointError> {
        let ndim = self.u32()? as usize;
        if ndim == 0 || ndim > 8 {
            return Err(CheckpointError::Corrupt(format!("tensor ndim {ndim}")));
        }
        let shape = self.usizes(ndim)?;
        let len: usize = shape.iter().product();
        if len == 0 || len > (1 << 32) {
            return Err(CheckpointError::Corrupt(format!("tensor shape {shape:?}")));
        }
        let data = self.f64s(len)?;
        DenseTensor::new(shape, data).map_err(|e| CheckpointError::Corrupt(e.to_string()))
    }

    fn done(&self) -> Result<(), CheckpointError> {
        if self.pos != self.buf.len() {
            return Err(CheckpointError::Corrupt(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Save a raw weight matrix/tensor.
pub fn save_weights(path: &Path, t: &DenseTensor) -> Result<(), CheckpointError> {
    let mut w = Writer::new(WEIGHTS_MAGIC);
    w.tensor(t);
    w.finish(path)
}

pub fn load_weights(path: &Path) -> Result<DenseTensor, CheckpointError> {
    let mut r = Reader::open(path, WEIGHTS_MAGIC)?;
    let t = r.tensor()?;
    r.done()?;
    Ok(t)
}

fn write_tt(w: &mut Writer, tt: &TtMatrix) {
    let k = tt.order();
    w.u32(k as u32);
    w.usizes(tt.input_modes());
    w.usizes(tt.output_modes());
    w.usizes(tt.ranks());
    for core in tt.cores() {
        w.f64s(core.data());
    }
}

fn read_tt(r: &mut Reader) -> Result<TtMatrix, CheckpointError> {
    let k = r.u32()? as usize;
    if k == 0 || k > 16 {
        return Err(CheckpointError::Corrupt(format!("tt order {k}")));
    }
    let input_modes = r.usizes(k)?;
    let output_modes = r.usizes(k)?;
    let ranks = r.usizes(k + 1)?;
    let mut cores = Vec::with_capacity(k);
    for i in 0..k {
        let shape = vec![ranks[i], input_modes[i], output_modes[i], ranks[i + 1]];
        let len: usize = shape.iter().product();
        if len == 0 || len > (1 << 32) {
            return Err(CheckpointError::Corrupt(format!("core {i} shape {shape:?}")));
        }
        let data = r.f64s(len)?;
        cores.push(
            DenseTensor::new(shape, data).map_err(|e| CheckpointError::Corrupt(e.to_string()))?,
        );
    }
    TtMatrix::from_cores(input_modes, output_modes, ranks, cores)
        .map_err(|e| CheckpointError::Corrupt(e.to_string()))
}

/// Save a TT matrix checkpoint.
pub fn save_tt(path: &Path, tt: &TtMatrix) -> Result<(), CheckpointError> {
    let mut w = Writer::new(TT_MAGIC);
    write_tt(&mut w, tt);
    w.finish(path)
}

pub fn load_tt(path: &Path) -> Result<TtMatrix, CheckpointError> {
    let mut r = Reader::open(path, TT_MAGIC)?;
    let tt = read_tt(&mut r)?;
    r.done()?;
    Ok(tt)
}

fn write_fact(w: &mut Writer, fact: &ModeFactorization) {
    w.u32(fact.order() as u32);
    w.usizes(fact.input_modes());
    w.usizes(fact.output_modes());
    w.usizes(fact.ranks());
}

fn read_fact(r: &mut Reader) -> Result<ModeFactorization, CheckpointError> {
    let k = r.u32()? as usize;
    if k == 0 || k > 16 {
        return Err(CheckpointError::Corrupt(format!("factorization order {k}")));
    }
    let input_modes = r.usizes(k)?;
    let output_modes = r.usizes(k)?;
    let ranks = r.usizes(k + 1)?;
    ModeFactorization::new(input_modes, output_modes, ranks)
        .map_err(|e| CheckpointError::Corrupt(e.to_string()))
}

/// A loaded model: the network and, when present, the feature-pipeline
/// geometry it was trained for.
#[derive(Debug, Clone)]
pub struct ModelCheckpoint {
    pub network: Network,
    pub pipeline: Option<PipelineSpec>,
}

/// Save a network plus optional pipeline geometry.
pub fn save_model(
    path: &Path,
    net: &Network,
    pipeline: Option<&PipelineSpec>,
) -> Result<(), CheckpointError> {
    let mut w = Writer::new(MODEL_MAGIC);
    w.u32(net.layers().len() as u32);
    for layer in net.layers() {
        match layer {
            Layer::Dense { weights, bias } => {
                w.u8(0);
                w.tensor(weights);
                match bias {
                    Some(b) => {
                        w.u8(1);
                        w.f64s(b);
                    }
                    None => w.u8(0),
                }
            }
            Layer::Tt { tt, bias } => {
                w.u8(1);
                write_tt(&mut w, tt);
                w.f64s(bias);
            }
            Layer::Activation(Activation::Relu) => w.u8(2),
            Layer::Activation(Activation::Identity) => w.u8(3),
        }
    }
    match pipeline {
        Some(p) => {
            w.u8(1);
            w.u8(match p.mode {
                DatasetMode::Dense => 0,
                DatasetMode::Tt => 1,
            });
            w.u32(p.bins as u32);
            w.u32(p.context as u32);
            w.u32(p.channels as u32);
            match &p.fact {
                Some(f) => {
                    w.u8(1);
                    write_fact(&mut w, f);
                }
                None => w.u8(0),
            }
        }
        None => w.u8(0),
    }
    w.finish(path)
}

pub fn load_model(path: &Path) -> Result<ModelCheckpoint, CheckpointError> {
    let mut r = Reader::open(path, MODEL_MAGIC)?;
    let n_layers = r.u32()? as usize;
    if n_layers > 1024 {
        return Err(CheckpointError::Corrupt(format!("{n_layers} layers")));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        match r.u8()? {
            0 => {
                let weights = r.tensor()?;
                let bias = if r.u8()? == 1 {
                    let (_, out) = weights
                        .matrix_dims()
                        .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
                    Some(r.f64s(out)?)
                } else {
                    None
                };
                layers.push(
                    Layer::dense(weights, bias)
                        .map_err(|e| CheckpointError::Corrupt(e.to_string()))?,
                );
            }
            1 => {
                let tt = read_tt(&mut r)?;
                let bias = r.f64s(tt.output_dim())?;
                layers.push(Layer::Tt { tt, bias });
            }
            2 => layers.push(Layer::Activation(Activation::Relu)),
            3 => layers.push(Layer::Activation(Activation::Identity)),
            tag => return Err(CheckpointError::Corrupt(format!("layer tag {tag}"))),
        }
    }
    let pipeline = if r.u8()? == 1 {
        let mode = match r.u8()? {
            0 => DatasetMode::Dense,
            1 => DatasetMode::Tt,
            tag => return Err(CheckpointError::Corrupt(format!("mode tag {tag}"))),
        };
        let bins = r.u32()? as usize;
        let context = r.u32()? as usize;
        let channels = r.u32()? as usize;
        let fact = if r.u8()? == 1 {
            Some(read_fact(&mut r)?)
        } else {
            None
        };
        Some(PipelineSpec {
            mode,
            bins,
            context,
            channels,
            fact,
        })
    } else {
        None
    };
    r.done()?;
    let network = Network::new(layers).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    Ok(ModelCheckpoint { network, pipeline })
}

/// Save normalization statistics (per input channel plus target).
pub fn save_stats(path: &Path, stats: &FeatureStats) -> Result<(), CheckpointError> {
    let mut w = Writer::new(STATS_MAGIC);
    w.u32(stats.inputs.len() as u32);
    w.u32(stats.target.mean.len() as u32);
    for ns in stats.inputs.iter().chain([&stats.target]) {
        w.f64s(&ns.mean);
        w.f64s(&ns.std);
    }
    w.finish(path)
}

pub fn load_stats(path: &Path) -> Result<FeatureStats, CheckpointError> {
    let mut r = Reader::open(path, STATS_MAGIC)?;
    let n_inputs = r.u32()? as usize;
    let bins = r.u32()? as usize;
    if n_inputs == 0 || n_inputs > 64 || bins == 0 || bins > 1 << 16 {
        return Err(CheckpointError::Corrupt(format!(
            "{n_inputs} channels x {bins} bins"
        )));
    }
    let mut all = Vec::with_capacity(n_inputs + 1);
    for _ in 0..n_inputs + 1 {
        let mean = r.f64s(bins)?;
        let std = r.f64s(bins)?;
        all.push(NormStats { mean, std });
    }
    r.done()?;
    let target = all.pop().unwrap();
    Ok(FeatureStats {
        inputs: all,
        target,
    })
}
