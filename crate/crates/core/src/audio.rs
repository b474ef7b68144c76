//! Desk-scale audio front end: synthetic multi-channel noisy mixtures,
//! STFT / log-power-spectral features with per-bin normalization, context
//! windowing into regression rows, and waveform resynthesis from enhanced
//! features using the noisy phase.

mod dataset;
mod enhance;
mod features;
mod mix;
mod scene;
mod stft;
mod synth;
mod wav;

pub use dataset::{build_dataset, build_input_rows, DatasetMode, RegressionDataset};
pub use enhance::{enhance, enhance_features, FeatureStats, PipelineSpec};
pub use features::{
    denormalize, denormalize_with, expand_bins, lps, lps_invert, normalize, truncate_bins,
    FeatureMatrix, NormStats, LPS_EPSILON,
};
pub use mix::{mix_at_snr, simulate_multichannel, MixtureScene, SINR_SNR_PRESETS};
pub use scene::{simulate_scene, Manifest, ManifestEntry, SceneFile};
pub use stft::{istft, stft, Spectrogram, STFT_BINS, STFT_FRAME, STFT_HOP};
pub use synth::{harmonic_voice, white_noise};
pub use wav::{read_wav, read_wav_mono, write_wav};

use thiserror::Error;

/// Sampled audio: finite `f64` samples at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum()
    }
}

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed wav header in {0}")]
    MalformedWav(String),
    #[error("unsupported wav encoding in {path}: format {format}, {bits} bits")]
    UnsupportedWav {
        path: String,
        format: u16,
        bits: u16,
    },
    #[error("clean signal has zero energy")]
    SilentClean,
    #[error("noise signal has zero energy")]
    SilentNoise,
    #[error("waveform lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("channel {channel} delay {delay} exceeds signal length {len}")]
    DelayTooLong {
        channel: usize,
        delay: usize,
        len: usize,
    },
    #[error("scene wants {want} {what}, got {got}")]
    SceneShape {
        what: &'static str,
        want: usize,
        got: usize,
    },
    #[error("signal length {0} shorter than one frame ({1})")]
    TooShort(usize, usize),
    #[error("feature shapes differ: {0}x{1} vs {2}x{3}")]
    FeatureShape(usize, usize, usize, usize),
    #[error("features carry no normalization stats to invert")]
    MissingStats,
    #[error("channel count mismatch: {got} feature matrices for {want} channels")]
    ChannelCount { got: usize, want: usize },
    #[error("factorization input product {got} does not match row width {want}")]
    FactorizationMismatch { got: usize, want: usize },
    #[error("tt mode requires the raw reference features for the DC bin")]
    MissingDcReference,
    #[error("pipeline geometry mismatch: {0}")]
    Geometry(String),
    #[error("invalid scene file: {0}")]
    BadScene(String),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
}
