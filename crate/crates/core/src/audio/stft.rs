//! Short-time Fourier analysis and weighted overlap-add resynthesis.
//!
//! Fixed geometry: 512-point frames (32 ms at 16 kHz), hop 256, periodic
//! Hann window. The window satisfies constant overlap-add at 50% overlap,
//! and resynthesis divides by the accumulated squared-window envelope, so
//! interior reconstruction is exact to machine precision; the first and
//! last half frames taper.

use super::{AudioError, Waveform};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

pub const STFT_FRAME: usize = 512;
pub const STFT_HOP: usize = 256;
pub const STFT_BINS: usize = STFT_FRAME / 2 + 1;

/// Complex short-time spectra stored as separate real/imaginary planes,
/// row-major `[frames, bins]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    re: Vec<f64>,
    im: Vec<f64>,
    frames: usize,
    bins: usize,
    sample_rate: u32,
}

impl Spectrogram {
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn re(&self) -> &[f64] {
        &self.re
    }

    pub fn im(&self) -> &[f64] {
        &self.im
    }

    pub fn at(&self, frame: usize, bin: usize) -> (f64, f64) {
        let i = frame * self.bins + bin;
        (self.re[i], self.im[i])
    }

    /// Build from raw planes; used by feature inversion.
    pub(crate) fn from_planes(
        re: Vec<f64>,
        im: Vec<f64>,
        frames: usize,
        bins: usize,
        sample_rate: u32,
    ) -> Self {
        debug_assert_eq!(re.len(), frames * bins);
        debug_assert_eq!(im.len(), frames * bins);
        Self {
            re,
            im,
            frames,
            bins,
            sample_rate,
        }
    }
}

fn hann_periodic(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Analyze a waveform into 257-bin short-time spectra. Samples beyond the
/// last full frame are dropped.
pub fn stft(w: &Waveform) -> Result<Spectrogram, AudioError> {
    if w.len() < STFT_FRAME {
        return Err(AudioError::TooShort(w.len(), STFT_FRAME));
    }
    let frames = 1 + (w.len() - STFT_FRAME) / STFT_HOP;
    let window = hann_periodic(STFT_FRAME);
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(STFT_FRAME);

    let mut re = Vec::with_capacity(frames * STFT_BINS);
    let mut im = Vec::with_capacity(frames * STFT_BINS);
    let mut buf = vec![Complex::new(0.0, 0.0); STFT_FRAME];
    for f in 0..frames {
        let start = f * STFT_HOP;
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = Complex::new(w.samples[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        for bin in buf.iter().take(STFT_BINS) {
            re.push(bin.re);
            im.push(bin.im);
        }
    }
    Ok(Spectrogram {
        re,
        im,
        frames,
        bins: STFT_BINS,
        sample_rate: w.sample_rate,
    })
}

/// Weighted overlap-add inverse of [`stft`]. Output length is
/// `(frames - 1) * hop + frame`.
pub fn istft(s: &Spectrogram) -> Result<Waveform, AudioError> {
    assert_eq!(s.bins, STFT_BINS, "spectrogram must carry full bins");
    let len = (s.frames - 1) * STFT_HOP + STFT_FRAME;
    let window = hann_periodic(STFT_FRAME);
    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(STFT_FRAME);

    let mut num = vec![0.0f64; len];
    let mut den = vec![0.0f64; len];
    let mut buf = vec![Complex::new(0.0, 0.0); STFT_FRAME];
    for f in 0..s.frames {
        for bin in 0..STFT_BINS {
            let (re, im) = s.at(f, bin);
            buf[bin] = Complex::new(re, im);
        }
        for bin in STFT_BINS..STFT_FRAME {
            let (re, im) = s.at(f, STFT_FRAME - bin);
            buf[bin] = Complex::new(re, -im);
        }
        ifft.process(&mut buf);
        let start = f * STFT_HOP;
        for i in 0..STFT_FRAME {
            let sample = buf[i].re / STFT_FRAME as f64;
            num[start + i] += window[i] * sample;
            den[start + i] += window[i] * window[i];
        }
    }
    let samples = num
        .iter()
        .zip(&den)
        .map(|(n, d)| if *d > 1e-12 { n / d } else { 0.0 })
        .collect();
    Ok(Waveform::new(samples, s.sample_rate))
}
