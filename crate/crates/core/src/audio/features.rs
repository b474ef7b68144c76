//! Log-power-spectral features and per-bin normalization.

use super::stft::Spectrogram;
use super::AudioError;

/// Floor added inside the log so silent bins stay finite:
/// `lps = ln(re^2 + im^2 + epsilon)`.
pub const LPS_EPSILON: f64 = 1e-12;

/// `frames x bins` log-power features, optionally remembering the
/// normalization statistics that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    frames: usize,
    bins: usize,
    data: Vec<f64>,
    norm_stats: Option<NormStats>,
}

impl FeatureMatrix {
    pub fn new(frames: usize, bins: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), frames * bins, "feature shape");
        Self {
            frames,
            bins,
            data,
            norm_stats: None,
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn at(&self, frame: usize, bin: usize) -> f64 {
        self.data[frame * self.bins + bin]
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        &self.data[frame * self.bins..(frame + 1) * self.bins]
    }

    pub fn norm_stats(&self) -> Option<&NormStats> {
        self.norm_stats.as_ref()
    }
}

/// Per-frequency-bin mean and standard deviation (variance floored at
/// 1e-8 before the square root).
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// Fit per-bin statistics over a set of feature matrices (typically
    /// the training partition).
    pub fn fit(mats: &[&FeatureMatrix]) -> Self {
        assert!(!mats.is_empty(), "need at least one matrix");
        let bins = mats[0].bins;
        let total: usize = mats.iter().map(|m| m.frames).sum();
        let mut mean = vec![0.0; bins];
        for m in mats {
            assert_eq!(m.bins, bins, "bin counts must agree");
            for row in m.data.chunks(bins) {
                for (acc, v) in mean.iter_mut().zip(row) {
                    *acc += v;
                }
            }
        }
        mean.iter_mut().for_each(|v| *v /= total as f64);
        let mut var = vec![0.0; bins];
        for m in mats {
            for row in m.data.chunks(bins) {
                for ((acc, v), mu) in var.iter_mut().zip(row).zip(&mean) {
                    let d = v - mu;
                    *acc += d * d;
                }
            }
        }
        let std = var
            .iter()
            .map(|v| (v / total as f64).max(1e-8).sqrt())
            .collect();
        Self { mean, std }
    }
}

/// Log power spectrum of a spectrogram: `ln(re^2 + im^2 + epsilon)`.
pub fn lps(s: &Spectrogram) -> FeatureMatrix {
    let data = s
        .re()
        .iter()
        .zip(s.im())
        .map(|(re, im)| (re * re + im * im + LPS_EPSILON).ln())
        .collect();
    FeatureMatrix::new(s.frames(), s.bins(), data)
}

/// Rebuild a spectrogram from log-power features and a phase reference:
/// magnitude `exp(lps / 2)` with the phase of `phase` (unit phase where the
/// reference bin is exactly zero).
pub fn lps_invert(f: &FeatureMatrix, phase: &Spectrogram) -> Result<Spectrogram, AudioError> {
    if f.frames != phase.frames() || f.bins != phase.bins() {
        return Err(AudioError::FeatureShape(
            f.frames,
            f.bins,
            phase.frames(),
            phase.bins(),
        ));
    }
    let n = f.data.len();
    let mut re = Vec::with_capacity(n);
    let mut im = Vec::with_capacity(n);
    for (i, &v) in f.data.iter().enumerate() {
        let mag = (v / 2.0).exp();
        let (pr, pi) = (phase.re()[i], phase.im()[i]);
        let pmag = (pr * pr + pi * pi).sqrt();
        if pmag == 0.0 {
            re.push(mag);
            im.push(0.0);
        } else {
            re.push(mag * pr / pmag);
            im.push(mag * pi / pmag);
        }
    }
    Ok(Spectrogram::from_planes(
        re,
        im,
        f.frames,
        f.bins,
        phase.sample_rate(),
    ))
}

/// Zero-mean unit-variance per bin. With `stats = None` the statistics are
/// fitted on `f` itself; either way the stats actually used are stored on
/// the result and returned.
pub fn normalize(f: &FeatureMatrix, stats: Option<&NormStats>) -> (FeatureMatrix, NormStats) {
    let stats = stats.cloned().unwrap_or_else(|| NormStats::fit(&[f]));
    let mut data = Vec::with_capacity(f.data.len());
    for row in f.data.chunks(f.bins) {
        for ((v, mu), sd) in row.iter().zip(&stats.mean).zip(&stats.std) {
            data.push((v - mu) / sd);
        }
    }
    let mut out = FeatureMatrix::new(f.frames, f.bins, data);
    out.norm_stats = Some(stats.clone());
    (out, stats)
}

/// Invert [`normalize`] using the stats stored on the matrix.
pub fn denormalize(f: &FeatureMatrix) -> Result<FeatureMatrix, AudioError> {
    let stats = f.norm_stats.as_ref().ok_or(AudioError::MissingStats)?;
    Ok(denormalize_with(f, stats))
}

/// Invert [`normalize`] with explicit stats.
pub fn denormalize_with(f: &FeatureMatrix, stats: &NormStats) -> FeatureMatrix {
    let mut data = Vec::with_capacity(f.data.len());
    for row in f.data.chunks(f.bins) {
        for ((v, mu), sd) in row.iter().zip(&stats.mean).zip(&stats.std) {
            data.push(v * sd + mu);
        }
    }
    FeatureMatrix::new(f.frames, f.bins, data)
}

/// Keep only the first `keep` bins of every frame (desk-scale band
/// limiting).
pub fn truncate_bins(f: &FeatureMatrix, keep: usize) -> FeatureMatrix {
    assert!(keep >= 1 && keep <= f.bins);
    let mut data = Vec::with_capacity(f.frames * keep);
    for row in f.data.chunks(f.bins) {
        data.extend_from_slice(&row[..keep]);
    }
    FeatureMatrix::new(f.frames, keep, data)
}

/// Pad every frame back out to `full` bins, filling the missing high bins
/// with the silence floor `ln(epsilon)`.
pub fn expand_bins(f: &FeatureMatrix, full: usize) -> FeatureMatrix {
    assert!(full >= f.bins);
    let floor = LPS_EPSILON.ln();
    let mut data = Vec::with_capacity(f.frames * full);
    for row in f.data.chunks(f.bins) {
        data.extend_from_slice(row);
        data.extend(std::iter::repeat(floor).take(full - f.bins));
    }
    FeatureMatrix::new(f.frames, full, data)
}
