//! End-to-end enhancement: noisy channels in, regression over normalized
//! log-power features, waveform out via the noisy reference phase.

use super::dataset::{build_input_rows, DatasetMode};
use super::features::{
    denormalize_with, expand_bins, lps, lps_invert, normalize, truncate_bins, FeatureMatrix,
    NormStats,
};
use super::stft::{istft, stft, Spectrogram, STFT_BINS};
use super::{AudioError, Waveform};
use crate::nn::Network;
use crate::tt::ModeFactorization;

/// Feature-pipeline geometry a trained model is bound to.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSpec {
    pub mode: DatasetMode,
    /// Retained LPS bins per frame (including the DC bin).
    pub bins: usize,
    /// Context radius M.
    pub context: usize,
    pub channels: usize,
    /// Input tensorization, recorded for TT models.
    pub fact: Option<ModeFactorization>,
}

impl PipelineSpec {
    pub fn frame_width(&self) -> usize {
        match self.mode {
            DatasetMode::Dense => self.bins,
            DatasetMode::Tt => self.bins - 1,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.frame_width() * (2 * self.context + 1) * self.channels
    }
}

/// Normalization statistics frozen on the training partition: one per
/// input channel (over the retained bins) plus the clean-target stats.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub inputs: Vec<NormStats>,
    pub target: NormStats,
}

/// Stats for the model's output width: TT models regress bins 1.. only.
fn target_stats_for_mode(stats: &FeatureStats, mode: DatasetMode) -> NormStats {
    match mode {
        DatasetMode::Dense => stats.target.clone(),
        DatasetMode::Tt => NormStats {
            mean: stats.target.mean[1..].to_vec(),
            std: stats.target.std[1..].to_vec(),
        },
    }
}

/// Run the regression over raw (unnormalized, full-bin) per-channel LPS
/// features. Returns denormalized enhanced features over the retained
/// bins; in TT mode the DC bin is the raw noisy reference value copied
/// verbatim.
pub fn enhance_features(
    net: &Network,
    raw_channels: &[FeatureMatrix],
    stats: &FeatureStats,
    spec: &PipelineSpec,
) -> Result<FeatureMatrix, AudioError> {
    if raw_channels.len() != spec.channels {
        return Err(AudioError::ChannelCount {
            got: raw_channels.len(),
            want: spec.channels,
        });
    }
    if stats.inputs.len() != spec.channels {
        return Err(AudioError::Geometry(format!(
            "stats carry {} input channels, pipeline has {}",
            stats.inputs.len(),
            spec.channels
        )));
    }
    if net.input_dim() != spec.input_dim() || net.output_dim() != spec.frame_width() {
        return Err(AudioError::Geometry(format!(
            "network is {}->{}, pipeline expects {}->{}",
            net.input_dim(),
            net.output_dim(),
            spec.input_dim(),
            spec.frame_width()
        )));
    }
    let retained: Vec<FeatureMatrix> = raw_channels
        .iter()
        .map(|f| truncate_bins(f, spec.bins))
        .collect();
    let normalized: Vec<FeatureMatrix> = retained
        .iter()
        .zip(&stats.inputs)
        .map(|(f, st)| normalize(f, Some(st)).0)
        .collect();
    let rows = build_input_rows(&normalized, spec.context, spec.mode)?;
    let pred = net.predict(&rows)?;
    let frames = retained[0].frames();
    let pred_features = FeatureMatrix::new(frames, spec.frame_width(), pred.into_data());
    let out_stats = target_stats_for_mode(stats, spec.mode);
    let denorm = denormalize_with(&pred_features, &out_stats);

    match spec.mode {
        DatasetMode::Dense => Ok(denorm),
        DatasetMode::Tt => {
            // Re-attach the untouched noisy DC bin in front of each frame.
            let mut data = Vec::with_capacity(frames * spec.bins);
            for t in 0..frames {
                data.push(retained[0].at(t, 0));
                data.extend_from_slice(denorm.row(t));
            }
            Ok(FeatureMatrix::new(frames, spec.bins, data))
        }
    }
}

/// Resynthesize a waveform from retained-bin LPS features and a phase
/// reference, padded/truncated to `target_len` samples.
pub fn features_to_waveform(
    features: &FeatureMatrix,
    phase: &Spectrogram,
    target_len: usize,
) -> Result<Waveform, AudioError> {
    let full = expand_bins(features, STFT_BINS);
    let spec = lps_invert(&full, phase)?;
    let mut wave = istft(&spec)?;
    wave.samples.resize(target_len, 0.0);
    Ok(wave)
}

/// Full enhancement: STFT each channel, regress clean features, rebuild
/// the waveform with the noisy reference-channel phase. The output has the
/// same length as the input.
pub fn enhance(
    net: &Network,
    noisy: &[Waveform],
    stats: &FeatureStats,
    spec: &PipelineSpec,
) -> Result<Waveform, AudioError> {
    if noisy.len() != spec.channels {
        return Err(AudioError::ChannelCount {
            got: noisy.len(),
            want: spec.channels,
        });
    }
    let spectra: Vec<Spectrogram> = noisy.iter().map(stft).collect::<Result<_, _>>()?;
    let raw: Vec<FeatureMatrix> = spectra.iter().map(lps).collect();
    let enhanced = enhance_features(net, &raw, stats, spec)?;
    features_to_waveform(&enhanced, &spectra[0], noisy[0].len())
}
