//! Context windowing: turning per-channel feature matrices into regression
//! rows. Each row stacks the 2M+1 frames around the current frame for every
//! channel (channels concatenated, frames replicated at the edges).

use super::features::FeatureMatrix;
use super::AudioError;
use crate::tensor::DenseTensor;
use crate::tt::ModeFactorization;

/// Dense nets consume every retained bin; TT nets drop the DC bin from
/// inputs and targets and carry it separately for bit-exact passthrough.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetMode {
    Dense,
    Tt,
}

/// Row-per-frame regression data plus the metadata the enhancement path
/// needs to undo the framing.
#[derive(Debug, Clone)]
pub struct RegressionDataset {
    /// `frames x (frame_width * (2M+1) * channels)` inputs.
    pub inputs: DenseTensor,
    /// `frames x frame_width` targets (reference-channel clean features).
    pub targets: DenseTensor,
    /// Input tensorization for TT nets, when supplied.
    pub tensor_fact: Option<ModeFactorization>,
    /// Raw noisy reference-channel DC-bin value per frame (TT mode only).
    pub dc_channel: Option<Vec<f64>>,
}

fn frame_slice(mat: &FeatureMatrix, frame: isize, skip_dc: bool) -> &[f64] {
    let t = frame.clamp(0, mat.frames() as isize - 1) as usize;
    let row = mat.row(t);
    if skip_dc {
        &row[1..]
    } else {
        row
    }
}

/// Stack context windows into input rows. Output width is
/// `frame_width * (2M+1) * channels` with `frame_width = bins` (dense) or
/// `bins - 1` (tt).
pub fn build_input_rows(
    channels: &[FeatureMatrix],
    context: usize,
    mode: DatasetMode,
) -> Result<DenseTensor, AudioError> {
    let Some(first) = channels.first() else {
        return Err(AudioError::ChannelCount { got: 0, want: 1 });
    };
    let frames = first.frames();
    let bins = first.bins();
    for ch in channels {
        if ch.frames() != frames || ch.bins() != bins {
            return Err(AudioError::FeatureShape(
                frames,
                bins,
                ch.frames(),
                ch.bins(),
            ));
        }
    }
    let skip_dc = mode == DatasetMode::Tt;
    let width = if skip_dc { bins - 1 } else { bins };
    let row_width = width * (2 * context + 1) * channels.len();
    let mut data = Vec::with_capacity(frames * row_width);
    for t in 0..frames as isize {
        for ch in channels {
            for offset in -(context as isize)..=(context as isize) {
                data.extend_from_slice(frame_slice(ch, t + offset, skip_dc));
            }
        }
    }
    Ok(DenseTensor::new(vec![frames, row_width], data)?)
}

/// Assemble a training dataset from normalized noisy channel features and
/// the normalized clean reference. In TT mode `raw_reference` (the
/// unnormalized noisy reference-channel features) must be given; its DC bin
/// is stored verbatim for passthrough at synthesis time.
pub fn build_dataset(
    channels: &[FeatureMatrix],
    clean_ref: &FeatureMatrix,
    context: usize,
    mode: DatasetMode,
    fact: Option<ModeFactorization>,
    raw_reference: Option<&FeatureMatrix>,
) -> Result<RegressionDataset, AudioError> {
    let inputs = build_input_rows(channels, context, mode)?;
    let frames = channels[0].frames();
    let bins = channels[0].bins();
    if clean_ref.frames() != frames || clean_ref.bins() != bins {
        return Err(AudioError::FeatureShape(
            frames,
            bins,
            clean_ref.frames(),
            clean_ref.bins(),
        ));
    }
    let row_width = inputs.shape()[1];
    if let Some(f) = &fact {
        if f.input_dim() != row_width {
            return Err(AudioError::FactorizationMismatch {
                got: f.input_dim(),
                want: row_width,
            });
        }
    }
    let (targets, dc_channel) = match mode {
        DatasetMode::Dense => {
            let mut t = Vec::with_capacity(frames * bins);
            for frame in 0..frames {
                t.extend_from_slice(clean_ref.row(frame));
            }
            (DenseTensor::new(vec![frames, bins], t)?, None)
        }
        DatasetMode::Tt => {
            let raw = raw_reference.ok_or(AudioError::MissingDcReference)?;
            if raw.frames() != frames || raw.bins() != bins {
                return Err(AudioError::FeatureShape(
                    frames,
                    bins,
                    raw.frames(),
                    raw.bins(),
                ));
            }
            let mut t = Vec::with_capacity(frames * (bins - 1));
            let mut dc = Vec::with_capacity(frames);
            for frame in 0..frames {
                t.extend_from_slice(&clean_ref.row(frame)[1..]);
                dc.push(raw.at(frame, 0));
            }
            (DenseTensor::new(vec![frames, bins - 1], t)?, Some(dc))
        }
    };
    Ok(RegressionDataset {
        inputs,
        targets,
        tensor_fact: fact,
        dc_channel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counting_features(frames: usize, bins: usize, base: f64) -> FeatureMatrix {
        let data = (0..frames * bins).map(|i| base + i as f64).collect();
        FeatureMatrix::new(frames, bins, data)
    }

    #[test]
    fn zero_context_single_channel_rows_are_frames() {
        let f = counting_features(4, 257, 0.0);
        let rows = build_input_rows(std::slice::from_ref(&f), 0, DatasetMode::Dense).unwrap();
        assert_eq!(rows.shape(), &[4, 257]);
        for t in 0..4 {
            assert_eq!(&rows.data()[t * 257..(t + 1) * 257], f.row(t));
        }
    }

    #[test]
    fn context_five_matches_the_input_size_formula() {
        let f = counting_features(12, 257, 0.0);
        let rows = build_input_rows(std::slice::from_ref(&f), 5, DatasetMode::Dense).unwrap();
        assert_eq!(rows.shape(), &[12, 257 * 11]);
    }

    #[test]
    fn tt_mode_multichannel_width_and_factorization() {
        let chans: Vec<FeatureMatrix> = (0..8)
            .map(|c| counting_features(6, 257, 1000.0 * c as f64))
            .collect();
        let rows = build_input_rows(&chans, 5, DatasetMode::Tt).unwrap();
        assert_eq!(rows.shape(), &[6, 256 * 11 * 8]);

        let clean = counting_features(6, 257, -5.0);
        let fact =
            ModeFactorization::with_uniform_rank(vec![88, 256], vec![16, 16], 2).unwrap();
        assert_eq!(fact.input_dim(), 256 * 11 * 8);
        let ds = build_dataset(
            &chans,
            &clean,
            5,
            DatasetMode::Tt,
            Some(fact),
            Some(&chans[0]),
        )
        .unwrap();
        assert_eq!(ds.targets.shape(), &[6, 256]);
        let dc = ds.dc_channel.unwrap();
        for t in 0..6 {
            assert_eq!(dc[t], chans[0].at(t, 0));
        }
    }

    #[test]
    fn edges_use_frame_replication() {
        let f = counting_features(3, 4, 0.0);
        let rows = build_input_rows(std::slice::from_ref(&f), 1, DatasetMode::Dense).unwrap();
        // First row: frames [0 (replicated), 0, 1].
        let want: Vec<f64> = [f.row(0), f.row(0), f.row(1)].concat();
        assert_eq!(&rows.data()[..12], want.as_slice());
        // Last row: frames [1, 2, 2 (replicated)].
        let want_last: Vec<f64> = [f.row(1), f.row(2), f.row(2)].concat();
        assert_eq!(&rows.data()[24..], want_last.as_slice());
    }

    #[test]
    fn channel_blocks_are_concatenated_in_order() {
        let a = counting_features(2, 3, 0.0);
        let b = counting_features(2, 3, 100.0);
        let rows = build_input_rows(&[a.clone(), b.clone()], 0, DatasetMode::Dense).unwrap();
        assert_eq!(rows.shape(), &[2, 6]);
        assert_eq!(&rows.data()[..3], a.row(0));
        assert_eq!(&rows.data()[3..6], b.row(0));
    }

    #[test]
    fn factorization_mismatch_is_rejected() {
        let f = counting_features(4, 65, 0.0);
        let clean = counting_features(4, 65, 1.0);
        let fact = ModeFactorization::with_uniform_rank(vec![4, 4], vec![4, 4], 2).unwrap();
        let err = build_dataset(
            std::slice::from_ref(&f),
            &clean,
            1,
            DatasetMode::Tt,
            Some(fact),
            Some(&f),
        );
        assert!(matches!(
            err,
            Err(AudioError::FactorizationMismatch { .. })
        ));
    }

    #[test]
    fn tt_mode_without_raw_reference_is_rejected() {
        let f = counting_features(4, 65, 0.0);
        let clean = counting_features(4, 65, 1.0);
        assert!(matches!(
            build_dataset(std::slice::from_ref(&f), &clean, 1, DatasetMode::Tt, None, None),
            Err(AudioError::MissingDcReference)
        ));
    }
}
