//! Waveform- and feature-domain quality metrics: scale-invariant SDR,
//! segmental SNR and feature MSE.

use crate::audio::{FeatureMatrix, Waveform};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("waveform lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("reference has zero energy")]
    SilentReference,
    #[error("every reference frame is silent")]
    AllFramesSilent,
    #[error("feature shapes differ: {0}x{1} vs {2}x{3}")]
    FeatureShape(usize, usize, usize, usize),
}

/// Scores are capped here so an exact match does not return infinity.
pub const SI_SDR_CAP_DB: f64 = 100.0;

/// Scale-invariant signal-to-distortion ratio in dB.
///
/// The estimate is projected onto the reference (`alpha = <est, ref> /
/// |ref|^2`) and the score is `10 log10(|alpha ref|^2 / |alpha ref -
/// est|^2)`, which makes the metric exactly invariant to positive scaling
/// of the estimate.
pub fn si_sdr(estimate: &Waveform, reference: &Waveform) -> Result<f64, MetricError> {
    let est = &estimate.samples;
    let refr = &reference.samples;
    if est.len() != refr.len() {
        return Err(MetricError::LengthMismatch(est.len(), refr.len()));
    }
    let ref_energy: f64 = refr.iter().map(|x| x * x).sum();
    if ref_energy == 0.0 {
        return Err(MetricError::SilentReference);
    }
    let dot: f64 = est.iter().zip(refr).map(|(a, b)| a * b).sum();
    let alpha = dot / ref_energy;
    let target_energy = alpha * alpha * ref_energy;
    let resid_energy: f64 = est
        .iter()
        .zip(refr)
        .map(|(a, b)| {
            let d = alpha * b - a;
            d * d
        })
        .sum();
    if resid_energy == 0.0 || target_energy / resid_energy >= 1e10 {
        return Ok(SI_SDR_CAP_DB);
    }
    Ok(10.0 * (target_energy / resid_energy).log10())
}

pub const SEG_SNR_FRAME: usize = 256;
pub const SEG_SNR_FLOOR_DB: f64 = -10.0;
pub const SEG_SNR_CEIL_DB: f64 = 35.0;

/// Mean over non-silent frames of the clamped per-frame SNR. Frames are
/// non-overlapping windows of [`SEG_SNR_FRAME`] samples; a trailing partial
/// frame is ignored.
pub fn segmental_snr(estimate: &Waveform, reference: &Waveform) -> Result<f64, MetricError> {
    let est = &estimate.samples;
    let refr = &reference.samples;
    if est.len() != refr.len() {
        return Err(MetricError::LengthMismatch(est.len(), refr.len()));
    }
    let mut sum = 0.0;
    let mut frames = 0usize;
    for (e, r) in est
        .chunks_exact(SEG_SNR_FRAME)
        .zip(refr.chunks_exact(SEG_SNR_FRAME))
    {
        let ref_energy: f64 = r.iter().map(|x| x * x).sum();
        if ref_energy == 0.0 {
            continue;
        }
        let resid: f64 = e
            .iter()
            .zip(r)
            .map(|(a, b)| {
                let d = b - a;
                d * d
            })
            .sum();
        let snr = if resid == 0.0 {
            SEG_SNR_CEIL_DB
        } else {
            10.0 * (ref_energy / resid).log10()
        };
        sum += snr.clamp(SEG_SNR_FLOOR_DB, SEG_SNR_CEIL_DB);
        frames += 1;
    }
    if frames == 0 {
        return Err(MetricError::AllFramesSilent);
    }
    Ok(sum / frames as f64)
}

/// Mean squared difference between two feature matrices.
pub fn feature_mse(pred: &FeatureMatrix, clean: &FeatureMatrix) -> Result<f64, MetricError> {
    if pred.frames() != clean.frames() || pred.bins() != clean.bins() {
        return Err(MetricError::FeatureShape(
            pred.frames(),
            pred.bins(),
            clean.frames(),
            clean.bins(),
        ));
    }
    let sum: f64 = pred
        .data()
        .iter()
        .zip(clean.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / pred.data().len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wave(samples: Vec<f64>) -> Waveform {
        Waveform {
            samples,
            sample_rate: 16_000,
        }
    }

    fn sine(len: usize, freq: f64) -> Vec<f64> {
        (0..len)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / 16_000.0).sin())
            .collect()
    }

    #[test]
    fn exact_match_hits_the_cap() {
        let s = wave(sine(4096, 440.0));
        assert_eq!(si_sdr(&s, &s).unwrap(), SI_SDR_CAP_DB);
    }

    #[test]
    fn si_sdr_is_scale_invariant() {
        let s = wave(sine(4096, 440.0));
        let double = wave(s.samples.iter().map(|x| 2.0 * x).collect());
        assert_eq!(si_sdr(&double, &s).unwrap(), SI_SDR_CAP_DB);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let noisy = wave(
            s.samples
                .iter()
                .map(|x| x + 0.1 * rng.random_range(-1.0..1.0))
                .collect(),
        );
        let scaled = wave(noisy.samples.iter().map(|x| 3.5 * x).collect());
        let a = si_sdr(&noisy, &s).unwrap();
        let b = si_sdr(&scaled, &s).unwrap();
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn orthogonal_perturbation_gives_analytic_ratio() {
        // e orthogonal to s with |e|^2 = |s|^2 / 10 gives exactly 10 dB.
        let n = 8192;
        let s: Vec<f64> = sine(n, 440.0);
        let e_raw: Vec<f64> = sine(n, 880.0); // cos would also do; orthogonalize anyway
        let dot: f64 = e_raw.iter().zip(&s).map(|(a, b)| a * b).sum();
        let s_energy: f64 = s.iter().map(|x| x * x).sum();
        let e_orth: Vec<f64> = e_raw
            .iter()
            .zip(&s)
            .map(|(e, sv)| e - dot / s_energy * sv)
            .collect();
        let e_energy: f64 = e_orth.iter().map(|x| x * x).sum();
        let scale = (s_energy / (10.0 * e_energy)).sqrt();
        let est: Vec<f64> = s.iter().zip(&e_orth).map(|(sv, ev)| sv + scale * ev).collect();
        let got = si_sdr(&wave(est), &wave(s)).unwrap();
        assert!((got - 10.0).abs() < 1e-9, "{got}");
    }

    #[test]
    fn silent_reference_is_an_error() {
        let z = wave(vec![0.0; 1024]);
        let s = wave(sine(1024, 100.0));
        assert!(matches!(
            si_sdr(&s, &z),
            Err(MetricError::SilentReference)
        ));
    }

    #[test]
    fn seg_snr_exact_match_is_ceiling() {
        let s = wave(sine(4096, 200.0));
        assert_eq!(segmental_snr(&s, &s).unwrap(), SEG_SNR_CEIL_DB);
    }

    #[test]
    fn seg_snr_zero_db_noise_per_frame() {
        // Per frame, add noise with exactly the frame's reference energy.
        let n = 4096;
        let s: Vec<f64> = sine(n, 250.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut est = s.clone();
        for f in 0..n / SEG_SNR_FRAME {
            let frame = &s[f * SEG_SNR_FRAME..(f + 1) * SEG_SNR_FRAME];
            let energy: f64 = frame.iter().map(|x| x * x).sum();
            let raw: Vec<f64> = (0..SEG_SNR_FRAME)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let raw_energy: f64 = raw.iter().map(|x| x * x).sum();
            let scale = (energy / raw_energy).sqrt();
            for (i, r) in raw.iter().enumerate() {
                est[f * SEG_SNR_FRAME + i] += scale * r;
            }
        }
        let got = segmental_snr(&wave(est), &wave(s)).unwrap();
        assert!(got.abs() < 1.0, "expected ~0 dB, got {got}");
    }

    #[test]
    fn anti_phase_estimate_scores_minus_six_db() {
        // Residual energy is 4x the reference in every frame:
        // 10 log10(1/4) = -6.02 dB, above the -10 dB floor.
        let s = wave(sine(4096, 300.0));
        let anti = wave(s.samples.iter().map(|x| -x).collect());
        let got = segmental_snr(&anti, &s).unwrap();
        let want = 10.0 * (0.25f64).log10();
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }

    #[test]
    fn seg_snr_monotone_in_noise_level() {
        let s: Vec<f64> = sine(8192, 180.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise: Vec<f64> = (0..8192).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut last = f64::INFINITY;
        for level in [0.01, 0.05, 0.1, 0.3, 0.8] {
            let est: Vec<f64> = s
                .iter()
                .zip(&noise)
                .map(|(sv, nv)| sv + level * nv)
                .collect();
            let snr = segmental_snr(&wave(est), &wave(s.clone())).unwrap();
            assert!(snr <= last, "level {level}: {snr} > {last}");
            last = snr;
        }
    }

    #[test]
    fn all_silent_frames_is_an_error() {
        let z = wave(vec![0.0; 1024]);
        assert!(matches!(
            segmental_snr(&z, &z),
            Err(MetricError::AllFramesSilent)
        ));
    }
}
