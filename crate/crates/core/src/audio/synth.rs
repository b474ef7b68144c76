//! Seeded synthetic sources: a harmonic "voice" with pitch/amplitude
//! movement for desk-scale speech stand-ins, and white Gaussian noise.

use super::Waveform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

/// Highest partial frequency emitted by [`harmonic_voice`]. Keeping all
/// source energy below ~1.9 kHz means the 64 lowest STFT bins (512-point
/// frames at 16 kHz) capture the whole signal.
pub const VOICE_MAX_HZ: f64 = 1900.0;

/// Harmonic-plus-vibrato pseudo-speech: a randomized pitch contour with a
/// stack of decaying partials and a slow syllabic amplitude envelope.
/// Deterministic per seed; RMS is normalized to 0.1.
pub fn harmonic_voice(duration_s: f64, sample_rate: u32, seed: u64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (duration_s * sample_rate as f64).round() as usize;
    let f0_base: f64 = rng.random_range(120.0..220.0);
    let vibrato_hz: f64 = rng.random_range(3.0..6.0);
    let vibrato_depth: f64 = rng.random_range(0.01..0.03);
    let drift_hz: f64 = rng.random_range(0.2..0.5);
    let drift_depth: f64 = rng.random_range(0.03..0.08);
    let envelope_hz: f64 = rng.random_range(1.5..3.5);
    let envelope_phase: f64 = rng.random_range(0.0..2.0 * PI);
    let n_harmonics = (VOICE_MAX_HZ / (f0_base * (1.0 + drift_depth))) as usize;
    let amps: Vec<f64> = (1..=n_harmonics.max(1))
        .map(|h| (h as f64).powf(-0.8) * rng.random_range(0.7..1.0))
        .collect();
    let phases: Vec<f64> = (0..amps.len())
        .map(|_| rng.random_range(0.0..2.0 * PI))
        .collect();

    let dt = 1.0 / sample_rate as f64;
    let mut harmonic_phase = vec![0.0f64; amps.len()];
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * dt;
        let f0 = f0_base
            * (1.0
                + vibrato_depth * (2.0 * PI * vibrato_hz * t).sin()
                + drift_depth * (2.0 * PI * drift_hz * t).sin());
        let env = 0.3 + 0.7 * (0.5 + 0.5 * (2.0 * PI * envelope_hz * t + envelope_phase).sin());
        let mut v = 0.0;
        for (h, amp) in amps.iter().enumerate() {
            let freq = f0 * (h + 1) as f64;
            if freq < VOICE_MAX_HZ {
                v += amp * (harmonic_phase[h] + phases[h]).sin();
            }
            harmonic_phase[h] += 2.0 * PI * freq * dt;
        }
        samples.push(env * v);
    }
    let rms = (samples.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    if rms > 0.0 {
        let scale = 0.1 / rms;
        samples.iter_mut().for_each(|x| *x *= scale);
    }
    Waveform::new(samples, sample_rate)
}

/// Unit-variance white Gaussian noise, deterministic per seed.
pub fn white_noise(len: usize, sample_rate: u32, seed: u64) -> Waveform {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..len).map(|_| normal.sample(&mut rng)).collect();
    Waveform::new(samples, sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn voice_is_deterministic_and_band_limited() {
        let a = harmonic_voice(0.5, 16_000, 7);
        let b = harmonic_voice(0.5, 16_000, 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 8000);

        // Energy above 2 kHz should be negligible: Hann-windowed DFT over
        // a centered segment (the window keeps leakage out of the tally).
        let n = 4096;
        let start = 2000;
        let seg: Vec<f64> = a.samples[start..start + n]
            .iter()
            .enumerate()
            .map(|(i, &x)| x * (0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()))
            .collect();
        let mut low = 0.0;
        let mut high = 0.0;
        for k in (1..n / 2).step_by(4) {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &x) in seg.iter().enumerate() {
                let w = 2.0 * PI * k as f64 * i as f64 / n as f64;
                re += x * w.cos();
                im -= x * w.sin();
            }
            let freq = k as f64 * 16_000.0 / n as f64;
            if freq < 2000.0 {
                low += re * re + im * im;
            } else {
                high += re * re + im * im;
            }
        }
        assert!(high < 1e-9 * low, "out-of-band energy: {high} vs {low}");
    }

    #[test]
    fn noise_is_roughly_unit_variance() {
        let w = white_noise(50_000, 16_000, 3);
        let var = w.energy() / w.len() as f64;
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn different_seeds_differ() {
        assert_ne!(white_noise(100, 16_000, 1), white_noise(100, 16_000, 2));
        assert_ne!(
            harmonic_voice(0.1, 16_000, 1),
            harmonic_voice(0.1, 16_000, 2)
        );
    }
}
