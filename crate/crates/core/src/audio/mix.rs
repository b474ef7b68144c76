//! Noisy mixture construction: exact-SNR single-channel mixing and the
//! delay-and-gain multi-channel scene simulator.

use super::{AudioError, Waveform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Paired interference/noise levels used by the simulation presets:
/// `(sinr_db, snr_db)`.
pub const SINR_SNR_PRESETS: [(f64, f64); 4] = [(5.0, 10.0), (5.0, 15.0), (10.0, 15.0), (15.0, 20.0)];

/// A multi-channel mixing scene: one clean source, one noise source, an
/// optional interferer, target ratios and per-channel propagation.
#[derive(Debug, Clone)]
pub struct MixtureScene {
    pub clean: Waveform,
    pub noise: Waveform,
    pub interferer: Option<Waveform>,
    pub snr_db: f64,
    /// Clean-to-interferer ratio; required when an interferer is present.
    pub sinr_db: Option<f64>,
    pub channels: usize,
    /// Per-channel clean-path delay in samples.
    pub delays: Vec<usize>,
    /// Per-channel gain (> 0).
    pub gains: Vec<f64>,
    /// Per-channel interferer delay; defaults to `delays`.
    pub interferer_delays: Option<Vec<usize>>,
    /// Seed for the per-channel noise decorrelation offsets.
    pub seed: u64,
}

/// Cycle or truncate `noise` to exactly `len` samples.
fn match_len(noise: &Waveform, len: usize) -> Vec<f64> {
    noise.samples.iter().copied().cycle().take(len).collect()
}

/// `clean + alpha * noise` with `alpha` chosen so the clean-to-noise energy
/// ratio is exactly `snr_db`. Noise is looped or truncated to the clean
/// length first.
pub fn mix_at_snr(clean: &Waveform, noise: &Waveform, snr_db: f64) -> Result<Waveform, AudioError> {
    let clean_energy = clean.energy();
    if clean_energy == 0.0 {
        return Err(AudioError::SilentClean);
    }
    let noise_samples = match_len(noise, clean.len());
    let noise_energy: f64 = noise_samples.iter().map(|x| x * x).sum();
    if noise_energy == 0.0 {
        return Err(AudioError::SilentNoise);
    }
    let alpha = (clean_energy / (noise_energy * 10f64.powf(snr_db / 10.0))).sqrt();
    let samples = clean
        .samples
        .iter()
        .zip(&noise_samples)
        .map(|(c, n)| c + alpha * n)
        .collect();
    Ok(Waveform::new(samples, clean.sample_rate))
}

fn delayed(samples: &[f64], delay: usize) -> Vec<f64> {
    let mut out = vec![0.0; samples.len()];
    out[delay..].copy_from_slice(&samples[..samples.len() - delay]);
    out
}

fn scale_to_ratio(target: &[f64], reference_energy: f64, ratio_db: f64) -> Vec<f64> {
    let energy: f64 = target.iter().map(|x| x * x).sum();
    let alpha = if energy == 0.0 {
        0.0
    } else {
        (reference_energy / (energy * 10f64.powf(ratio_db / 10.0))).sqrt()
    };
    target.iter().map(|x| alpha * x).collect()
}

/// Render the scene's channels. Channel `b` carries
/// `gain_b * delay(clean, d_b) + interferer-at-SINR + noise-at-SNR`, where
/// the interferer and noise are scaled against that channel's clean
/// component, so per-channel ratios are invariant to the gains. Channel 0
/// is the reference. Per-channel noise comes from seeded cyclic offsets
/// into the scene's noise source (offset 0 for the reference channel).
pub fn simulate_multichannel(scene: &MixtureScene) -> Result<Vec<Waveform>, AudioError> {
    let len = scene.clean.len();
    if scene.channels == 0 || scene.delays.len() != scene.channels {
        return Err(AudioError::SceneShape {
            what: "delays",
            want: scene.channels,
            got: scene.delays.len(),
        });
    }
    if scene.gains.len() != scene.channels {
        return Err(AudioError::SceneShape {
            what: "gains",
            want: scene.channels,
            got: scene.gains.len(),
        });
    }
    if let Some(d) = &scene.interferer_delays {
        if d.len() != scene.channels {
            return Err(AudioError::SceneShape {
                what: "interferer delays",
                want: scene.channels,
                got: d.len(),
            });
        }
    }
    if scene.clean.energy() == 0.0 {
        return Err(AudioError::SilentClean);
    }
    let noise_master = match_len(&scene.noise, len);
    if noise_master.iter().all(|&x| x == 0.0) {
        return Err(AudioError::SilentNoise);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    let mut channels = Vec::with_capacity(scene.channels);
    for b in 0..scene.channels {
        let delay = scene.delays[b];
        if delay >= len {
            return Err(AudioError::DelayTooLong {
                channel: b,
                delay,
                len,
            });
        }
        let gain = scene.gains[b];
        let mut clean_part = delayed(&scene.clean.samples, delay);
        clean_part.iter_mut().for_each(|x| *x *= gain);
        let clean_energy: f64 = clean_part.iter().map(|x| x * x).sum();

        let mut mixed = clean_part;
        if let Some(interferer) = &scene.interferer {
            let sinr = scene.sinr_db.unwrap_or(SINR_SNR_PRESETS[0].0);
            let d = scene
                .interferer_delays
                .as_ref()
                .map_or(scene.delays[b], |v| v[b]);
            if d >= len {
                return Err(AudioError::DelayTooLong {
                    channel: b,
                    delay: d,
                    len,
                });
            }
            let mut part = delayed(&match_len(interferer, len), d);
            part.iter_mut().for_each(|x| *x *= gain);
            let scaled = scale_to_ratio(&part, clean_energy, sinr);
            for (m, v) in mixed.iter_mut().zip(&scaled) {
                *m += v;
            }
        }
        // Reference channel reuses the noise source as-is so a degenerate
        // single-channel scene reduces to mix_at_snr exactly.
        let offset = if b == 0 {
            0
        } else {
            rng.random_range(1..len)
        };
        let rotated: Vec<f64> = (0..len).map(|i| noise_master[(i + offset) % len]).collect();
        let scaled = scale_to_ratio(&rotated, clean_energy, scene.snr_db);
        for (m, v) in mixed.iter_mut().zip(&scaled) {
            *m += v;
        }
        channels.push(Waveform::new(mixed, scene.clean.sample_rate));
    }
    Ok(channels)
}

#[cfg(test)]
mod tests {
    use super::super::synth::{harmonic_voice, white_noise};
    use super::*;

    fn measured_snr(mixed: &Waveform, clean: &Waveform) -> f64 {
        let noise: Vec<f64> = mixed
            .samples
            .iter()
            .zip(&clean.samples)
            .map(|(m, c)| m - c)
            .collect();
        let ce = clean.energy();
        let ne: f64 = noise.iter().map(|x| x * x).sum();
        10.0 * (ce / ne).log10()
    }

    #[test]
    fn zero_db_with_equal_energies_uses_unit_alpha() {
        let clean = Waveform::new(vec![1.0, -1.0, 1.0, -1.0], 16_000);
        let noise = Waveform::new(vec![0.5, 0.5, -0.5, -0.5], 16_000);
        // Scale noise to match clean energy exactly.
        let scale = (clean.energy() / noise.energy()).sqrt();
        let noise = Waveform::new(noise.samples.iter().map(|x| x * scale).collect(), 16_000);
        let mixed = mix_at_snr(&clean, &noise, 0.0).unwrap();
        for ((m, c), n) in mixed.samples.iter().zip(&clean.samples).zip(&noise.samples) {
            assert!((m - (c + n)).abs() < 1e-12);
        }
    }

    #[test]
    fn very_high_snr_approximates_clean() {
        let clean = harmonic_voice(0.25, 16_000, 1);
        let noise = white_noise(4000, 16_000, 2);
        let mixed = mix_at_snr(&clean, &noise, 100.0).unwrap();
        let rel: f64 = mixed
            .samples
            .iter()
            .zip(&clean.samples)
            .map(|(m, c)| (m - c) * (m - c))
            .sum::<f64>()
            .sqrt()
            / clean.energy().sqrt();
        assert!(rel < 1e-4, "rel {rel}");
    }

    #[test]
    fn requested_snr_is_achieved_exactly() {
        let clean = harmonic_voice(0.5, 16_000, 3);
        let noise = white_noise(3000, 16_000, 4); // shorter: exercises looping
        for snr in [-5.0, 0.0, 5.0, 12.0, 30.0] {
            let mixed = mix_at_snr(&clean, &noise, snr).unwrap();
            assert!(
                (measured_snr(&mixed, &clean) - snr).abs() < 1e-9,
                "snr {snr}"
            );
        }
    }

    #[test]
    fn silent_clean_is_an_error() {
        let clean = Waveform::new(vec![0.0; 100], 16_000);
        let noise = white_noise(100, 16_000, 5);
        assert!(matches!(
            mix_at_snr(&clean, &noise, 5.0),
            Err(AudioError::SilentClean)
        ));
    }

    fn base_scene(channels: usize, seed: u64) -> MixtureScene {
        MixtureScene {
            clean: harmonic_voice(0.5, 16_000, 10 + seed),
            noise: white_noise(8000, 16_000, 20 + seed),
            interferer: None,
            snr_db: 5.0,
            sinr_db: None,
            channels,
            delays: vec![0; channels],
            gains: vec![1.0; channels],
            interferer_delays: None,
            seed,
        }
    }

    #[test]
    fn degenerate_scene_equals_mix_at_snr() {
        let scene = base_scene(1, 1);
        let channels = simulate_multichannel(&scene).unwrap();
        let direct = mix_at_snr(&scene.clean, &scene.noise, scene.snr_db).unwrap();
        assert_eq!(channels.len(), 1);
        assert_eq!(channels[0], direct);
    }

    #[test]
    fn delays_show_up_in_cross_correlation() {
        let mut scene = base_scene(2, 2);
        scene.delays = vec![0, 8];
        scene.snr_db = 300.0; // essentially clean: correlate the clean parts
        let channels = simulate_multichannel(&scene).unwrap();
        let a = &channels[0].samples;
        let b = &channels[1].samples;
        let mut best = (0usize, f64::MIN);
        for lag in 0..32 {
            let c: f64 = (0..a.len() - lag).map(|i| a[i] * b[i + lag]).sum();
            if c > best.1 {
                best = (lag, c);
            }
        }
        assert_eq!(best.0, 8);
    }

    #[test]
    fn doubling_gains_preserves_per_channel_snr() {
        let reference = {
            let mut s = base_scene(2, 3);
            s.delays = vec![0, 4];
            s.gains = vec![1.0, 0.8];
            s
        };
        let doubled = {
            let mut s = reference.clone();
            s.gains = vec![2.0, 1.6];
            s
        };
        let run = |scene: &MixtureScene| {
            let chans = simulate_multichannel(scene).unwrap();
            chans
                .iter()
                .enumerate()
                .map(|(b, ch)| {
                    let mut clean_part = delayed(&scene.clean.samples, scene.delays[b]);
                    clean_part.iter_mut().for_each(|x| *x *= scene.gains[b]);
                    let ce: f64 = clean_part.iter().map(|x| x * x).sum();
                    let ne: f64 = ch
                        .samples
                        .iter()
                        .zip(&clean_part)
                        .map(|(m, c)| (m - c) * (m - c))
                        .sum();
                    10.0 * (ce / ne).log10()
                })
                .collect::<Vec<_>>()
        };
        let s1 = run(&reference);
        let s2 = run(&doubled);
        for (a, b) in s1.iter().zip(&s2) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            assert!((a - reference.snr_db).abs() < 1e-9);
        }
    }

    #[test]
    fn interferer_is_scaled_to_sinr() {
        let mut scene = base_scene(1, 4);
        scene.interferer = Some(harmonic_voice(0.5, 16_000, 99));
        scene.sinr_db = Some(5.0);
        scene.snr_db = 300.0; // make noise negligible
        let channels = simulate_multichannel(&scene).unwrap();
        let interf_part: Vec<f64> = channels[0]
            .samples
            .iter()
            .zip(&scene.clean.samples)
            .map(|(m, c)| m - c)
            .collect();
        let ratio = 10.0
            * (scene.clean.energy() / interf_part.iter().map(|x| x * x).sum::<f64>()).log10();
        assert!((ratio - 5.0).abs() < 1e-6, "sinr {ratio}");
    }

    #[test]
    fn excessive_delay_is_rejected() {
        let mut scene = base_scene(1, 5);
        scene.delays = vec![scene.clean.len()];
        assert!(matches!(
            simulate_multichannel(&scene),
            Err(AudioError::DelayTooLong { .. })
        ));
    }

    #[test]
    fn simulation_is_deterministic() {
        let scene = {
            let mut s = base_scene(3, 6);
            s.delays = vec![0, 3, 7];
            s.gains = vec![1.0, 0.9, 0.8];
            s
        };
        assert_eq!(
            simulate_multichannel(&scene).unwrap(),
            simulate_multichannel(&scene).unwrap()
        );
    }
}
