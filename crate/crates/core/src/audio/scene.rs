//! Scene description files and the batch simulation driver behind the
//! `simulate` command: a TOML scene describes sources (files or seeded
//! synthesis), ratios and channel propagation; simulation writes one clean
//! and one multi-channel noisy WAV per utterance plus a manifest.

use super::mix::{simulate_multichannel, MixtureScene, SINR_SNR_PRESETS};
use super::synth::{harmonic_voice, white_noise};
use super::wav::{read_wav_mono, write_wav};
use super::{AudioError, Waveform};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

fn default_sample_rate() -> u32 {
    16_000
}

fn default_duration() -> f64 {
    1.0
}

fn default_one() -> usize {
    1
}

/// Human-readable scene description (TOML key-value).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneFile {
    pub seed: u64,
    #[serde(default = "default_one")]
    pub channels: usize,
    pub snr_db: f64,
    #[serde(default)]
    pub sinr_db: Option<f64>,
    /// Per-channel delays in samples; defaults to 4 samples per channel
    /// index.
    #[serde(default)]
    pub delays: Option<Vec<usize>>,
    /// Per-channel gains; defaults to 1.0.
    #[serde(default)]
    pub gains: Option<Vec<f64>>,
    #[serde(default)]
    pub interferer_delays: Option<Vec<usize>>,
    /// Clean source WAV; synthesized harmonic voices when absent.
    #[serde(default)]
    pub clean: Option<PathBuf>,
    /// Noise source WAV; seeded white noise when absent.
    #[serde(default)]
    pub noise: Option<PathBuf>,
    /// Optional interfering source WAV; synthesized when set to "synth".
    #[serde(default)]
    pub interferer: Option<PathBuf>,
    #[serde(default = "default_one")]
    pub train_utterances: usize,
    #[serde(default)]
    pub test_utterances: usize,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: u32,
}

impl SceneFile {
    pub fn from_toml(text: &str) -> Result<Self, AudioError> {
        let scene: SceneFile =
            toml::from_str(text).map_err(|e| AudioError::BadScene(e.to_string()))?;
        if scene.channels == 0 {
            return Err(AudioError::BadScene("channels must be >= 1".into()));
        }
        if scene.duration_s <= 0.0 {
            return Err(AudioError::BadScene("duration_s must be > 0".into()));
        }
        Ok(scene)
    }

    pub fn delays_or_default(&self) -> Vec<usize> {
        self.delays
            .clone()
            .unwrap_or_else(|| (0..self.channels).map(|b| 4 * b).collect())
    }

    pub fn gains_or_default(&self) -> Vec<f64> {
        self.gains.clone().unwrap_or_else(|| vec![1.0; self.channels])
    }
}

/// One simulated utterance on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub split: String,
    pub clean: PathBuf,
    /// Multi-channel noisy WAV (one file, `channels` interleaved).
    pub noisy: PathBuf,
    pub snr_db: f64,
    #[serde(default)]
    pub sinr_db: Option<f64>,
}

/// Simulation output index: geometry, the SINR/SNR preset table and the
/// utterance list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub channels: usize,
    pub sample_rate: u32,
    /// `(sinr_db, snr_db)` pairings available to scene authors.
    pub presets: Vec<(f64, f64)>,
    pub utterances: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn from_toml(text: &str) -> Result<Self, AudioError> {
        toml::from_str(text).map_err(|e| AudioError::BadScene(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn entries<'a>(&'a self, split: &'a str) -> impl Iterator<Item = &'a ManifestEntry> + 'a {
        self.utterances.iter().filter(move |e| e.split == split)
    }
}

/// Render every utterance of a scene into `out_dir` and return the
/// manifest (also written to `out_dir/manifest.toml`). Deterministic for a
/// fixed scene seed.
pub fn simulate_scene(scene: &SceneFile, out_dir: &Path) -> Result<Manifest, AudioError> {
    std::fs::create_dir_all(out_dir).map_err(|e| AudioError::Io {
        path: out_dir.display().to_string(),
        source: e,
    })?;
    let len = (scene.duration_s * scene.sample_rate as f64).round() as usize;
    let clean_source = match &scene.clean {
        Some(path) => Some(read_wav_mono(path)?),
        None => None,
    };
    let noise_source = match &scene.noise {
        Some(path) => Some(read_wav_mono(path)?),
        None => None,
    };
    let interferer_source = match &scene.interferer {
        Some(path) => Some(read_wav_mono(path)?),
        None => None,
    };

    let total = scene.train_utterances + scene.test_utterances;
    let mut utterances = Vec::with_capacity(total);
    for u in 0..total {
        let utt_seed = scene.seed.wrapping_add(1 + u as u64);
        let clean = match &clean_source {
            Some(w) => segment(w, len, u),
            None => harmonic_voice(scene.duration_s, scene.sample_rate, utt_seed),
        };
        let noise = match &noise_source {
            Some(w) => segment(w, len, u),
            None => white_noise(len, scene.sample_rate, utt_seed.wrapping_add(0x9e37)),
        };
        let mix = MixtureScene {
            clean: clean.clone(),
            noise,
            interferer: interferer_source.as_ref().map(|w| segment(w, len, u)),
            snr_db: scene.snr_db,
            sinr_db: scene.sinr_db,
            channels: scene.channels,
            delays: scene.delays_or_default(),
            gains: scene.gains_or_default(),
            interferer_delays: scene.interferer_delays.clone(),
            seed: utt_seed.wrapping_add(0x51ed),
        };
        let channels = simulate_multichannel(&mix)?;

        let id = format!("utt{u:03}");
        let clean_path = out_dir.join(format!("{id}_clean.wav"));
        let noisy_path = out_dir.join(format!("{id}_noisy.wav"));
        write_wav(&clean_path, std::slice::from_ref(&clean))?;
        write_wav(&noisy_path, &channels)?;
        utterances.push(ManifestEntry {
            id,
            split: if u < scene.train_utterances {
                "train".into()
            } else {
                "test".into()
            },
            clean: clean_path,
            noisy: noisy_path,
            snr_db: scene.snr_db,
            sinr_db: scene.sinr_db,
        });
    }
    let manifest = Manifest {
        seed: scene.seed,
        channels: scene.channels,
        sample_rate: scene.sample_rate,
        presets: SINR_SNR_PRESETS.to_vec(),
        utterances,
    };
    std::fs::write(out_dir.join("manifest.toml"), manifest.to_toml()).map_err(|e| {
        AudioError::Io {
            path: out_dir.join("manifest.toml").display().to_string(),
            source: e,
        }
    })?;
    Ok(manifest)
}

/// Utterance `u`'s slice of a source file, cycling as needed.
fn segment(source: &Waveform, len: usize, u: usize) -> Waveform {
    let start = (u * len) % source.len().max(1);
    let samples = source
        .samples
        .iter()
        .cycle()
        .skip(start)
        .take(len)
        .copied()
        .collect();
    Waveform::new(samples, source.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCENE: &str = r#"
seed = 11
channels = 2
snr_db = 5.0
train_utterances = 2
test_utterances = 1
duration_s = 0.3
"#;

    #[test]
    fn scene_parses_with_defaults() {
        let scene = SceneFile::from_toml(SCENE).unwrap();
        assert_eq!(scene.channels, 2);
        assert_eq!(scene.delays_or_default(), vec![0, 4]);
        assert_eq!(scene.gains_or_default(), vec![1.0, 1.0]);
        assert_eq!(scene.sample_rate, 16_000);
    }

    #[test]
    fn bad_scene_is_rejected() {
        assert!(SceneFile::from_toml("channels = 0").is_err());
        let zero_ch = "seed = 1\nchannels = 0\nsnr_db = 5.0";
        assert!(matches!(
            SceneFile::from_toml(zero_ch),
            Err(AudioError::BadScene(_))
        ));
    }

    #[test]
    fn simulation_writes_wavs_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let scene = SceneFile::from_toml(SCENE).unwrap();
        let manifest = simulate_scene(&scene, dir.path()).unwrap();
        assert_eq!(manifest.utterances.len(), 3);
        assert_eq!(manifest.entries("train").count(), 2);
        assert_eq!(manifest.entries("test").count(), 1);
        assert_eq!(manifest.presets, SINR_SNR_PRESETS.to_vec());
        for entry in &manifest.utterances {
            let noisy = super::super::wav::read_wav(&entry.noisy).unwrap();
            assert_eq!(noisy.len(), 2);
            assert_eq!(noisy[0].len(), 4800);
        }
        let parsed =
            Manifest::from_toml(&std::fs::read_to_string(dir.path().join("manifest.toml")).unwrap())
                .unwrap();
        assert_eq!(parsed.utterances.len(), 3);
    }

    #[test]
    fn same_seed_writes_identical_bytes() {
        let scene = SceneFile::from_toml(SCENE).unwrap();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        simulate_scene(&scene, d1.path()).unwrap();
        simulate_scene(&scene, d2.path()).unwrap();
        for name in ["utt000_noisy.wav", "utt002_clean.wav"] {
            let a = std::fs::read(d1.path().join(name)).unwrap();
            let b = std::fs::read(d2.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs across runs");
        }
    }

    #[test]
    fn preset_table_matches_the_pairings() {
        assert_eq!(
            SINR_SNR_PRESETS,
            [(5.0, 10.0), (5.0, 15.0), (10.0, 15.0), (15.0, 20.0)]
        );
    }
}
