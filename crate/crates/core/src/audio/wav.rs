//! RIFF/PCM 16-bit little-endian WAV reading and writing, mono or
//! N-channel (one [`Waveform`] per channel, samples interleaved on disk).

use super::{AudioError, Waveform};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

fn io_err(path: &Path, source: std::io::Error) -> AudioError {
    AudioError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Read all channels of a 16-bit PCM WAV file.
pub fn read_wav(path: &Path) -> Result<Vec<Waveform>, AudioError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = BufReader::new(file);
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| io_err(path, e))?;
    let bad = || AudioError::MalformedWav(path.display().to_string());

    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad());
    }
    let mut pos = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None; // format, channels, rate, bits
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_end = pos + 8 + size;
        if body_end > bytes.len() {
            return Err(bad());
        }
        let body = &bytes[pos + 8..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(bad());
                }
                let format = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                fmt = Some((format, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word-aligned.
        pos = body_end + (size & 1);
    }
    let (format, channels, rate, bits) = fmt.ok_or_else(bad)?;
    let data = data.ok_or_else(bad)?;
    if format != 1 || bits != 16 {
        return Err(AudioError::UnsupportedWav {
            path: path.display().to_string(),
            format,
            bits,
        });
    }
    if channels == 0 || data.len() % (2 * channels as usize) != 0 {
        return Err(bad());
    }
    let channels = channels as usize;
    let frames = data.len() / (2 * channels);
    let mut out = vec![Vec::with_capacity(frames); channels];
    for f in 0..frames {
        for (c, ch) in out.iter_mut().enumerate() {
            let o = 2 * (f * channels + c);
            let v = i16::from_le_bytes([data[o], data[o + 1]]);
            ch.push(v as f64 / 32768.0);
        }
    }
    Ok(out
        .into_iter()
        .map(|samples| Waveform::new(samples, rate))
        .collect())
}

/// Read a file expected to contain exactly one channel.
pub fn read_wav_mono(path: &Path) -> Result<Waveform, AudioError> {
    let mut channels = read_wav(path)?;
    if channels.len() != 1 {
        return Err(AudioError::SceneShape {
            what: "channels",
            want: 1,
            got: channels.len(),
        });
    }
    Ok(channels.remove(0))
}

/// Write channels (all equal length and rate) as interleaved 16-bit PCM.
/// Samples are clamped to [-1, 1) before quantization.
pub fn write_wav(path: &Path, channels: &[Waveform]) -> Result<(), AudioError> {
    assert!(!channels.is_empty(), "at least one channel");
    let len = channels[0].len();
    let rate = channels[0].sample_rate;
    for ch in channels {
        if ch.len() != len {
            return Err(AudioError::LengthMismatch(len, ch.len()));
        }
    }
    let n_channels = channels.len() as u16;
    let byte_rate = rate * n_channels as u32 * 2;
    let block_align = n_channels * 2;
    let data_len = (len * channels.len() * 2) as u32;

    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(|e| io_err(path, e));
    write(b"RIFF")?;
    write(&(36 + data_len).to_le_bytes())?;
    write(b"WAVE")?;
    write(b"fmt ")?;
    write(&16u32.to_le_bytes())?;
    write(&1u16.to_le_bytes())?;
    write(&n_channels.to_le_bytes())?;
    write(&rate.to_le_bytes())?;
    write(&byte_rate.to_le_bytes())?;
    write(&block_align.to_le_bytes())?;
    write(&16u16.to_le_bytes())?;
    write(b"data")?;
    write(&data_len.to_le_bytes())?;
    for f in 0..len {
        for ch in channels {
            let clamped = ch.samples[f].clamp(-1.0, 1.0 - f64::EPSILON);
            let q = (clamped * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            write(&q.to_le_bytes())?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(len: usize, freq: f64, rate: u32) -> Waveform {
        let samples = (0..len)
            .map(|i| 0.8 * (2.0 * PI * freq * i as f64 / rate as f64).sin())
            .collect();
        Waveform::new(samples, rate)
    }

    #[test]
    fn round_trip_within_one_lsb() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tone.wav");
        let w = sine(1600, 1000.0, 16_000);
        write_wav(&path, std::slice::from_ref(&w)).unwrap();
        let back = read_wav_mono(&path).unwrap();
        assert_eq!(back.sample_rate, 16_000);
        assert_eq!(back.len(), w.len());
        let max_err = w
            .samples
            .iter()
            .zip(&back.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_err <= 1.0 / 32768.0, "max err {max_err}");
    }

    #[test]
    fn zero_length_file_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.wav");
        std::fs::write(&path, b"").unwrap();
        assert!(matches!(
            read_wav(&path),
            Err(AudioError::MalformedWav(_))
        ));
    }

    #[test]
    fn truncated_header_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc.wav");
        std::fs::write(&path, b"RIFF\x00\x00\x00\x00WAVEfmt ").unwrap();
        assert!(matches!(
            read_wav(&path),
            Err(AudioError::MalformedWav(_))
        ));
    }

    #[test]
    fn stereo_round_trip_gives_two_equal_length_channels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stereo.wav");
        let left = sine(800, 440.0, 16_000);
        let right = sine(800, 880.0, 16_000);
        write_wav(&path, &[left.clone(), right.clone()]).unwrap();
        let channels = read_wav(&path).unwrap();
        assert_eq!(channels.len(), 2);
        assert_eq!(channels[0].len(), channels[1].len());
        assert!(
            channels[0]
                .samples
                .iter()
                .zip(&left.samples)
                .all(|(a, b)| (a - b).abs() <= 1.0 / 32768.0)
        );
    }

    #[test]
    fn clipping_input_is_clamped_not_wrapped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hot.wav");
        let w = Waveform::new(vec![1.5, -2.0, 0.0], 16_000);
        write_wav(&path, std::slice::from_ref(&w)).unwrap();
        let back = read_wav_mono(&path).unwrap();
        assert!(back.samples[0] > 0.99);
        assert!((back.samples[1] + 1.0).abs() < 1e-9);
    }
}
