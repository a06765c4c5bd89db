//! Audio front end: 25 ms / 10 ms windowing, 13 MFCCs with first and second
//! regression deltas (39 dims per window), and Gaussian noise at a fixed SNR.

mod deltas;
mod framing;
mod mfcc;
mod noise;

use std::path::Path;

pub use deltas::{compute_deltas, DELTA_REACH};
pub use framing::{frame_signal, FramedSignal, WindowGrid, DEFAULT_HOP, DEFAULT_WINDOW_LEN};
pub use mfcc::{compute_mfcc, MfccConfig, MfccExtractor, N_MFCC};
pub use noise::{add_noise, NoiseConfig};

use crate::error::{Error, Result};
use crate::fusion::{FeatureSequence, ModalityLayout};

/// Dimensionality of one audio feature vector (MFCC + delta + delta2).
pub const AUDIO_DIMS: usize = 3 * N_MFCC;

/// Mono PCM audio as real-valued samples.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Data("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("audio samples"));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Mean squared amplitude.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }

    /// Reads a mono WAV file (16-bit integer or 32-bit float).
    pub fn read_wav(path: &Path) -> Result<Self> {
        let mut reader = hound::WavReader::open(path)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let spec = reader.spec();
        if spec.channels != 1 {
            return Err(Error::Data(format!(
                "{}: expected mono audio, found {} channels",
                path.display(),
                spec.channels
            )));
        }
        let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
            (hound::SampleFormat::Int, 16) => reader
                .samples::<i16>()
                .map(|s| s.map(|v| v as f64 / 32768.0))
                .collect::<std::result::Result<_, _>>(),
            (hound::SampleFormat::Float, 32) => reader
                .samples::<f32>()
                .map(|s| s.map(|v| v as f64))
                .collect::<std::result::Result<_, _>>(),
            (fmt, bits) => {
                return Err(Error::Data(format!(
                    "{}: unsupported sample format {fmt:?}/{bits} bits",
                    path.display()
                )))
            }
        }
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        Self::new(samples, spec.sample_rate)
    }

    /// Writes the signal as 32-bit float mono WAV.
    pub fn write_wav(&self, path: &Path) -> Result<()> {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: self.sample_rate,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let err = |e: hound::Error| Error::Data(format!("{}: {e}", path.display()));
        let mut writer = hound::WavWriter::create(path, spec).map_err(err)?;
        for &s in &self.samples {
            writer.write_sample(s as f32).map_err(err)?;
        }
        writer.finalize().map_err(err)
    }
}

/// Full audio feature extraction for one utterance: optional noise, framing,
/// MFCC per window, then deltas over the whole utterance.
pub fn extract_audio_features(
    signal: &AudioSignal,
    window_len: f64,
    hop: f64,
    noise: &NoiseConfig,
    utterance: &str,
) -> Result<FeatureSequence> {
    let noisy;
    let signal = match noise.snr_db {
        Some(snr) if snr.is_finite() => {
            noisy = add_noise(signal, snr, noise.seed)?;
            &noisy
        }
        _ => signal,
    };
    let framed = frame_signal(signal, window_len, hop)?;
    let extractor = MfccExtractor::new(
        framed.frames[0].len(),
        signal.sample_rate,
        MfccConfig::default(),
    )?;
    let coeffs: Vec<[f64; N_MFCC]> = framed
        .frames
        .iter()
        .map(|w| extractor.compute(w))
        .collect();
    let (d1, d2) = compute_deltas(&coeffs)?;
    let vectors = coeffs
        .iter()
        .zip(&d1)
        .zip(&d2)
        .map(|((c, a), b)| c.iter().chain(a).chain(b).copied().collect())
        .collect();
    FeatureSequence::new(
        vectors,
        ModalityLayout::audio_only(AUDIO_DIMS),
        framed.grid,
        utterance,
    )
}
