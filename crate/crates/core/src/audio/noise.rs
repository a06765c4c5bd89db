use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::AudioSignal;
use crate::error::{Error, Result};

/// Noise injection setting. `snr_db = None` or `+inf` disables noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub snr_db: Option<f64>,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn disabled() -> Self {
        Self {
            snr_db: None,
            seed: 0,
        }
    }

    pub fn at_snr(snr_db: f64, seed: u64) -> Self {
        Self {
            snr_db: Some(snr_db),
            seed,
        }
    }
}

/// Adds white Gaussian noise whose target power sits `snr_db` decibels
/// below the signal's mean power.
pub fn add_noise(signal: &AudioSignal, snr_db: f64, seed: u64) -> Result<AudioSignal> {
    if snr_db.is_nan() {
        return Err(Error::Config("SNR must not be NaN".into()));
    }
    if snr_db == f64::INFINITY {
        return Ok(signal.clone());
    }
    let power = signal.power();
    if power <= 0.0 {
        return Err(Error::SilentSignal);
    }
    let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = signal
        .samples
        .iter()
        .map(|s| {
            let z: f64 = StandardNormal.sample(&mut rng);
            s + sigma * z
        })
        .collect();
    AudioSignal::new(samples, signal.sample_rate)
}
