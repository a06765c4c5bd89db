use std::sync::Arc;

use rustfft::{num_complex::Complex, Fft, FftPlanner};

use crate::error::{Error, Result};

pub const N_MFCC: usize = 13;

/// Conventional ASR front-end settings. Pre-emphasis is applied inside each
/// window (the first sample is kept as is); filters are triangular on the
/// HTK mel scale between 0 Hz and Nyquist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfccConfig {
    pub preemphasis: f64,
    pub n_filters: usize,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            preemphasis: 0.97,
            n_filters: 26,
            log_floor: 1e-10,
        }
    }
}

pub(crate) fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub(crate) fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Precomputed window, filterbank, DCT basis and FFT plan for one window
/// length and sample rate.
pub struct MfccExtractor {
    config: MfccConfig,
    window_len: usize,
    nfft: usize,
    hamming: Vec<f64>,
    /// `n_filters` rows over `nfft / 2 + 1` bins, stored sparsely as
    /// (first bin, weights).
    filters: Vec<(usize, Vec<f64>)>,
    dct: Vec<[f64; N_MFCC]>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for MfccExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MfccExtractor")
            .field("window_len", &self.window_len)
            .field("nfft", &self.nfft)
            .finish()
    }
}

impl MfccExtractor {
    pub fn new(window_len: usize, sample_rate: u32, config: MfccConfig) -> Result<Self> {
        if window_len < 2 {
            return Err(Error::Data(format!(
                "MFCC window needs at least 2 samples, got {window_len}"
            )));
        }
        if config.n_filters < N_MFCC {
            return Err(Error::Config(format!(
                "need at least {N_MFCC} mel filters, got {}",
                config.n_filters
            )));
        }
        let nfft = window_len.next_power_of_two();
        let n = window_len as f64;
        let hamming = (0..window_len)
            .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1.0)).cos())
            .collect();

        let sr = sample_rate as f64;
        let high = hz_to_mel(sr / 2.0);
        let bins: Vec<usize> = (0..config.n_filters + 2)
            .map(|i| {
                let mel = high * i as f64 / (config.n_filters + 1) as f64;
                (((nfft + 1) as f64) * mel_to_hz(mel) / sr).floor() as usize
            })
            .collect();
        let filters = (0..config.n_filters)
            .map(|j| {
                let (lo, mid, hi) = (bins[j], bins[j + 1], bins[j + 2]);
                let weights = (lo..hi.min(nfft / 2 + 1))
                    .map(|k| {
                        if k < mid {
                            (k - lo) as f64 / (mid - lo) as f64
                        } else {
                            (hi - k) as f64 / (hi - mid) as f64
                        }
                    })
                    .collect();
                (lo, weights)
            })
            .collect();

        let m = config.n_filters as f64;
        let dct = (0..config.n_filters)
            .map(|i| {
                let mut row = [0.0; N_MFCC];
                for (k, r) in row.iter_mut().enumerate() {
                    let scale = if k == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
                    *r = scale
                        * (std::f64::consts::PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * m))
                            .cos();
                }
                row
            })
            .collect();

        let fft = FftPlanner::new().plan_fft_forward(nfft);
        Ok(Self {
            config,
            window_len,
            nfft,
            hamming,
            filters,
            dct,
            fft,
        })
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    /// Coefficients c0..c12 for one window. Panics if the window length
    /// differs from the one the extractor was built for.
    pub fn compute(&self, window: &[f64]) -> [f64; N_MFCC] {
        assert_eq!(window.len(), self.window_len, "window length mismatch");
        let mut buf = vec![Complex::new(0.0, 0.0); self.nfft];
        let alpha = self.config.preemphasis;
        for i in 0..self.window_len {
            let emph = if i == 0 {
                window[0]
            } else {
                window[i] - alpha * window[i - 1]
            };
            buf[i].re = emph * self.hamming[i];
        }
        self.fft.process(&mut buf);
        let power: Vec<f64> = buf[..self.nfft / 2 + 1]
            .iter()
            .map(|c| c.norm_sqr() / self.nfft as f64)
            .collect();

        let mut out = [0.0; N_MFCC];
        for ((lo, weights), basis) in self.filters.iter().zip(&self.dct) {
            let energy: f64 = weights.iter().zip(&power[*lo..]).map(|(w, p)| w * p).sum();
            let log_e = energy.max(self.config.log_floor).ln();
            for (o, b) in out.iter_mut().zip(basis) {
                *o += log_e * b;
            }
        }
        out
    }
}

/// One-shot MFCC of a single window with the default configuration.
pub fn compute_mfcc(window: &[f64], sample_rate: u32) -> Result<[f64; N_MFCC]> {
    if window.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("MFCC window"));
    }
    let ex = MfccExtractor::new(window.len(), sample_rate, MfccConfig::default())?;
    Ok(ex.compute(window))
}
