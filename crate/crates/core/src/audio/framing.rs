use serde::{Deserialize, Serialize};

use super::AudioSignal;
use crate::error::{Error, Result};

pub const DEFAULT_WINDOW_LEN: f64 = 0.025;
pub const DEFAULT_HOP: f64 = 0.010;

/// Analysis windows over one utterance. Window `i` covers
/// `[i * hop, i * hop + window_len)`; centers are kept in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowGrid {
    pub window_len: f64,
    pub hop: f64,
    pub centers: Vec<f64>,
}

impl WindowGrid {
    /// Grid over `n_samples` at `sample_rate`. Window and hop are snapped to
    /// whole samples so that every window lies inside the signal.
    pub fn for_samples(
        n_samples: usize,
        sample_rate: u32,
        window_len: f64,
        hop: f64,
    ) -> Result<(Self, usize, usize)> {
        if !(window_len > 0.0 && hop > 0.0) {
            return Err(Error::Config(format!(
                "window length and hop must be positive (got {window_len}, {hop})"
            )));
        }
        let sr = sample_rate as f64;
        let win = (window_len * sr).round() as usize;
        let step = (hop * sr).round() as usize;
        if win < 2 || step == 0 {
            return Err(Error::Config(format!(
                "window of {win} samples / hop of {step} samples is too small at {sample_rate} Hz"
            )));
        }
        if n_samples < win {
            return Err(Error::SignalTooShort {
                samples: n_samples,
                needed: win,
            });
        }
        let count = (n_samples - win) / step + 1;
        let centers = (0..count)
            .map(|i| (i * step) as f64 / sr + win as f64 / (2.0 * sr))
            .collect();
        Ok((
            Self {
                window_len: win as f64 / sr,
                hop: step as f64 / sr,
                centers,
            },
            win,
            step,
        ))
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Indices of windows whose centers fall within `[start, end]`.
    pub fn windows_within(&self, start: f64, end: f64) -> std::ops::Range<usize> {
        let lo = self.centers.partition_point(|&c| c < start);
        let hi = self.centers.partition_point(|&c| c <= end);
        lo..hi.max(lo)
    }
}

#[derive(Debug, Clone)]
pub struct FramedSignal<'a> {
    pub grid: WindowGrid,
    pub frames: Vec<&'a [f64]>,
}

pub fn frame_signal(signal: &AudioSignal, window_len: f64, hop: f64) -> Result<FramedSignal<'_>> {
    let (grid, win, step) =
        WindowGrid::for_samples(signal.samples.len(), signal.sample_rate, window_len, hop)?;
    let frames = (0..grid.len())
        .map(|i| &signal.samples[i * step..i * step + win])
        .collect();
    Ok(FramedSignal { grid, frames })
}
