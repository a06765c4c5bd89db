//! Multimodal feature sequences: per-window concatenation of audio and
//! visual vectors with an explicit record of which dimensions belong to
//! which modality.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::audio::WindowGrid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modality {
    Audio,
    Visual,
}

/// Which feature dimensions are audio and which are visual. Audio always
/// comes first; the two ranges partition `0..total_dims`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModalityLayout {
    pub audio_dims: Range<usize>,
    pub visual_dims: Range<usize>,
}

impl ModalityLayout {
    pub fn new(audio: usize, visual: usize) -> Self {
        Self {
            audio_dims: 0..audio,
            visual_dims: audio..audio + visual,
        }
    }

    pub fn audio_only(dims: usize) -> Self {
        Self::new(dims, 0)
    }

    pub fn visual_only(dims: usize) -> Self {
        Self::new(0, dims)
    }

    pub fn total_dims(&self) -> usize {
        self.audio_dims.len() + self.visual_dims.len()
    }

    pub fn range(&self, modality: Modality) -> Range<usize> {
        match modality {
            Modality::Audio => self.audio_dims.clone(),
            Modality::Visual => self.visual_dims.clone(),
        }
    }

    pub fn has(&self, modality: Modality) -> bool {
        !self.range(modality).is_empty()
    }

    /// Layout that results from keeping only `modality`.
    pub fn restricted(&self, modality: Modality) -> Self {
        match modality {
            Modality::Audio => Self::audio_only(self.audio_dims.len()),
            Modality::Visual => Self::visual_only(self.visual_dims.len()),
        }
    }

    fn is_partition(&self) -> bool {
        self.audio_dims.start == 0 && self.audio_dims.end == self.visual_dims.start
    }
}

/// Time-ordered per-window feature vectors for one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSequence {
    pub vectors: Vec<Vec<f64>>,
    pub layout: ModalityLayout,
    pub grid: WindowGrid,
    pub utterance: String,
}

impl FeatureSequence {
    pub fn new(
        vectors: Vec<Vec<f64>>,
        layout: ModalityLayout,
        grid: WindowGrid,
        utterance: impl Into<String>,
    ) -> Result<Self> {
        let utterance = utterance.into();
        if !layout.is_partition() {
            return Err(Error::Data(format!("{utterance}: layout ranges do not partition")));
        }
        if vectors.len() != grid.len() {
            return Err(Error::GridMismatch {
                utterance,
                detail: format!("{} vectors for {} windows", vectors.len(), grid.len()),
            });
        }
        let dims = layout.total_dims();
        for v in &vectors {
            if v.len() != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("feature vector"));
            }
        }
        Ok(Self {
            vectors,
            layout,
            grid,
            utterance,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.layout.total_dims()
    }
}

/// Per-window concatenation, audio dimensions first.
pub fn concat_modalities(audio: &FeatureSequence, visual: &FeatureSequence) -> Result<FeatureSequence> {
    if audio.layout.has(Modality::Visual) || visual.layout.has(Modality::Audio) {
        return Err(Error::Data(format!(
            "{}: concatenation expects an audio-only and a visual-only sequence",
            audio.utterance
        )));
    }
    if audio.grid != visual.grid {
        return Err(Error::GridMismatch {
            utterance: audio.utterance.clone(),
            detail: format!(
                "audio has {} windows, visual ({}) has {}",
                audio.len(),
                visual.utterance,
                visual.len()
            ),
        });
    }
    let vectors = audio
        .vectors
        .iter()
        .zip(&visual.vectors)
        .map(|(a, v)| a.iter().chain(v).copied().collect())
        .collect();
    Ok(FeatureSequence {
        vectors,
        layout: ModalityLayout::new(audio.dims(), visual.dims()),
        grid: audio.grid.clone(),
        utterance: audio.utterance.clone(),
    })
}

/// Restricts a sequence to one modality's dimensions.
pub fn drop_modality(seq: &FeatureSequence, keep: Modality) -> Result<FeatureSequence> {
    let range = seq.layout.range(keep);
    if range.is_empty() {
        return Err(Error::Data(format!(
            "{}: no {keep:?} dimensions to keep",
            seq.utterance
        )));
    }
    Ok(FeatureSequence {
        vectors: seq.vectors.iter().map(|v| v[range.clone()].to_vec()).collect(),
        layout: seq.layout.restricted(keep),
        grid: seq.grid.clone(),
        utterance: seq.utterance.clone(),
    })
}

/// Per-dimension z-scoring fitted on training sequences. Off by default in
/// the experiment pipeline; available for ablations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(seqs: &[FeatureSequence]) -> Result<Self> {
        let dims = seqs.first().ok_or(Error::Empty("training sequences"))?.dims();
        let mut n = 0usize;
        let mut mean = vec![0.0; dims];
        let mut m2 = vec![0.0; dims];
        for v in seqs.iter().flat_map(|s| &s.vectors) {
            if v.len() != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    found: v.len(),
                });
            }
            n += 1;
            for j in 0..dims {
                let delta = v[j] - mean[j];
                mean[j] += delta / n as f64;
                m2[j] += delta * (v[j] - mean[j]);
            }
        }
        if n < 2 {
            return Err(Error::Empty("need at least two windows to standardize"));
        }
        let scale = m2
            .iter()
            .map(|s| {
                let sd = (s / (n - 1) as f64).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    /// Applies the transform to the dimensions `dims` of the fitted space.
    pub fn apply(&self, seq: &FeatureSequence, dims: &[usize]) -> Result<FeatureSequence> {
        if seq.dims() != dims.len() {
            return Err(Error::DimensionMismatch {
                expected: dims.len(),
                found: seq.dims(),
            });
        }
        let mut out = seq.clone();
        for v in &mut out.vectors {
            for (x, &j) in v.iter_mut().zip(dims) {
                *x = (*x - self.mean[j]) / self.scale[j];
            }
        }
        Ok(out)
    }
}
