use rayon::prelude::*;

use super::config::{FeatureParams, TestCondition, TrainModality};
use crate::abx::{tokens_from_alignment, PhoneToken};
use crate::audio::{extract_audio_features, AudioSignal, NoiseConfig, WindowGrid};
use crate::container::read_features;
use crate::corpus::{Corpus, Emission, Utterance};
use crate::error::{Error, Result};
use crate::fusion::{concat_modalities, FeatureSequence};
use crate::visual::{extract_visual_features, EigenBasis, GrayFrame, VideoClip, MOUTH_HEIGHT, MOUTH_WIDTH};

/// Everything the experiment needs from one utterance.
#[derive(Debug, Clone)]
pub struct UtteranceData {
    pub id: String,
    pub tokens: Vec<PhoneToken>,
    pub audio: FeatureSequence,
    pub noisy: Option<FeatureSequence>,
    pub visual: Option<FeatureSequence>,
}

impl UtteranceData {
    fn visual(&self) -> Result<&FeatureSequence> {
        self.visual
            .as_ref()
            .ok_or_else(|| Error::Config(format!("{}: visual features were not extracted", self.id)))
    }

    fn noisy(&self) -> Result<&FeatureSequence> {
        self.noisy
            .as_ref()
            .ok_or_else(|| Error::Config(format!("{}: noisy audio was not extracted", self.id)))
    }

    pub fn train_input(&self, m: TrainModality) -> Result<FeatureSequence> {
        match m {
            TrainModality::A => Ok(self.audio.clone()),
            TrainModality::V => Ok(self.visual()?.clone()),
            TrainModality::AV => concat_modalities(&self.audio, self.visual()?),
        }
    }

    /// Test input in the layout of the condition (audio first when present).
    pub fn test_input(&self, c: TestCondition) -> Result<FeatureSequence> {
        match c {
            TestCondition::A => Ok(self.audio.clone()),
            TestCondition::N => Ok(self.noisy()?.clone()),
            TestCondition::V => Ok(self.visual()?.clone()),
            TestCondition::AV => concat_modalities(&self.audio, self.visual()?),
            TestCondition::NV => concat_modalities(self.noisy()?, self.visual()?),
        }
    }
}

/// Fits the eigenmouth basis on the pretraining split, using at most
/// `pca_max_frames` frames taken at an even stride over all clips in
/// utterance order.
pub fn pretrain_basis(corpus: &Corpus, params: &FeatureParams) -> Result<EigenBasis> {
    let split = corpus
        .meta
        .splits
        .pretrain
        .as_ref()
        .ok_or_else(|| Error::Config("visual features need a pretraining split".into()))?;
    if corpus.meta.emission != Emission::Waveform {
        return Err(Error::Config("eigenmouth pretraining needs image frames".into()));
    }
    let clips = corpus
        .utterances(split)?
        .par_iter()
        .map(|u| {
            VideoClip::load(&u.frames_dir(), corpus.meta.fps, &corpus.meta.mouth)
                .map_err(|e| Error::stage("pretrain", &u.id, e))
        })
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<&GrayFrame> = clips.iter().flat_map(|c| &c.frames).collect();
    let stride = all.len().div_ceil(params.pca_max_frames).max(1);
    let samples: Vec<Vec<f64>> = all.iter().step_by(stride).map(|f| f.to_vector()).collect();
    log::info!(
        "pretraining eigenmouths on {} of {} frames (k = {})",
        samples.len(),
        all.len(),
        params.pca_components
    );
    EigenBasis::fit(&samples, params.pca_components, MOUTH_HEIGHT, MOUTH_WIDTH)
}

fn load_utterance(
    corpus: &Corpus,
    u: &Utterance,
    params: &FeatureParams,
    basis: Option<&EigenBasis>,
    noise: Option<NoiseConfig>,
) -> Result<UtteranceData> {
    let rows = u.read_alignment()?;
    let tokens = tokens_from_alignment(&u.id, &rows);
    let (audio, noisy, visual) = match corpus.meta.emission {
        Emission::Waveform => {
            let signal = AudioSignal::read_wav(&u.wav())?;
            if signal.sample_rate != corpus.meta.sample_rate {
                return Err(Error::Data(format!(
                    "sample rate {} differs from the corpus rate {}",
                    signal.sample_rate, corpus.meta.sample_rate
                )));
            }
            let audio = extract_audio_features(&signal, params.window_len, params.hop, &NoiseConfig::disabled(), &u.id)?;
            let noisy = noise
                .map(|n| extract_audio_features(&signal, params.window_len, params.hop, &n, &u.id))
                .transpose()?;
            let visual = match basis {
                Some(b) => {
                    let clip = VideoClip::load(&u.frames_dir(), corpus.meta.fps, &corpus.meta.mouth)?;
                    Some(extract_visual_features(&clip, &audio.grid, b, &u.id)?)
                }
                None => None,
            };
            if let Some(last) = rows.last() {
                if last.end_s > signal.duration() + 1e-6 {
                    return Err(Error::Data(format!(
                        "alignment ends at {} s, after the {} s of audio",
                        last.end_s,
                        signal.duration()
                    )));
                }
            }
            (audio, noisy, visual)
        }
        Emission::Features => {
            if noise.is_some() {
                return Err(Error::Config("noisy test conditions need waveform audio".into()));
            }
            let audio = read_features(&u.audio_features())?;
            let visual = read_features(&u.visual_features())?;
            check_grid(&u.id, &audio.grid, params)?;
            (audio, None, Some(visual))
        }
    };
    Ok(UtteranceData {
        id: u.id.clone(),
        tokens,
        audio,
        noisy,
        visual,
    })
}

fn check_grid(id: &str, grid: &WindowGrid, params: &FeatureParams) -> Result<()> {
    if (grid.window_len - params.window_len).abs() > 1e-9 || (grid.hop - params.hop).abs() > 1e-9 {
        return Err(Error::GridMismatch {
            utterance: id.to_string(),
            detail: format!(
                "stored features use {} s / {} s windows, configuration asks for {} s / {} s",
                grid.window_len, grid.hop, params.window_len, params.hop
            ),
        });
    }
    Ok(())
}

/// Loads and featurizes every utterance of a split. Noisy audio for the
/// utterance at sorted position `i` uses seed `noise_seed + i`.
pub fn load_split(
    corpus: &Corpus,
    split: &str,
    params: &FeatureParams,
    basis: Option<&EigenBasis>,
    with_noise: bool,
) -> Result<Vec<UtteranceData>> {
    let utts = corpus.utterances(split)?;
    utts.par_iter()
        .enumerate()
        .map(|(i, u)| {
            let noise = with_noise.then(|| NoiseConfig::at_snr(params.snr_db, params.noise_seed + i as u64));
            load_utterance(corpus, u, params, basis, noise).map_err(|e| Error::stage("extract", &u.id, e))
        })
        .collect()
}
