//! On-disk corpus layout shared by the generator and the experiment runner.
//!
//! ```text
//! corpus.toml                 sample rate, frame rate, mouth box, splits
//! class_map.tsv               phoneme_label <TAB> vowel|consonant
//! <split>/<utt>.tsv           alignment (start_s, end_s, phoneme_label, word, speaker)
//! <split>/<utt>.wav           waveform emission
//! <split>/<utt>_frames/       frames.tsv + frame_NNNNNN.pgm
//! <split>/<utt>.audio.avfs    feature emission (instead of wav)
//! <split>/<utt>.visual.avfs   feature emission (instead of frames)
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::abx::{read_alignment, AlignmentRow, ClassMap};
use crate::error::{Error, Result};
use crate::visual::MouthBox;

pub const CORPUS_FILE: &str = "corpus.toml";

/// How a corpus stores its observations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emission {
    /// WAV audio and image frames.
    #[default]
    Waveform,
    /// Precomputed feature containers.
    Features,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub pretrain: Option<String>,
    pub train: String,
    pub test: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMeta {
    pub sample_rate: u32,
    pub fps: f64,
    #[serde(default)]
    pub emission: Emission,
    pub mouth: MouthBox,
    pub splits: Splits,
    #[serde(default = "default_class_map")]
    pub class_map: String,
}

fn default_class_map() -> String {
    "class_map.tsv".into()
}

impl CorpusMeta {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("corpus metadata serializes")
    }
}

/// The files of one utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub id: String,
    pub dir: PathBuf,
}

impl Utterance {
    pub fn alignment(&self) -> PathBuf {
        self.dir.join(format!("{}.tsv", self.id))
    }
    pub fn wav(&self) -> PathBuf {
        self.dir.join(format!("{}.wav", self.id))
    }
    pub fn frames_dir(&self) -> PathBuf {
        self.dir.join(format!("{}_frames", self.id))
    }
    pub fn audio_features(&self) -> PathBuf {
        self.dir.join(format!("{}.audio.avfs", self.id))
    }
    pub fn visual_features(&self) -> PathBuf {
        self.dir.join(format!("{}.visual.avfs", self.id))
    }
    pub fn read_alignment(&self) -> Result<Vec<AlignmentRow>> {
        read_alignment(&self.alignment())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub root: PathBuf,
    pub meta: CorpusMeta,
    pub classes: ClassMap,
}

impl Corpus {
    pub fn open(root: &Path) -> Result<Self> {
        let path = root.join(CORPUS_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta: CorpusMeta =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if meta.sample_rate == 0 || !(meta.fps > 0.0) {
            return Err(Error::Config(format!(
                "{}: sample rate and frame rate must be positive",
                path.display()
            )));
        }
        let s = &meta.splits;
        let mut names = vec![&s.train, &s.test];
        names.extend(s.pretrain.as_ref());
        for (i, a) in names.iter().enumerate() {
            if names[i + 1..].contains(a) {
                return Err(Error::Config(format!("corpus splits must be disjoint ({a} repeated)")));
            }
        }
        let classes = ClassMap::read(&root.join(&meta.class_map))?;
        Ok(Self {
            root: root.to_path_buf(),
            meta,
            classes,
        })
    }

    /// Utterances of the split stored in directory `name`, sorted by id.
    pub fn utterances(&self, name: &str) -> Result<Vec<Utterance>> {
        let dir = self.root.join(name);
        let mut ids: Vec<String> = std::fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                e.file_name()
                    .to_str()?
                    .strip_suffix(".tsv")
                    .map(str::to_string)
            })
            .collect();
        ids.sort();
        if ids.is_empty() {
            return Err(Error::Data(format!("{}: no utterances", dir.display())));
        }
        Ok(ids.into_iter().map(|id| Utterance { id, dir: dir.clone() }).collect())
    }
}
