//! Synthetic audiovisual corpora with known phoneme categories.
//!
//! Each phoneme has an audio emission (a mixture of steady sinusoids plus
//! optional white noise, or a feature-space mean in feature mode) and a
//! visual emission (an elliptical mouth with a given aperture and width).
//! Utterances are built from word templates whose slots list alternative
//! phonemes, so the same phonemic contexts recur across the corpus.
//!
//! A spec is a TOML file:
//!
//! ```toml
//! seed = 7
//!
//! [splits]
//! pretrain = 4
//! train = 30
//! test = 20
//!
//! [grammar]
//! words_per_utterance = [2, 3]
//! duration = [0.06, 0.11]
//! templates = [["t k", "a e", "t k"]]
//!
//! [[phoneme]]
//! label = "a"
//! class = "vowel"
//! components = [[700.0, 1.0], [1200.0, 0.5]]
//! aperture = 0.8
//! width = 0.6
//! ```

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abx::{alignment_to_tsv, AlignmentRow, ClassMap, PhoneClass, EDGE_LABEL};
use crate::audio::{AudioSignal, WindowGrid, DEFAULT_HOP, DEFAULT_WINDOW_LEN};
use crate::container::{write_atomic, write_features};
use crate::corpus::{CorpusMeta, Emission, Splits, CORPUS_FILE};
use crate::error::{Error, Result};
use crate::fusion::{FeatureSequence, ModalityLayout};
use crate::visual::{GrayFrame, MouthBox, VideoClip, MOUTH_HEIGHT, MOUTH_WIDTH};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhonemeSpec {
    pub label: String,
    pub class: PhoneClass,
    /// `(frequency_hz, amplitude)` sinusoids.
    #[serde(default)]
    pub components: Vec<[f64; 2]>,
    /// Standard deviation of white noise mixed into the segment.
    #[serde(default)]
    pub noise: f64,
    /// Mouth opening in (0, 1].
    pub aperture: f64,
    /// Mouth width in (0, 1].
    pub width: f64,
    /// Feature-mode audio mean.
    #[serde(default)]
    pub audio: Vec<f64>,
    /// Feature-mode visual mean.
    #[serde(default)]
    pub visual: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grammar {
    /// Inclusive range.
    pub words_per_utterance: [usize; 2],
    /// Phone duration range in seconds.
    pub duration: [f64; 2],
    /// Each template is a list of slots; a slot lists space-separated
    /// alternative phoneme labels.
    pub templates: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSizes {
    #[serde(default)]
    pub pretrain: usize,
    pub train: usize,
    pub test: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    pub width: usize,
    pub height: usize,
    pub mouth_x: usize,
    pub mouth_y: usize,
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self {
            width: 160,
            height: 120,
            mouth_x: 5,
            mouth_y: 10,
        }
    }
}

fn default_sample_rate() -> u32 {
    16_000
}
fn default_fps() -> f64 {
    60.0
}
fn default_background() -> f64 {
    0.005
}
fn default_pixel_jitter() -> f64 {
    3.0
}
fn default_shape_jitter() -> f64 {
    0.03
}
fn default_formant_jitter() -> f64 {
    0.02
}
fn default_amplitude_jitter() -> f64 {
    0.1
}
fn default_feature_noise() -> f64 {
    1.0
}
fn default_speakers() -> Vec<String> {
    vec!["spk1".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    #[serde(default)]
    pub emission: Emission,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: u32,
    #[serde(default = "default_fps")]
    pub fps: f64,
    /// Standard deviation of white noise over the whole waveform.
    #[serde(default = "default_background")]
    pub background_noise: f64,
    /// Standard deviation of per-pixel noise in gray levels.
    #[serde(default = "default_pixel_jitter")]
    pub pixel_jitter: f64,
    /// Relative per-segment jitter of mouth aperture and width.
    #[serde(default = "default_shape_jitter")]
    pub shape_jitter: f64,
    /// Relative per-segment jitter of sinusoid frequencies.
    #[serde(default = "default_formant_jitter")]
    pub formant_jitter: f64,
    /// Relative per-segment jitter of sinusoid amplitudes.
    #[serde(default = "default_amplitude_jitter")]
    pub amplitude_jitter: f64,
    /// Per-window standard deviation in feature mode.
    #[serde(default = "default_feature_noise")]
    pub feature_noise: f64,
    #[serde(default)]
    pub frame: FrameSpec,
    #[serde(default = "default_speakers")]
    pub speakers: Vec<String>,
    pub splits: SplitSizes,
    pub grammar: Grammar,
    #[serde(rename = "phoneme")]
    pub phonemes: Vec<PhonemeSpec>,
}

impl SynthSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(format!("synth spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("synth spec serializes")
    }

    pub fn phoneme(&self, label: &str) -> Option<&PhonemeSpec> {
        self.phonemes.iter().find(|p| p.label == label)
    }

    pub fn class_map(&self) -> ClassMap {
        let mut m = ClassMap::default();
        for p in &self.phonemes {
            m.insert(p.label.clone(), p.class);
        }
        m
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.phonemes.len() < 2 {
            return bad("inventory needs at least 2 phonemes".into());
        }
        for (i, p) in self.phonemes.iter().enumerate() {
            if p.label.is_empty() || p.label == EDGE_LABEL || p.label.contains(char::is_whitespace) {
                return bad(format!("invalid phoneme label {:?}", p.label));
            }
            if self.phonemes[..i].iter().any(|q| q.label == p.label) {
                return bad(format!("phoneme {:?} defined twice", p.label));
            }
            if !(p.aperture > 0.0 && p.aperture <= 1.0 && p.width > 0.0 && p.width <= 1.0) {
                return bad(format!("{}: aperture and width must lie in (0, 1]", p.label));
            }
            match self.emission {
                Emission::Waveform => {
                    let nyquist = self.sample_rate as f64 / 2.0;
                    if p.components.is_empty() && p.noise <= 0.0 {
                        return bad(format!("{}: needs sinusoid components or noise", p.label));
                    }
                    if p.components.iter().any(|[f, a]| !(*f > 0.0 && *f < nyquist && *a >= 0.0)) {
                        return bad(format!("{}: component frequencies must lie below Nyquist", p.label));
                    }
                }
                Emission::Features => {
                    let first = &self.phonemes[0];
                    if p.audio.is_empty() || p.visual.is_empty() {
                        return bad(format!("{}: feature mode needs audio and visual means", p.label));
                    }
                    if p.audio.len() != first.audio.len() || p.visual.len() != first.visual.len() {
                        return bad(format!("{}: feature means differ in length", p.label));
                    }
                }
            }
        }
        let [lo, hi] = self.grammar.duration;
        if !(lo >= DEFAULT_WINDOW_LEN && lo <= hi) {
            return bad(format!(
                "phone durations [{lo}, {hi}] must be ordered and at least one window ({DEFAULT_WINDOW_LEN} s)"
            ));
        }
        let [wlo, whi] = self.grammar.words_per_utterance;
        if wlo == 0 || wlo > whi {
            return bad("words_per_utterance must be a non-empty range starting at 1 or more".into());
        }
        if self.grammar.templates.is_empty() {
            return bad("grammar needs at least one template".into());
        }
        for t in &self.grammar.templates {
            if t.is_empty() {
                return bad("templates must have at least one slot".into());
            }
            for slot in t {
                let alts: Vec<&str> = slot.split_whitespace().collect();
                if alts.is_empty() {
                    return bad("empty template slot".into());
                }
                if let Some(a) = alts.iter().find(|a| self.phoneme(a).is_none()) {
                    return bad(format!("template uses unknown phoneme {a:?}"));
                }
            }
        }
        if self.splits.train == 0 || self.splits.test == 0 {
            return bad("train and test splits must be non-empty".into());
        }
        if self.speakers.is_empty() {
            return bad("at least one speaker is required".into());
        }
        if !(self.fps > 0.0) || self.sample_rate == 0 {
            return bad("sample rate and frame rate must be positive".into());
        }
        let f = &self.frame;
        if f.mouth_x + MOUTH_WIDTH > f.width || f.mouth_y + MOUTH_HEIGHT > f.height {
            return bad(format!(
                "frame {}x{} cannot hold a {MOUTH_WIDTH}x{MOUTH_HEIGHT} mouth box at ({}, {})",
                f.width, f.height, f.mouth_x, f.mouth_y
            ));
        }
        for (name, v) in [
            ("background_noise", self.background_noise),
            ("pixel_jitter", self.pixel_jitter),
            ("shape_jitter", self.shape_jitter),
            ("formant_jitter", self.formant_jitter),
            ("amplitude_jitter", self.amplitude_jitter),
            ("feature_noise", self.feature_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a finite non-negative number"));
            }
        }
        Ok(())
    }

    fn mouth(&self) -> MouthBox {
        MouthBox::at(self.frame.mouth_x, self.frame.mouth_y)
    }
}

/// One generated utterance held in memory.
#[derive(Debug, Clone)]
pub struct SynthUtterance {
    pub id: String,
    pub alignment: Vec<AlignmentRow>,
    pub n_samples: usize,
}

/// Summary of a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSummary {
    pub root: PathBuf,
    pub utterances: Vec<(String, usize)>,
    pub seconds: f64,
}

struct Segment<'a> {
    phone: &'a PhonemeSpec,
    start: usize,
    end: usize,
}

fn plan_utterance<'a>(spec: &'a SynthSpec, rng: &mut ChaCha8Rng) -> (Vec<Segment<'a>>, Vec<String>) {
    let g = &spec.grammar;
    let n_words = rng.random_range(g.words_per_utterance[0]..=g.words_per_utterance[1]);
    let sr = spec.sample_rate as f64;
    let min_samples = (DEFAULT_WINDOW_LEN * sr).ceil() as usize;
    let mut segments = Vec::new();
    let mut words = Vec::new();
    let mut t = 0;
    for _ in 0..n_words {
        let template = &g.templates[rng.random_range(0..g.templates.len())];
        let phones: Vec<&PhonemeSpec> = template
            .iter()
            .map(|slot| {
                let alts: Vec<&str> = slot.split_whitespace().collect();
                spec.phoneme(alts[rng.random_range(0..alts.len())])
                    .expect("validated")
            })
            .collect();
        let word: String = phones.iter().map(|p| p.label.as_str()).collect();
        for p in phones {
            let dur = rng.random_range(g.duration[0]..=g.duration[1]);
            let n = ((dur * sr).round() as usize).max(min_samples);
            segments.push(Segment {
                phone: p,
                start: t,
                end: t + n,
            });
            words.push(word.clone());
            t += n;
        }
    }
    (segments, words)
}

fn render_waveform(spec: &SynthSpec, segments: &[Segment], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let sr = spec.sample_rate as f64;
    let total = segments.last().map_or(0, |s| s.end);
    let mut out = vec![0.0; total];
    let ramp = (0.005 * sr) as usize;
    for s in segments {
        let n = s.end - s.start;
        let comps: Vec<(f64, f64, f64)> = s
            .phone
            .components
            .iter()
            .map(|&[f, a]| {
                let jf: f64 = StandardNormal.sample(rng);
                let ja: f64 = StandardNormal.sample(rng);
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                (
                    f * (1.0 + spec.formant_jitter * jf),
                    (a * (1.0 + spec.amplitude_jitter * ja)).max(0.0),
                    phase,
                )
            })
            .collect();
        for i in 0..n {
            let t = i as f64 / sr;
            let mut v: f64 = comps
                .iter()
                .map(|(f, a, ph)| a * (std::f64::consts::TAU * f * t + ph).sin())
                .sum();
            if s.phone.noise > 0.0 {
                let z: f64 = StandardNormal.sample(rng);
                v += s.phone.noise * z;
            }
            // short raised-cosine ramps avoid clicks at boundaries
            let edge = i.min(n - 1 - i);
            if edge < ramp {
                v *= 0.5 - 0.5 * (std::f64::consts::PI * edge as f64 / ramp as f64).cos();
            }
            out[s.start + i] = v;
        }
    }
    if spec.background_noise > 0.0 {
        for v in &mut out {
            let z: f64 = StandardNormal.sample(rng);
            *v += spec.background_noise * z;
        }
    }
    out
}

fn render_mouth(spec: &SynthSpec, aperture: f64, width: f64, rng: &mut ChaCha8Rng) -> GrayFrame {
    let f = &spec.frame;
    let cx = f.mouth_x as f64 + MOUTH_WIDTH as f64 / 2.0;
    let cy = f.mouth_y as f64 + MOUTH_HEIGHT as f64 / 2.0;
    let (outer_a, outer_b) = (20.0 + 50.0 * width, 8.0 + 38.0 * aperture);
    let (inner_a, inner_b) = (outer_a - 8.0, 36.0 * aperture);
    let jitter = Normal::new(0.0, spec.pixel_jitter.max(1e-300)).expect("valid sigma");
    let mut pixels = Vec::with_capacity(f.width * f.height);
    for y in 0..f.height {
        for x in 0..f.width {
            let dx = x as f64 + 0.5 - cx;
            let dy = y as f64 + 0.5 - cy;
            let inside = |a: f64, b: f64| b > 0.0 && (dx / a).powi(2) + (dy / b).powi(2) <= 1.0;
            let base = if inside(inner_a, inner_b) {
                35.0
            } else if inside(outer_a, outer_b) {
                110.0
            } else {
                170.0
            };
            let noise = if spec.pixel_jitter > 0.0 { jitter.sample(rng) } else { 0.0 };
            pixels.push((base + noise).round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayFrame::new(f.width, f.height, pixels).expect("frame size matches")
}

fn render_video(spec: &SynthSpec, segments: &[Segment], rng: &mut ChaCha8Rng) -> VideoClip {
    let sr = spec.sample_rate as f64;
    let duration = segments.last().map_or(0, |s| s.end) as f64 / sr;
    let shapes: Vec<(f64, f64)> = segments
        .iter()
        .map(|s| {
            let ja: f64 = StandardNormal.sample(rng);
            let jw: f64 = StandardNormal.sample(rng);
            (
                (s.phone.aperture * (1.0 + spec.shape_jitter * ja)).clamp(0.0, 1.0),
                (s.phone.width * (1.0 + spec.shape_jitter * jw)).clamp(0.05, 1.0),
            )
        })
        .collect();
    let mut frames = Vec::new();
    let mut timestamps = Vec::new();
    let mut i = 0usize;
    loop {
        let t = i as f64 / spec.fps;
        if t >= duration {
            break;
        }
        let sample = (t * sr).floor() as usize;
        let seg = segments.partition_point(|s| s.end <= sample).min(segments.len() - 1);
        let (a, w) = shapes[seg];
        frames.push(render_mouth(spec, a, w, rng));
        timestamps.push(t);
        i += 1;
    }
    VideoClip { frames, timestamps }
}

fn emit_features(
    spec: &SynthSpec,
    id: &str,
    segments: &[Segment],
    rng: &mut ChaCha8Rng,
) -> Result<(FeatureSequence, FeatureSequence)> {
    let total = segments.last().map_or(0, |s| s.end);
    let (grid, _, _) = WindowGrid::for_samples(total, spec.sample_rate, DEFAULT_WINDOW_LEN, DEFAULT_HOP)?;
    let sr = spec.sample_rate as f64;
    let mut audio = Vec::with_capacity(grid.len());
    let mut visual = Vec::with_capacity(grid.len());
    for &c in &grid.centers {
        let sample = (c * sr).floor() as usize;
        let seg = segments.partition_point(|s| s.end <= sample).min(segments.len() - 1);
        let p = segments[seg].phone;
        let mut draw = |m: &[f64]| -> Vec<f64> {
            m.iter()
                .map(|v| {
                    let z: f64 = StandardNormal.sample(rng);
                    v + spec.feature_noise * z
                })
                .collect()
        };
        audio.push(draw(&p.audio));
        visual.push(draw(&p.visual));
    }
    let (da, dv) = (audio[0].len(), visual[0].len());
    Ok((
        FeatureSequence::new(audio, ModalityLayout::audio_only(da), grid.clone(), id)?,
        FeatureSequence::new(visual, ModalityLayout::visual_only(dv), grid, id)?,
    ))
}

fn write_utterance(spec: &SynthSpec, dir: &Path, id: &str, seed: u64, speaker: &str) -> Result<SynthUtterance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (segments, words) = plan_utterance(spec, &mut rng);
    let sr = spec.sample_rate as f64;
    let alignment: Vec<AlignmentRow> = segments
        .iter()
        .zip(&words)
        .map(|(s, w)| AlignmentRow {
            start_s: s.start as f64 / sr,
            end_s: s.end as f64 / sr,
            phoneme_label: s.phone.label.clone(),
            word: w.clone(),
            speaker: speaker.to_string(),
        })
        .collect();
    let n_samples = segments.last().map_or(0, |s| s.end);
    match spec.emission {
        Emission::Waveform => {
            let wave = render_waveform(spec, &segments, &mut rng);
            AudioSignal::new(wave, spec.sample_rate)?.write_wav(&dir.join(format!("{id}.wav")))?;
            render_video(spec, &segments, &mut rng).save(&dir.join(format!("{id}_frames")))?;
        }
        Emission::Features => {
            let (a, v) = emit_features(spec, id, &segments, &mut rng)?;
            write_features(&dir.join(format!("{id}.audio.avfs")), &a)?;
            write_features(&dir.join(format!("{id}.visual.avfs")), &v)?;
        }
    }
    write_atomic(&dir.join(format!("{id}.tsv")), alignment_to_tsv(&alignment).as_bytes())?;
    Ok(SynthUtterance {
        id: id.to_string(),
        alignment,
        n_samples,
    })
}

/// Writes a corpus for `spec` under `root` (created if missing).
pub fn generate(spec: &SynthSpec, root: &Path) -> Result<SynthSummary> {
    spec.validate()?;
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut master = ChaCha8Rng::seed_from_u64(spec.seed);
    let plan = [
        ("pretrain", spec.splits.pretrain),
        ("train", spec.splits.train),
        ("test", spec.splits.test),
    ];
    let mut jobs = Vec::new();
    for (split, n) in plan {
        if n == 0 {
            continue;
        }
        let dir = root.join(split);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for i in 0..n {
            let speaker = spec.speakers[i % spec.speakers.len()].clone();
            jobs.push((dir.clone(), format!("{split}_{i:04}"), master.random::<u64>(), speaker));
        }
    }
    let done = jobs
        .par_iter()
        .map(|(dir, id, seed, speaker)| write_utterance(spec, dir, id, *seed, speaker))
        .collect::<Result<Vec<_>>>()?;

    let meta = CorpusMeta {
        sample_rate: spec.sample_rate,
        fps: spec.fps,
        emission: spec.emission,
        mouth: spec.mouth(),
        splits: Splits {
            pretrain: (spec.splits.pretrain > 0).then(|| "pretrain".to_string()),
            train: "train".into(),
            test: "test".into(),
        },
        class_map: "class_map.tsv".into(),
    };
    write_atomic(&root.join(CORPUS_FILE), meta.to_toml().as_bytes())?;
    write_atomic(&root.join("class_map.tsv"), spec.class_map().to_tsv().as_bytes())?;
    write_atomic(&root.join("synth_spec.toml"), spec.to_toml().as_bytes())?;
    let sr = spec.sample_rate as f64;
    Ok(SynthSummary {
        root: root.to_path_buf(),
        seconds: done.iter().map(|u| u.n_samples as f64 / sr).sum(),
        utterances: done.into_iter().map(|u| (u.id, u.n_samples)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abx::read_alignment;
    use crate::corpus::Corpus;

    pub(crate) const TWO_PHONES: &str = r#"
seed = 3
[splits]
train = 10
test = 2
[grammar]
words_per_utterance = [1, 2]
duration = [0.04, 0.08]
templates = [["a b", "b a"]]
[[phoneme]]
label = "a"
class = "vowel"
components = [[700.0, 1.0], [1100.0, 0.4]]
aperture = 0.8
width = 0.5
[[phoneme]]
label = "b"
class = "vowel"
components = [[300.0, 1.0], [2300.0, 0.3]]
aperture = 0.2
width = 0.9
"#;

    fn files(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
        let mut out = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in std::fs::read_dir(&d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn alignment_tiles_audio() {
        let spec = SynthSpec::from_toml(TWO_PHONES).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let summary = generate(&spec, dir.path()).unwrap();
        assert_eq!(summary.utterances.len(), 12);
        let corpus = Corpus::open(dir.path()).unwrap();
        for u in corpus.utterances("train").unwrap() {
            let rows = read_alignment(&u.alignment()).unwrap();
            let wav = AudioSignal::read_wav(&u.wav()).unwrap();
            assert_eq!(rows[0].start_s, 0.0);
            for w in rows.windows(2) {
                assert_eq!(w[0].end_s, w[1].start_s);
            }
            assert!((rows.last().unwrap().end_s - wav.duration()).abs() < 1e-12);
            let clip = VideoClip::load(&u.frames_dir(), corpus.meta.fps, &corpus.meta.mouth).unwrap();
            assert!(clip.frames.iter().all(|f| f.is_mouth_sized()));
            assert!(*clip.timestamps.last().unwrap() < wav.duration());
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let spec = SynthSpec::from_toml(TWO_PHONES).unwrap();
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        generate(&spec, d1.path()).unwrap();
        generate(&spec, d2.path()).unwrap();
        assert_eq!(files(d1.path()), files(d2.path()));
    }

    #[test]
    fn feature_mode_writes_containers() {
        let text = TWO_PHONES
            .replace("seed = 3", "seed = 3\nemission = \"features\"")
            .replace("width = 0.5", "width = 0.5\naudio = [0.0, 0.0]\nvisual = [1.0]")
            .replace("width = 0.9", "width = 0.9\naudio = [0.0, 0.0]\nvisual = [-1.0]");
        let spec = SynthSpec::from_toml(&text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        generate(&spec, dir.path()).unwrap();
        let corpus = Corpus::open(dir.path()).unwrap();
        assert_eq!(corpus.meta.emission, Emission::Features);
        let u = &corpus.utterances("test").unwrap()[0];
        let a = crate::container::read_features(&u.audio_features()).unwrap();
        let v = crate::container::read_features(&u.visual_features()).unwrap();
        assert_eq!((a.dims(), v.dims()), (2, 1));
        assert_eq!(a.grid, v.grid);
    }

    #[test]
    fn rejects_invalid_specs() {
        for (from, to) in [
            ("duration = [0.04, 0.08]", "duration = [0.01, 0.08]"),
            ("templates = [[\"a b\", \"b a\"]]", "templates = [[\"a z\"]]"),
            ("train = 10", "train = 0"),
            ("aperture = 0.8", "aperture = 1.8"),
        ] {
            assert!(SynthSpec::from_toml(&TWO_PHONES.replace(from, to)).is_err(), "{to}");
        }
        let one = TWO_PHONES.split("[[phoneme]]").take(2).collect::<Vec<_>>().join("[[phoneme]]");
        assert!(SynthSpec::from_toml(&one).is_err());
    }
}
