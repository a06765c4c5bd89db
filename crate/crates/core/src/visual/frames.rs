use std::path::Path;

use super::image::{GrayFrame, MouthBox};
use super::pca::EigenBasis;
use crate::audio::WindowGrid;
use crate::error::{Error, Result};
use crate::fusion::{FeatureSequence, ModalityLayout};

/// Frame indices feeding one window's visual features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrameTriple {
    pub prev: usize,
    pub center: usize,
    pub next: usize,
}

/// For each window, the latest frame at or before the window center and its
/// neighbours, clamped at the clip ends.
pub fn match_frames(grid: &WindowGrid, timestamps: &[f64]) -> Result<Vec<FrameTriple>> {
    if timestamps.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Data("frame timestamps must be strictly increasing".into()));
    }
    let last = timestamps.len().saturating_sub(1);
    grid.centers
        .iter()
        .map(|&c| {
            let after = timestamps.partition_point(|&t| t <= c);
            if after == 0 {
                return Err(Error::Data(format!(
                    "no video frame at or before window center {c:.4}s"
                )));
            }
            let center = after - 1;
            Ok(FrameTriple {
                prev: center.saturating_sub(1),
                center,
                next: (center + 1).min(last),
            })
        })
        .collect()
}

/// Cropped grayscale mouth frames of one clip with their timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoClip {
    pub frames: Vec<GrayFrame>,
    pub timestamps: Vec<f64>,
}

pub const FRAME_MANIFEST: &str = "frames.tsv";

impl VideoClip {
    /// Loads `dir/frame_NNNNNN.{pgm,ppm,png}` images. Timestamps come from
    /// `dir/frames.tsv` (`frame_index<TAB>timestamp_s`, header row) when
    /// present, otherwise from `index / fps`.
    pub fn load(dir: &Path, fps: f64, mouth: &MouthBox) -> Result<Self> {
        let manifest = dir.join(FRAME_MANIFEST);
        let entries: Vec<(usize, f64)> = if manifest.exists() {
            let mut rdr = csv::ReaderBuilder::new()
                .delimiter(b'\t')
                .from_path(&manifest)
                .map_err(|e| Error::Data(format!("{}: {e}", manifest.display())))?;
            rdr.deserialize::<(usize, f64)>()
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Data(format!("{}: {e}", manifest.display())))?
        } else {
            if !(fps > 0.0) {
                return Err(Error::Config("frame rate must be positive".into()));
            }
            let mut idx: Vec<usize> = std::fs::read_dir(dir)
                .map_err(|e| Error::io(dir, e))?
                .filter_map(|e| e.ok())
                .filter_map(|e| {
                    let name = e.file_name().to_string_lossy().into_owned();
                    name.strip_prefix("frame_")?.split('.').next()?.parse().ok()
                })
                .collect();
            idx.sort_unstable();
            idx.into_iter().map(|i| (i, i as f64 / fps)).collect()
        };
        if entries.is_empty() {
            return Err(Error::Data(format!("{}: no frames", dir.display())));
        }
        let mut frames = Vec::with_capacity(entries.len());
        for (i, _) in &entries {
            let path = ["pgm", "ppm", "png"]
                .iter()
                .map(|ext| dir.join(format!("frame_{i:06}.{ext}")))
                .find(|p| p.exists())
                .ok_or_else(|| Error::Data(format!("{}: missing frame {i}", dir.display())))?;
            frames.push(GrayFrame::read(&path)?.crop(mouth)?);
        }
        Ok(Self {
            frames,
            timestamps: entries.into_iter().map(|(_, t)| t).collect(),
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = String::from("frame_index\ttimestamp_s\n");
        for (i, (f, t)) in self.frames.iter().zip(&self.timestamps).enumerate() {
            let p = dir.join(format!("frame_{i:06}.pgm"));
            std::fs::write(&p, f.to_pgm()).map_err(|e| Error::io(&p, e))?;
            manifest.push_str(&format!("{i}\t{t}\n"));
        }
        let p = dir.join(FRAME_MANIFEST);
        std::fs::write(&p, manifest).map_err(|e| Error::io(&p, e))
    }
}

/// Per window: the center frame's coefficients, center minus previous, and
/// next minus center (3k dims).
pub fn extract_visual_features(
    clip: &VideoClip,
    grid: &WindowGrid,
    basis: &EigenBasis,
    utterance: &str,
) -> Result<FeatureSequence> {
    let triples = match_frames(grid, &clip.timestamps)?;
    let mut cache: Vec<Option<Vec<f64>>> = vec![None; clip.frames.len()];
    let mut proj = |i: usize| -> Result<Vec<f64>> {
        if cache[i].is_none() {
            cache[i] = Some(basis.project(&clip.frames[i])?);
        }
        Ok(cache[i].clone().unwrap())
    };
    let k = basis.k();
    let mut vectors = Vec::with_capacity(triples.len());
    for t in &triples {
        let (p, c, n) = (proj(t.prev)?, proj(t.center)?, proj(t.next)?);
        let mut v = Vec::with_capacity(3 * k);
        v.extend_from_slice(&c);
        v.extend(c.iter().zip(&p).map(|(c, p)| c - p));
        v.extend(n.iter().zip(&c).map(|(n, c)| n - c));
        vectors.push(v);
    }
    FeatureSequence::new(vectors, ModalityLayout::visual_only(3 * k), grid.clone(), utterance)
}
