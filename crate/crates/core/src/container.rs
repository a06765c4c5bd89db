//! Little-endian binary containers for feature sequences, plus the byte
//! reader/writer shared with the model and basis files.
//!
//! Feature container layout:
//!
//! ```text
//! magic "AVFS" | version u32 | audio_dims u32 | visual_dims u32 | count u32
//! window_len f64 | hop f64 | centers f64 x count
//! utterance id: len u32 + utf-8 bytes
//! vectors: count x (audio_dims + visual_dims) f32, row-major
//! ```

use std::io::Write;
use std::path::Path;

use crate::audio::WindowGrid;
use crate::error::{Error, Result};
use crate::fusion::{FeatureSequence, ModalityLayout};

pub const FEATURE_MAGIC: &[u8; 4] = b"AVFS";
pub const FEATURE_VERSION: u32 = 1;

#[derive(Default)]
pub(crate) struct ByteWriter {
    pub buf: Vec<u8>,
}

impl ByteWriter {
    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
    pub fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }
    pub fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
    pub fn f32(&mut self, v: f32) {
        self.bytes(&v.to_le_bytes());
    }
    pub fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }
    pub fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }
}

pub(crate) struct ByteReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != magic {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(magic)
            )));
        }
        Ok(())
    }

    pub fn version(&mut self, expected: u32) -> Result<()> {
        let v = self.u32()?;
        if v != expected {
            return Err(Error::Format(format!(
                "unsupported version {v} (expected {expected})"
            )));
        }
        Ok(())
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Format("invalid utf-8 string".into()))
    }

    /// Guards allocations driven by header counts.
    pub fn expect_remaining(&self, n: usize) -> Result<()> {
        if self.data.len() - self.pos < n {
            return Err(Error::Format(format!(
                "truncated: need {n} more bytes, {} left",
                self.data.len() - self.pos
            )));
        }
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                self.data.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn encode_features(seq: &FeatureSequence) -> Vec<u8> {
    let mut w = ByteWriter::default();
    w.bytes(FEATURE_MAGIC);
    w.u32(FEATURE_VERSION);
    w.u32(seq.layout.audio_dims.len() as u32);
    w.u32(seq.layout.visual_dims.len() as u32);
    w.u32(seq.len() as u32);
    w.f64(seq.grid.window_len);
    w.f64(seq.grid.hop);
    for &c in &seq.grid.centers {
        w.f64(c);
    }
    w.str(&seq.utterance);
    for v in &seq.vectors {
        for &x in v {
            w.f32(x as f32);
        }
    }
    w.buf
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureSequence> {
    let mut r = ByteReader::new(bytes);
    r.magic(FEATURE_MAGIC)?;
    r.version(FEATURE_VERSION)?;
    let audio = r.u32()? as usize;
    let visual = r.u32()? as usize;
    let count = r.u32()? as usize;
    let window_len = r.f64()?;
    let hop = r.f64()?;
    r.expect_remaining(count.saturating_mul(8))?;
    let centers = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let utterance = r.str()?;
    let dims = audio + visual;
    r.expect_remaining(count.saturating_mul(dims).saturating_mul(4))?;
    let vectors = (0..count)
        .map(|_| (0..dims).map(|_| r.f32().map(f64::from)).collect())
        .collect::<Result<Vec<Vec<f64>>>>()?;
    r.finish()?;
    FeatureSequence::new(
        vectors,
        ModalityLayout::new(audio, visual),
        WindowGrid {
            window_len,
            hop,
            centers,
        },
        utterance,
    )
}

pub fn write_features(path: &Path, seq: &FeatureSequence) -> Result<()> {
    write_atomic(path, &encode_features(seq))
}

pub fn read_features(path: &Path) -> Result<FeatureSequence> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&bytes)
}

/// Debug dump: one row per window, `center_s` then every dimension.
pub fn features_to_csv(seq: &FeatureSequence) -> String {
    let mut out = String::from("center_s");
    for j in 0..seq.dims() {
        let tag = if seq.layout.audio_dims.contains(&j) { "a" } else { "v" };
        out.push_str(&format!(",{tag}{j}"));
    }
    out.push('\n');
    for (c, v) in seq.grid.centers.iter().zip(&seq.vectors) {
        out.push_str(&format!("{c}"));
        for x in v {
            out.push_str(&format!(",{x}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FeatureSequence {
        let grid = WindowGrid::for_samples(720, 16_000, 0.025, 0.010).unwrap().0;
        let vectors = (0..grid.len())
            .map(|i| vec![i as f64 * 0.5, -1.25, 3.0])
            .collect();
        FeatureSequence::new(vectors, ModalityLayout::new(2, 1), grid, "utt-7").unwrap()
    }

    #[test]
    fn round_trip_f32_exact_values() {
        let seq = sample();
        let back = decode_features(&encode_features(&seq)).unwrap();
        assert_eq!(back, seq);
    }

    #[test]
    fn truncated_is_error() {
        let bytes = encode_features(&sample());
        for cut in [0, 3, 10, bytes.len() - 1] {
            assert!(decode_features(&bytes[..cut]).is_err());
        }
    }

    #[test]
    fn header_is_little_endian() {
        let bytes = encode_features(&sample());
        assert_eq!(&bytes[..4], b"AVFS");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 3);
    }

    #[test]
    fn atomic_write_creates_dirs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b/c.bin");
        write_atomic(&p, b"xyz").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"xyz");
    }
}
