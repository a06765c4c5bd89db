use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MOUTH_HEIGHT: usize = 100;
pub const MOUTH_WIDTH: usize = 150;
pub const MOUTH_PIXELS: usize = MOUTH_HEIGHT * MOUTH_WIDTH;

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayFrame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

/// Mouth crop rectangle in frame pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MouthBox {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl MouthBox {
    pub fn at(x: usize, y: usize) -> Self {
        Self {
            x,
            y,
            width: MOUTH_WIDTH,
            height: MOUTH_HEIGHT,
        }
    }
}

/// `0.2989 r + 0.587 g + 0.114 b`, rounded to nearest and clamped.
pub fn to_grayscale(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.2989 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
    y.round().clamp(0.0, 255.0) as u8
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                found: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_rgb(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != 3 * width * height {
            return Err(Error::DimensionMismatch {
                expected: 3 * width * height,
                found: rgb.len(),
            });
        }
        let pixels = rgb
            .chunks_exact(3)
            .map(|p| to_grayscale(p[0], p[1], p[2]))
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn crop(&self, b: &MouthBox) -> Result<GrayFrame> {
        if b.x + b.width > self.width || b.y + b.height > self.height {
            return Err(Error::Data(format!(
                "mouth box {b:?} exceeds {}x{} frame",
                self.width, self.height
            )));
        }
        let mut pixels = Vec::with_capacity(b.width * b.height);
        for row in b.y..b.y + b.height {
            let start = row * self.width + b.x;
            pixels.extend_from_slice(&self.pixels[start..start + b.width]);
        }
        GrayFrame::new(b.width, b.height, pixels)
    }

    pub fn is_mouth_sized(&self) -> bool {
        self.width == MOUTH_WIDTH && self.height == MOUTH_HEIGHT
    }

    pub fn to_vector(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| p as f64).collect()
    }

    /// Binary PGM (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    /// Reads a netpbm graymap/pixmap (P2, P3, P5, P6 with maxval 255);
    /// other formats go through the `image` decoder. Colour input is
    /// converted with [`to_grayscale`].
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.first() == Some(&b'P') {
            return decode_netpbm(&bytes)
                .map_err(|e| Error::Data(format!("{}: {e}", path.display())));
        }
        let img = image::load_from_memory(&bytes)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
            .to_rgb8();
        let (w, h) = img.dimensions();
        Self::from_rgb(w as usize, h as usize, img.as_raw())
    }
}

fn decode_netpbm(bytes: &[u8]) -> std::result::Result<GrayFrame, String> {
    let mut pos = 2;
    let mut header = [0usize; 3];
    for slot in header.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&c| c != b'\n') {
                        pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err("truncated header".into()),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *slot = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or("bad header number")?;
    }
    let [width, height, maxval] = header;
    if maxval != 255 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    let kind = bytes.get(1).copied();
    let channels = match kind {
        Some(b'2') | Some(b'5') => 1,
        Some(b'3') | Some(b'6') => 3,
        _ => return Err("unsupported netpbm variant".into()),
    };
    let n = width * height * channels;
    let raw: Vec<u8> = if matches!(kind, Some(b'5') | Some(b'6')) {
        // exactly one whitespace byte separates header and raster
        let body = bytes.get(pos + 1..).ok_or("missing raster")?;
        if body.len() < n {
            return Err("truncated raster".into());
        }
        body[..n].to_vec()
    } else {
        let vals: Vec<u8> = std::str::from_utf8(&bytes[pos..])
            .map_err(|_| "non-ascii raster")?
            .split_ascii_whitespace()
            .take(n)
            .map(|t| t.parse::<u8>().map_err(|_| "bad raster value"))
            .collect::<std::result::Result<_, _>>()?;
        if vals.len() < n {
            return Err("truncated raster".into());
        }
        vals
    };
    let frame = if channels == 1 {
        GrayFrame::new(width, height, raw)
    } else {
        GrayFrame::from_rgb(width, height, &raw)
    };
    frame.map_err(|e| e.to_string())
}
