//! Visual front end: grayscale mouth crops, eigenmouth PCA, and per-window
//! static + dynamic coefficient features.

mod frames;
mod image;
mod pca;

pub use frames::{extract_visual_features, match_frames, FrameTriple, VideoClip, FRAME_MANIFEST};
pub use image::{to_grayscale, GrayFrame, MouthBox, MOUTH_HEIGHT, MOUTH_PIXELS, MOUTH_WIDTH};
pub use pca::{fit_pca, EigenBasis};

/// Default number of retained eigenmouth components.
pub const DEFAULT_COMPONENTS: usize = 4;
