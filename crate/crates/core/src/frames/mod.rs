//! Turns a clip into the images a model or human sees: temporal sampling,
//! per-tile resolution scaling, row-major collages and looping GIFs.

mod assets;
mod compose;
mod grid;
mod sample;
pub mod synth;
mod video;

use thiserror::Error;

pub use assets::{
    asset_dir, asset_id, generate_assets, model_images, render_collage, render_frames, render_gif,
    sha256_hex, write_asset, AssetKind, AssetSidecar, EncodedImage, RenderedAsset,
};
pub use compose::{
    compose_collage, compose_gif, encode_png, gif_frame_delays, gif_loops_forever,
    letterbox_content, scale_frame, AnimatedGif, Collage, TileBox,
};
pub use grid::{all_grids, enumerate_grids};
pub use sample::{
    nearest_frame_index, sample_frames, sample_from, sample_segment, sample_times, FrameSequence,
};
pub use video::{open_video, FfmpegVideo, FrameDirVideo, GifVideo, VideoReader, CLIP_META_FILE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrameError {
    #[error("frame count {0} is outside 1..=10")]
    FrameCount(u32),
    #[error("cannot read video {path}: {message}")]
    Unreadable { path: String, message: String },
    #[error("clip too short: need {needed_ms} ms, have {available_ms:.0} ms")]
    InsufficientDuration { needed_ms: u64, available_ms: f64 },
    #[error("frame index {0} out of range")]
    FrameIndex(usize),
    #[error("image has a zero dimension")]
    EmptyImage,
    #[error("{frames} frames do not fill a {rows}x{cols} grid")]
    GridMismatch { frames: usize, rows: u32, cols: u32 },
    #[error("sequence is empty")]
    EmptySequence,
    #[error("encoding failed: {0}")]
    Encode(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl FrameError {
    /// Errors that mean "skip this scenario" rather than "abort".
    pub fn is_skippable(&self) -> bool {
        matches!(
            self,
            FrameError::InsufficientDuration { .. } | FrameError::Unreadable { .. }
        )
    }
}
