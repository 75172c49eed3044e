//! Synthetic driving clips for demos and tests: a horizon, a road and a
//! block that drifts across the frame, written as a frame directory.

use std::path::Path;

use image::{Rgb, RgbImage};

use super::video::CLIP_META_FILE;
use super::FrameError;

/// Frame `index` of a synthetic clip; every frame differs from its
/// neighbours and `seed` shifts the palette.
pub fn synthetic_frame(width: u32, height: u32, index: usize, seed: u64) -> RgbImage {
    let sky = Rgb([
        (120 + seed % 60) as u8,
        (160 + (seed / 7) % 60) as u8,
        220,
    ]);
    let road = Rgb([70, 70, 75]);
    let horizon = height * 2 / 5;
    let mut img = RgbImage::from_fn(width, height, |_, y| if y < horizon { sky } else { road });
    let bw = (width / 8).max(1);
    let bh = (height / 6).max(1);
    let span = width.saturating_sub(bw).max(1);
    let x0 = ((index as u64 * 7 + seed) % u64::from(span)) as u32;
    let y0 = horizon.min(height.saturating_sub(bh));
    let color = Rgb([200, (index * 13 % 256) as u8, (seed % 256) as u8]);
    for y in y0..(y0 + bh).min(height) {
        for x in x0..(x0 + bw).min(width) {
            img.put_pixel(x, y, color);
        }
    }
    img
}

/// Writes `frame_count` PNG frames plus `clip.json` into `dir`.
pub fn write_synthetic_clip(
    dir: &Path,
    fps: f64,
    frame_count: usize,
    (width, height): (u32, u32),
    seed: u64,
) -> Result<(), FrameError> {
    std::fs::create_dir_all(dir).map_err(|e| FrameError::Io(e.to_string()))?;
    for i in 0..frame_count {
        synthetic_frame(width, height, i, seed)
            .save(dir.join(format!("{i:05}.png")))
            .map_err(|e| FrameError::Encode(e.to_string()))?;
    }
    std::fs::write(dir.join(CLIP_META_FILE), format!("{{\"fps\": {fps}}}"))
        .map_err(|e| FrameError::Io(e.to_string()))?;
    Ok(())
}
