//! Scaling, collage composition and animated GIF assembly.

use std::io::Cursor;

use image::codecs::gif::{GifDecoder, GifEncoder, Repeat};
use image::imageops::{self, FilterType};
use image::{AnimationDecoder, Delay, DynamicImage, Frame, RgbImage};
use serde::{Deserialize, Serialize};

use crate::scene::{Resolution, SamplingConfig};

use super::sample::FrameSequence;
use super::FrameError;

/// Scales `image` onto a canvas of exactly the level's size. Inputs that are
/// not 16:9 keep their aspect ratio and are centered on black bars.
pub fn scale_frame(image: &RgbImage, resolution: Resolution) -> Result<RgbImage, FrameError> {
    let (w, h) = image.dimensions();
    if w == 0 || h == 0 {
        return Err(FrameError::EmptyImage);
    }
    let (tw, th) = (resolution.width(), resolution.height());
    if (w, h) == (tw, th) {
        return Ok(image.clone());
    }
    let (cw, ch) = letterbox_content(w, h, tw, th);
    let resized = imageops::resize(image, cw, ch, FilterType::Triangle);
    if (cw, ch) == (tw, th) {
        return Ok(resized);
    }
    let mut canvas = RgbImage::new(tw, th);
    imageops::replace(
        &mut canvas,
        &resized,
        i64::from((tw - cw) / 2),
        i64::from((th - ch) / 2),
    );
    Ok(canvas)
}

/// Size of the content area when fitting `w × h` into `tw × th`.
pub fn letterbox_content(w: u32, h: u32, tw: u32, th: u32) -> (u32, u32) {
    // compare w/h with tw/th without floating point
    if u64::from(w) * u64::from(th) >= u64::from(h) * u64::from(tw) {
        let ch = (u64::from(h) * u64::from(tw) + u64::from(w) / 2) / u64::from(w);
        (tw, (ch as u32).clamp(1, th))
    } else {
        let cw = (u64::from(w) * u64::from(th) + u64::from(h) / 2) / u64::from(h);
        ((cw as u32).clamp(1, tw), th)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Collage {
    pub image: RgbImage,
    pub config: SamplingConfig,
    pub tile_boxes: Vec<TileBox>,
}

impl Collage {
    pub fn crop(&self, index: usize) -> Option<RgbImage> {
        let b = self.tile_boxes.get(index)?;
        Some(imageops::crop_imm(&self.image, b.x, b.y, b.w, b.h).to_image())
    }
}

/// Places the (scaled) frames row-major: left to right, then top to bottom,
/// with no gaps.
pub fn compose_collage(seq: &FrameSequence, config: &SamplingConfig) -> Result<Collage, FrameError> {
    let n = seq.len();
    if n as u32 != config.frame_count || config.grid.cells() != config.frame_count {
        return Err(FrameError::GridMismatch {
            frames: n,
            rows: config.grid.rows,
            cols: config.grid.cols,
        });
    }
    let (tw, th) = (config.resolution.width(), config.resolution.height());
    let cols = config.grid.cols;
    let mut image = RgbImage::new(cols * tw, config.grid.rows * th);
    let mut tile_boxes = Vec::with_capacity(n);
    for (k, frame) in seq.frames.iter().enumerate() {
        let tile = scale_frame(frame, config.resolution)?;
        let k = k as u32;
        let b = TileBox {
            x: (k % cols) * tw,
            y: (k / cols) * th,
            w: tw,
            h: th,
        };
        imageops::replace(&mut image, &tile, i64::from(b.x), i64::from(b.y));
        tile_boxes.push(b);
    }
    Ok(Collage {
        image,
        config: *config,
        tile_boxes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnimatedGif {
    pub bytes: Vec<u8>,
    pub width: u32,
    pub height: u32,
    pub frame_delays_ms: Vec<u32>,
}

impl AnimatedGif {
    pub fn cycle_ms(&self) -> u64 {
        self.frame_delays_ms.iter().map(|d| u64::from(*d)).sum()
    }
}

/// Encodes the frames as a looping GIF with `interval_ms` between frames.
pub fn compose_gif(seq: &FrameSequence, interval_ms: u32) -> Result<AnimatedGif, FrameError> {
    let first = seq.frames.first().ok_or(FrameError::EmptySequence)?;
    let (w, h) = first.dimensions();
    if w > u32::from(u16::MAX) || h > u32::from(u16::MAX) {
        return Err(FrameError::Encode(format!("{w}x{h} exceeds GIF limits")));
    }
    let mut bytes = Vec::new();
    {
        let mut enc = GifEncoder::new_with_speed(&mut bytes, 10);
        enc.set_repeat(Repeat::Infinite)
            .map_err(|e| FrameError::Encode(e.to_string()))?;
        for frame in &seq.frames {
            let frame = if frame.dimensions() == (w, h) {
                frame.clone()
            } else {
                imageops::resize(frame, w, h, FilterType::Triangle)
            };
            let rgba = DynamicImage::ImageRgb8(frame).to_rgba8();
            enc.encode_frame(Frame::from_parts(
                rgba,
                0,
                0,
                Delay::from_numer_denom_ms(interval_ms, 1),
            ))
            .map_err(|e| FrameError::Encode(e.to_string()))?;
        }
    }
    Ok(AnimatedGif {
        bytes,
        width: w,
        height: h,
        frame_delays_ms: vec![interval_ms; seq.len()],
    })
}

/// Frame delays (ms) read back from encoded GIF bytes.
pub fn gif_frame_delays(bytes: &[u8]) -> Result<Vec<u32>, FrameError> {
    let dec = GifDecoder::new(Cursor::new(bytes)).map_err(|e| FrameError::Encode(e.to_string()))?;
    let frames = dec
        .into_frames()
        .collect_frames()
        .map_err(|e| FrameError::Encode(e.to_string()))?;
    Ok(frames
        .iter()
        .map(|f| {
            let (n, d) = f.delay().numer_denom_ms();
            n / d.max(1)
        })
        .collect())
}

/// Whether the GIF's application extension requests infinite looping.
pub fn gif_loops_forever(bytes: &[u8]) -> bool {
    // NETSCAPE2.0 block: ... 0x03 0x01 <lo> <hi> 0x00, loop count 0 = forever
    let tag = b"NETSCAPE2.0";
    bytes
        .windows(tag.len())
        .position(|w| w == tag)
        .and_then(|p| bytes.get(p + tag.len()..p + tag.len() + 4))
        .is_some_and(|b| b[0] == 3 && b[1] == 1 && b[2] == 0 && b[3] == 0)
}

pub fn encode_png(image: &RgbImage) -> Result<Vec<u8>, FrameError> {
    let mut out = Vec::new();
    image
        .write_to(&mut Cursor::new(&mut out), image::ImageFormat::Png)
        .map_err(|e| FrameError::Encode(e.to_string()))?;
    Ok(out)
}
