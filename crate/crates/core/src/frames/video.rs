//! Video readers. Frame directories and animated GIFs decode in-process;
//! other containers go through an `ffmpeg` subprocess when one is installed.

use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::process::Command;

use image::codecs::gif::GifDecoder;
use image::{AnimationDecoder, RgbImage};
use serde::Deserialize;

use super::FrameError;

/// Random access to the decoded frames of a clip.
pub trait VideoReader {
    fn fps(&self) -> f64;
    fn frame_count(&self) -> usize;
    fn frame(&mut self, index: usize) -> Result<RgbImage, FrameError>;

    fn duration_ms(&self) -> f64 {
        self.frame_count() as f64 * 1000.0 / self.fps()
    }
}

/// Opens the reader matching the path: a directory of numbered frames, an
/// animated GIF, or (via ffmpeg) any other container.
pub fn open_video(path: &Path) -> Result<Box<dyn VideoReader>, FrameError> {
    if path.is_dir() {
        return Ok(Box::new(FrameDirVideo::open(path)?));
    }
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("gif") => Ok(Box::new(GifVideo::open(path)?)),
        _ => Ok(Box::new(FfmpegVideo::open(path)?)),
    }
}

#[derive(Deserialize)]
struct ClipMeta {
    fps: f64,
}

/// A directory of still frames (sorted by file name) plus `clip.json`
/// declaring `{"fps": ...}`.
pub struct FrameDirVideo {
    files: Vec<PathBuf>,
    fps: f64,
}

pub const CLIP_META_FILE: &str = "clip.json";

impl FrameDirVideo {
    pub fn open(dir: &Path) -> Result<Self, FrameError> {
        let unreadable = |msg: String| FrameError::Unreadable {
            path: dir.display().to_string(),
            message: msg,
        };
        let meta_text = std::fs::read_to_string(dir.join(CLIP_META_FILE))
            .map_err(|e| unreadable(format!("{CLIP_META_FILE}: {e}")))?;
        let meta: ClipMeta = serde_json::from_str(&meta_text)
            .map_err(|e| unreadable(format!("{CLIP_META_FILE}: {e}")))?;
        if !(meta.fps.is_finite() && meta.fps > 0.0) {
            return Err(unreadable(format!("fps must be positive, got {}", meta.fps)));
        }
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| unreadable(e.to_string()))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| {
                matches!(
                    p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                    Some("png" | "jpg" | "jpeg")
                )
            })
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(unreadable("no frames".into()));
        }
        Ok(Self {
            files,
            fps: meta.fps,
        })
    }
}

impl VideoReader for FrameDirVideo {
    fn fps(&self) -> f64 {
        self.fps
    }

    fn frame_count(&self) -> usize {
        self.files.len()
    }

    fn frame(&mut self, index: usize) -> Result<RgbImage, FrameError> {
        let path = self.files.get(index).ok_or(FrameError::FrameIndex(index))?;
        image::open(path)
            .map(|img| img.to_rgb8())
            .map_err(|e| FrameError::Unreadable {
                path: path.display().to_string(),
                message: e.to_string(),
            })
    }
}

/// Animated GIF; the frame rate is taken from the first frame's delay.
pub struct GifVideo {
    frames: Vec<RgbImage>,
    fps: f64,
}

impl GifVideo {
    pub fn open(path: &Path) -> Result<Self, FrameError> {
        let bytes = std::fs::read(path).map_err(|e| FrameError::Unreadable {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            FrameError::Unreadable { message, .. } => FrameError::Unreadable {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FrameError> {
        let unreadable = |m: String| FrameError::Unreadable {
            path: "<gif>".into(),
            message: m,
        };
        let decoder = GifDecoder::new(Cursor::new(bytes)).map_err(|e| unreadable(e.to_string()))?;
        let frames = decoder
            .into_frames()
            .collect_frames()
            .map_err(|e| unreadable(e.to_string()))?;
        let first = frames.first().ok_or_else(|| unreadable("no frames".into()))?;
        let (num, den) = first.delay().numer_denom_ms();
        let delay_ms = f64::from(num) / f64::from(den);
        // browsers treat a zero delay as 100 ms
        let fps = if delay_ms > 0.0 { 1000.0 / delay_ms } else { 10.0 };
        Ok(Self {
            frames: frames
                .into_iter()
                .map(|f| image::DynamicImage::ImageRgba8(f.into_buffer()).to_rgb8())
                .collect(),
            fps,
        })
    }
}

impl VideoReader for GifVideo {
    fn fps(&self) -> f64 {
        self.fps
    }

    fn frame_count(&self) -> usize {
        self.frames.len()
    }

    fn frame(&mut self, index: usize) -> Result<RgbImage, FrameError> {
        self.frames
            .get(index)
            .cloned()
            .ok_or(FrameError::FrameIndex(index))
    }
}

/// Container formats decoded by shelling out to `ffprobe`/`ffmpeg`.
pub struct FfmpegVideo {
    path: PathBuf,
    fps: f64,
    frames: usize,
}

fn parse_rate(s: &str) -> Option<f64> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let (n, d): (f64, f64) = (n.parse().ok()?, d.parse().ok()?);
            (d != 0.0).then_some(n / d)
        }
        None => s.parse().ok(),
    }
}

impl FfmpegVideo {
    pub fn open(path: &Path) -> Result<Self, FrameError> {
        let unreadable = |m: String| FrameError::Unreadable {
            path: path.display().to_string(),
            message: m,
        };
        if !path.exists() {
            return Err(unreadable("no such file".into()));
        }
        let out = Command::new("ffprobe")
            .args([
                "-v",
                "error",
                "-select_streams",
                "v:0",
                "-count_packets",
                "-show_entries",
                "stream=avg_frame_rate,nb_read_packets",
                "-of",
                "csv=p=0",
            ])
            .arg(path)
            .output()
            .map_err(|e| unreadable(format!("ffprobe unavailable: {e}")))?;
        if !out.status.success() {
            return Err(unreadable(String::from_utf8_lossy(&out.stderr).into_owned()));
        }
        let text = String::from_utf8_lossy(&out.stdout);
        let mut parts = text.trim().split(',');
        let fps = parts
            .next()
            .and_then(parse_rate)
            .filter(|f| *f > 0.0)
            .ok_or_else(|| unreadable(format!("cannot read frame rate from {text:?}")))?;
        let frames = parts
            .next()
            .and_then(|n| n.trim().parse().ok())
            .ok_or_else(|| unreadable(format!("cannot read frame count from {text:?}")))?;
        Ok(Self {
            path: path.to_path_buf(),
            fps,
            frames,
        })
    }
}

impl VideoReader for FfmpegVideo {
    fn fps(&self) -> f64 {
        self.fps
    }

    fn frame_count(&self) -> usize {
        self.frames
    }

    fn frame(&mut self, index: usize) -> Result<RgbImage, FrameError> {
        if index >= self.frames {
            return Err(FrameError::FrameIndex(index));
        }
        let out = Command::new("ffmpeg")
            .args(["-v", "error", "-i"])
            .arg(&self.path)
            .args([
                "-vf",
                &format!("select=eq(n\\,{index})"),
                "-frames:v",
                "1",
                "-f",
                "image2pipe",
                "-vcodec",
                "png",
                "-",
            ])
            .output()
            .map_err(|e| FrameError::Unreadable {
                path: self.path.display().to_string(),
                message: format!("ffmpeg unavailable: {e}"),
            })?;
        image::load_from_memory(&out.stdout)
            .map(|img| img.to_rgb8())
            .map_err(|e| FrameError::Unreadable {
                path: self.path.display().to_string(),
                message: format!("frame {index}: {e}"),
            })
    }
}
