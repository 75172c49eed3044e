use std::path::Path;

use image::RgbImage;

use crate::scene::ScenarioSource;

use super::video::{open_video, VideoReader};
use super::FrameError;

/// Frames sampled from a clip at fixed intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub frames: Vec<RgbImage>,
    /// Requested sample times, not the native frame times.
    pub timestamps_ms: Vec<u64>,
    pub native_indices: Vec<usize>,
    pub native_fps: f64,
}

impl FrameSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Wraps already decoded frames with synthetic timestamps.
    pub fn from_frames(frames: Vec<RgbImage>, interval_ms: u32) -> Self {
        let n = frames.len();
        Self {
            frames,
            timestamps_ms: (0..n as u64).map(|k| k * u64::from(interval_ms)).collect(),
            native_indices: (0..n).collect(),
            native_fps: 1000.0 / f64::from(interval_ms.max(1)),
        }
    }
}

/// Native frame nearest to `t_ms`; exact ties go to the earlier frame.
pub fn nearest_frame_index(t_ms: u64, fps: f64) -> usize {
    let x = t_ms as f64 * fps / 1000.0;
    (x - 0.5 - 1e-9).ceil().max(0.0) as usize
}

/// Requested times `offset + k·interval` for `k = 0..count`.
pub fn sample_times(start_offset_ms: u64, interval_ms: u32, count: u32) -> Vec<u64> {
    (0..u64::from(count))
        .map(|k| start_offset_ms + k * u64::from(interval_ms))
        .collect()
}

pub fn sample_from(
    reader: &mut dyn VideoReader,
    start_offset_ms: u64,
    interval_ms: u32,
    frame_count: u32,
) -> Result<FrameSequence, FrameError> {
    if frame_count == 0 {
        return Err(FrameError::FrameCount(0));
    }
    let times = sample_times(start_offset_ms, interval_ms, frame_count);
    let fps = reader.fps();
    let last = *times.last().expect("non-empty");
    let indices: Vec<usize> = times.iter().map(|t| nearest_frame_index(*t, fps)).collect();
    let available = reader.frame_count();
    if last as f64 > reader.duration_ms() || indices.last().is_some_and(|i| *i >= available) {
        return Err(FrameError::InsufficientDuration {
            needed_ms: last,
            available_ms: reader.duration_ms(),
        });
    }
    let mut frames = Vec::with_capacity(indices.len());
    for &i in &indices {
        frames.push(reader.frame(i)?);
    }
    Ok(FrameSequence {
        frames,
        timestamps_ms: times,
        native_indices: indices,
        native_fps: fps,
    })
}

/// Opens the scenario's clip (relative refs resolve against `base_dir`) and
/// samples `frame_count` frames starting at its offset.
pub fn sample_frames(
    source: &ScenarioSource,
    base_dir: Option<&Path>,
    interval_ms: u32,
    frame_count: u32,
) -> Result<FrameSequence, FrameError> {
    let rel = Path::new(&source.video_ref);
    let path = match base_dir {
        Some(base) if rel.is_relative() => base.join(rel),
        _ => rel.to_path_buf(),
    };
    let mut reader = open_video(&path)?;
    sample_from(reader.as_mut(), source.start_offset_ms, interval_ms, frame_count)
}

/// Every native frame covering the span a sampled sequence would cover,
/// `[offset, offset + (count−1)·interval]`, for playback at native rate.
pub fn sample_segment(
    source: &ScenarioSource,
    base_dir: Option<&Path>,
    interval_ms: u32,
    frame_count: u32,
) -> Result<FrameSequence, FrameError> {
    let sampled = sample_frames(source, base_dir, interval_ms, frame_count)?;
    let rel = Path::new(&source.video_ref);
    let path = match base_dir {
        Some(base) if rel.is_relative() => base.join(rel),
        _ => rel.to_path_buf(),
    };
    let mut reader = open_video(&path)?;
    let first = sampled.native_indices[0];
    let last = *sampled.native_indices.last().expect("non-empty");
    let mut frames = Vec::with_capacity(last - first + 1);
    for i in first..=last {
        frames.push(reader.frame(i)?);
    }
    let fps = reader.fps();
    Ok(FrameSequence {
        frames,
        timestamps_ms: (first..=last).map(|i| (i as f64 * 1000.0 / fps).round() as u64).collect(),
        native_indices: (first..=last).collect(),
        native_fps: fps,
    })
}
