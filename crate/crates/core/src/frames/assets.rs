//! Encoded images for models and humans, plus JSON sidecars describing how
//! each asset was produced.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::scene::{PresentationMode, SamplingConfig, ScenarioSource};

use super::compose::{compose_collage, compose_gif, encode_png, scale_frame, Collage, TileBox};
use super::sample::{sample_frames, FrameSequence};
use super::FrameError;

/// An image ready to attach to a request or serve over HTTP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedImage {
    pub mime: &'static str,
    pub bytes: Vec<u8>,
}

impl EncodedImage {
    pub fn png(bytes: Vec<u8>) -> Self {
        Self {
            mime: "image/png",
            bytes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetKind {
    Collage,
    Frame,
    Gif,
    Clip,
}

impl AssetKind {
    pub fn mime(self) -> &'static str {
        match self {
            AssetKind::Collage | AssetKind::Frame => "image/png",
            AssetKind::Gif | AssetKind::Clip => "image/gif",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetSidecar {
    pub asset_id: String,
    pub kind: AssetKind,
    pub scenario_id: String,
    pub config: SamplingConfig,
    /// Position of this frame in the sequence, for `Frame` assets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_index: Option<usize>,
    #[serde(default)]
    pub tile_boxes: Vec<TileBox>,
    pub timestamps_ms: Vec<u64>,
    pub native_indices: Vec<usize>,
    pub native_fps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_delay_ms: Option<u32>,
    pub width: u32,
    pub height: u32,
    pub mime: String,
    /// SHA-256 of each sampled source frame's raw RGB bytes.
    pub source_sha256: Vec<String>,
    pub output_sha256: String,
    pub file: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Deterministic id for an asset of `kind` (and frame `index`).
pub fn asset_id(scenario_id: &str, config: &SamplingConfig, kind: AssetKind, index: Option<usize>) -> String {
    let mut h = Sha256::new();
    h.update(scenario_id.as_bytes());
    h.update([0]);
    h.update(config.key().as_bytes());
    h.update([0]);
    h.update(format!("{kind:?}{index:?}").as_bytes());
    hex::encode(&h.finalize()[..8])
}

/// The images a model receives for `config.mode`: one collage, or one PNG
/// per frame (scaled to the configured resolution) for separate and batch.
pub fn model_images(seq: &FrameSequence, config: &SamplingConfig) -> Result<Vec<EncodedImage>, FrameError> {
    match config.mode {
        PresentationMode::Collage => {
            let collage = compose_collage(seq, config)?;
            Ok(vec![EncodedImage::png(encode_png(&collage.image)?)])
        }
        PresentationMode::Separate | PresentationMode::Batch => seq
            .frames
            .iter()
            .map(|f| Ok(EncodedImage::png(encode_png(&scale_frame(f, config.resolution)?)?)))
            .collect(),
    }
}

/// A rendered asset and its sidecar, not yet written to disk.
#[derive(Debug, Clone)]
pub struct RenderedAsset {
    pub sidecar: AssetSidecar,
    pub bytes: Vec<u8>,
}

fn base_sidecar(
    scenario_id: &str,
    seq: &FrameSequence,
    config: &SamplingConfig,
    kind: AssetKind,
    index: Option<usize>,
    bytes: &[u8],
    (width, height): (u32, u32),
    file: String,
) -> AssetSidecar {
    AssetSidecar {
        asset_id: asset_id(scenario_id, config, kind, index),
        kind,
        scenario_id: scenario_id.to_string(),
        config: *config,
        frame_index: index,
        tile_boxes: Vec::new(),
        timestamps_ms: seq.timestamps_ms.clone(),
        native_indices: seq.native_indices.clone(),
        native_fps: seq.native_fps,
        frame_delay_ms: None,
        width,
        height,
        mime: kind.mime().to_string(),
        source_sha256: seq.frames.iter().map(|f| sha256_hex(f.as_raw())).collect(),
        output_sha256: sha256_hex(bytes),
        file,
    }
}

pub fn render_collage(scenario_id: &str, seq: &FrameSequence, config: &SamplingConfig) -> Result<(Collage, RenderedAsset), FrameError> {
    let collage = compose_collage(seq, config)?;
    let bytes = encode_png(&collage.image)?;
    let mut sidecar = base_sidecar(
        scenario_id,
        seq,
        config,
        AssetKind::Collage,
        None,
        &bytes,
        collage.image.dimensions(),
        "collage.png".into(),
    );
    sidecar.tile_boxes = collage.tile_boxes.clone();
    Ok((collage, RenderedAsset { sidecar, bytes }))
}

pub fn render_frames(scenario_id: &str, seq: &FrameSequence, config: &SamplingConfig) -> Result<Vec<RenderedAsset>, FrameError> {
    seq.frames
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let scaled = scale_frame(f, config.resolution)?;
            let bytes = encode_png(&scaled)?;
            let sidecar = base_sidecar(
                scenario_id,
                seq,
                config,
                AssetKind::Frame,
                Some(k),
                &bytes,
                scaled.dimensions(),
                format!("frame_{k:02}.png"),
            );
            Ok(RenderedAsset { sidecar, bytes })
        })
        .collect()
}

/// GIF of the scaled frames with `delay_ms` per frame. `kind` is `Gif` for a
/// sampled sequence or `Clip` for a native-rate segment.
pub fn render_gif(
    scenario_id: &str,
    seq: &FrameSequence,
    config: &SamplingConfig,
    delay_ms: u32,
    kind: AssetKind,
) -> Result<RenderedAsset, FrameError> {
    let scaled = FrameSequence {
        frames: seq
            .frames
            .iter()
            .map(|f| scale_frame(f, config.resolution))
            .collect::<Result<_, _>>()?,
        ..seq.clone()
    };
    let gif = compose_gif(&scaled, delay_ms)?;
    let file = match kind {
        AssetKind::Clip => "clip.gif",
        _ => "sequence.gif",
    };
    let mut sidecar = base_sidecar(
        scenario_id,
        seq,
        config,
        kind,
        None,
        &gif.bytes,
        (gif.width, gif.height),
        file.into(),
    );
    sidecar.frame_delay_ms = Some(delay_ms);
    Ok(RenderedAsset {
        sidecar,
        bytes: gif.bytes,
    })
}

/// Writes `asset` and `<file>.json` under `dir`, returning the asset path.
pub fn write_asset(dir: &Path, asset: &RenderedAsset) -> Result<PathBuf, FrameError> {
    std::fs::create_dir_all(dir).map_err(|e| FrameError::Io(e.to_string()))?;
    let path = dir.join(&asset.sidecar.file);
    std::fs::write(&path, &asset.bytes).map_err(|e| FrameError::Io(e.to_string()))?;
    let side = serde_json::to_string_pretty(&asset.sidecar).expect("sidecar serializes");
    std::fs::write(dir.join(format!("{}.json", asset.sidecar.file)), side)
        .map_err(|e| FrameError::Io(e.to_string()))?;
    Ok(path)
}

/// Directory holding one scenario's assets for one configuration.
pub fn asset_dir(out_dir: &Path, scenario_id: &str, config: &SamplingConfig) -> PathBuf {
    out_dir.join(sanitize(scenario_id)).join(config.key())
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

/// Samples one scenario and writes its model-facing assets (collage or
/// per-frame PNGs) and, if requested, the looping GIF.
pub fn generate_assets(
    source: &ScenarioSource,
    base_dir: Option<&Path>,
    config: &SamplingConfig,
    out_dir: &Path,
    with_gif: bool,
) -> Result<Vec<AssetSidecar>, FrameError> {
    let seq = sample_frames(source, base_dir, config.interval_ms, config.frame_count)?;
    let dir = asset_dir(out_dir, &source.scenario_id, config);
    let mut written = Vec::new();
    match config.mode {
        PresentationMode::Collage => {
            let (_, asset) = render_collage(&source.scenario_id, &seq, config)?;
            write_asset(&dir, &asset)?;
            written.push(asset.sidecar);
        }
        PresentationMode::Separate | PresentationMode::Batch => {
            for asset in render_frames(&source.scenario_id, &seq, config)? {
                write_asset(&dir, &asset)?;
                written.push(asset.sidecar);
            }
        }
    }
    if with_gif {
        let asset = render_gif(&source.scenario_id, &seq, config, config.interval_ms, AssetKind::Gif)?;
        write_asset(&dir, &asset)?;
        written.push(asset.sidecar);
    }
    Ok(written)
}
