//! Samples a synthetic clip and renders it the ways a subject can see it:
//! a PNG collage, separate frames and an animated GIF.
//!
//!     cargo run --example collage -- [out_dir]

use std::path::PathBuf;

use seqscene::frames::synth::write_synthetic_clip;
use seqscene::frames::{compose_collage, compose_gif, encode_png, gif_frame_delays, model_images, sample_frames};
use seqscene::scene::{GridLayout, PresentationMode, Resolution, SamplingConfig, ScenarioSource};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("seqscene-collage"));
    let clip = out.join("clip");
    // 6 s at 10 fps
    write_synthetic_clip(&clip, 10.0, 60, (320, 180), 7)?;
    let source = ScenarioSource {
        scenario_id: "demo".into(),
        video_ref: clip.display().to_string(),
        caption: "The ego vehicle is moving straight at a high speed.".into(),
        start_offset_ms: 500,
        dataset_tag: "synthetic".into(),
    };

    let config = SamplingConfig::new(300, 6, Resolution::from_level(2)?, GridLayout::new(2, 3)?, PresentationMode::Collage)?;
    let seq = sample_frames(&source, None, config.interval_ms, config.frame_count)?;
    println!("sampled native frames {:?} at {:?} ms", seq.native_indices, seq.timestamps_ms);

    let collage = compose_collage(&seq, &config)?;
    let (w, h) = collage.image.dimensions();
    std::fs::write(out.join("collage.png"), encode_png(&collage.image)?)?;
    println!("collage {w}x{h} ({} tiles of {}x{})", collage.tile_boxes.len(), config.resolution.width(), config.resolution.height());

    let separate = SamplingConfig { mode: PresentationMode::Separate, grid: GridLayout::row(6)?, ..config };
    println!("separate mode sends {} images", model_images(&seq, &separate)?.len());

    let gif = compose_gif(&seq, config.interval_ms)?;
    std::fs::write(out.join("sequence.gif"), &gif.bytes)?;
    println!("gif {}x{}, delays {:?} ms", gif.width, gif.height, gif_frame_delays(&gif.bytes)?);
    println!("wrote {}", out.display());
    Ok(())
}
