//! Queries the deterministic mock model through the gateway, the same path
//! a real endpoint takes.
//!
//!     cargo run --example mock_gateway

use seqscene::frames::EncodedImage;
use seqscene::gateway::{expected_images, Gateway, MockProfile, ModelEndpoint, QueryContext};
use seqscene::prompt::{build_prompt, parse_response};
use seqscene::scene::{default_covla_schema, AnswerKey, GridLayout, PresentationMode, Resolution, SamplingConfig};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = default_covla_schema();
    let mut profile = MockProfile { seed: 42, default_accuracy: 0.7, ..MockProfile::default() };
    // high resolution helps this mock a little
    profile.adjust.insert("resolution=6".into(), 0.15);
    let gateway = Gateway::new(ModelEndpoint::mock_model("mock-demo", profile));
    let truth: AnswerKey = "AABACBB".parse()?;

    for level in [1, 6] {
        for mode in [PresentationMode::Collage, PresentationMode::Separate, PresentationMode::Batch] {
            let grid = if mode == PresentationMode::Collage { GridLayout::new(2, 2)? } else { GridLayout::row(4)? };
            let config = SamplingConfig::new(200, 4, Resolution::from_level(level)?, grid, mode)?;
            let bundle = build_prompt(&config, &schema);
            // the mock never looks at pixels
            let images = vec![EncodedImage::png(Vec::new()); expected_images(&config)];
            let ctx = QueryContext { scenario_id: "demo", schema: &schema, truth: Some(&truth) };
            let out = gateway.send(&bundle, &images, &config, ctx).await?;
            let parsed = parse_response(&out.raw_text, &schema);
            let key = parsed.key.map(|k| k.to_string()).unwrap_or_else(|| format!("{:?}", parsed.status));
            println!("level {level} {:<9} attempts {} -> {key} (truth {truth})", mode.as_str(), out.attempts);
        }
    }
    Ok(())
}
