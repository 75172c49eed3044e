//! Builds the prompt for one config and parses a few typical replies.
//!
//!     cargo run --example prompt_parse

use seqscene::prompt::{build_prompt, parse_response};
use seqscene::scene::{default_covla_schema, GridLayout, PresentationMode, Resolution, SamplingConfig};

fn main() {
    let schema = default_covla_schema();
    let config = SamplingConfig::new(200, 4, Resolution::from_level(3).unwrap(), GridLayout::new(2, 2).unwrap(), PresentationMode::Collage).unwrap();
    let bundle = build_prompt(&config, &schema);
    println!("--- system\n{}\n--- user\n{}\n--- sha256 {}", bundle.system_text, bundle.user_text, bundle.sha256());

    let replies = [
        "The car keeps its lane.\n1) A 2) A 3) B 4) A 5) C 6) B 7) B",
        "Answer: 1) A 2) A 3) B 4) A 5) C 6) B 7) B\nOn reflection: 1) A 2) A 3) C 4) A 5) C 6) B 7) B",
        "I'm sorry, I can't help with that.",
        "1) A 2) A 3) B",
    ];
    for text in replies {
        let parsed = parse_response(text, &schema);
        let key = parsed.key.map(|k| k.to_string()).unwrap_or_default();
        println!("{:<12?} {key:<8} {:?}", parsed.status, text.lines().last().unwrap_or(""));
    }
}
