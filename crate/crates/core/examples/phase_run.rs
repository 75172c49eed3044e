//! Runs the resolution phase against the mock model, stops it part way and
//! resumes it. The run directory holds everything needed to resume.
//!
//!     cargo run --example phase_run -- [work_dir]

use std::path::PathBuf;

use seqscene::annotate::{extract_manifest, write_truths};
use seqscene::frames::synth::write_synthetic_clip;
use seqscene::gateway::{Gateway, MockProfile, ModelEndpoint};
use seqscene::prompt::PromptTemplate;
use seqscene::protocol::{create_run, execute_run, now_rfc3339, PhasePlan, RunLimits, RunManifest, RunOptions};
use seqscene::scene::{default_covla_schema, Manifest, ScenarioSource};

const CAPTIONS: &[&str] = &[
    "The ego vehicle is moving straight at a high speed.",
    "The ego vehicle is stopped at a red light behind a car.",
    "The ego vehicle is turning left at a low speed.",
    "The ego vehicle is moving slowly and following a truck.",
    "The ego vehicle is accelerating on a straight road.",
];

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let work = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("seqscene-phase-run"));
    let schema = default_covla_schema();

    let mut scenarios = Vec::new();
    for (i, caption) in CAPTIONS.iter().enumerate() {
        let id = format!("demo-{i}");
        write_synthetic_clip(&work.join("clips").join(&id), 10.0, 40, (192, 108), i as u64)?;
        scenarios.push(ScenarioSource {
            scenario_id: id.clone(),
            video_ref: format!("clips/{id}"),
            caption: caption.to_string(),
            start_offset_ms: 0,
            dataset_tag: "synthetic".into(),
        });
    }
    let manifest_path = work.join("manifest.jsonl");
    std::fs::write(&manifest_path, Manifest::from_scenarios(scenarios).to_jsonl())?;
    let truths_path = work.join("truths.jsonl");
    let extracted = extract_manifest(&Manifest::load(&manifest_path)?, &schema);
    write_truths(&truths_path, &extracted.truths)?;

    let run = RunManifest {
        run_id: format!("mock-{}", &uuid::Uuid::new_v4().simple().to_string()[..8]),
        created_at: now_rfc3339(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        endpoint: ModelEndpoint::mock_model("mock-demo", MockProfile { seed: 1, ..MockProfile::default() }),
        plans: vec![PhasePlan::resolution_phase()],
        schema,
        template: PromptTemplate::default(),
        manifest_path: manifest_path.display().to_string(),
        truths_path: Some(truths_path.display().to_string()),
        // uncurated truths are fine for a demo
        options: RunOptions { include_uncurated: true, ..RunOptions::default() },
    };
    let dir = create_run(&work.join("runs"), &run)?;
    let gateway = Gateway::new(run.endpoint.clone());

    let first = execute_run(&dir, &gateway, RunLimits { max_new_records: Some(25) }).await?;
    println!("first pass: {} new, interrupted {}", first.new_records, first.interrupted);
    let second = execute_run(&dir, &gateway, RunLimits::default()).await?;
    println!("resumed:    {} new, {} total, shortfalls {}", second.new_records, second.records_total, second.shortfalls.len());
    println!("run directory {}", dir.display());
    Ok(())
}

