//! Sweeps all five phases with two mock models whose behavior is planted,
//! then scores them, compares them in one table and tests how much each
//! dimension moves the score.
//!
//!     cargo run --release --example metrics_report

use std::collections::BTreeMap;

use seqscene::annotate::GroundTruth;
use seqscene::gateway::{Gateway, MockProfile, ModelEndpoint};
use seqscene::metrics::{build_report, render_sensitivity, ScoreOptions};
use seqscene::prompt::PromptTemplate;
use seqscene::protocol::{run_plans, Dimension, ImagePolicy, PhasePlan, RecordStore, RunInputs, RunLimits, RunOptions};
use seqscene::scene::{default_covla_schema, AnswerKey, Manifest, ScenarioSource};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = default_covla_schema();
    let keys = ["AABACBB", "CDEBDAC", "ABBACBB", "BACBCBB", "AABBCBA", "AAAACBB"];
    let scenarios: Vec<ScenarioSource> = (0..30)
        .map(|i| ScenarioSource {
            scenario_id: format!("s{i:02}"),
            video_ref: "unused".into(),
            caption: "placeholder".into(),
            start_offset_ms: 0,
            dataset_tag: "synthetic".into(),
        })
        .collect();
    let truths: Vec<GroundTruth> = scenarios
        .iter()
        .enumerate()
        .map(|(i, s)| GroundTruth {
            scenario_id: s.scenario_id.clone(),
            key: keys[i % keys.len()].parse::<AnswerKey>().unwrap(),
            matched_spans: Vec::new(),
            needs_curation: false,
        })
        .collect();
    let manifest = Manifest::from_scenarios(scenarios);

    // "sharp" gains from resolution and collages; "steady" ignores the config
    let mut sharp = MockProfile { seed: 5, default_accuracy: 0.55, ..MockProfile::default() };
    sharp.adjust.insert("resolution=1".into(), -0.2);
    sharp.adjust.insert("resolution=6".into(), 0.25);
    sharp.adjust.insert("mode=batch".into(), -0.15);
    let steady = MockProfile { seed: 6, default_accuracy: 0.65, ..MockProfile::default() };

    let dir = tempfile_dir();
    let (store, _) = RecordStore::open(dir.join("records.jsonl"))?;
    let template = PromptTemplate::default();
    for (id, profile) in [("sharp", sharp), ("steady", steady)] {
        let gateway = Gateway::new(ModelEndpoint::mock_model(id, profile));
        let summary = run_plans(
            &PhasePlan::standard(),
            RunInputs { manifest: &manifest, truths: &truths, schema: &schema, template: &template },
            &gateway,
            &store,
            None,
            &[],
            &RunOptions { images: ImagePolicy::Placeholder, ..RunOptions::default() },
            RunLimits::default(),
        )
        .await?;
        println!("{id}: {} records over {} configs", summary.new_records, summary.configs);
    }

    let records = store.records()?;
    let families = BTreeMap::from([("sharp".to_string(), "mock".to_string()), ("steady".to_string(), "mock".to_string())]);
    let report = build_report(&records, &schema, &ScoreOptions::default(), &families, &Dimension::ALL)?;
    println!("\n{}", report.table.to_text());
    for d in &report.dimensions {
        match &d.sensitivity {
            Some(s) => println!("{} {}", d.subject, render_sensitivity(s)),
            None => println!("{} {}: {}", d.subject, d.dimension.as_str(), d.unavailable.as_deref().unwrap_or("")),
        }
    }
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("seqscene-metrics-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
