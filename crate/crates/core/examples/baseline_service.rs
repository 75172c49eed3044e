//! Starts the human-baseline service on a local port and walks one session
//! through it with a scripted client, then exports the answers.
//!
//!     cargo run --example baseline_service

use reqwest::Client;
use serde_json::{json, Value};

use seqscene::annotate::{extract_manifest, write_truths};
use seqscene::frames::synth::write_synthetic_clip;
use seqscene::protocol::PhasePlan;
use seqscene::scene::{default_covla_schema, Manifest, ScenarioSource};
use seqscene::service::{BaselineService, HumanPlan, ServiceConfig};

async fn call(client: &Client, method: reqwest::Method, url: String, body: Option<Value>) -> Result<Value, reqwest::Error> {
    let mut req = client.request(method, url);
    if let Some(b) = body {
        req = req.header("content-type", "application/json").body(b.to_string());
    }
    let text = req.send().await?.text().await?;
    Ok(serde_json::from_str(&text).unwrap_or(Value::String(text)))
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let work = std::env::temp_dir().join(format!("seqscene-service-{}", std::process::id()));
    let schema = default_covla_schema();
    let captions = [
        "The ego vehicle is moving straight at a high speed.",
        "The ego vehicle is stopped at a red light behind a car.",
        "The ego vehicle is turning right at a low speed.",
    ];
    let mut scenarios = Vec::new();
    for (i, caption) in captions.iter().enumerate() {
        let id = format!("demo-{i}");
        write_synthetic_clip(&work.join(&id), 10.0, 30, (192, 108), i as u64)?;
        scenarios.push(ScenarioSource {
            scenario_id: id.clone(),
            video_ref: id,
            caption: caption.to_string(),
            start_offset_ms: 0,
            dataset_tag: "synthetic".into(),
        });
    }
    std::fs::write(work.join("manifest.jsonl"), Manifest::from_scenarios(scenarios).to_jsonl())?;
    let manifest = Manifest::load(work.join("manifest.jsonl"))?;
    let truths = extract_manifest(&manifest, &schema).truths;
    write_truths(work.join("truths.jsonl"), &truths)?;

    // two resolution extremes, one scenario each
    let plan = HumanPlan::from_phase_plans(&[PhasePlan { resolutions: vec![1, 6], ..PhasePlan::resolution_phase() }], &truths, 1);
    let service = BaselineService::open(ServiceConfig {
        schema,
        manifest,
        truths,
        plan,
        asset_dir: work.join("assets"),
        data_dir: work.join("data"),
        ui_dir: None,
    })?;
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    tokio::spawn(service.serve(listener));
    println!("serving on {base}");

    let client = Client::new();
    let session = call(&client, reqwest::Method::POST, format!("{base}/sessions"), Some(json!({"evaluator_id": "demo-rater", "mode": "gif"}))).await?;
    let id = session["session_id"].as_str().unwrap_or_default().to_string();
    println!("session {id} with {} items", session["total"]);
    loop {
        let item = call(&client, reqwest::Method::GET, format!("{base}/sessions/{id}/next"), None).await?;
        if item["status"] == "complete" {
            break;
        }
        println!("item {}/{}: {} via {} ({}x{})", item["position"], item["total"], item["scenario_id"], item["asset"]["url"], item["asset"]["width"], item["asset"]["height"]);
        let body = json!({"scenario_id": item["scenario_id"], "key": "AABACBB", "view_duration_s": 5.0});
        let reply = call(&client, reqwest::Method::POST, format!("{base}/sessions/{id}/answers"), Some(body)).await?;
        println!("  -> {}", reply["status"]);
    }
    let export = call(&client, reqwest::Method::GET, format!("{base}/export?format=json"), None).await?;
    println!("export manifest {}", export["manifest"]);
    Ok(())
}
