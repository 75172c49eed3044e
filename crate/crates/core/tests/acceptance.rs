//! Acceptance checks, one line each:
//!
//! `PASS|FAIL  <criterion>  <elapsed>  <detail>`
//!
//! Runs without the libtest harness so the report prints in order. The
//! process exits non-zero if any criterion fails.

mod common;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use seqscene::annotate::extract;
use seqscene::frames::{compose_collage, enumerate_grids, FrameSequence};
use seqscene::gateway::{Gateway, MockProfile, ModelEndpoint, TransportStatus};
use seqscene::metrics::stats::f_sf;
use seqscene::metrics::{build_report, one_way_anova, score, Averaging, ScoreOptions};
use seqscene::prompt::{parse_response, ParseStatus, ParsedResponse, PromptTemplate};
use seqscene::protocol::{
    create_run, execute_run, expansion_counts, load_records, now_rfc3339, Dimension, EvaluationRecord,
    ImagePolicy, PhasePlan, RunLimits, RunManifest, RunOptions, RECORDS_FILE,
};
use seqscene::scene::{
    default_covla_schema, AnswerKey, GridLayout, PresentationMode, Resolution, SamplingConfig, MAX_FRAMES,
};
use seqscene::service::{BaselineService, HumanPlan, ServiceConfig};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn(&tokio::runtime::Runtime) -> Check,
}

fn main() {
    let runtime = tokio::runtime::Runtime::new().unwrap();
    let criteria = [
        Criterion { name: "grid law", budget: Duration::from_secs(1), run: grid_law },
        Criterion { name: "collage exactness", budget: Duration::from_secs(30), run: collage_exactness },
        Criterion { name: "annotation oracle", budget: Duration::MAX, run: annotation_oracle },
        Criterion { name: "response parsing", budget: Duration::MAX, run: response_parsing },
        Criterion { name: "metric oracle", budget: Duration::MAX, run: metric_oracle },
        Criterion { name: "statistics oracle", budget: Duration::MAX, run: statistics_oracle },
        Criterion { name: "protocol expansion", budget: Duration::MAX, run: protocol_expansion },
        Criterion { name: "end-to-end recovery", budget: Duration::from_secs(300), run: end_to_end },
        Criterion { name: "human/model symmetry", budget: Duration::MAX, run: human_model_symmetry },
    ];
    let mut failed = 0;
    for c in &criteria {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| (c.run)(&runtime)))
            .unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = started.elapsed();
        let outcome = outcome.and_then(|d| {
            if elapsed <= c.budget {
                Ok(d)
            } else {
                Err(format!("took {elapsed:.2?}, budget {:?}", c.budget))
            }
        });
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => {
                failed += 1;
                ("FAIL", d.as_str())
            }
        };
        println!("{tag}  {:<22} {:>9.3}s  {detail}", c.name, elapsed.as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn grid_law(_: &tokio::runtime::Runtime) -> Check {
    let mut total = 0;
    for n in 1..=MAX_FRAMES {
        let got: HashSet<(u32, u32)> = enumerate_grids(n).unwrap().iter().map(|g| (g.rows, g.cols)).collect();
        let mut oracle = HashSet::new();
        for r in 1..=10u32 {
            for c in 1..=10u32 {
                if r * c == n {
                    oracle.insert((r, c));
                }
            }
        }
        ensure(got == oracle, || format!("N={n}: {got:?} != {oracle:?}"))?;
        total += got.len();
    }
    ensure(total == 27, || format!("{total} layouts"))?;
    let six: HashSet<(u32, u32)> = enumerate_grids(6).unwrap().iter().map(|g| (g.rows, g.cols)).collect();
    ensure(six == HashSet::from([(1, 6), (2, 3), (3, 2), (6, 1)]), || format!("N=6: {six:?}"))?;
    Ok("27 layouts, N=6 = {1x6, 2x3, 3x2, 6x1}".into())
}

fn collage_exactness(_: &tokio::runtime::Runtime) -> Check {
    let mut checked = 0;
    for level in 1..=6u8 {
        let res = Resolution::from_level(level).unwrap();
        let (w, h) = (res.width(), res.height());
        for n in 1..=MAX_FRAMES {
            let frames: Vec<image::RgbImage> = (0..n)
                .map(|k| image::RgbImage::from_pixel(w, h, image::Rgb([(k * 25) as u8, 255 - (k * 20) as u8, 7 * k as u8])))
                .collect();
            let seq = FrameSequence::from_frames(frames.clone(), 200);
            for grid in enumerate_grids(n).unwrap() {
                let config = SamplingConfig::new(200, n, res, grid, PresentationMode::Collage).unwrap();
                let collage = compose_collage(&seq, &config).map_err(|e| e.to_string())?;
                ensure(collage.image.dimensions() == (grid.cols * w, grid.rows * h), || {
                    format!("{} is {:?}", config.key(), collage.image.dimensions())
                })?;
                for (k, frame) in frames.iter().enumerate() {
                    let tile = collage.crop(k).ok_or("missing tile")?;
                    ensure(tile.as_raw() == frame.as_raw(), || format!("{} tile {k} differs", config.key()))?;
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} (level, grid) collages pixel-exact"))
}

fn annotation_oracle(_: &tokio::runtime::Runtime) -> Check {
    let schema = default_covla_schema();
    let worked = extract("The ego vehicle is moving straight at a high speed", &schema).map_err(|e| e.to_string())?;
    ensure(worked.key.to_string() == "AABACBB", || format!("worked example gave {}", worked.key))?;
    let corpus = common::read_jsonl("captions.jsonl");
    ensure(corpus.len() >= 20, || format!("only {} captions", corpus.len()))?;
    let mut wrong = Vec::new();
    for c in &corpus {
        let got = extract(c["caption"].as_str().unwrap(), &schema).map_err(|e| e.to_string())?;
        if got.key.to_string() != c["expected"].as_str().unwrap() {
            wrong.push(format!("{}: {} != {}", c["scenario_id"], got.key, c["expected"]));
        }
    }
    ensure(wrong.is_empty(), || wrong.join("; "))?;
    Ok(format!("worked example AABACBB, {}/{} captions match", corpus.len(), corpus.len()))
}

fn response_parsing(_: &tokio::runtime::Runtime) -> Check {
    let schema = default_covla_schema();
    let cases = common::read_jsonl("responses.jsonl");
    ensure(cases.len() >= 10, || format!("only {} responses", cases.len()))?;
    let mut wrong = Vec::new();
    for c in &cases {
        let got = parse_response(c["text"].as_str().unwrap(), &schema);
        let status = serde_json::to_value(got.status).unwrap();
        let key = got.key.as_ref().map(ToString::to_string);
        if status != c["status"] || key.as_deref() != c["key"].as_str() {
            wrong.push(format!("{}: {status} {key:?}", c["id"]));
        }
    }
    ensure(wrong.is_empty(), || wrong.join("; "))?;
    let dup = cases.iter().find(|c| c["id"] == "duplicated-key").ok_or("no duplicated-key fixture")?;
    let got = parse_response(dup["text"].as_str().unwrap(), &schema);
    ensure(got.key.as_ref().map(ToString::to_string).as_deref() == Some("AACACBB"), || "last key did not win".into())?;
    Ok(format!("{}/{} fixtures classified as labeled, last complete key wins", cases.len(), cases.len()))
}

fn record(id: usize, subject: &str, truth: AnswerKey, predicted: ParsedResponse, config: SamplingConfig) -> EvaluationRecord {
    EvaluationRecord {
        record_id: format!("r{id}"),
        scenario_id: format!("s{}", id % 37),
        model_id: Some(subject.into()),
        evaluator_id: None,
        presentation: config.mode.as_str().into(),
        config,
        predicted,
        truth: seqscene::annotate::GroundTruth {
            scenario_id: format!("s{}", id % 37),
            key: truth,
            matched_spans: Vec::new(),
            needs_curation: false,
        },
        latency_s: 1.0,
        timestamp: now_rfc3339(),
        phase: Some(1),
        draw_index: id as u32,
        transport: TransportStatus::Ok,
        attempts: 1,
        prompt_sha256: None,
    }
}

/// Seeded records: mostly parsed with per-letter noise, some refusals and
/// unparseable replies.
fn synthetic_records(n: usize, seed: u64) -> Vec<EvaluationRecord> {
    let schema = default_covla_schema();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = SamplingConfig::new(200, 4, Resolution::from_level(1).unwrap(), GridLayout::new(2, 2).unwrap(), PresentationMode::Collage).unwrap();
    (0..n)
        .map(|i| {
            let truth = common::random_key(&schema, &mut rng);
            let roll: f64 = rng.random();
            let predicted = if roll < 0.05 {
                ParsedResponse { status: ParseStatus::Refusal, key: None, raw_text: "I'm sorry".into() }
            } else if roll < 0.08 {
                ParsedResponse { status: ParseStatus::Unparseable, key: None, raw_text: "?".into() }
            } else {
                let letters = schema
                    .categories()
                    .iter()
                    .zip(truth.letters())
                    .map(|(c, t)| {
                        if rng.random_bool(0.6) {
                            *t
                        } else {
                            c.options()[rng.random_range(0..c.options().len())].0
                        }
                    })
                    .collect();
                ParsedResponse::parsed(AnswerKey::new(letters), "")
            };
            record(i, "synthetic", truth, predicted, config)
        })
        .collect()
}

fn metric_oracle(_: &tokio::runtime::Runtime) -> Check {
    let schema = default_covla_schema();
    let records = synthetic_records(1000, 42);
    let report = score(&records, &schema, &ScoreOptions::default()).map_err(|e| e.to_string())?;
    let parsed: Vec<&EvaluationRecord> = records.iter().filter(|r| r.predicted.status == ParseStatus::Parsed).collect();
    let mut max_err: f64 = 0.0;
    let mut accs = Vec::new();
    for (i, cat) in schema.categories().iter().enumerate() {
        let truth_of = |r: &EvaluationRecord| r.truth.key.letters()[i];
        let pred_of = |r: &EvaluationRecord| r.predicted.key.as_ref().unwrap().letters()[i];
        let correct = parsed.iter().filter(|r| truth_of(r) == pred_of(r)).count();
        let acc = correct as f64 / parsed.len() as f64;
        let (mut p_sum, mut r_sum, mut f_sum, mut present) = (0.0, 0.0, 0.0, 0usize);
        for (letter, _) in cat.options() {
            let support = parsed.iter().filter(|r| truth_of(r) == *letter).count();
            if support == 0 {
                continue;
            }
            let claimed = parsed.iter().filter(|r| pred_of(r) == *letter).count();
            let tp = parsed.iter().filter(|r| truth_of(r) == *letter && pred_of(r) == *letter).count();
            let p = if claimed == 0 { 0.0 } else { tp as f64 / claimed as f64 };
            let r = tp as f64 / support as f64;
            p_sum += p;
            r_sum += r;
            f_sum += if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            present += 1;
        }
        let got = &report.categories[i];
        for (a, b) in [
            (got.accuracy, acc),
            (got.precision, p_sum / present as f64),
            (got.recall, r_sum / present as f64),
            (got.f1, f_sum / present as f64),
        ] {
            max_err = max_err.max((a - b).abs());
        }
        accs.push(acc);
    }
    ensure(max_err <= 1e-12, || format!("max deviation {max_err:e}"))?;
    let weights = [0.3, 0.1, 0.1, 0.1, 0.2, 0.1, 0.1];
    let weighted = score(&records, &schema, &ScoreOptions {
        weights: Some(seqscene::scene::ScoreWeights::new(weights.to_vec()).unwrap()),
        ..ScoreOptions::default()
    })
    .map_err(|e| e.to_string())?;
    let oracle: f64 = weights.iter().zip(&accs).map(|(w, a)| w * a).sum();
    ensure((weighted.score - oracle).abs() <= 1e-12, || format!("weighted score {} vs {oracle}", weighted.score))?;
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    ensure(report.score == mean, || format!("equal-weight score {} != mean {mean}", report.score))?;
    Ok(format!("1000 records, max deviation {max_err:.1e}, equal-weight score == mean accuracy"))
}

fn statistics_oracle(_: &tokio::runtime::Runtime) -> Check {
    let fx: Value = serde_json::from_str(&std::fs::read_to_string(common::fixture("anova_groups.json")).unwrap()).unwrap();
    let groups: Vec<Vec<f64>> = serde_json::from_value(fx["groups"].clone()).unwrap();
    let a = one_way_anova(&groups).ok_or("anova undefined")?;
    let close = |x: f64, key: &str| (x - fx[key].as_f64().unwrap()).abs() <= 1e-9;
    ensure(close(a.ss_between, "ss_between") && close(a.ss_within, "ss_within") && close(a.eta_squared, "eta_squared"), || {
        format!("SS {} / {}, eta^2 {}", a.ss_between, a.ss_within, a.eta_squared)
    })?;
    let equal = one_way_anova(&[vec![1.0, 2.0, 3.0], vec![0.0, 2.0, 4.0], vec![2.0, 2.0, 2.0]]).unwrap();
    ensure(equal.eta_squared == 0.0, || format!("equal means: eta^2 {}", equal.eta_squared))?;
    let constant = one_way_anova(&[vec![1.0, 1.0], vec![3.0, 3.0, 3.0], vec![5.0]]).unwrap();
    ensure(constant.eta_squared == 1.0, || format!("zero within: eta^2 {}", constant.eta_squared))?;
    // d1 = 2 has a closed form: P(F > f) = (1 + 2f/d2)^(-d2/2)
    let mut last = f64::INFINITY;
    let mut worst: f64 = 0.0;
    for i in 0..=400 {
        let f = i as f64 * 0.05;
        let p = f_sf(f, 2.0, 7.0);
        ensure(p <= last, || format!("p rose at F={f}"))?;
        last = p;
        let exact = (1.0 + 2.0 * f / 7.0).powf(-3.5);
        worst = worst.max((p - exact).abs() / exact);
    }
    ensure(worst <= 1e-10, || format!("closed form deviation {worst:e}"))?;
    for (d1, d2) in [(1.0, 10.0), (3.0, 36.0), (5.0, 1049.0), (9.0, 4.0)] {
        let dist = statrs::distribution::FisherSnedecor::new(d1, d2).unwrap();
        for f in [0.1, 0.8, 1.0, 2.5, 6.0, 15.0] {
            let want = 1.0 - statrs::distribution::ContinuousCDF::cdf(&dist, f);
            let got = f_sf(f, d1, d2);
            ensure((got - want).abs() <= 1e-9, || format!("F({d1},{d2}) at {f}: {got} vs {want}"))?;
        }
    }
    Ok(format!("SS {} / {}, eta^2 {:.2}, p monotone and within {worst:.1e} of closed form", a.ss_between, a.ss_within, a.eta_squared))
}

fn mock_run(dir: &Path, corpus: &common::Corpus, plans: Vec<PhasePlan>, profile: MockProfile, images: ImagePolicy) -> RunManifest {
    let run = RunManifest {
        run_id: "run".into(),
        created_at: now_rfc3339(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        endpoint: ModelEndpoint::mock_model("mock-planted", profile),
        plans,
        schema: default_covla_schema(),
        template: PromptTemplate::default(),
        manifest_path: corpus.manifest_path.display().to_string(),
        truths_path: Some(corpus.truths_path.display().to_string()),
        options: RunOptions { images, ..RunOptions::default() },
    };
    create_run(dir, &run).unwrap();
    run
}

fn protocol_expansion(rt: &tokio::runtime::Runtime) -> Check {
    let plans = PhasePlan::standard();
    let (counts, total) = expansion_counts(&plans).map_err(|e| e.to_string())?;
    ensure(counts == [6, 20, 20, 54, 6] && total == 106, || format!("{counts:?} total {total}"))?;
    ensure(plans.iter().all(|p| p.evaluations_per_config == 10), || "evaluations per config is not 10".into())?;

    let tmp = tempfile::tempdir().unwrap();
    let corpus = common::corpus(&tmp.path().join("data"), 12, 3, true);
    let phase1 = || vec![PhasePlan::resolution_phase()];
    let full = tmp.path().join("full");
    let run = mock_run(&full, &corpus, phase1(), MockProfile::default(), ImagePolicy::Render);
    let gateway = Gateway::new(run.endpoint.clone());
    let dir = full.join("run");
    let s = rt.block_on(execute_run(&dir, &gateway, RunLimits::default())).map_err(|e| e.to_string())?;
    let n = load_records(dir.join(RECORDS_FILE)).unwrap().len();
    ensure(n == 60 && s.new_records == 60, || format!("phase 1 run wrote {n} records"))?;

    let cut = tmp.path().join("cut");
    mock_run(&cut, &corpus, phase1(), MockProfile::default(), ImagePolicy::Render);
    let dir = cut.join("run");
    let first = rt
        .block_on(execute_run(&dir, &gateway, RunLimits { max_new_records: Some(37) }))
        .map_err(|e| e.to_string())?;
    ensure(first.interrupted && first.records_total == 37, || format!("interrupted at {}", first.records_total))?;
    rt.block_on(execute_run(&dir, &gateway, RunLimits::default())).map_err(|e| e.to_string())?;
    let records = load_records(dir.join(RECORDS_FILE)).unwrap();
    let ids: HashSet<&str> = records.iter().map(|r| r.record_id.as_str()).collect();
    ensure(records.len() == 60 && ids.len() == 60, || format!("{} records, {} distinct", records.len(), ids.len()))?;
    Ok("6/20/20/54/6 = 106 configs x 10; phase 1 = 60 records; resume 37 -> 60, no duplicates".into())
}

fn planted_profile() -> MockProfile {
    MockProfile {
        seed: 11,
        default_accuracy: 0.6,
        accuracy: BTreeMap::from([("motion state".to_string(), 0.9), ("acceleration".to_string(), 0.1)]),
        ..MockProfile::default()
    }
}

fn end_to_end(rt: &tokio::runtime::Runtime) -> Check {
    let schema = default_covla_schema();
    let tmp = tempfile::tempdir().unwrap();
    let corpus = common::corpus(&tmp.path().join("data"), 60, 5, false);
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let root = tmp.path().join(name);
        let run = mock_run(&root, &corpus, PhasePlan::standard(), planted_profile(), ImagePolicy::Placeholder);
        let dir = root.join("run");
        rt.block_on(execute_run(&dir, &Gateway::new(run.endpoint), RunLimits::default()))
            .map_err(|e| e.to_string())?;
        runs.push(load_records(dir.join(RECORDS_FILE)).unwrap());
    }
    let fingerprint = |rs: &[EvaluationRecord]| {
        let mut v: Vec<(String, String, String)> = rs
            .iter()
            .map(|r| (r.record_id.clone(), r.scenario_id.clone(), r.predicted.raw_text.clone()))
            .collect();
        v.sort();
        v
    };
    ensure(fingerprint(&runs[0]) == fingerprint(&runs[1]), || "two runs with one seed differ".into())?;
    let records = &runs[0];
    let report = score(records, &schema, &ScoreOptions::default()).map_err(|e| e.to_string())?;
    let mut details = Vec::new();
    for (name, planted) in [("motion state", 0.9), ("acceleration", 0.1)] {
        let c = report.categories.iter().find(|c| c.name == name).unwrap();
        ensure(c.counted >= 400, || format!("{name}: only {} records", c.counted))?;
        ensure((c.accuracy - planted).abs() <= 0.05, || format!("{name}: {:.3} vs planted {planted}", c.accuracy))?;
        details.push(format!("{name} {:.3} (planted {planted})", c.accuracy));
    }
    Ok(format!("{} records, deterministic; {}", records.len(), details.join(", ")))
}

async fn call(client: &reqwest::Client, method: reqwest::Method, url: String, body: Option<Value>) -> (u16, Vec<u8>) {
    let mut req = client.request(method, url);
    if let Some(b) = body {
        req = req.header("content-type", "application/json").body(serde_json::to_vec(&b).unwrap());
    }
    let resp = req.send().await.unwrap();
    let status = resp.status().as_u16();
    (status, resp.bytes().await.unwrap().to_vec())
}

fn human_model_symmetry(rt: &tokio::runtime::Runtime) -> Check {
    let schema = default_covla_schema();
    let tmp = tempfile::tempdir().unwrap();
    let corpus = common::corpus(&tmp.path().join("data"), 12, 9, true);
    let plan = HumanPlan::from_phase_plans(&[PhasePlan::resolution_phase()], &corpus.truths, 2);
    let service = BaselineService::open(ServiceConfig {
        schema: schema.clone(),
        manifest: corpus.manifest,
        truths: corpus.truths.clone(),
        plan,
        asset_dir: tmp.path().join("assets"),
        data_dir: tmp.path().join("service"),
        ui_dir: None,
    })
    .map_err(|e| e.to_string())?;

    let exported: Vec<u8> = rt.block_on(async {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        tokio::spawn(service.serve(listener));
        let client = reqwest::Client::new();
        let (status, body) = call(&client, reqwest::Method::POST, format!("{base}/sessions"), Some(json!({"evaluator_id": "rater-1", "mode": "gif", "seed": 4}))).await;
        assert_eq!(status, 201);
        let session: Value = serde_json::from_slice(&body).unwrap();
        let id = session["session_id"].as_str().unwrap().to_string();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        loop {
            let (_, body) = call(&client, reqwest::Method::GET, format!("{base}/sessions/{id}/next"), None).await;
            let item: Value = serde_json::from_slice(&body).unwrap();
            if item["status"] == "complete" {
                break;
            }
            let (status, _) = call(&client, reqwest::Method::GET, format!("{base}{}", item["asset"]["url"].as_str().unwrap()), None).await;
            assert_eq!(status, 200);
            let key = common::random_key(&schema, &mut rng).to_string();
            let (status, _) = call(
                &client,
                reqwest::Method::POST,
                format!("{base}/sessions/{id}/answers"),
                Some(json!({"scenario_id": item["scenario_id"], "key": key, "view_duration_s": 4.2})),
            )
            .await;
            assert_eq!(status, 200);
        }
        call(&client, reqwest::Method::GET, format!("{base}/export"), None).await.1
    });

    let text = String::from_utf8(exported).map_err(|e| e.to_string())?;
    let mut human = Vec::new();
    for line in text.lines() {
        let r: EvaluationRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        ensure(serde_json::to_value(&r).unwrap() == serde_json::from_str::<Value>(line).unwrap(), || "record changed on re-read".into())?;
        human.push(r);
    }
    ensure(human.len() == 12, || format!("{} human records", human.len()))?;

    let model_dir = tmp.path().join("model");
    let model_corpus = common::corpus(&tmp.path().join("data2"), 12, 9, false);
    let run = mock_run(&model_dir, &model_corpus, vec![PhasePlan::resolution_phase()], planted_profile(), ImagePolicy::Placeholder);
    rt.block_on(execute_run(&model_dir.join("run"), &Gateway::new(run.endpoint), RunLimits::default()))
        .map_err(|e| e.to_string())?;
    let mut all = load_records(model_dir.join("run").join(RECORDS_FILE)).unwrap();
    all.extend(human);
    let options = ScoreOptions { averaging: Averaging::Macro, ..ScoreOptions::default() };
    let report = build_report(&all, &schema, &options, &BTreeMap::new(), &[Dimension::Resolution]).map_err(|e| e.to_string())?;
    let subjects: Vec<(&str, bool)> = report.table.rows.iter().map(|r| (r.subject.as_str(), r.human)).collect();
    ensure(subjects.contains(&("rater-1", true)) && subjects.contains(&("mock-planted", false)), || format!("table rows {subjects:?}"))?;
    ensure(report.table.columns.len() == 5 + schema.len() + 1, || "table shape".into())?;
    Ok(format!("12 exported records re-read unchanged; table rows {subjects:?}"))
}
