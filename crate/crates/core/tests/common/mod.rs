#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use seqscene::annotate::{write_truths, GroundTruth};
use seqscene::frames::synth::write_synthetic_clip;
use seqscene::scene::{default_covla_schema, AnnotationSchema, AnswerKey, Manifest, ScenarioSource};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn read_jsonl(name: &str) -> Vec<Value> {
    std::fs::read_to_string(fixture(name))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// A key drawn uniformly per category, never all "does not apply".
pub fn random_key(schema: &AnnotationSchema, rng: &mut impl Rng) -> AnswerKey {
    loop {
        let letters: Vec<char> = schema
            .categories()
            .iter()
            .map(|c| {
                let opts = c.options();
                opts[rng.random_range(0..opts.len())].0
            })
            .collect();
        if letters != schema.default_letters() {
            return AnswerKey::new(letters);
        }
    }
}

pub struct Corpus {
    pub dir: PathBuf,
    pub manifest_path: PathBuf,
    pub truths_path: PathBuf,
    pub manifest: Manifest,
    pub truths: Vec<GroundTruth>,
}

/// `n` scenarios with random curated truths. With `clips`, each scenario
/// gets a 10 s synthetic clip at 10 fps (enough for 10 frames at 1 s);
/// otherwise `video_ref` points nowhere, which suits placeholder runs.
pub fn corpus(dir: &Path, n: usize, seed: u64, clips: bool) -> Corpus {
    let schema = default_covla_schema();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scenarios = Vec::new();
    let mut truths = Vec::new();
    for i in 0..n {
        let id = format!("s{i:03}");
        let video_ref = format!("clips/{id}");
        if clips {
            write_synthetic_clip(&dir.join(&video_ref), 10.0, 101, (64, 36), i as u64).unwrap();
        }
        scenarios.push(ScenarioSource {
            scenario_id: id.clone(),
            video_ref,
            caption: "The ego vehicle is moving straight at a high speed.".into(),
            start_offset_ms: 0,
            dataset_tag: "synthetic".into(),
        });
        truths.push(GroundTruth {
            scenario_id: id,
            key: random_key(&schema, &mut rng),
            matched_spans: Vec::new(),
            needs_curation: false,
        });
    }
    std::fs::create_dir_all(dir).unwrap();
    let manifest_path = dir.join("manifest.jsonl");
    std::fs::write(&manifest_path, Manifest::from_scenarios(scenarios).to_jsonl()).unwrap();
    let truths_path = dir.join("truths.jsonl");
    write_truths(&truths_path, &truths).unwrap();
    Corpus {
        dir: dir.to_path_buf(),
        manifest: Manifest::load(&manifest_path).unwrap(),
        manifest_path,
        truths_path,
        truths,
    }
}
