use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::prompt::render_key;
use crate::scene::{AnnotationSchema, AnswerKey, SamplingConfig};

fn default_accuracy() -> f64 {
    0.6
}

/// Behavior of the offline mock model.
///
/// `adjust` shifts every category's probability for configs matching a
/// selector: `resolution=1`, `frames=4`, `interval=200`, `grid=2x2` or
/// `mode=batch`. Shifts add up and the result is clamped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockProfile {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_accuracy")]
    pub default_accuracy: f64,
    /// Per-category probability of answering correctly, by category name.
    #[serde(default)]
    pub accuracy: BTreeMap<String, f64>,
    #[serde(default)]
    pub adjust: BTreeMap<String, f64>,
    #[serde(default)]
    pub refusal_rate: f64,
    /// Reported latency in seconds; jittered by up to ±20 %.
    #[serde(default)]
    pub latency_s: f64,
}

impl Default for MockProfile {
    fn default() -> Self {
        Self {
            seed: 0,
            default_accuracy: default_accuracy(),
            accuracy: BTreeMap::new(),
            adjust: BTreeMap::new(),
            refusal_rate: 0.0,
            latency_s: 0.0,
        }
    }
}

/// What the mock produced for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct MockReply {
    pub text: String,
    pub latency_s: f64,
}

fn selectors(config: &SamplingConfig) -> [String; 5] {
    [
        format!("resolution={}", config.resolution.level()),
        format!("frames={}", config.frame_count),
        format!("interval={}", config.interval_ms),
        format!("grid={}x{}", config.grid.rows, config.grid.cols),
        format!("mode={}", config.mode.as_str()),
    ]
}

impl MockProfile {
    /// Always answers correctly.
    pub fn perfect(seed: u64) -> Self {
        Self {
            seed,
            default_accuracy: 1.0,
            ..Self::default()
        }
    }

    pub fn probability(&self, category: &str, config: &SamplingConfig) -> f64 {
        let base = self
            .accuracy
            .get(category)
            .copied()
            .unwrap_or(self.default_accuracy);
        let shift: f64 = selectors(config)
            .iter()
            .filter_map(|s| self.adjust.get(s))
            .sum();
        (base + shift).clamp(0.0, 1.0)
    }

    fn rng(&self, scenario_id: &str, config: &SamplingConfig) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(scenario_id.as_bytes());
        h.update([0]);
        h.update(config.key().as_bytes());
        ChaCha8Rng::from_seed(h.finalize().into())
    }

    /// The key the mock answers with, or `None` for a refusal.
    pub fn answer(
        &self,
        schema: &AnnotationSchema,
        scenario_id: &str,
        config: &SamplingConfig,
        truth: &AnswerKey,
    ) -> Option<AnswerKey> {
        let mut rng = self.rng(scenario_id, config);
        if self.refusal_rate > 0.0 && rng.random::<f64>() < self.refusal_rate {
            return None;
        }
        let letters = schema
            .categories()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let right = truth.get(i).unwrap_or(c.default_letter());
                let p = self.probability(&c.name, config);
                if rng.random::<f64>() < p {
                    return right;
                }
                let others: Vec<char> = c.letters().filter(|&l| l != right).collect();
                if others.is_empty() {
                    right
                } else {
                    others[rng.random_range(0..others.len())]
                }
            })
            .collect();
        Some(AnswerKey::new(letters))
    }

    pub fn reply(
        &self,
        schema: &AnnotationSchema,
        scenario_id: &str,
        config: &SamplingConfig,
        truth: &AnswerKey,
    ) -> MockReply {
        let mut rng = self.rng(scenario_id, config);
        // separate stream from answer(): skip ahead past its draws
        for _ in 0..=schema.len() * 2 {
            rng.random::<u64>();
        }
        let latency_s = self.latency_s * (0.8 + 0.4 * rng.random::<f64>());
        let text = match self.answer(schema, scenario_id, config, truth) {
            Some(key) => format!(
                "Looking at the sequence in order, here is my classification.\n{}",
                render_key(&key)
            ),
            None => "I'm sorry, I can't help classify these images.".to_string(),
        };
        MockReply { text, latency_s }
    }
}
