use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotate::GroundTruth;
use crate::protocol::{PhasePlan, ScenarioSampler};
use crate::scene::{PresentationMode, SamplingConfig};

/// One (scenario, config) pair shown to every evaluator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanPlanItem {
    pub scenario_id: String,
    pub config: SamplingConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<u8>,
}

/// The questionnaire: the fixed list of pairs every session covers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanPlan {
    pub items: Vec<HumanPlanItem>,
}

impl HumanPlan {
    /// Turns phase plans into questionnaire items, `per_config` scenarios per
    /// config. People see collages, GIFs or video rather than model
    /// presentation modes, so every config is recast as a collage and
    /// configs that then coincide are kept once.
    pub fn from_phase_plans(plans: &[PhasePlan], truths: &[GroundTruth], per_config: u32) -> Self {
        let mut pool: Vec<(String, String)> = truths
            .iter()
            .filter(|t| !t.needs_curation)
            .map(|t| (t.scenario_id.clone(), t.key.to_string()))
            .collect();
        pool.sort();
        let mut seen = HashSet::new();
        let mut items = Vec::new();
        for plan in plans {
            let Ok(configs) = plan.expand() else { continue };
            for mut config in configs {
                if config.mode != PresentationMode::Collage {
                    if config.grid.cells() != config.frame_count {
                        continue;
                    }
                    config.mode = PresentationMode::Collage;
                }
                if !seen.insert(config.key()) {
                    continue;
                }
                let mut sampler = ScenarioSampler::new(&pool, plan.seed, &format!("human/{}", config.key()));
                for d in 0..per_config {
                    if let Some(id) = sampler.draw(d) {
                        items.push(HumanPlanItem {
                            scenario_id: id.to_string(),
                            config,
                            phase: Some(plan.phase),
                        });
                    }
                }
            }
        }
        Self { items }
    }

    /// Reads `{"items": [...]}`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, String> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}
