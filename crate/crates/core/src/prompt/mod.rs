//! Prompt construction and answer-key parsing. Every model receives the same
//! template; only the configuration description changes.

mod parse;
mod template;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::frames::sample_times;
use crate::scene::{AnnotationSchema, PresentationMode, SamplingConfig};

pub use parse::{is_refusal_text, parse_response, render_key, ParseStatus, ParsedResponse};
pub use template::{key_format, render_questions, ModeClauses, PromptTemplate, TemplateError, PLACEHOLDERS};

/// What an attached image is, and for batch mode the text of its turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRole {
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub template_id: String,
    pub system_text: String,
    pub user_text: String,
    pub image_roles: Vec<ImageRole>,
}

impl PromptBundle {
    pub fn sha256(&self) -> String {
        crate::frames::sha256_hex(
            serde_json::to_string(self)
                .expect("bundle serializes")
                .as_bytes(),
        )
    }
}

fn vars(config: &SamplingConfig, schema: &AnnotationSchema) -> BTreeMap<&'static str, String> {
    let mut v = BTreeMap::new();
    v.insert("rows", config.grid.rows.to_string());
    v.insert("cols", config.grid.cols.to_string());
    v.insert("interval_ms", config.interval_ms.to_string());
    v.insert("frame_count", config.frame_count.to_string());
    v.insert("resolution_level", config.resolution.level().to_string());
    v.insert("width", config.resolution.width().to_string());
    v.insert("height", config.resolution.height().to_string());
    v.insert("questions", render_questions(schema));
    v.insert("key_format", key_format(schema.len()));
    v
}

/// Renders the system and user prompts for `config` with `template`.
pub fn build_prompt_with(
    template: &PromptTemplate,
    config: &SamplingConfig,
    schema: &AnnotationSchema,
) -> PromptBundle {
    let mut v = vars(config, schema);
    let clause = template::render(template.clause_for(config), &v);
    v.insert("mode_clause", clause);
    let user_text = template::render(&template.user, &v);
    let system_text = template::render(&template.system, &v);

    let times = sample_times(0, config.interval_ms, config.frame_count);
    let image_roles = match config.mode {
        PresentationMode::Collage => vec![ImageRole {
            description: format!(
                "collage {} of frames 1-{}",
                config.grid, config.frame_count
            ),
            turn_text: None,
        }],
        PresentationMode::Separate => times
            .iter()
            .enumerate()
            .map(|(k, t)| ImageRole {
                description: format!("frame {} of {} (t = {t} ms)", k + 1, config.frame_count),
                turn_text: None,
            })
            .collect(),
        PresentationMode::Batch => times
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let last = k + 1 == times.len();
                let turn_text = if last {
                    user_text.clone()
                } else {
                    let mut tv = v.clone();
                    tv.insert("index", (k + 1).to_string());
                    tv.insert("timestamp_ms", t.to_string());
                    template::render(&template.clauses.batch_turn, &tv)
                };
                ImageRole {
                    description: format!("frame {} of {} (t = {t} ms)", k + 1, config.frame_count),
                    turn_text: Some(turn_text),
                }
            })
            .collect(),
    };
    PromptBundle {
        template_id: template.template_id.clone(),
        system_text,
        user_text,
        image_roles,
    }
}

/// [`build_prompt_with`] using the shipped template.
pub fn build_prompt(config: &SamplingConfig, schema: &AnnotationSchema) -> PromptBundle {
    build_prompt_with(&PromptTemplate::default(), config, schema)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{default_covla_schema, GridLayout, Resolution};

    fn cfg(n: u32, rows: u32, cols: u32, mode: PresentationMode) -> SamplingConfig {
        SamplingConfig::new(
            200,
            n,
            Resolution::from_level(1).unwrap(),
            GridLayout::new(rows, cols).unwrap(),
            mode,
        )
        .unwrap()
    }

    #[test]
    fn collage_prompt_mentions_geometry_and_interval() {
        let schema = default_covla_schema();
        let b = build_prompt(&cfg(6, 2, 3, PresentationMode::Collage), &schema);
        assert!(b.user_text.contains("2×3 grid"));
        assert!(b.user_text.contains("200 ms"));
        assert!(b.user_text.contains("chronologically from left to right, top to bottom"));
        assert!(b.user_text.contains("1) [letter] 2) [letter] 3) [letter] 4) [letter] 5) [letter] 6) [letter] 7) [letter]"));
        assert_eq!(
            b.system_text,
            "You are an expert in autonomous driving scenario analysis. You will be shown images representing sequential driving scenarios and must classify them according to specific categories."
        );
        assert_eq!(b.image_roles.len(), 1);
    }

    #[test]
    fn one_block_per_category_in_order() {
        let schema = default_covla_schema();
        let b = build_prompt(&cfg(4, 2, 2, PresentationMode::Collage), &schema);
        let mut last = 0;
        for (i, c) in schema.categories().iter().enumerate() {
            let needle = format!("{}) {}", i + 1, c.question);
            assert_eq!(b.user_text.matches(&needle).count(), 1, "{needle}");
            let at = b.user_text.find(&needle).unwrap();
            assert!(at > last);
            last = at;
        }
    }

    #[test]
    fn deterministic() {
        let schema = default_covla_schema();
        let c = cfg(6, 2, 3, PresentationMode::Collage);
        assert_eq!(build_prompt(&c, &schema), build_prompt(&c, &schema));
        assert_eq!(build_prompt(&c, &schema).sha256(), build_prompt(&c, &schema).sha256());
    }

    #[test]
    fn single_frame_has_no_ordering_sentence() {
        let schema = default_covla_schema();
        let b = build_prompt(&cfg(1, 1, 1, PresentationMode::Collage), &schema);
        assert!(b.user_text.contains("a single image"));
        assert!(!b.user_text.contains("chronolog"));
        assert!(!b.user_text.contains("grid"));
        assert!(!b.user_text.contains('{'), "unrendered placeholder:\n{}", b.user_text);
    }

    #[test]
    fn batch_turns() {
        let schema = default_covla_schema();
        let b = build_prompt(&cfg(4, 2, 2, PresentationMode::Batch), &schema);
        assert_eq!(b.image_roles.len(), 4);
        let turns: Vec<_> = b.image_roles.iter().map(|r| r.turn_text.clone().unwrap()).collect();
        assert!(turns[0].starts_with("Image 1 of 4 (t = 0 ms)"));
        assert!(turns[2].contains("t = 400 ms"));
        assert!(!turns[0].contains("1) [letter]"));
        assert_eq!(turns[3], b.user_text);
        assert!(b.user_text.contains("one per message"));
    }

    #[test]
    fn separate_roles_are_chronological() {
        let schema = default_covla_schema();
        let b = build_prompt(&cfg(3, 1, 3, PresentationMode::Separate), &schema);
        let d: Vec<_> = b.image_roles.iter().map(|r| r.description.as_str()).collect();
        assert_eq!(d, ["frame 1 of 3 (t = 0 ms)", "frame 2 of 3 (t = 200 ms)", "frame 3 of 3 (t = 400 ms)"]);
        assert!(b.user_text.contains("3 separate images"));
    }
}
