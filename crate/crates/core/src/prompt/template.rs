use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{AnnotationSchema, PresentationMode, SamplingConfig};

const DEFAULT_TEMPLATE_JSON: &str = include_str!("../../templates/default_prompt.json");

/// Placeholders a template may use.
pub const PLACEHOLDERS: &[&str] = &[
    "rows",
    "cols",
    "interval_ms",
    "frame_count",
    "mode_clause",
    "questions",
    "key_format",
    "resolution_level",
    "width",
    "height",
    "index",
    "timestamp_ms",
];

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template file {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed template JSON: {0}")]
    Json(String),
    #[error("{field}: unknown placeholder {{{name}}}")]
    UnknownPlaceholder { field: String, name: String },
    #[error("{field}: unclosed brace at byte {at}")]
    Unclosed { field: String, at: usize },
    #[error("user template must contain {{{0}}}")]
    Missing(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeClauses {
    pub single: String,
    pub collage: String,
    pub separate: String,
    pub batch: String,
    pub batch_turn: String,
}

/// The one prompt template shared by every model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub template_id: String,
    pub system: String,
    pub user: String,
    pub clauses: ModeClauses,
}

fn placeholders(field: &str, text: &str) -> Result<Vec<String>, TemplateError> {
    let mut out = Vec::new();
    let mut rest = text;
    let mut offset = 0;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let close = after.find('}').ok_or(TemplateError::Unclosed {
            field: field.to_string(),
            at: offset + open,
        })?;
        out.push(after[..close].to_string());
        let consumed = open + 1 + close + 1;
        offset += consumed;
        rest = &rest[consumed..];
    }
    Ok(out)
}

/// Substitutes `{name}` placeholders; unknown names are left untouched
/// (templates are validated on load).
pub(crate) fn render(text: &str, vars: &BTreeMap<&str, String>) -> String {
    let mut out = String::with_capacity(text.len() + 256);
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let name = &after[..close];
                match vars.get(name) {
                    Some(v) => out.push_str(v),
                    None => {
                        out.push('{');
                        out.push_str(name);
                        out.push('}');
                    }
                }
                rest = &after[close + 1..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

impl PromptTemplate {
    pub fn from_json(text: &str) -> Result<Self, TemplateError> {
        let t: PromptTemplate =
            serde_json::from_str(text).map_err(|e| TemplateError::Json(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TemplateError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| TemplateError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        let fields = [
            ("system", &self.system),
            ("user", &self.user),
            ("clauses.single", &self.clauses.single),
            ("clauses.collage", &self.clauses.collage),
            ("clauses.separate", &self.clauses.separate),
            ("clauses.batch", &self.clauses.batch),
            ("clauses.batch_turn", &self.clauses.batch_turn),
        ];
        for (field, text) in fields {
            for name in placeholders(field, text)? {
                if !PLACEHOLDERS.contains(&name.as_str()) {
                    return Err(TemplateError::UnknownPlaceholder {
                        field: field.to_string(),
                        name,
                    });
                }
            }
        }
        let user = placeholders("user", &self.user)?;
        for required in ["mode_clause", "questions", "key_format"] {
            if !user.iter().any(|p| p == required) {
                return Err(TemplateError::Missing(required));
            }
        }
        Ok(())
    }

    pub fn clause_for(&self, config: &SamplingConfig) -> &str {
        if config.frame_count == 1 {
            return &self.clauses.single;
        }
        match config.mode {
            PresentationMode::Collage => &self.clauses.collage,
            PresentationMode::Separate => &self.clauses.separate,
            PresentationMode::Batch => &self.clauses.batch,
        }
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::from_json(DEFAULT_TEMPLATE_JSON).expect("shipped template is valid")
    }
}

/// Numbered questions with lettered options, one block per category.
pub fn render_questions(schema: &AnnotationSchema) -> String {
    let mut out = String::new();
    for (i, c) in schema.categories().iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("{}) {}\n", i + 1, c.question));
        for (letter, label) in c.options() {
            out.push_str(&format!("   {letter}) {label}\n"));
        }
    }
    out.trim_end().to_string()
}

/// `1) [letter] 2) [letter] ... n) [letter]`
pub fn key_format(n: usize) -> String {
    (1..=n)
        .map(|i| format!("{i}) [letter]"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_template_is_valid() {
        let t = PromptTemplate::default();
        assert!(t.system.starts_with("You are an expert in autonomous driving scenario analysis."));
    }

    #[test]
    fn unknown_placeholder_rejected() {
        let mut t = PromptTemplate::default();
        t.clauses.collage.push_str(" {colour}");
        assert!(matches!(
            t.validate(),
            Err(TemplateError::UnknownPlaceholder { name, .. }) if name == "colour"
        ));
    }

    #[test]
    fn missing_questions_rejected() {
        let mut t = PromptTemplate::default();
        t.user = t.user.replace("{questions}", "");
        assert!(matches!(t.validate(), Err(TemplateError::Missing("questions"))));
    }

    #[test]
    fn unclosed_brace_rejected() {
        let mut t = PromptTemplate::default();
        t.system.push_str(" {oops");
        assert!(matches!(t.validate(), Err(TemplateError::Unclosed { .. })));
    }

    #[test]
    fn key_format_lists_every_category() {
        assert_eq!(key_format(3), "1) [letter] 2) [letter] 3) [letter]");
    }
}
