//! Domain types shared by every stage of the harness.

mod config;
mod key;
mod manifest;
mod schema;

pub use config::{
    ConfigError, GridLayout, PresentationMode, Resolution, SamplingConfig, INTERVAL_STEP_MS,
    MAX_FRAMES, MAX_INTERVAL_MS, MIN_INTERVAL_MS,
};
pub use key::{validate_key, AnswerKey, KeyError, ScoreWeights, WeightsError};
pub use manifest::{Manifest, ManifestError, ScenarioSource};
pub use schema::{AnnotationSchema, Category, MappingRule, SchemaError};

const COVLA_SCHEMA_JSON: &str = include_str!("../../schemas/covla.json");

/// The seven-category schema for first-sentence CoVLA captions: motion state,
/// direction, velocity, following behavior, acceleration, traffic light and
/// curvature. Each category ends with a "does not apply" default option.
pub fn default_covla_schema() -> AnnotationSchema {
    static SCHEMA: std::sync::LazyLock<AnnotationSchema> = std::sync::LazyLock::new(|| {
        AnnotationSchema::from_json(COVLA_SCHEMA_JSON).expect("shipped schema is valid")
    });
    SCHEMA.clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covla_schema_shape() {
        let s = default_covla_schema();
        let names: Vec<_> = s.categories().iter().map(|c| c.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "motion state",
                "direction",
                "velocity",
                "following behavior",
                "acceleration",
                "traffic light",
                "curvature"
            ]
        );
        assert_eq!(s.categories()[0].label('A'), Some("moving"));
        assert_eq!(s.categories()[2].option_count(), 5);
        for c in s.categories() {
            assert!(c.has_letter(c.default_letter()));
            assert!(c.label(c.default_letter()).unwrap().starts_with("does not apply"));
        }
    }

    #[test]
    fn worked_example_letters() {
        let s = default_covla_schema();
        let c = s.categories();
        assert_eq!(c[0].label('A'), Some("moving"));
        assert_eq!(c[1].label('A'), Some("straight"));
        assert_eq!(c[2].label('B'), Some("high speed"));
        assert_eq!(c[3].label('A'), Some("not following another vehicle"));
        assert_eq!(c[4].label('C'), Some("zero (constant speed)"));
        assert_eq!(c[5].label('B'), Some("no traffic light"));
        assert_eq!(c[6].label('B'), Some("no curve (straight road)"));
    }
}
