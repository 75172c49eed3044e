//! The five-phase protocol: phase plans, the evaluation runner and its
//! append-only record store.

mod plan;
mod record;
mod runner;
mod sampler;
mod store;

pub use plan::{expansion_counts, Dimension, GridSpec, PhasePlan, PlanError};
pub use record::{model_record_id, now_rfc3339, EvaluationRecord};
pub use runner::{
    create_run, execute_run, load_run_inputs, run_plans, ImagePolicy, RunError, RunInputs,
    RunLimits, RunOptions, RunSummary, Shortfall,
};
pub use sampler::ScenarioSampler;
pub use store::{
    load_records, PromptLog, RecordStore, RunManifest, StoreError, PROMPTS_FILE, RECORDS_FILE,
    RUN_FILE,
};
