//! Trial protocol: shuffled condition × scene plans, headless sessions driven
//! by scripted agents, and the session event log.

mod agent;
mod log;
mod objects;
mod plan;
mod session;

pub use agent::{
    azimuth_coverage, view_azimuth, Agent, AgentAction, NullAgent, OracleAgent, ResponseEvent,
    StepContext, SweepAgent,
};
pub use log::{Completion, EventType, LogRecord, Response, SessionLog, StepRecord, TIME_LIMIT_S};
pub use objects::{Annotations, ObjectClass};
pub use plan::{
    build_trial_plan, build_trial_plan_excluding, stimulus_corpus, PlanStep, Stimulus, TrialPlan,
    BREAK_AFTER_STEP, STEPS_PER_PLAN,
};
pub use session::{
    emit_fixation_frame, run_headless_session, InMemoryScenes, SceneSource, SessionConfig,
    SessionEngine,
};

use crate::renderer::RenderError;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("planning error: {0}")]
    Plan(String),
    #[error("scene error: {0}")]
    Scene(String),
    #[error("scene {0:?} has no annotations; the oracle agent needs them")]
    MissingAnnotations(String),
    #[error("invalid session config: {0}")]
    Config(String),
    #[error("log line {line}: {msg}")]
    Log { line: usize, msg: String },
    #[error(transparent)]
    Render(#[from] RenderError),
}
