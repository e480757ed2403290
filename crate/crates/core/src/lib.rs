//! Procedurally generated cooking text games, an action parser and engine,
//! pluggable policies, and a trial loop that learns natural-language tips.
//!
//! ```
//! use cookworld::{generate, run_episode, ExpertPolicy, GeneratorConfig};
//!
//! let spec = generate(&GeneratorConfig::new(2, 7)).unwrap();
//! let outcome = run_episode(&spec, &mut ExpertPolicy::new(&spec));
//! assert!(outcome.result.success);
//! assert_eq!(outcome.result.points, spec.max_score);
//! ```

pub mod engine;
pub mod eval;
pub mod generator;
pub mod model;
pub mod parser;
pub mod policy;
pub mod rng;
pub mod tips;

pub use engine::{
    new_episode, replay, run_episode, run_episode_with, step, step_text, EpisodeResult, Feedback,
    Status, Trajectory, WorldState,
};
pub use eval::{evaluate_few_shot, evaluate_suite, few_shot_curve, EvalReport};
pub use generator::{generate, generate_suite, walkthrough, GeneratorConfig};
pub use model::{GameSpec, LEVELS};
pub use parser::{parse, render, Action, ActionForm, ParseError};
pub use policy::{
    BackendConfig, BackendFactory, BackendKind, ExpertPolicy, Policy, PolicyError, PromptBundle,
    ScriptedPolicy,
};
pub use tips::{extract_tips, load_tips, run_trials, LearningMode, TipSet, TrialOptions};
