//! Toy peg-in-hole environment and the closed-loop correction runner.

pub mod benchmark;
pub mod corrector;
pub mod episode;
pub mod policy;
pub mod scene;

pub use benchmark::{run_benchmark, BenchmarkConfig, MetricsRow};
pub use corrector::LookupCorrector;
pub use episode::{run_episode, Episode, EpisodeConfig, EpisodeLog, Mode, Outcome, RunMode, StepRecord};
pub use policy::{PolicyConfig, ScriptedBasePolicy};
pub use scene::{contact_wrench, SceneConfig, Socket};
