//! IO, file formats, dataset generation, and run orchestration around the
//! `wstl-core` algorithms.

pub mod formats;
pub mod generator;
pub mod jsonl;
pub mod runner;
pub mod schema;

pub use generator::{generate_reach_avoid, GeneratorConfig, GeneratorManifest};
pub use runner::{evaluate_runs, run_seeds, RunConfig};
