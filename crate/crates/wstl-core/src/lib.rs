//! Core algorithms for inferring weighted signal temporal logic (wSTL)
//! explanations from labeled trajectory data.
//!
//! The crate is `no_std` (with `alloc`) so the math can be reused from
//! embedded or wasm hosts; all file formats and the CLI live in the
//! companion `wstl-explain` crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod agg;
pub mod autodiff;
pub mod error;
pub mod formula;
pub mod metrics;
pub mod predicate;
pub mod simplify;
pub mod template;
pub mod trajectory;

pub use agg::{AggMode, AggregationConfig};
pub use error::Error;
pub use formula::{to_canonical_string, DistributedCnf, Formula, Interval, Literal};
pub use predicate::{DistanceTarget, Feature, PredicateSpec, PredicateTable};
pub use simplify::{Explanation, FilterReport, SimplifyConfig, StageRecord};
pub use template::{Clause, TemplateParams, TrainConfig};
pub use trajectory::{stratified_split, DatasetSplit, RobustnessTensor, Trajectory};
