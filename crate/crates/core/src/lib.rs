//! Language-measure supervisory control of probabilistic finite-state
//! automata under perfect and partial observation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod error;
pub mod fixtures;
pub mod format;
pub mod measure;
pub mod model;
pub mod observe;
pub mod sim;
pub mod synthesis;

pub use error::{Error, Result};
pub use measure::{cesaro_limit, limiting_measure, renormalized_measure, MeasureVector, TransitionMatrix};
pub use model::{DisablingSet, Pfsa, Violation};
pub use synthesis::{
    brute_force_optimal, synthesize_supervisor, synthesize_with, theta_star, SupervisionPolicy, SynthesisOptions,
};
