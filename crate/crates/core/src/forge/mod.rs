//! Law catalog, mutation edits and guideline checks.

mod catalog;
mod distribution;
pub mod generate;
pub mod mutation;
pub mod search;
pub mod validate;
mod wellposed;

pub use catalog::*;
pub use distribution::Distribution;
pub use mutation::{mutate, replay, EditKind, MutationEdit, MutationError, Reposition, Site};
pub use validate::{validate_mutation_chain, Rule, Verdict, Violation};
pub use wellposed::{check_well_posed, WellPosedReport};

/// Exponent payloads used when generating new mutations.
pub const EXPONENTS: [f64; 11] = [0.5, 0.7, 0.9, 1.3, 1.5, 2.0, 2.3, 2.5, 2.6, 3.0, std::f64::consts::E];
