//! Toolkit for Fermi-problem benchmarks.
//!
//! - [`units`]: SI-normalized quantities and unit parsing
//! - [`program`]: explanation-program AST, parser and printer
//! - [`executor`]: program evaluation and validity
//! - [`metrics`]: order-of-magnitude answer score, fact F1, aggregation
//! - [`kb`]: knowledge base of object attributes
//! - [`synthgen`]: templated synthetic problem generation
//! - [`tasks`]: dataset records, task views and distractor selection
//! - [`baselines`]: constant-prediction sweep
//!
//! Batch operations run on rayon when the `parallel` feature is enabled (the
//! default); see [`par`].

pub mod baselines;
pub mod executor;
pub mod kb;
pub mod metrics;
pub mod par;
pub mod program;
pub mod synthgen;
pub mod tasks;
pub mod units;

pub use executor::{check_validity, execute, ExecError, ExecutionResult};
pub use program::{parse_program, Identifier, Program};
pub use units::{parse_quantity, Dimension, Quantity, UnitMode, UnitRegistry};
pub use metrics::{fp_score, QuestionScore};
