//! A laboratory for off-policy temporal-difference learning inside task
//! hierarchies.
//!
//! The library executes task hierarchies in a polling fashion: every
//! level is consulted on every primitive step, an exploring flag
//! propagates up from subtasks so that higher levels can refuse backups
//! contaminated by lower-level exploration, and an optional commitment
//! probability trades re-planning against sticking with the subtask in
//! progress. Six tabular learners share the resulting backup stream,
//! three benchmark domains (a three-armed bandit, cliff walking, and a
//! fuel-limited taxicab) provide exhaustively enumerable testbeds, and a
//! seeded harness turns configurations into CSV learning curves, SVG
//! charts and summary statistics.
//!
//! The `book/` directory of the repository walks through the concepts
//! chapter by chapter; every code block there compiles against this
//! crate.
//!
//! ```
//! use ophrl::harness::{self, ExperimentConfig};
//!
//! let mut cfg = harness::preset("bandit_fig3").unwrap();
//! cfg.episodes = 50;
//! cfg.seeds = vec![1];
//! let outcome = harness::train_seed(&cfg, 1).unwrap();
//! assert_eq!(outcome.returns.len(), 50);
//! ```

pub mod diagnostics;
pub mod envs;
pub mod error;
pub mod executor;
pub mod exploration;
pub mod harness;
pub mod hierarchy;
pub mod learners;
pub mod mdp;
pub mod oracle;

pub use error::{Error, Result};
