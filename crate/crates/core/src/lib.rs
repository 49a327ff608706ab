//! Simulation laboratory for the repeated balls-into-bins process.
//!
//! Every non-empty node of a graph forwards one queued ball per round to a
//! uniformly random neighbor. The crate provides the process engine, the
//! reference baselines (memoryless re-assignment, the dominating process, the
//! single-ball walk), adversarial fault injection, legitimacy/stability/cover
//! metrics, and a seeded experiment harness with a CLI on top.

pub mod adversary;
pub mod baselines;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod expr;
pub mod graph;
pub mod metrics;
pub mod output;
pub mod process;
pub mod rng;

pub use error::{Error, Result};
pub use graph::Graph;
pub use metrics::{LegitimacyRule, Rounds, RuleForm, RunRecord};
pub use process::{Configuration, Mode, Placement, Strategy};
pub use rng::Streams;
