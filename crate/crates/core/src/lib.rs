//! Multi-objective first-order optimization with Pareto-efficient fairness
//! reductions.
//!
//! The crate is organized around a small pipeline:
//!
//! * [`objective`] — objective bundles, gradient matrices, the synthetic
//!   Gaussian-pair benchmark, and a finite-difference harness.
//! * [`simplex`] — the inner simplex-constrained solve behind every step.
//! * [`pdo`] — bilevel Pareto descent to a single Pareto-stationary point.
//! * [`pbpdo`] — preference-steered descent that traces the frontier.
//! * [`fairness`] — reductions of fairness notions to objective vectors,
//!   linear models, and group metrics.
//! * [`frontier`] — dominance tests and non-dominated filtering.
//! * [`data`] — CSV ingestion into grouped datasets.
//! * [`synth`] — deterministic benchmark dataset generators.
//! * [`cli`] — command implementations behind the `pdo` binary.

pub mod cli;
pub mod data;
pub mod error;
pub mod fairness;
pub mod frontier;
pub mod objective;
pub mod pbpdo;
pub mod pdo;
pub mod simplex;
pub mod synth;

pub use error::{Error, Result};
