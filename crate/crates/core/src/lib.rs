//! Round-synchronous laboratory for consensus and average-consensus update
//! rules over dynamic communication graphs.
//!
//! The crate is organized around the lifecycle of an experiment:
//!
//! * [`graph`] — round topologies, the validity class they must satisfy, and
//!   deterministic dynamic-graph families (static, scheduled, random,
//!   adversarial);
//! * [`rules`] — per-round update matrices for the neighborhood-averaging,
//!   symmetrized, fixed-weight, and degree-learning rules;
//! * [`engine`] — executions as message-passing agents and as matrix
//!   products, recorded as full traces;
//! * [`spectral`] — Perron vectors, spectral gaps, weighted variances, and
//!   numerical checkers for the contraction lemmas;
//! * [`metrics`] — convergence times measured from traces and the
//!   closed-form round bounds they are compared against;
//! * [`verify`] — randomized suites that exercise all of the above;
//! * [`cli`] — configuration, orchestration, and CSV/graph-file output.

pub mod cli;
pub mod engine;
pub mod graph;
pub mod metrics;
pub mod rules;
pub mod spectral;
pub mod verify;
