//! Evidence-based testability measurement for MiniOO classes.
//!
//! The pipeline seeds mutants into a class, generates tests for it with and
//! without synthesized setters, and classifies every mutant by whether the
//! generated tests execute (weakly kill) it, strongly kill it, and whether
//! they can do so without the setters. From those sets it estimates
//! controllability and observability per class.
//!
//! Stages, in dependency order:
//!
//! * [`frontend`]: parse, check, and render MiniOO sources.
//! * [`interp`]: deterministic interpreter with coverage, infection probes,
//!   and single-mutant substitution.
//! * [`mutation`]: the mutant catalog and mutant materialization.
//! * [`deencap`]: setter synthesis and synthetic-region tracking.
//! * [`testgen`]: seeded genetic test generation, exhaustive enumeration,
//!   and assertion synthesis.
//! * [`analysis`]: kill matrices and evidence sets.
//! * [`metrics`]: estimated and exact (enumerated) metrics.
//! * [`pipeline`]: the end-to-end measurement protocol and report files.

pub mod analysis;
pub mod deencap;
pub mod frontend;
pub mod interp;
pub mod metrics;
pub mod mutation;
pub mod pipeline;
pub mod testcase;
pub mod testgen;
