//! Corpus-quality evaluation harness for expert chain-of-thought (CoT) datasets.
//!
//! The crate is organized around the stages of an evaluation run:
//!
//! * [`corpus`] — load, validate, and partition JSONL corpora of CoT samples.
//! * [`rubric`] — scoring dimensions with anchors, blinded prompt rendering,
//!   and the blinding checker.
//! * [`judge`] — scoring calls against LLM endpoints (or a deterministic
//!   mock), with parse retries, resumable per-(model, dimension) archives,
//!   and bounded concurrency.
//! * [`stats`] — model-score aggregation into a sample × dimension matrix and
//!   the nonparametric battery: Mann-Whitney U, Cliff's delta, Krippendorff's
//!   alpha, and per-group summaries.
//! * [`cfdensity`] — deterministic counterfactual-density measurement over
//!   causal connectives and counterfactual probe patterns.
//! * [`harness`] — run configuration, CLI command implementations, table
//!   rendering, and box-plot SVG generation.

pub mod cfdensity;
pub mod corpus;
pub mod harness;
pub mod judge;
pub mod rubric;
pub mod stats;
