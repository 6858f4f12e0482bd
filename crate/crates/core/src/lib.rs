//! City-scale bus delay prediction pipeline.
//!
//! The crate is organized along the pipeline stages:
//!
//! * [`domain`] — shared vocabulary types (stops, segments, pace observations, weather).
//! * [`hexgrid`] — hexagonal hierarchical spatial indexing (H3 binding).
//! * [`ingest`] — GTFS static / GTFS-RT / weather ingestion into trip records
//!   and elementary-segment pace observations.
//! * [`cluster`] — hybrid spatial+topological route clustering with
//!   giant-cluster resolution and configuration search.
//! * [`features`] — systematic multi-resolution feature generation.
//! * [`reduce`] — feature/target scaling and adaptive PCA.
//! * [`model`] — ridge and gradient-boosted-tree predictors, composite
//!   accuracy/latency/memory objective, random hyperparameter search.
//! * [`eval`] — walk-forward splits, multi-level metrics, ablation,
//!   permutation importance and pairwise statistical comparison.
//! * [`infer`] — pace→delay conversion and hierarchical aggregation.
//! * [`storage`] — partitioned columnar persistence.
//! * [`synth`] — deterministic synthetic-city generator used by the test and
//!   acceptance suites.
//!
//! Data-parallel hot paths use rayon when the `parallel` feature (default) is
//! enabled and fall back to sequential loops otherwise. Both paths produce
//! bit-identical results; `benches/parallel_vs_sequential.rs` compares them.

pub mod cluster;
pub mod domain;
pub mod eval;
pub mod features;
pub mod geo;
pub mod hexgrid;
pub mod infer;
pub mod ingest;
pub mod model;
pub mod reduce;
pub mod storage;
pub mod synth;

pub(crate) mod par;

#[cfg(any(test, feature = "testkit"))]
pub mod testkit;
