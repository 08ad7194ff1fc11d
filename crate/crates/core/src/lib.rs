//! Median-bias measurement and batch-based confidence-interval
//! constructions, with a reproducible Monte Carlo experiment harness.
//!
//! The library is organized around a two-way correspondence:
//!
//! * an estimator whose median bias is small per batch yields a valid
//!   confidence interval at any level, as the min/max hull of estimates
//!   over disjoint batches ([`constructions::batch_minmax_interval`]);
//! * a valid confidence interval, in turn, yields an estimator with small
//!   median bias by reporting a uniformly random endpoint
//!   ([`constructions::ci_to_estimator`]), and a whole family of valid
//!   intervals yields one with *vanishing* bias via monotonization and
//!   extraction at level `n^(-1/2)`
//!   ([`constructions::extract_median_regular_estimator`]).
//!
//! Supporting cast:
//!
//! * [`bias`] — the median-bias functional, Monte Carlo estimation with
//!   exact binomial error bounds, and worst-case bias over a model grid;
//! * [`models`] / [`estimators`] — a zoo of sampling distributions and
//!   estimators, each with closed-form hit probabilities where available;
//! * [`procedures`] / [`registry`] — confidence procedures composable in
//!   pipelines from string specs (`"zinterval@0.1 -> boost_level"`);
//! * [`harness`] / [`report`] — coverage grids, drift sweeps, the
//!   round-trip experiment, and byte-deterministic CSV/JSON reports;
//! * [`oracles`] — independent brute-force reimplementations (exhaustive
//!   enumeration, linear scans, quadrature) used only by tests and
//!   self-checks;
//! * [`rng`] — a splittable seed tree making every replicate's randomness
//!   a pure function of `(master seed, cell index, replicate index)`.
//!
//! Determinism is a design constraint throughout: all Monte Carlo
//! accumulation is integer counting or replicate-ordered, so results are
//! independent of thread count and scheduling.

pub mod bias;
pub mod binomial;
pub mod constructions;
pub mod error;
pub mod estimators;
pub mod ext;
pub mod harness;
pub mod level;
pub mod models;
pub mod oracles;
pub mod procedures;
pub mod registry;
pub mod report;
pub mod rng;

pub use bias::{
    estimate_median_bias_mc, exact_median_bias, median_bias_from_probs, worst_case_median_bias,
    MedianBiasEstimate, WorstCaseMedianBias,
};
pub use constructions::{
    batch_count, batch_count_bounds, batch_minmax_interval, boost_level, ci_to_estimator,
    extract_median_regular_estimator, geometric_level_grid, monotonize_family, union_batch_count,
    union_batch_interval, BatchPlan,
};
pub use error::{Error, Result};
pub use estimators::{DynEstimator, Estimator, EstimatorKind, ZooEstimator};
pub use ext::{ExtReal, Interval};
pub use harness::{
    run_coverage, run_duality_roundtrip, run_medbias, run_uniformity_sweep, BiasReport,
    CoverageReport, DualityReport, ExperimentConfig,
};
pub use level::{Delta, Level, SlackSequence};
pub use models::{DataModel, ModelKind};
pub use procedures::{DynProcedure, Procedure};
pub use registry::{parse_estimator, parse_model, parse_procedure};
pub use rng::StreamSeed;
