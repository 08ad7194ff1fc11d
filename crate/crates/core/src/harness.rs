//! Experiment harness: reproducible Monte Carlo engines for coverage
//! grids, parameter-drift uniformity sweeps, the interval/estimator
//! round trip, and worst-case median bias over a model family.
//!
//! Determinism contract: every replicate's randomness derives from
//! `(master seed, cell index, replicate index)` through the seed tree, so
//! reports are identical for identical configs regardless of thread count
//! or scheduling. Width statistics accumulate over replicate-ordered
//! vectors, never in reduction order.

use crate::bias::{worst_case_median_bias, MedianBiasEstimate};
use crate::binomial::{one_sided_upper_bound, three_sigma, two_sided_bounds};
use crate::constructions::{
    batch_count, boost_miscoverage_bound, geometric_level_grid, oracle_alpha_sequence,
};
use crate::error::{Error, Result};
use crate::estimators::DynEstimator;
use crate::ext::ExtReal;
use crate::level::SlackSequence;
use crate::models::DataModel;
use crate::procedures::{
    BatchMinMax, Boosted, DynProcedure, ExtractedEstimator, Procedure, DEFAULT_MONOTONIZE_GRID_LEN,
};
use crate::registry::{parse_estimator, parse_model, parse_procedure};
use crate::rng::StreamSeed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Default replication count for every Monte Carlo engine.
pub const DEFAULT_REPS: u64 = 100_000;

/// Confidence for the per-cell binomial bound column and for oracle
/// self-checks.
pub const ORACLE_CHECK_CONFIDENCE: f64 = 0.999;

fn default_reps() -> u64 {
    DEFAULT_REPS
}

/// Parameter-drift settings for uniformity sweeps: for each sample
/// size `n` in the grid, the model family is instantiated at
/// `mu = h / sqrt(n)` for every `h` in `h_grid`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Location family to instantiate: one of `threshold_normal`,
    /// `normal_mean`, `laplace_location`, `cauchy_location`.
    pub family: String,
    pub h_grid: Vec<f64>,
    /// Also include the superefficiency stress point `mu = n^(-1/4) / 2`
    /// at each `n`.
    #[serde(default)]
    pub hodges_drift: bool,
}

/// One experiment, as a single JSON document. Which fields are required
/// depends on the run: coverage and sweeps need `procedure`, the duality
/// round trip and bias runs need `estimator`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub models: Vec<String>,
    #[serde(default)]
    pub procedure: Option<String>,
    #[serde(default)]
    pub estimator: Option<String>,
    #[serde(default)]
    pub n_grid: Vec<usize>,
    #[serde(default)]
    pub level_grid: Vec<f64>,
    #[serde(default = "default_reps")]
    pub reps: u64,
    #[serde(default)]
    pub seed: u64,
    /// Known excess-miscoverage sequence of the base procedure, as
    /// `[n, r]` pairs; absent means zero slack.
    #[serde(default)]
    pub slack: Vec<(usize, f64)>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    fn slack_sequence(&self) -> Result<SlackSequence> {
        if self.slack.is_empty() {
            Ok(SlackSequence::zero())
        } else {
            SlackSequence::from_pairs(self.slack.iter().copied())
        }
    }

    fn validated_grids(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::config(
                "n_grid",
                "at least one sample size is required",
            ));
        }
        if self.level_grid.is_empty() {
            return Err(Error::config(
                "level_grid",
                "at least one level is required",
            ));
        }
        for &alpha in &self.level_grid {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::config(
                    "level_grid",
                    format!("levels must lie strictly in (0, 1), got {alpha}"),
                ));
            }
        }
        if self.reps == 0 {
            return Err(Error::config("reps", "replication count must be positive"));
        }
        Ok(())
    }

    fn parsed_models(&self) -> Result<Vec<DataModel>> {
        if self.models.is_empty() {
            return Err(Error::config("models", "at least one model is required"));
        }
        self.models.iter().map(|s| parse_model(s)).collect()
    }

    fn required_procedure(&self) -> Result<DynProcedure> {
        match &self.procedure {
            Some(spec) => parse_procedure(spec),
            None => Err(Error::config(
                "procedure",
                "this run requires a procedure spec",
            )),
        }
    }

    fn required_estimator(&self) -> Result<DynEstimator> {
        match &self.estimator {
            Some(spec) => parse_estimator(spec),
            None => Err(Error::config(
                "estimator",
                "this run requires an estimator spec",
            )),
        }
    }
}

/// Runs `f` under the thread cap in `MEDREG_THREADS`, if set. Results are
/// invariant to the cap; it only limits resource use.
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match std::env::var("MEDREG_THREADS") {
        Err(_) => Ok(f()),
        Ok(raw) => {
            let threads: usize = raw.parse().map_err(|_| {
                Error::config(
                    "MEDREG_THREADS",
                    format!("expected a positive integer, got `{raw}`"),
                )
            })?;
            if threads == 0 {
                return Err(Error::config(
                    "MEDREG_THREADS",
                    "thread cap must be positive",
                ));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::config("MEDREG_THREADS", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// One coverage cell: a `(model, n, alpha)` triple evaluated at `reps`
/// replicates.
#[derive(Clone, Debug, Serialize)]
pub struct CoverageRow {
    pub model: String,
    pub n: usize,
    pub alpha: f64,
    /// Fraction of replicates whose closed interval missed the target.
    pub miscoverage: f64,
    /// One-sided upper binomial bound on the miss probability at the
    /// oracle-check confidence.
    pub miscoverage_upper: f64,
    /// Mean width over replicates with finite-width intervals; `None` if
    /// every interval was infinite.
    pub mean_width: Option<f64>,
    /// Median width over the same replicates.
    pub median_width: Option<f64>,
    /// Fraction of replicates returning an interval with no finite
    /// endpoint.
    pub trivial_fraction: f64,
    /// Exact miscoverage when the procedure has a closed form for this
    /// cell.
    pub exact: Option<f64>,
    pub reps: u64,
    pub seed: u64,
}

/// Worst cell over the model grid for one `(n, alpha)` pair: the
/// empirical sup over the (finite) family.
#[derive(Clone, Debug, Serialize)]
pub struct WorstRow {
    pub n: usize,
    pub alpha: f64,
    pub model: String,
    pub miscoverage: f64,
    pub miscoverage_upper: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverageReport {
    pub procedure: String,
    pub reps: u64,
    pub seed: u64,
    pub rows: Vec<CoverageRow>,
    /// Per-(n, alpha) maxima over the model grid, in (n, alpha) grid
    /// order.
    pub worst: Vec<WorstRow>,
}

struct CellOutcome {
    misses: u64,
    trivial: u64,
    finite_widths: Vec<f64>,
}

/// Evaluates one coverage cell. Replicate `i` derives its sample from
/// `cell.child(i).child(0)` and its procedure stream from
/// `cell.child(i).child(1)`.
fn coverage_cell(
    model: &DataModel,
    proc_: &dyn Procedure,
    n: usize,
    alpha: f64,
    reps: u64,
    cell: StreamSeed,
) -> Result<CellOutcome> {
    let required = proc_.min_sample_size(alpha)?;
    if n < required {
        return Err(Error::config(
            "n_grid",
            format!(
                "procedure `{}` needs n >= {required} at alpha = {alpha}, got n = {n}",
                proc_.name()
            ),
        ));
    }
    let theta = ExtReal::new(model.theta())?;
    let per_rep: Vec<(bool, f64)> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let rep = cell.child(i);
            let sample = model.sample(n, rep.child(0));
            let interval = proc_.interval(&sample, alpha, rep.child(1))?;
            Ok((interval.contains(theta), interval.width()))
        })
        .collect::<Result<_>>()?;
    let mut misses = 0u64;
    let mut trivial = 0u64;
    let mut finite_widths = Vec::new();
    for &(covered, width) in &per_rep {
        if !covered {
            misses += 1;
        }
        if width.is_finite() {
            finite_widths.push(width);
        } else {
            trivial += 1;
        }
    }
    Ok(CellOutcome {
        misses,
        trivial,
        finite_widths,
    })
}

fn width_stats(mut widths: Vec<f64>) -> (Option<f64>, Option<f64>) {
    if widths.is_empty() {
        return (None, None);
    }
    let mean = widths.iter().sum::<f64>() / widths.len() as f64;
    widths.sort_by(|a, b| a.partial_cmp(b).expect("widths are finite"));
    let k = widths.len();
    let median = if k % 2 == 1 {
        widths[k / 2]
    } else {
        0.5 * (widths[k / 2 - 1] + widths[k / 2])
    };
    (Some(mean), Some(median))
}

/// Fails the run when an exact value falls outside the two-sided binomial
/// interval around the Monte Carlo count.
fn oracle_check(cell_name: &str, misses: u64, reps: u64, exact: f64) -> Result<()> {
    let (lo, hi) = two_sided_bounds(misses, reps, ORACLE_CHECK_CONFIDENCE)?;
    if exact < lo || exact > hi {
        return Err(Error::OracleMismatch {
            cell: cell_name.to_string(),
            mc: misses as f64 / reps as f64,
            exact,
            lo,
            hi,
        });
    }
    Ok(())
}

fn cell_row(
    model: &DataModel,
    proc_: &dyn Procedure,
    n: usize,
    alpha: f64,
    reps: u64,
    seed: u64,
    cell: StreamSeed,
) -> Result<CoverageRow> {
    let outcome = coverage_cell(model, proc_, n, alpha, reps, cell)?;
    let miscoverage = outcome.misses as f64 / reps as f64;
    // One-sided bound at tail probability 1 - confidence.
    let miscoverage_upper =
        one_sided_upper_bound(outcome.misses, reps, 1.0 - ORACLE_CHECK_CONFIDENCE)?;
    let exact = proc_.exact_miscoverage(model, n, alpha);
    if let Some(exact) = exact {
        let cell_name = format!(
            "model={} n={n} alpha={alpha} procedure={}",
            model.name(),
            proc_.name()
        );
        oracle_check(&cell_name, outcome.misses, reps, exact)?;
    }
    let (mean_width, median_width) = width_stats(outcome.finite_widths);
    Ok(CoverageRow {
        model: model.name().to_string(),
        n,
        alpha,
        miscoverage,
        miscoverage_upper,
        mean_width,
        median_width,
        trivial_fraction: outcome.trivial as f64 / reps as f64,
        exact,
        reps,
        seed,
    })
}

fn worst_rows(rows: &[CoverageRow], n_grid: &[usize], level_grid: &[f64]) -> Vec<WorstRow> {
    let mut worst = Vec::new();
    for &n in n_grid {
        for &alpha in level_grid {
            let best = rows
                .iter()
                .filter(|r| r.n == n && r.alpha == alpha)
                .max_by(|a, b| {
                    a.miscoverage
                        .partial_cmp(&b.miscoverage)
                        .expect("miscoverage is never NaN")
                        // keep the first maximum on ties
                        .then(std::cmp::Ordering::Greater)
                });
            if let Some(r) = best {
                worst.push(WorstRow {
                    n,
                    alpha,
                    model: r.model.clone(),
                    miscoverage: r.miscoverage,
                    miscoverage_upper: r.miscoverage_upper,
                });
            }
        }
    }
    worst
}

/// Coverage grid: Monte Carlo miscoverage of one procedure over
/// `models x n_grid x level_grid`, with per-(n, alpha) worst cells and
/// closed-form self-checks wherever the procedure knows its exact
/// miscoverage. Cell index is model-major:
/// `(model_idx * |n_grid| + n_idx) * |level_grid| + level_idx`.
pub fn run_coverage(config: &ExperimentConfig) -> Result<CoverageReport> {
    config.validated_grids()?;
    let models = config.parsed_models()?;
    let proc_ = config.required_procedure()?;
    with_thread_cap(|| run_coverage_inner(config, &models, proc_.as_ref()))?
}

fn run_coverage_inner(
    config: &ExperimentConfig,
    models: &[DataModel],
    proc_: &dyn Procedure,
) -> Result<CoverageReport> {
    let root = StreamSeed::root(config.seed);
    let mut rows = Vec::new();
    for (mi, model) in models.iter().enumerate() {
        for (ni, &n) in config.n_grid.iter().enumerate() {
            for (ai, &alpha) in config.level_grid.iter().enumerate() {
                let flat = ((mi * config.n_grid.len() + ni) * config.level_grid.len() + ai) as u64;
                let cell = root.child(flat);
                rows.push(cell_row(
                    model,
                    proc_,
                    n,
                    alpha,
                    config.reps,
                    config.seed,
                    cell,
                )?);
            }
        }
    }
    let worst = worst_rows(&rows, &config.n_grid, &config.level_grid);
    Ok(CoverageReport {
        procedure: proc_.name(),
        reps: config.reps,
        seed: config.seed,
        rows,
        worst,
    })
}

fn drift_model(family: &str, mu: f64) -> Result<DataModel> {
    match family {
        "threshold_normal" => DataModel::threshold_normal(mu),
        "normal_mean" => DataModel::normal_mean(mu),
        "laplace_location" => DataModel::laplace_location(mu),
        "cauchy_location" => DataModel::cauchy_location(mu),
        other => Err(Error::config(
            "sweep.family",
            format!(
                "unknown drift family `{other}`; known: threshold_normal, normal_mean, \
                 laplace_location, cauchy_location"
            ),
        )),
    }
}

/// Models for one sweep step: `mu = h / sqrt(n)` over the h-grid, plus
/// the optional `n^(-1/4) / 2` stress point.
fn sweep_models(spec: &SweepSpec, n: usize) -> Result<Vec<DataModel>> {
    if spec.h_grid.is_empty() {
        return Err(Error::config("sweep.h_grid", "at least one h is required"));
    }
    let root_n = (n as f64).sqrt();
    let mut models = Vec::with_capacity(spec.h_grid.len() + usize::from(spec.hodges_drift));
    for &h in &spec.h_grid {
        models.push(drift_model(&spec.family, h / root_n)?);
    }
    if spec.hodges_drift {
        models.push(drift_model(&spec.family, 0.5 * (n as f64).powf(-0.25))?);
    }
    Ok(models)
}

/// Uniformity sweep: like [`run_coverage`], but the model grid is
/// re-instantiated at drift points `mu = h / sqrt(n)` for each sample
/// size, so the per-(n, alpha) worst rows stress validity along a
/// triangular array rather than at fixed parameters. Cell index is
/// n-major over the per-n model list:
/// `(n_idx * |models_n| + model_idx) * |level_grid| + level_idx`.
pub fn run_uniformity_sweep(config: &ExperimentConfig) -> Result<CoverageReport> {
    config.validated_grids()?;
    let spec = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("sweep", "uniformity sweeps require a sweep spec"))?;
    let proc_ = config.required_procedure()?;
    with_thread_cap(|| run_sweep_inner(config, spec, proc_.as_ref()))?
}

fn run_sweep_inner(
    config: &ExperimentConfig,
    spec: &SweepSpec,
    proc_: &dyn Procedure,
) -> Result<CoverageReport> {
    let root = StreamSeed::root(config.seed);
    let models_per_n = spec.h_grid.len() + usize::from(spec.hodges_drift);
    let mut rows = Vec::new();
    for (ni, &n) in config.n_grid.iter().enumerate() {
        let models = sweep_models(spec, n)?;
        for (mi, model) in models.iter().enumerate() {
            for (ai, &alpha) in config.level_grid.iter().enumerate() {
                let flat = ((ni * models_per_n + mi) * config.level_grid.len() + ai) as u64;
                let cell = root.child(flat);
                rows.push(cell_row(
                    model,
                    proc_,
                    n,
                    alpha,
                    config.reps,
                    config.seed,
                    cell,
                )?);
            }
        }
    }
    let worst = worst_rows(&rows, &config.n_grid, &config.level_grid);
    Ok(CoverageReport {
        procedure: proc_.name(),
        reps: config.reps,
        seed: config.seed,
        rows,
        worst,
    })
}

/// One check in the duality round trip.
#[derive(Clone, Debug, Serialize)]
pub struct DualityRow {
    /// `interval_from_estimator`, `boost_level`, or `extract_estimator`.
    pub stage: String,
    pub model: String,
    pub n: usize,
    /// Working level: the target miscoverage level for interval stages,
    /// the extraction level for the estimator stage.
    pub alpha: f64,
    /// Monte Carlo miscoverage (interval stages) or median bias point
    /// estimate (estimator stage).
    pub value: f64,
    /// Theoretical bound on `value`, including configured slack.
    pub bound: f64,
    /// Three binomial standard errors at the bound probability.
    pub margin: f64,
    /// `value > bound + margin`: the bound failed beyond Monte Carlo
    /// noise. Expected for negative controls (non-median-regular
    /// estimators), a red flag otherwise.
    pub violation: bool,
    /// Exact miscoverage where a closed form applies (self-checked).
    pub exact: Option<f64>,
    /// True when the extraction grid could not reach `n^(-1/2)`.
    pub grid_fallback: bool,
    pub reps: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DualityReport {
    pub estimator: String,
    pub reps: u64,
    pub seed: u64,
    /// Level the per-batch estimator-to-interval stage runs at inside the
    /// boost stage: the largest level in the grid.
    pub gamma: f64,
    pub rows: Vec<DualityRow>,
    /// Number of rows with `violation = true`.
    pub violations: usize,
}

/// Median-bias Monte Carlo for one `(model, estimator, n)` cell using the
/// harness's cell-stream convention.
fn bias_cell(
    model: &DataModel,
    estimator: &dyn crate::estimators::Estimator,
    n: usize,
    reps: u64,
    cell: StreamSeed,
) -> Result<(f64, f64, f64)> {
    let theta = ExtReal::new(model.theta())?;
    let (ge, le) = (0..reps)
        .into_par_iter()
        .map(|i| {
            let rep = cell.child(i);
            let sample = model.sample(n, rep.child(0));
            let value = estimator.estimate(&sample, rep.child(1))?;
            Ok((u64::from(value >= theta), u64::from(value <= theta)))
        })
        .try_reduce(|| (0u64, 0u64), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    let p_ge = ge as f64 / reps as f64;
    let p_le = le as f64 / reps as f64;
    Ok((crate::bias::median_bias_from_probs(p_ge, p_le)?, p_ge, p_le))
}

/// Round trip between the three equivalent properties: a median-regular
/// estimator yields valid intervals (batch min/max), valid intervals
/// boost to every level, and the boosted family yields back a
/// median-regular estimator by extraction. Each stage's Monte Carlo value
/// is reported against its theoretical bound; closed-form cells are
/// self-checked. Stage streams derive from `root.child(stage_index)`.
pub fn run_duality_roundtrip(config: &ExperimentConfig) -> Result<DualityReport> {
    config.validated_grids()?;
    let models = config.parsed_models()?;
    let estimator = config.required_estimator()?;
    let slack = config.slack_sequence()?;
    with_thread_cap(|| duality_inner(config, &models, estimator.clone(), &slack))?
}

fn duality_inner(
    config: &ExperimentConfig,
    models: &[DataModel],
    estimator: DynEstimator,
    slack: &SlackSequence,
) -> Result<DualityReport> {
    let root = StreamSeed::root(config.seed);
    let gamma = config
        .level_grid
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let alpha_min = config
        .level_grid
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let levels = config.level_grid.len();
    let reps = config.reps;
    let mut rows = Vec::new();

    // Stage 1, estimator -> interval: batch min/max around the estimator,
    // valid at every requested level if the estimator is median-unbiased
    // per batch.
    let stage1 = zoo_or_generic_hulc(&config.estimator, &estimator)?;
    let stage1_root = root.child(0);
    for (mi, model) in models.iter().enumerate() {
        for (ni, &n) in config.n_grid.iter().enumerate() {
            for (ai, &alpha) in config.level_grid.iter().enumerate() {
                let flat = ((mi * config.n_grid.len() + ni) * levels + ai) as u64;
                let row = cell_row(
                    model,
                    stage1.as_ref(),
                    n,
                    alpha,
                    reps,
                    config.seed,
                    stage1_root.child(flat),
                )?;
                // Nominal claim is alpha; with per-batch median bias r the
                // batch construction guarantees (1/2-r)^B + (1/2+r)^B.
                let b = batch_count(alpha, 0.0)?;
                let r = slack.value(n / b as usize);
                let slack_bound = (0.5 - r).powi(b as i32) + (0.5 + r).powi(b as i32);
                let bound = alpha.max(slack_bound).min(1.0);
                rows.push(duality_row("interval_from_estimator", row, bound, reps));
            }
        }
    }

    // Stage 2, interval -> every level: pin stage 1 at gamma and boost.
    let boosted: DynProcedure = Arc::new(Boosted::new(stage1.clone(), gamma)?);
    let stage2_root = root.child(1);
    for (mi, model) in models.iter().enumerate() {
        for (ni, &n) in config.n_grid.iter().enumerate() {
            for (ai, &alpha) in config.level_grid.iter().enumerate() {
                let flat = ((mi * config.n_grid.len() + ni) * levels + ai) as u64;
                let row = cell_row(
                    model,
                    boosted.as_ref(),
                    n,
                    alpha,
                    reps,
                    config.seed,
                    stage2_root.child(flat),
                )?;
                let bound = boost_miscoverage_bound(alpha, gamma, n, slack)?.min(1.0);
                rows.push(duality_row("boost_level", row, bound, reps));
            }
        }
    }

    // Stage 3, family -> estimator: extract a random endpoint of the
    // monotonized boosted family at level n^(-1/2) and measure its median
    // bias directly.
    let grid = geometric_level_grid(alpha_min, DEFAULT_MONOTONIZE_GRID_LEN)?;
    let extracted = ExtractedEstimator::new(boosted.clone(), grid.clone())?;
    let stage3_root = root.child(2);
    for (mi, model) in models.iter().enumerate() {
        for (ni, &n) in config.n_grid.iter().enumerate() {
            let flat = (mi * config.n_grid.len() + ni) as u64;
            let cell = stage3_root.child(flat);
            let (bias, _, _) = bias_cell(model, &extracted, n, reps, cell)?;
            let target = (n as f64).powf(-0.5);
            let level_used = if alpha_min <= target {
                target.min(1.0)
            } else {
                alpha_min
            };
            let grid_fallback = alpha_min > target;
            let alpha_n = oracle_alpha_sequence(slack, gamma / 2.0, n)?;
            let bound = (alpha_n.max(level_used) / 2.0 + slack.value(n) / 2.0).min(0.5);
            let margin = three_sigma(0.5, reps);
            rows.push(DualityRow {
                stage: "extract_estimator".to_string(),
                model: model.name().to_string(),
                n,
                alpha: level_used,
                value: bias,
                bound,
                margin,
                violation: bias > bound + margin,
                exact: None,
                grid_fallback,
                reps,
            });
        }
    }

    let violations = rows.iter().filter(|r| r.violation).count();
    Ok(DualityReport {
        estimator: estimator.name().to_string(),
        reps,
        seed: config.seed,
        gamma,
        rows,
        violations,
    })
}

/// Builds the stage-1 batch min/max procedure, preserving the estimator
/// kind (and hence the closed-form oracles) when the configured string
/// names a zoo estimator.
fn zoo_or_generic_hulc(spec: &Option<String>, fallback: &DynEstimator) -> Result<DynProcedure> {
    if let Some(spec) = spec {
        if let Ok(zoo) = crate::registry::parse_zoo_estimator(spec) {
            return Ok(Arc::new(BatchMinMax::from_zoo(zoo, 0.0, false)?));
        }
    }
    Ok(Arc::new(BatchMinMax::from_estimator(
        fallback.clone(),
        0.0,
        false,
    )?))
}

fn duality_row(stage: &str, row: CoverageRow, bound: f64, reps: u64) -> DualityRow {
    let margin = three_sigma(bound.min(1.0), reps);
    DualityRow {
        stage: stage.to_string(),
        model: row.model,
        n: row.n,
        alpha: row.alpha,
        value: row.miscoverage,
        bound,
        margin,
        violation: row.miscoverage > bound + margin,
        exact: row.exact,
        grid_fallback: false,
        reps,
    }
}

/// One model's median-bias estimate in a bias report.
#[derive(Clone, Debug, Serialize)]
pub struct BiasRow {
    pub model: String,
    pub n: usize,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub exact: bool,
    pub reps: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BiasReport {
    pub estimator: String,
    pub n: usize,
    pub reps: u64,
    pub seed: u64,
    pub rows: Vec<BiasRow>,
    /// Model attaining the largest point estimate (first on ties).
    pub worst_model: String,
    pub worst: BiasRow,
}

/// Worst-case median bias of one estimator over a model grid, preferring
/// closed forms where the estimator/model pair has one.
pub fn run_medbias(config: &ExperimentConfig) -> Result<BiasReport> {
    let models = config.parsed_models()?;
    let estimator = config.required_estimator()?;
    if config.n_grid.len() != 1 {
        return Err(Error::config(
            "n_grid",
            "bias runs take exactly one sample size",
        ));
    }
    if config.reps == 0 {
        return Err(Error::config("reps", "replication count must be positive"));
    }
    let n = config.n_grid[0];
    with_thread_cap(|| bias_inner(config, &models, estimator.as_ref(), n))?
}

fn bias_inner(
    config: &ExperimentConfig,
    models: &[DataModel],
    estimator: &dyn crate::estimators::Estimator,
    n: usize,
) -> Result<BiasReport> {
    let worst = worst_case_median_bias(models, estimator, n, config.reps, config.seed)?;
    let to_row = |model: &str, e: &MedianBiasEstimate| BiasRow {
        model: model.to_string(),
        n,
        point: e.point,
        lower: e.lower,
        upper: e.upper,
        exact: e.exact,
        reps: e.reps,
        seed: config.seed,
    };
    let rows = worst.per_model.iter().map(|(m, e)| to_row(m, e)).collect();
    Ok(BiasReport {
        estimator: estimator.name().to_string(),
        n,
        reps: config.reps,
        seed: config.seed,
        rows,
        worst_model: worst.worst_model.clone(),
        worst: to_row(&worst.worst_model, &worst.worst),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_coverage_config() -> ExperimentConfig {
        ExperimentConfig {
            models: vec!["normal_mean:mu=0".into(), "normal_mean:mu=1".into()],
            procedure: Some("zinterval".into()),
            estimator: None,
            n_grid: vec![20, 50],
            level_grid: vec![0.1, 0.5],
            reps: 2_000,
            seed: 7,
            slack: vec![],
            sweep: None,
        }
    }

    #[test]
    fn config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"models": ["normal_mean:mu=0"], "procedure": "zinterval",
                "n_grid": [10], "level_grid": [0.1]}"#,
        )
        .unwrap();
        assert_eq!(cfg.reps, DEFAULT_REPS);
        assert_eq!(cfg.seed, 0);
        assert!(cfg.sweep.is_none());
        let err = ExperimentConfig::from_json(r#"{"model": "x"}"#).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn coverage_rows_and_worst_cells() {
        let cfg = small_coverage_config();
        let report = run_coverage(&cfg).unwrap();
        assert_eq!(report.rows.len(), 2 * 2 * 2);
        assert_eq!(report.worst.len(), 2 * 2);
        for row in &report.rows {
            assert!(row.miscoverage <= row.miscoverage_upper);
            assert!(row.trivial_fraction == 0.0);
            assert!(row.mean_width.is_some());
            // The z-interval's exact miscoverage is alpha; the oracle
            // self-check already enforced MC agreement.
            let exact = row
                .exact
                .expect("z-interval has a closed form on normal models");
            assert!((exact - row.alpha).abs() < 1e-9);
        }
        for w in &report.worst {
            let max_for_cell = report
                .rows
                .iter()
                .filter(|r| r.n == w.n && r.alpha == w.alpha)
                .map(|r| r.miscoverage)
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(w.miscoverage, max_for_cell);
        }
    }

    #[test]
    fn coverage_is_deterministic() {
        let cfg = small_coverage_config();
        let a = run_coverage(&cfg).unwrap();
        let b = run_coverage(&cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a.rows).unwrap(),
            serde_json::to_string(&b.rows).unwrap()
        );
        let mut cfg2 = cfg;
        cfg2.seed = 8;
        let c = run_coverage(&cfg2).unwrap();
        assert_ne!(
            serde_json::to_string(&a.rows).unwrap(),
            serde_json::to_string(&c.rows).unwrap()
        );
    }

    #[test]
    fn coverage_validates_config() {
        let mut cfg = small_coverage_config();
        cfg.models.clear();
        assert!(run_coverage(&cfg).unwrap_err().is_config());
        let mut cfg = small_coverage_config();
        cfg.procedure = None;
        assert!(run_coverage(&cfg).unwrap_err().is_config());
        let mut cfg = small_coverage_config();
        cfg.level_grid = vec![0.0];
        assert!(run_coverage(&cfg).unwrap_err().is_config());
        let mut cfg = small_coverage_config();
        cfg.reps = 0;
        assert!(run_coverage(&cfg).unwrap_err().is_config());
        // Sample size below the procedure's minimum names n_grid.
        let mut cfg = small_coverage_config();
        cfg.procedure = Some("hulc:est=mean".into());
        cfg.n_grid = vec![3];
        let err = run_coverage(&cfg).unwrap_err();
        assert!(err.is_config(), "{err:?}");
    }

    #[test]
    fn oracle_check_flags_contradictions() {
        // 50 misses in 100 reps is wildly inconsistent with exact = 0.9.
        let err = oracle_check("demo", 50, 100, 0.9).unwrap_err();
        assert!(err.is_oracle_violation());
        assert!(oracle_check("demo", 50, 100, 0.5).is_ok());
        // And consistent values pass even at the boundary.
        assert!(oracle_check("demo", 0, 100, 0.0).is_ok());
    }

    #[test]
    fn width_stats_conventions() {
        assert_eq!(width_stats(vec![]), (None, None));
        let (mean, median) = width_stats(vec![3.0, 1.0, 2.0]);
        assert_eq!(mean, Some(2.0));
        assert_eq!(median, Some(2.0));
        let (_, median) = width_stats(vec![4.0, 1.0, 2.0, 3.0]);
        assert_eq!(median, Some(2.5));
    }

    #[test]
    fn sweep_builds_drift_models() {
        let spec = SweepSpec {
            family: "threshold_normal".into(),
            h_grid: vec![-1.0, 0.0, 1.0],
            hodges_drift: true,
        };
        let models = sweep_models(&spec, 100).unwrap();
        assert_eq!(models.len(), 4);
        assert_eq!(models[0].name(), "threshold_normal:mu=-0.1");
        assert_eq!(models[1].name(), "threshold_normal:mu=0");
        // Stress point: 0.5 * 100^(-1/4).
        assert!(models[3].name().starts_with("threshold_normal:mu=0.158"));
        assert!(sweep_models(
            &SweepSpec {
                family: "beta".into(),
                h_grid: vec![0.0],
                hodges_drift: false
            },
            10
        )
        .is_err());
    }

    #[test]
    fn sweep_runs_and_reports_per_n_worst() {
        let cfg = ExperimentConfig {
            models: vec![],
            procedure: Some("hulc:est=threshold_mean".into()),
            estimator: None,
            n_grid: vec![50],
            level_grid: vec![0.1],
            reps: 2_000,
            seed: 3,
            slack: vec![],
            sweep: Some(SweepSpec {
                family: "threshold_normal".into(),
                h_grid: vec![-2.0, 0.0, 2.0],
                hodges_drift: false,
            }),
        };
        let report = run_uniformity_sweep(&cfg).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert_eq!(report.worst.len(), 1);
        // Validity: every drift point stays within alpha + 3 sigma.
        let tol = three_sigma(0.1, cfg.reps);
        for row in &report.rows {
            assert!(
                row.miscoverage <= 0.1 + tol,
                "{}: {}",
                row.model,
                row.miscoverage
            );
        }
    }

    #[test]
    fn duality_roundtrip_mean_estimator() {
        let cfg = ExperimentConfig {
            models: vec!["normal_mean:mu=0".into()],
            procedure: None,
            estimator: Some("mean".into()),
            n_grid: vec![60],
            level_grid: vec![0.1, 0.25],
            reps: 1_500,
            seed: 5,
            slack: vec![],
            sweep: None,
        };
        let report = run_duality_roundtrip(&cfg).unwrap();
        assert_eq!(report.gamma, 0.25);
        // 2 interval stages x 2 levels + 1 extraction row.
        assert_eq!(report.rows.len(), 5);
        assert_eq!(report.violations, 0, "{:?}", report.rows);
        let extract = report
            .rows
            .iter()
            .find(|r| r.stage == "extract_estimator")
            .unwrap();
        // n = 60: extraction level n^(-1/2) ~ 0.129 is reachable from
        // alpha_min = 0.1.
        assert!(!extract.grid_fallback);
        assert!((extract.alpha - (60f64).powf(-0.5)).abs() < 1e-12);
        assert!((extract.bound - extract.alpha / 2.0).abs() < 1e-12);
    }

    #[test]
    fn duality_flags_negative_control() {
        // The always-zero hard threshold at a model with mu < 0 never
        // brackets the target from below... in fact it equals max(mean, 0)
        // per batch, which is strictly above mu = -0.5 almost always, so
        // stage-1 intervals miss almost always: a designed violation.
        let cfg = ExperimentConfig {
            models: vec!["normal_mean:mu=-0.5".into()],
            procedure: None,
            estimator: Some("hard_threshold".into()),
            n_grid: vec![60],
            level_grid: vec![0.1],
            reps: 400,
            seed: 5,
            slack: vec![],
            sweep: None,
        };
        let report = run_duality_roundtrip(&cfg).unwrap();
        assert!(report.violations > 0);
        let stage1 = report
            .rows
            .iter()
            .find(|r| r.stage == "interval_from_estimator")
            .unwrap();
        assert!(stage1.violation);
        assert!(stage1.value > 0.9);
    }

    #[test]
    fn medbias_report_prefers_exact_and_picks_worst() {
        let cfg = ExperimentConfig {
            models: vec!["normal_mean:mu=0".into(), "uniform_scale:theta=1".into()],
            procedure: None,
            estimator: Some("mean".into()),
            n_grid: vec![10],
            level_grid: vec![],
            reps: 200,
            seed: 0,
            slack: vec![],
            sweep: None,
        };
        let report = run_medbias(&cfg).unwrap();
        assert_eq!(report.rows.len(), 2);
        // Normal mean: closed-form bias zero. Uniform scale: the sample
        // mean never reaches theta = 1, so every replicate undershoots.
        assert!(report.rows[0].exact);
        assert_eq!(report.rows[0].point, 0.0);
        assert_eq!(report.worst_model, "uniform_scale:theta=1");
        assert_eq!(report.worst.point, 0.5);
        assert!(!report.worst.exact);
        let mut cfg2 = cfg;
        cfg2.n_grid = vec![10, 20];
        assert!(run_medbias(&cfg2).unwrap_err().is_config());
    }

    #[test]
    fn thread_cap_env_is_validated() {
        // Only exercise the error paths here; the success path with a
        // custom pool runs in the CLI determinism test to avoid polluting
        // the test process environment.
        assert!(with_thread_cap(|| 1 + 1).unwrap() == 2);
    }
}
