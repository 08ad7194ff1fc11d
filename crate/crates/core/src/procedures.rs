//! Confidence-interval procedures: base intervals, the batch min/max
//! construction as a procedure, and the combinators (level boosting,
//! union-of-batches, monotonization) that the registry composes into
//! pipelines.
//!
//! A [`Procedure`] maps `(sample, level, stream)` to an [`Interval`],
//! deterministically in all three arguments. Where the true miscoverage of
//! a procedure has a closed form for a given model, `exact_miscoverage`
//! reports it; the experiment harness uses those values as self-checks
//! against its Monte Carlo estimates.

use crate::constructions::{
    batch_count, batch_minmax_interval, boost_level, ci_to_estimator,
    extract_median_regular_estimator, geometric_level_grid, monotonize_family, union_batch_count,
    union_batch_interval, BatchPlan,
};
use crate::error::{Error, Result};
use crate::estimators::{estimator_min_n, DynEstimator, Estimator, EstimatorKind, ZooEstimator};
use crate::ext::{ExtReal, Interval};
use crate::level::Level;
use crate::models::{DataModel, ModelKind};
use crate::rng::StreamSeed;
use statrs::distribution::{ContinuousCDF, Normal};
use std::sync::Arc;

/// A confidence-interval procedure. `interval` must be a deterministic
/// function of `(sample, alpha, stream)`.
pub trait Procedure: Send + Sync {
    /// Canonical registry name, e.g. `hulc:est=mean` or
    /// `zinterval@0.1 -> boost_level`.
    fn name(&self) -> String;

    /// Smallest sample size for which `interval` can succeed at `alpha`.
    fn min_sample_size(&self, alpha: f64) -> Result<usize>;

    fn interval(&self, sample: &[f64], alpha: f64, stream: StreamSeed) -> Result<Interval>;

    /// True miscoverage at `(model, n, alpha)` when a closed form is known;
    /// `None` otherwise. Values are exact up to normal-CDF evaluation.
    fn exact_miscoverage(&self, _model: &DataModel, _n: usize, _alpha: f64) -> Option<f64> {
        None
    }
}

/// Shared handle used wherever procedures are stored or composed.
pub type DynProcedure = Arc<dyn Procedure>;

fn standard_normal() -> Normal {
    Normal::standard()
}

/// Upper `1 - alpha/2` standard normal quantile; infinite at `alpha = 0`,
/// zero at `alpha = 1` (point interval).
fn two_sided_z(alpha: f64) -> f64 {
    if alpha <= 0.0 {
        f64::INFINITY
    } else if alpha >= 1.0 {
        0.0
    } else {
        standard_normal().inverse_cdf(1.0 - alpha / 2.0)
    }
}

fn format_level(x: f64) -> String {
    format!("{x}")
}

/// Equal-tailed z-interval around the sample mean with known standard
/// deviation: `mean ± z_{1 - alpha/2} * sigma / sqrt(n)`.
#[derive(Clone, Debug)]
pub struct ZInterval {
    sigma: f64,
}

impl ZInterval {
    pub fn new(sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::InvalidScale(sigma));
        }
        Ok(Self { sigma })
    }

    pub fn unit_variance() -> Self {
        Self { sigma: 1.0 }
    }

    pub fn shared(sigma: f64) -> Result<DynProcedure> {
        Ok(Arc::new(Self::new(sigma)?))
    }

    /// True miscoverage when the sample mean is exactly
    /// `N(target, 1/n)`-distributed: `2 (1 - Phi(z_{1-alpha/2} * sigma))`.
    fn normal_mean_miscoverage(&self, alpha: f64) -> f64 {
        let z = two_sided_z(alpha);
        if z.is_infinite() {
            0.0
        } else {
            (2.0 * (1.0 - standard_normal().cdf(z * self.sigma))).clamp(0.0, 1.0)
        }
    }
}

impl Procedure for ZInterval {
    fn name(&self) -> String {
        if self.sigma == 1.0 {
            "zinterval".to_string()
        } else {
            format!("zinterval:sigma={}", self.sigma)
        }
    }

    fn min_sample_size(&self, _alpha: f64) -> Result<usize> {
        Ok(1)
    }

    fn interval(&self, sample: &[f64], alpha: f64, _stream: StreamSeed) -> Result<Interval> {
        let alpha = Level::new(alpha)?.value();
        if sample.is_empty() {
            return Err(Error::InsufficientData {
                required: 1,
                got: 0,
            });
        }
        let mean = sample.iter().sum::<f64>() / sample.len() as f64;
        let halfwidth = two_sided_z(alpha) * self.sigma / (sample.len() as f64).sqrt();
        Interval::around(ExtReal::from_estimate(mean), halfwidth)
    }

    fn exact_miscoverage(&self, model: &DataModel, _n: usize, alpha: f64) -> Option<f64> {
        match model.kind() {
            ModelKind::NormalMean { .. } => Some(self.normal_mean_miscoverage(alpha)),
            _ => None,
        }
    }
}

/// Wald-style interval: `estimate ± z_{1 - alpha/2} * sigma / sqrt(n)`,
/// centered at an arbitrary estimator instead of the mean. With a
/// well-behaved center this is the textbook interval; centered at a
/// non-median-regular estimator it is the stress case whose miscoverage
/// can approach one under parameter drift.
#[derive(Clone, Debug)]
pub struct WaldAround {
    est: ZooEstimator,
    sigma: f64,
}

impl WaldAround {
    pub fn new(est: ZooEstimator, sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::InvalidScale(sigma));
        }
        Ok(Self { est, sigma })
    }

    pub fn shared(est: ZooEstimator, sigma: f64) -> Result<DynProcedure> {
        Ok(Arc::new(Self::new(est, sigma)?))
    }
}

impl Procedure for WaldAround {
    fn name(&self) -> String {
        let mut name = format!("wald:est={}", self.est.name());
        if self.sigma != 1.0 {
            name.push_str(&format!(",sigma={}", self.sigma));
        }
        name
    }

    fn min_sample_size(&self, _alpha: f64) -> Result<usize> {
        Ok(estimator_min_n(self.est.kind()))
    }

    fn interval(&self, sample: &[f64], alpha: f64, stream: StreamSeed) -> Result<Interval> {
        let alpha = Level::new(alpha)?.value();
        let center = self.est.estimate(sample, stream)?;
        let halfwidth = two_sided_z(alpha) * self.sigma / (sample.len() as f64).sqrt();
        Interval::around(center, halfwidth)
    }

    fn exact_miscoverage(&self, model: &DataModel, n: usize, alpha: f64) -> Option<f64> {
        match (model.kind(), self.est.kind()) {
            (ModelKind::NormalMean { .. }, EstimatorKind::Mean) => {
                Some(ZInterval { sigma: self.sigma }.normal_mean_miscoverage(alpha))
            }
            (ModelKind::NormalMean { mu }, EstimatorKind::Hodges { exponent }) => Some(
                wald_hodges_miscoverage(*mu, n, *exponent, alpha, self.sigma),
            ),
            _ => None,
        }
    }
}

/// Exact miscoverage of the Wald interval centered at the Hodges-style
/// estimator under `N(mu, 1)` samples of size `n`.
///
/// The interval covers `mu` when either the mean survives the clip and
/// lands within the halfwidth of `mu`, or the clip fires (`|mean| <= c`)
/// and `|mu|` itself is within the halfwidth of the resulting 0.
pub fn wald_hodges_miscoverage(mu: f64, n: usize, exponent: f64, alpha: f64, sigma: f64) -> f64 {
    let alpha = alpha.clamp(0.0, 1.0);
    let root_n = (n as f64).sqrt();
    let w = two_sided_z(alpha) * sigma / root_n;
    if w.is_infinite() {
        return 0.0;
    }
    let c = (n as f64).powf(-exponent);
    let cdf = |x: f64| standard_normal().cdf((x - mu) * root_n);
    let (a, b) = (mu - w, mu + w);
    // Mean inside [a, b] with the clip inactive.
    let p_window = cdf(b) - cdf(a);
    let overlap_lo = a.max(-c);
    let overlap_hi = b.min(c);
    let p_window_clipped = if overlap_hi > overlap_lo {
        cdf(overlap_hi) - cdf(overlap_lo)
    } else {
        0.0
    };
    let mut cover = p_window - p_window_clipped;
    // Clip fires and the interval around 0 still reaches mu.
    if mu.abs() <= w {
        cover += cdf(c) - cdf(-c);
    }
    (1.0 - cover).clamp(0.0, 1.0)
}

/// Stream child reserved for the optional pre-batching shuffle, chosen far
/// above any realistic batch index.
const SHUFFLE_CHILD: u64 = u64::MAX;

/// Batch min/max interval as a procedure: split into
/// `batch_count(alpha, delta)` contiguous batches, estimate on each, and
/// return the hull of the batch estimates.
///
/// `delta` is the median bias budget per batch estimate. The optional
/// shuffle permutes the sample (from a dedicated stream branch) before
/// batching, for data with suspected ordering artifacts; under i.i.d.
/// sampling it changes nothing statistically.
pub struct BatchMinMax {
    est: DynEstimator,
    est_kind: Option<EstimatorKind>,
    delta: f64,
    shuffle: bool,
}

impl BatchMinMax {
    pub fn from_zoo(est: ZooEstimator, delta: f64, shuffle: bool) -> Result<Self> {
        let kind = est.kind().clone();
        Ok(Self {
            est: Arc::new(est),
            est_kind: Some(kind),
            delta: crate::level::Delta::new(delta)?.value(),
            shuffle,
        })
    }

    pub fn from_estimator(est: DynEstimator, delta: f64, shuffle: bool) -> Result<Self> {
        Ok(Self {
            est,
            est_kind: None,
            delta: crate::level::Delta::new(delta)?.value(),
            shuffle,
        })
    }

    pub fn shared_zoo(est: ZooEstimator, delta: f64, shuffle: bool) -> Result<DynProcedure> {
        Ok(Arc::new(Self::from_zoo(est, delta, shuffle)?))
    }

    fn per_batch_min(&self) -> usize {
        self.est_kind.as_ref().map_or(1, estimator_min_n)
    }
}

fn fisher_yates(sample: &[f64], stream: StreamSeed) -> Vec<f64> {
    use rand::Rng;
    let mut xs = sample.to_vec();
    let mut rng = stream.rng();
    for i in (1..xs.len()).rev() {
        let j = rng.random_range(0..=i);
        xs.swap(i, j);
    }
    xs
}

impl Procedure for BatchMinMax {
    fn name(&self) -> String {
        let mut name = format!("hulc:est={}", self.est.name());
        if self.delta != 0.0 {
            name.push_str(&format!(",delta={}", self.delta));
        }
        if self.shuffle {
            name.push_str(",shuffle=true");
        }
        name
    }

    fn min_sample_size(&self, alpha: f64) -> Result<usize> {
        let b = batch_count(alpha, self.delta)? as usize;
        Ok(b * self.per_batch_min())
    }

    fn interval(&self, sample: &[f64], alpha: f64, stream: StreamSeed) -> Result<Interval> {
        let required = self.min_sample_size(alpha)?;
        if sample.len() < required {
            return Err(Error::InsufficientData {
                required,
                got: sample.len(),
            });
        }
        if self.shuffle {
            let shuffled = fisher_yates(sample, stream.child(SHUFFLE_CHILD));
            batch_minmax_interval(self.est.as_ref(), &shuffled, alpha, self.delta, stream)
        } else {
            batch_minmax_interval(self.est.as_ref(), sample, alpha, self.delta, stream)
        }
    }

    fn exact_miscoverage(&self, model: &DataModel, n: usize, alpha: f64) -> Option<f64> {
        if self.delta != 0.0 {
            return None;
        }
        let kind = self.est_kind.as_ref()?;
        let b = batch_count(alpha, 0.0).ok()?;
        let plan = BatchPlan::new(n, b).ok()?;
        let sizes = plan.sizes();
        if sizes.iter().any(|&m| m < self.per_batch_min()) {
            return None;
        }
        // Miss above: every batch estimate strictly above the target; miss
        // below: every batch estimate strictly below. Batches are
        // independent, so each side is a product over batches.
        match (model.kind(), kind) {
            // Continuous symmetric location models with estimators hitting
            // the target's two sides with probability exactly 1/2 each:
            // both sides contribute (1/2)^B.
            (
                ModelKind::NormalMean { .. }
                | ModelKind::LaplaceLocation { .. }
                | ModelKind::CauchyLocation { .. },
                EstimatorKind::Mean | EstimatorKind::Median | EstimatorKind::OrderStatMedian { .. },
            ) => Some(2f64.powi(1 - b as i32)),

            // Clipped mean against the clipped target: for mu > 0 the
            // continuous symmetric argument applies; for mu <= 0 the
            // estimate is never below the target, and it exceeds it on a
            // batch exactly when that batch's mean is positive.
            (ModelKind::ThresholdNormal { mu }, EstimatorKind::ThresholdMean) => {
                if *mu > 0.0 {
                    Some(2f64.powi(1 - b as i32))
                } else {
                    let prod: f64 = sizes
                        .iter()
                        .map(|&m| standard_normal().cdf(mu * (m as f64).sqrt()))
                        .product();
                    Some(prod)
                }
            }

            // Corrected scale estimator: continuous with exact 1/2-1/2
            // split at the endpoint.
            (ModelKind::UniformScale { .. }, EstimatorKind::UniformScaleCorrected) => {
                Some(2f64.powi(1 - b as i32))
            }

            // The maximum is strictly below the endpoint on every batch:
            // the hull never reaches theta.
            (ModelKind::UniformScale { .. }, EstimatorKind::UniformMle) => Some(1.0),

            _ => None,
        }
    }
}

/// A procedure evaluated at a fixed level, ignoring the level it is later
/// called with. This is how pipelines pin a stage, e.g. `zinterval@0.1`.
pub struct FixedLevel {
    base: DynProcedure,
    gamma: f64,
}

impl FixedLevel {
    pub fn new(base: DynProcedure, gamma: f64) -> Result<Self> {
        let gamma = Level::new(gamma)?.value();
        Ok(Self { base, gamma })
    }

    pub fn shared(base: DynProcedure, gamma: f64) -> Result<DynProcedure> {
        Ok(Arc::new(Self::new(base, gamma)?))
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn base(&self) -> &DynProcedure {
        &self.base
    }
}

impl Procedure for FixedLevel {
    fn name(&self) -> String {
        format!("{}@{}", self.base.name(), format_level(self.gamma))
    }

    fn min_sample_size(&self, _alpha: f64) -> Result<usize> {
        self.base.min_sample_size(self.gamma)
    }

    fn interval(&self, sample: &[f64], _alpha: f64, stream: StreamSeed) -> Result<Interval> {
        self.base.interval(sample, self.gamma, stream)
    }

    fn exact_miscoverage(&self, model: &DataModel, n: usize, _alpha: f64) -> Option<f64> {
        self.base.exact_miscoverage(model, n, self.gamma)
    }
}

/// Level boosting as a procedure: the base runs at its fixed level `gamma`
/// per batch; the boosted procedure answers at any stricter level.
pub struct Boosted {
    base: DynProcedure,
    gamma: f64,
}

impl Boosted {
    pub fn new(base: DynProcedure, gamma: f64) -> Result<Self> {
        let gamma = Level::new(gamma)?.value();
        Ok(Self { base, gamma })
    }

    pub fn shared(base: DynProcedure, gamma: f64) -> Result<DynProcedure> {
        Ok(Arc::new(Self::new(base, gamma)?))
    }
}

impl Procedure for Boosted {
    fn name(&self) -> String {
        format!(
            "{}@{} -> boost_level",
            self.base.name(),
            format_level(self.gamma)
        )
    }

    fn min_sample_size(&self, alpha: f64) -> Result<usize> {
        let b = batch_count(alpha, self.gamma / 2.0)? as usize;
        Ok(b * self.base.min_sample_size(self.gamma)?.max(1))
    }

    fn interval(&self, sample: &[f64], alpha: f64, stream: StreamSeed) -> Result<Interval> {
        let required = self.min_sample_size(alpha)?;
        if sample.len() < required {
            return Err(Error::InsufficientData {
                required,
                got: sample.len(),
            });
        }
        boost_level(self.base.as_ref(), self.gamma, sample, alpha, stream)
    }
}

/// Union-of-batches as a procedure: hull of `ceil(log_gamma(alpha))`
/// base intervals, each run at level `gamma` on its own batch.
pub struct UnionBatches {
    base: DynProcedure,
    gamma: f64,
}

impl UnionBatches {
    pub fn new(base: DynProcedure, gamma: f64) -> Result<Self> {
        let gamma = Level::new(gamma)?.value();
        Ok(Self { base, gamma })
    }

    pub fn shared(base: DynProcedure, gamma: f64) -> Result<DynProcedure> {
        Ok(Arc::new(Self::new(base, gamma)?))
    }
}

impl Procedure for UnionBatches {
    fn name(&self) -> String {
        format!(
            "{}@{} -> union_batch",
            self.base.name(),
            format_level(self.gamma)
        )
    }

    fn min_sample_size(&self, alpha: f64) -> Result<usize> {
        let b = union_batch_count(self.gamma, alpha)? as usize;
        Ok(b * self.base.min_sample_size(self.gamma)?.max(1))
    }

    fn interval(&self, sample: &[f64], alpha: f64, stream: StreamSeed) -> Result<Interval> {
        let required = self.min_sample_size(alpha)?;
        if sample.len() < required {
            return Err(Error::InsufficientData {
                required,
                got: sample.len(),
            });
        }
        union_batch_interval(self.base.as_ref(), self.gamma, sample, alpha, stream)
    }
}

/// Default number of levels in a monotonization grid.
pub const DEFAULT_MONOTONIZE_GRID_LEN: usize = 64;

/// Default smallest level in a monotonization grid.
pub const DEFAULT_MONOTONIZE_ALPHA_MIN: f64 = 0.001;

/// Monotonization over a fixed geometric level grid: the reported interval
/// at level `alpha` is the hull of the family's intervals at every grid
/// level at or above `alpha`. Because the grid and the per-level streams
/// are fixed, outputs are nested across levels by construction.
///
/// Requests below the grid floor hull the entire grid, so the coverage
/// guarantee saturates at the floor level; requests above the grid
/// maximum fail with `EmptyLevelGrid`.
pub struct Monotonized {
    family: DynProcedure,
    grid: Vec<f64>,
    grid_len: usize,
    alpha_min: f64,
}

impl Monotonized {
    pub fn new(family: DynProcedure, alpha_min: f64, grid_len: usize) -> Result<Self> {
        let grid = geometric_level_grid(alpha_min, grid_len)?;
        Ok(Self {
            family,
            grid,
            grid_len,
            alpha_min,
        })
    }

    pub fn shared(family: DynProcedure, alpha_min: f64, grid_len: usize) -> Result<DynProcedure> {
        Ok(Arc::new(Self::new(family, alpha_min, grid_len)?))
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }
}

impl Procedure for Monotonized {
    fn name(&self) -> String {
        let mut name = format!("{} -> monotonize", self.family.name());
        let mut params = Vec::new();
        if self.alpha_min != DEFAULT_MONOTONIZE_ALPHA_MIN {
            params.push(format!("alpha_min={}", self.alpha_min));
        }
        if self.grid_len != DEFAULT_MONOTONIZE_GRID_LEN {
            params.push(format!("grid_len={}", self.grid_len));
        }
        if !params.is_empty() {
            name.push(':');
            name.push_str(&params.join(","));
        }
        name
    }

    fn min_sample_size(&self, alpha: f64) -> Result<usize> {
        // The most demanding grid level is the smallest one at or above
        // alpha (smaller levels need more batches in batch-based families).
        let effective = self
            .grid
            .iter()
            .copied()
            .filter(|&k| k >= alpha)
            .fold(f64::INFINITY, f64::min);
        if effective.is_infinite() {
            return Err(Error::EmptyLevelGrid { alpha });
        }
        self.family.min_sample_size(effective)
    }

    fn interval(&self, sample: &[f64], alpha: f64, stream: StreamSeed) -> Result<Interval> {
        monotonize_family(self.family.as_ref(), sample, alpha, &self.grid, stream)
    }
}

/// The interval-to-estimator direction packaged as an estimator: run the
/// procedure at a fixed level and report a uniformly random endpoint.
pub struct RandomizedEndpoint {
    proc: DynProcedure,
    level: f64,
    name: String,
}

impl RandomizedEndpoint {
    pub fn new(proc: DynProcedure, level: f64) -> Result<Self> {
        let level = Level::new(level)?.value();
        let name = format!("endpoint({}@{})", proc.name(), format_level(level));
        Ok(Self { proc, level, name })
    }

    pub fn shared(proc: DynProcedure, level: f64) -> Result<DynEstimator> {
        Ok(Arc::new(Self::new(proc, level)?))
    }
}

impl Estimator for RandomizedEndpoint {
    fn name(&self) -> &str {
        &self.name
    }

    fn estimate(&self, sample: &[f64], stream: StreamSeed) -> Result<ExtReal> {
        let ci = self.proc.interval(sample, self.level, stream.child(0))?;
        Ok(ci_to_estimator(&ci, stream.child(1)))
    }
}

/// The family-to-estimator extraction packaged as an estimator: monotonize
/// the family at level `n^(-1/2)` over a fixed grid and report a random
/// endpoint of the hull.
pub struct ExtractedEstimator {
    family: DynProcedure,
    grid: Vec<f64>,
    name: String,
}

impl ExtractedEstimator {
    pub fn new(family: DynProcedure, grid: Vec<f64>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::config("grid", "level grid must be nonempty"));
        }
        for &kappa in &grid {
            Level::new(kappa)?;
        }
        let name = format!("extract({})", family.name());
        Ok(Self { family, grid, name })
    }

    pub fn shared(family: DynProcedure, grid: Vec<f64>) -> Result<DynEstimator> {
        Ok(Arc::new(Self::new(family, grid)?))
    }
}

impl Estimator for ExtractedEstimator {
    fn name(&self) -> &str {
        &self.name
    }

    fn estimate(&self, sample: &[f64], stream: StreamSeed) -> Result<ExtReal> {
        Ok(
            extract_median_regular_estimator(self.family.as_ref(), sample, &self.grid, stream)?
                .value,
        )
    }
}
