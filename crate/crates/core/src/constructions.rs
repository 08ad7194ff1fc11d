//! Batch-based interval constructions and the estimator/interval
//! conversions between median bias and coverage.
//!
//! The central quantity is the batch count `B(alpha, delta)`: the smallest
//! number of independent batches for which an estimator whose per-batch
//! median bias is at most `delta` can miss on every batch simultaneously
//! with probability at most `alpha`. Splitting a sample into that many
//! contiguous batches and taking the min/max of the per-batch estimates
//! yields a confidence interval; conversely, picking a uniformly random
//! endpoint of a confidence interval yields an estimator with small median
//! bias. The helpers here implement both directions plus the level
//! boosting, union-of-batches, and monotonization constructions built on
//! top of them.

use crate::error::{Error, Result};
use crate::estimators::Estimator;
use crate::ext::{ExtReal, Interval};
use crate::level::{Delta, Level, SlackSequence};
use crate::procedures::Procedure;
use crate::rng::StreamSeed;
use std::ops::Range;

/// Relative slop when deciding whether a log-ratio is an exact integer.
/// Ratios of logarithms land within a few ulps of integers in the exact
/// dyadic cases (e.g. `alpha = 0.5`, `delta = 0`), and the floor/ceil
/// bracketing formulas must treat them as integers; anything farther than
/// this from an integer is genuinely fractional.
const INTEGER_SNAP: f64 = 1e-9;

fn validate_alpha_delta(alpha: f64, delta: f64) -> Result<(f64, f64)> {
    let alpha = Level::new(alpha)?.value();
    if alpha <= 0.0 {
        return Err(Error::UndefinedBatchCount(alpha));
    }
    let delta = Delta::new(delta)?.value();
    Ok((alpha, delta))
}

/// Smallest `B >= 1` with `(1/2 - delta)^B + (1/2 + delta)^B <= alpha`.
///
/// Direct power evaluation is exact enough up to `B = 64`; beyond that the
/// comparison runs in log space (the powers themselves underflow long
/// before the log-space form loses accuracy).
pub fn batch_count(alpha: f64, delta: f64) -> Result<u32> {
    let (alpha, delta) = validate_alpha_delta(alpha, delta)?;
    let low = 0.5 - delta;
    let high = 0.5 + delta;

    // The scan below is bounded by ~2 log(2/alpha) / log(2/(1+2delta));
    // refuse inputs whose answer cannot fit a u32 rather than spinning.
    let rough_bound = 2.0 * (2.0 / alpha).ln() / (2.0 / (1.0 + 2.0 * delta)).ln();
    if !rough_bound.is_finite() || rough_bound > u32::MAX as f64 {
        return Err(Error::BatchCountOverflow { alpha, delta });
    }

    let mut b: u32 = 1;
    loop {
        let satisfied = if b <= 64 {
            low.powi(b as i32) + high.powi(b as i32) <= alpha
        } else {
            // log(low^B + high^B) = B log(high) + log1p((low/high)^B).
            let log_sum = b as f64 * high.ln() + (low / high).powf(b as f64).ln_1p();
            log_sum <= alpha.ln()
        };
        if satisfied {
            return Ok(b);
        }
        b = b
            .checked_add(1)
            .ok_or(Error::BatchCountOverflow { alpha, delta })?;
    }
}

fn snap_to_integer(x: f64) -> f64 {
    let nearest = x.round();
    if (x - nearest).abs() <= INTEGER_SNAP * nearest.abs().max(1.0) {
        nearest
    } else {
        x
    }
}

/// Closed-form bracketing of the batch count:
/// `floor(log2(2/alpha)) <= B(alpha, delta)
///   <= ceil(log(2/alpha) / log(2/(1+2delta)))`.
///
/// Log-ratios that are integers up to floating-point error are snapped to
/// the integer before rounding so the bracket matches the exact value at
/// dyadic inputs.
pub fn batch_count_bounds(alpha: f64, delta: f64) -> Result<(u32, u32)> {
    let (alpha, delta) = validate_alpha_delta(alpha, delta)?;
    let base = (2.0 / alpha).ln();
    let lower = snap_to_integer(base / 2f64.ln()).floor().max(1.0);
    let upper = snap_to_integer(base / (2.0 / (1.0 + 2.0 * delta)).ln())
        .ceil()
        .max(1.0);
    if upper > u32::MAX as f64 {
        return Err(Error::BatchCountOverflow { alpha, delta });
    }
    Ok((lower as u32, upper as u32))
}

/// Contiguous split of `0..n` into `batches` runs whose sizes differ by at
/// most one, larger runs first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchPlan {
    n: usize,
    ranges: Vec<Range<usize>>,
}

impl BatchPlan {
    pub fn new(n: usize, batches: u32) -> Result<Self> {
        if batches == 0 {
            return Err(Error::ZeroBatches);
        }
        let b = batches as usize;
        if n < b {
            return Err(Error::InsufficientData {
                required: b,
                got: n,
            });
        }
        let base = n / b;
        let extra = n % b;
        let mut ranges = Vec::with_capacity(b);
        let mut start = 0;
        for j in 0..b {
            let size = base + usize::from(j < extra);
            ranges.push(start..start + size);
            start += size;
        }
        debug_assert_eq!(start, n);
        Ok(Self { n, ranges })
    }

    pub fn batches(&self) -> usize {
        self.ranges.len()
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.ranges.iter().map(|r| r.len()).collect()
    }
}

/// Min/max-of-batch-estimates interval: split the sample into
/// `B(alpha, delta)` contiguous batches, estimate on each, and return the
/// hull of the batch estimates. Batch `j` receives stream child `j`, so
/// the result does not depend on evaluation order.
pub fn batch_minmax_interval(
    estimator: &dyn Estimator,
    sample: &[f64],
    alpha: f64,
    delta: f64,
    stream: StreamSeed,
) -> Result<Interval> {
    let b = batch_count(alpha, delta)?;
    let plan = BatchPlan::new(sample.len(), b)?;
    let mut lo = ExtReal::POS_INF;
    let mut hi = ExtReal::NEG_INF;
    for (j, range) in plan.ranges().iter().enumerate() {
        let value = estimator.estimate(&sample[range.clone()], stream.child(j as u64))?;
        lo = lo.min(value);
        hi = hi.max(value);
    }
    Ok(Interval::new(lo, hi).expect("running min <= running max"))
}

/// The interval-to-estimator direction: report one endpoint of the given
/// interval, each with probability 1/2, drawn from the stream's coin.
pub fn ci_to_estimator(interval: &Interval, stream: StreamSeed) -> ExtReal {
    if stream.coin() {
        interval.hi()
    } else {
        interval.lo()
    }
}

/// Level boosting: convert a base procedure at fixed level `gamma` into a
/// procedure at the stricter level `alpha` by running it on
/// `B(alpha, gamma/2)` batches, collapsing each batch interval to a random
/// endpoint (median bias at most `gamma/2` plus slack), and taking the
/// hull of those endpoint estimates.
///
/// Randomness: batch `j` uses `stream.child(j).child(0)` for the base
/// procedure and `stream.child(j).child(1)` for its endpoint coin.
pub fn boost_level(
    base: &dyn Procedure,
    gamma: f64,
    sample: &[f64],
    alpha: f64,
    stream: StreamSeed,
) -> Result<Interval> {
    let gamma = Level::new(gamma)?.value();
    let b = batch_count(alpha, gamma / 2.0)?;
    let plan = BatchPlan::new(sample.len(), b)?;
    let mut lo = ExtReal::POS_INF;
    let mut hi = ExtReal::NEG_INF;
    for (j, range) in plan.ranges().iter().enumerate() {
        let branch = stream.child(j as u64);
        let ci = base.interval(&sample[range.clone()], gamma, branch.child(0))?;
        let value = ci_to_estimator(&ci, branch.child(1));
        lo = lo.min(value);
        hi = hi.max(value);
    }
    Ok(Interval::new(lo, hi).expect("running min <= running max"))
}

/// Miscoverage bound for [`boost_level`] when the base procedure carries
/// slack `r_m` at batch size `m`: `alpha * (1 + 2 r)^B` with
/// `B = B(alpha, gamma/2)` and `r` the slack at the realized batch size.
pub fn boost_miscoverage_bound(
    alpha: f64,
    gamma: f64,
    n: usize,
    slack: &SlackSequence,
) -> Result<f64> {
    let gamma = Level::new(gamma)?.value();
    let b = batch_count(alpha, gamma / 2.0)?;
    let m = n / b as usize;
    let r = slack.value(m);
    Ok(alpha * (1.0 + 2.0 * r).powi(b as i32))
}

/// Number of batches for the union construction: `ceil(log_gamma(alpha))`
/// for `alpha < gamma` (so `gamma^B <= alpha`), and 1 when
/// `alpha >= gamma`. Requires `gamma` strictly inside `(0, 1)`.
pub fn union_batch_count(gamma: f64, alpha: f64) -> Result<u32> {
    let gamma = Level::new(gamma)?.value();
    if gamma <= 0.0 || gamma >= 1.0 {
        return Err(Error::InvalidLevel(gamma));
    }
    let alpha = Level::new(alpha)?.value();
    if alpha <= 0.0 {
        return Err(Error::UndefinedBatchCount(alpha));
    }
    if alpha >= gamma {
        return Ok(1);
    }
    let ratio = snap_to_integer(alpha.ln() / gamma.ln());
    let b = ratio.ceil();
    if b > u32::MAX as f64 {
        return Err(Error::BatchCountOverflow { alpha, delta: 0.0 });
    }
    Ok(b as u32)
}

/// Union-of-batches construction: run the base procedure at level `gamma`
/// on each of `union_batch_count(gamma, alpha)` batches and take the hull
/// of the batch intervals. The target is covered unless *every* batch
/// misses, so independence across batches gives miscoverage about
/// `gamma^B <= alpha` (inflated by slack, see
/// [`union_miscoverage_bound`]).
pub fn union_batch_interval(
    base: &dyn Procedure,
    gamma: f64,
    sample: &[f64],
    alpha: f64,
    stream: StreamSeed,
) -> Result<Interval> {
    let b = union_batch_count(gamma, alpha)?;
    let plan = BatchPlan::new(sample.len(), b)?;
    let mut hull: Option<Interval> = None;
    for (j, range) in plan.ranges().iter().enumerate() {
        let ci = base.interval(&sample[range.clone()], gamma, stream.child(j as u64))?;
        hull = Some(match hull {
            Some(h) => h.hull(&ci),
            None => ci,
        });
    }
    Ok(hull.expect("at least one batch"))
}

/// Miscoverage bound for [`union_batch_interval`] with per-batch slack:
/// `alpha * (1 + r/gamma)^B` at the realized batch size.
pub fn union_miscoverage_bound(
    alpha: f64,
    gamma: f64,
    n: usize,
    slack: &SlackSequence,
) -> Result<f64> {
    let b = union_batch_count(gamma, alpha)?;
    let m = n / b as usize;
    let r = slack.value(m);
    let gamma = Level::new(gamma)?.value();
    Ok(alpha * (1.0 + r / gamma).powi(b as i32))
}

/// Geometric grid of `len` levels from `alpha` up to 1 (inclusive on both
/// ends; equal ratios between consecutive levels). `len = 1` yields
/// `[alpha]`.
pub fn geometric_level_grid(alpha: f64, len: usize) -> Result<Vec<f64>> {
    let alpha = Level::new(alpha)?.value();
    if alpha <= 0.0 {
        return Err(Error::UndefinedBatchCount(alpha));
    }
    if len == 0 {
        return Err(Error::config("grid_len", "level grid must be nonempty"));
    }
    if len == 1 {
        return Ok(vec![alpha]);
    }
    let log_alpha = alpha.ln();
    let mut grid = Vec::with_capacity(len);
    for j in 0..len {
        let t = j as f64 / (len - 1) as f64;
        grid.push((log_alpha * (1.0 - t)).exp());
    }
    // Pin the endpoints exactly.
    grid[0] = alpha;
    grid[len - 1] = 1.0;
    Ok(grid)
}

/// Hull over a family of intervals at every grid level at or above
/// `alpha`. If the family's interval at level `kappa` covers with
/// probability `1 - kappa` individually, the hull covers with probability
/// at least `1 - alpha` while being monotone across levels by
/// construction: the reported interval at a stricter level always contains
/// the reported interval at a looser one.
///
/// Grid entry `i` (in input order) uses `stream.child(i)`; entries below
/// `alpha` are skipped but keep their index, so sub-grids evaluated at
/// looser levels reuse the identical per-level randomness.
pub fn monotonize_family(
    family: &dyn Procedure,
    sample: &[f64],
    alpha: f64,
    grid: &[f64],
    stream: StreamSeed,
) -> Result<Interval> {
    let alpha = Level::new(alpha)?.value();
    for &kappa in grid {
        Level::new(kappa)?;
    }
    let mut hull: Option<Interval> = None;
    for (i, &kappa) in grid.iter().enumerate() {
        if kappa < alpha {
            continue;
        }
        let ci = family.interval(sample, kappa, stream.child(i as u64))?;
        hull = Some(match hull {
            Some(h) => h.hull(&ci),
            None => ci,
        });
    }
    hull.ok_or(Error::EmptyLevelGrid { alpha })
}

/// Outcome of extracting a low-median-bias estimator from an interval
/// family at sample size `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Extraction {
    /// The randomized-endpoint estimate.
    pub value: ExtReal,
    /// Level actually used: `n^(-1/2)` when the grid reaches that low,
    /// otherwise the smallest grid level.
    pub level_used: f64,
    /// Resulting median-bias bound, `level_used / 2` (plus any slack the
    /// family itself carries).
    pub bias_bound: f64,
    /// True when the grid could not reach `n^(-1/2)` and the smallest grid
    /// level was used instead.
    pub grid_fallback: bool,
}

/// Extract an estimator with vanishing median bias from a family of
/// confidence intervals: monotonize the family at level `n^(-1/2)` (or the
/// smallest available grid level) and report a random endpoint of the
/// hull. The coin uses `stream.child(1)`; the hull uses `stream.child(0)`.
pub fn extract_median_regular_estimator(
    family: &dyn Procedure,
    sample: &[f64],
    grid: &[f64],
    stream: StreamSeed,
) -> Result<Extraction> {
    let n = sample.len();
    if n == 0 {
        return Err(Error::InsufficientData {
            required: 1,
            got: 0,
        });
    }
    if grid.is_empty() {
        return Err(Error::config("grid", "level grid must be nonempty"));
    }
    for &kappa in grid {
        Level::new(kappa)?;
    }
    let target = (n as f64).powf(-0.5);
    let grid_min = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let (level_used, grid_fallback) = if grid_min <= target {
        (target, false)
    } else {
        (grid_min, true)
    };
    let hull = monotonize_family(family, sample, level_used, grid, stream.child(0))?;
    let value = ci_to_estimator(&hull, stream.child(1));
    Ok(Extraction {
        value,
        level_used,
        bias_bound: level_used / 2.0,
        grid_fallback,
    })
}

/// Oracle choice of the level sequence for extraction when the family's
/// slack sequence is known: `alpha_n = max(1/n, 2 exp(-r*^(-1/2)))` where
/// `r*` is the slack envelope at batch size `floor(n / B(1/n, delta))`.
/// With vanishing slack this tends to zero, so the extracted estimator's
/// bias bound vanishes too.
pub fn oracle_alpha_sequence(slack: &SlackSequence, delta: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InsufficientData {
            required: 1,
            got: 0,
        });
    }
    let base = 1.0 / n as f64;
    let b = batch_count(base, delta)?;
    let m = n / b as usize;
    let r_star = slack.envelope(m);
    // r* = 0 makes the exponent -infinity and the second term 0.
    let second = 2.0 * (-r_star.powf(-0.5)).exp();
    Ok(base.max(second).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{EstimatorKind, ZooEstimator};
    use crate::models::DataModel;
    use crate::oracles::brute_force_batch_count;
    use crate::procedures::ZInterval;

    #[test]
    fn batch_count_frozen_values() {
        // Independently derived by the brute-force scan and frozen here.
        for &(alpha, delta, expected) in &[
            (0.1, 0.0, 5u32),
            (1.0, 0.0, 1),
            (0.5, 0.0, 2),
            (0.25, 0.0, 3),
            (0.01, 0.0, 8),
            (0.05, 0.1, 7),
            (0.01, 0.05, 9),
            (0.1, 0.25, 9),
        ] {
            assert_eq!(
                batch_count(alpha, delta).unwrap(),
                expected,
                "alpha={alpha} delta={delta}"
            );
        }
    }

    #[test]
    fn batch_count_matches_brute_force_scan() {
        let alphas = [1.0, 0.9, 0.5, 0.25, 0.2, 0.1, 0.05, 0.01, 1e-3, 1e-6];
        let deltas = [0.0, 0.01, 0.05, 0.1, 0.2, 0.25, 0.4, 0.49];
        for &alpha in &alphas {
            for &delta in &deltas {
                let direct = batch_count(alpha, delta).unwrap();
                let scanned = brute_force_batch_count(alpha, delta, 10_000)
                    .unwrap()
                    .expect("scan bound generous");
                assert_eq!(direct, scanned, "alpha={alpha} delta={delta}");
            }
        }
    }

    #[test]
    fn batch_count_dyadic_levels_match_log_formula() {
        // At delta = 0 the count is ceil(log2(2/alpha)).
        for k in 1..=40u32 {
            let alpha = 2f64.powi(-(k as i32));
            assert_eq!(batch_count(alpha, 0.0).unwrap(), k + 1, "alpha = 2^-{k}");
        }
    }

    #[test]
    fn batch_count_monotonicity() {
        // Nonincreasing in alpha, nondecreasing in delta.
        let alphas = [0.9, 0.5, 0.2, 0.1, 0.03, 0.01, 1e-4];
        let deltas = [0.0, 0.05, 0.1, 0.2, 0.3, 0.45];
        for &delta in &deltas {
            for pair in alphas.windows(2) {
                assert!(
                    batch_count(pair[0], delta).unwrap() <= batch_count(pair[1], delta).unwrap()
                );
            }
        }
        for &alpha in &alphas {
            for pair in deltas.windows(2) {
                assert!(
                    batch_count(alpha, pair[0]).unwrap() <= batch_count(alpha, pair[1]).unwrap()
                );
            }
        }
    }

    #[test]
    fn batch_count_bounds_bracket() {
        let alphas = [1.0, 0.5, 0.25, 0.1, 0.05, 0.01, 1e-3, 1e-8];
        let deltas = [0.0, 0.05, 0.1, 0.25, 0.4];
        for &alpha in &alphas {
            for &delta in &deltas {
                let b = batch_count(alpha, delta).unwrap();
                let (lo, hi) = batch_count_bounds(alpha, delta).unwrap();
                assert!(
                    lo <= b && b <= hi,
                    "alpha={alpha} delta={delta}: {lo} {b} {hi}"
                );
            }
        }
        // Dyadic boundary case where naive flooring would be off by one.
        assert_eq!(batch_count_bounds(0.5, 0.0).unwrap(), (2, 2));
        assert_eq!(batch_count_bounds(0.25, 0.0).unwrap(), (3, 3));
    }

    #[test]
    fn batch_count_rejects_bad_inputs() {
        assert!(matches!(
            batch_count(0.0, 0.1).unwrap_err(),
            Error::UndefinedBatchCount(_)
        ));
        assert!(batch_count(-0.1, 0.0).is_err());
        assert!(batch_count(1.5, 0.0).is_err());
        assert!(batch_count(f64::NAN, 0.0).is_err());
        assert!(matches!(
            batch_count(0.1, 0.5).unwrap_err(),
            Error::InvalidDelta(_)
        ));
        assert!(batch_count(0.1, -0.01).is_err());
        // Delta so close to 1/2 that the answer overflows u32.
        let delta = 0.5 - f64::EPSILON / 4.0;
        assert!(matches!(
            batch_count(1e-3, delta).unwrap_err(),
            Error::BatchCountOverflow { .. }
        ));
    }

    #[test]
    fn batch_plan_shapes() {
        let plan = BatchPlan::new(10, 3).unwrap();
        assert_eq!(plan.sizes(), vec![4, 3, 3]);
        assert_eq!(plan.ranges()[0], 0..4);
        assert_eq!(plan.ranges()[2], 7..10);

        let plan = BatchPlan::new(12, 4).unwrap();
        assert_eq!(plan.sizes(), vec![3, 3, 3, 3]);

        let plan = BatchPlan::new(5, 5).unwrap();
        assert_eq!(plan.sizes(), vec![1; 5]);

        assert!(matches!(
            BatchPlan::new(4, 5).unwrap_err(),
            Error::InsufficientData {
                required: 5,
                got: 4
            }
        ));
        assert!(matches!(
            BatchPlan::new(4, 0).unwrap_err(),
            Error::ZeroBatches
        ));
    }

    #[test]
    fn minmax_interval_covers_like_its_guarantee() {
        // Structural checks: hull of batch estimates, deterministic.
        let model = DataModel::normal_mean(1.0).unwrap();
        let est = ZooEstimator::new(EstimatorKind::Mean);
        let sample = model.sample(100, StreamSeed::root(3).child(0));
        let s = StreamSeed::root(4).child(0);
        let iv = batch_minmax_interval(&est, &sample, 0.1, 0.0, s).unwrap();
        let iv2 = batch_minmax_interval(&est, &sample, 0.1, 0.0, s).unwrap();
        assert_eq!(iv, iv2);
        // The full-sample mean lies inside the hull of batch means.
        let full = est.estimate(&sample, s).unwrap();
        assert!(iv.contains(full));
        // Too few observations for B batches.
        assert!(batch_minmax_interval(&est, &sample[..3], 0.1, 0.0, s).is_err());
    }

    #[test]
    fn endpoint_estimator_uses_both_endpoints() {
        let iv = Interval::from_f64(-1.0, 2.0).unwrap();
        let mut seen = [false, false];
        for i in 0..64 {
            let v = ci_to_estimator(&iv, StreamSeed::root(9).child(i));
            if v.value() == -1.0 {
                seen[0] = true;
            } else if v.value() == 2.0 {
                seen[1] = true;
            } else {
                panic!("endpoint estimator left the endpoints: {v:?}");
            }
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn union_batch_count_values() {
        // alpha >= gamma: one batch suffices.
        assert_eq!(union_batch_count(0.1, 0.5).unwrap(), 1);
        assert_eq!(union_batch_count(0.1, 0.1).unwrap(), 1);
        // 0.1^2 = 0.01 <= 0.01: exactly two batches (snap keeps the ratio
        // at the integer 2).
        assert_eq!(union_batch_count(0.1, 0.01).unwrap(), 2);
        assert_eq!(union_batch_count(0.1, 0.005).unwrap(), 3);
        assert_eq!(union_batch_count(0.5, 0.1).unwrap(), 4);
        assert!(union_batch_count(1.0, 0.1).is_err());
        assert!(union_batch_count(0.0, 0.1).is_err());
        assert!(union_batch_count(0.5, 0.0).is_err());
    }

    #[test]
    fn geometric_grid_shape() {
        let grid = geometric_level_grid(0.01, 5).unwrap();
        assert_eq!(grid.len(), 5);
        assert_eq!(grid[0], 0.01);
        assert_eq!(grid[4], 1.0);
        // Equal ratios.
        for w in grid.windows(2) {
            assert!((w[1] / w[0] - grid[1] / grid[0]).abs() < 1e-9);
        }
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(geometric_level_grid(0.2, 1).unwrap(), vec![0.2]);
        assert!(geometric_level_grid(0.0, 3).is_err());
        assert!(geometric_level_grid(0.1, 0).is_err());
    }

    #[test]
    fn monotonize_produces_nested_intervals() {
        // Hull at a stricter level contains the hull at a looser level.
        let model = DataModel::normal_mean(0.0).unwrap();
        let sample = model.sample(60, StreamSeed::root(12).child(0));
        let family = ZInterval::unit_variance();
        let grid = geometric_level_grid(0.01, 8).unwrap();
        let s = StreamSeed::root(13).child(0);
        let strict = monotonize_family(&family, &sample, 0.01, &grid, s).unwrap();
        let loose = monotonize_family(&family, &sample, 0.2, &grid, s).unwrap();
        assert!(strict.contains(loose.lo()) && strict.contains(loose.hi()));
        // Empty effective grid: every level below alpha.
        let low_grid = [0.001, 0.002];
        assert!(matches!(
            monotonize_family(&family, &sample, 0.5, &low_grid, s).unwrap_err(),
            Error::EmptyLevelGrid { .. }
        ));
    }

    #[test]
    fn extraction_levels_and_fallback() {
        let model = DataModel::normal_mean(0.0).unwrap();
        let family = ZInterval::unit_variance();
        let s = StreamSeed::root(21).child(0);

        // n = 100: target level 0.1; a grid reaching 0.05 can honor it.
        let sample = model.sample(100, StreamSeed::root(20).child(0));
        let grid = geometric_level_grid(0.05, 6).unwrap();
        let ex = extract_median_regular_estimator(&family, &sample, &grid, s).unwrap();
        assert_eq!(ex.level_used, 0.1);
        assert_eq!(ex.bias_bound, 0.05);
        assert!(!ex.grid_fallback);

        // n = 4: target level 0.5, also reachable.
        let small = model.sample(4, StreamSeed::root(22).child(0));
        let ex = extract_median_regular_estimator(&family, &small, &grid, s).unwrap();
        assert_eq!(ex.level_used, 0.5);
        assert_eq!(ex.bias_bound, 0.25);

        // Grid bottoming out above the target: fallback flagged.
        let coarse = [0.3, 0.6, 1.0];
        let ex = extract_median_regular_estimator(&family, &sample, &coarse, s).unwrap();
        assert!(ex.grid_fallback);
        assert_eq!(ex.level_used, 0.3);
        assert_eq!(ex.bias_bound, 0.15);
    }

    #[test]
    fn oracle_alpha_sequence_behaviour() {
        let zero = SlackSequence::zero();
        // With zero slack the sequence is exactly 1/n.
        assert_eq!(oracle_alpha_sequence(&zero, 0.0, 100).unwrap(), 0.01);
        assert_eq!(oracle_alpha_sequence(&zero, 0.0, 1).unwrap(), 1.0);
        // With constant slack the exponential floor kicks in for large n.
        let slack = SlackSequence::from_pairs(vec![(1, 0.04)]).unwrap();
        let a = oracle_alpha_sequence(&slack, 0.0, 1_000_000).unwrap();
        let floor = 2.0 * (-(0.04f64.powf(-0.5))).exp();
        assert!((a - floor).abs() < 1e-15, "{a} vs {floor}");
        assert!(a > 1e-6);
        assert!(oracle_alpha_sequence(&zero, 0.0, 0).is_err());
    }

    #[test]
    fn boost_and_union_bounds() {
        let zero = SlackSequence::zero();
        // Zero slack: bounds reduce to alpha itself.
        assert_eq!(
            boost_miscoverage_bound(0.05, 0.1, 1000, &zero).unwrap(),
            0.05
        );
        assert_eq!(
            union_miscoverage_bound(0.01, 0.1, 1000, &zero).unwrap(),
            0.01
        );
        // Positive slack inflates multiplicatively.
        let slack = SlackSequence::from_pairs(vec![(1, 0.1)]).unwrap();
        let b = batch_count(0.05, 0.05).unwrap();
        let expected = 0.05 * 1.2f64.powi(b as i32);
        assert!(
            (boost_miscoverage_bound(0.05, 0.1, 1000, &slack).unwrap() - expected).abs() < 1e-12
        );
        let expected_union = 0.01 * 2f64.powi(union_batch_count(0.1, 0.01).unwrap() as i32);
        assert!(
            (union_miscoverage_bound(0.01, 0.1, 1000, &slack).unwrap() - expected_union).abs()
                < 1e-12
        );
    }

    #[cfg(test)]
    mod proptests {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Defining property of the batch count: B satisfies the
            // inequality and B - 1 does not.
            #[test]
            fn batch_count_is_minimal(alpha in 1e-9f64..1.0, delta in 0.0f64..0.49) {
                let b = batch_count(alpha, delta).unwrap();
                let low = 0.5 - delta;
                let high = 0.5 + delta;
                let value = |b: u32| low.powi(b as i32) + high.powi(b as i32);
                prop_assert!(value(b) <= alpha * (1.0 + 1e-12));
                if b > 1 {
                    prop_assert!(value(b - 1) > alpha * (1.0 - 1e-12));
                }
            }

            #[test]
            fn batch_plan_partitions(n in 1usize..500, b in 1u32..40) {
                prop_assume!(n >= b as usize);
                let plan = BatchPlan::new(n, b).unwrap();
                let sizes = plan.sizes();
                prop_assert_eq!(sizes.iter().sum::<usize>(), n);
                let max = sizes.iter().max().unwrap();
                let min = sizes.iter().min().unwrap();
                prop_assert!(max - min <= 1);
                // Contiguous, ordered cover of 0..n.
                let mut next = 0;
                for r in plan.ranges() {
                    prop_assert_eq!(r.start, next);
                    next = r.end;
                }
                prop_assert_eq!(next, n);
            }

            #[test]
            fn union_count_is_minimal(gamma in 0.01f64..0.99, alpha in 1e-6f64..1.0) {
                prop_assume!(alpha < gamma);
                let b = union_batch_count(gamma, alpha).unwrap();
                // gamma^B <= alpha (up to snap tolerance) and one fewer
                // batch would not suffice.
                prop_assert!(gamma.powi(b as i32) <= alpha * (1.0 + 1e-6));
                if b > 1 {
                    prop_assert!(gamma.powi(b as i32 - 1) > alpha * (1.0 - 1e-6));
                }
            }

            #[test]
            fn geometric_grid_is_increasing(alpha in 1e-6f64..0.9, len in 2usize..30) {
                let grid = geometric_level_grid(alpha, len).unwrap();
                prop_assert_eq!(grid.len(), len);
                prop_assert!(grid.windows(2).all(|w| w[0] < w[1]));
                prop_assert_eq!(grid[0], alpha);
                prop_assert_eq!(grid[len - 1], 1.0);
            }
        }
    }
}
