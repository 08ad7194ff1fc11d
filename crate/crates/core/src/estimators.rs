//! Point estimators and their closed-form hit probabilities.
//!
//! Every estimator implements [`Estimator`]: a deterministic map from a
//! sample and a randomness stream to an extended-real estimate. Randomized
//! estimators (the symmetrized order statistic) draw their coin from the
//! stream, never from global state, so identical `(sample, stream)` pairs
//! always produce identical output.
//!
//! For specific model/estimator pairs the probabilities
//! `P(estimate >= theta)` and `P(estimate <= theta)` are available in
//! closed form; [`exact_probs`] returns them when it can so callers can
//! bypass Monte Carlo entirely.

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::models::{DataModel, ModelKind};
use crate::rng::StreamSeed;
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use statrs::distribution::{ContinuousCDF, Normal};
use std::sync::Arc;

/// A point estimator: sample plus randomness stream in, estimate out.
pub trait Estimator: Send + Sync {
    /// Canonical registry name, e.g. `order_stat_median:r=3`.
    fn name(&self) -> &str;

    /// Compute the estimate. Implementations must be deterministic in
    /// `(sample, stream)` and must not consult any other randomness source.
    fn estimate(&self, sample: &[f64], stream: StreamSeed) -> Result<ExtReal>;

    /// The built-in parameter set this estimator evaluates, when it is one
    /// of the built-ins. Closed-form bias and miscoverage lookups key on
    /// this; wrapper estimators return `None` and are measured by Monte
    /// Carlo only.
    fn closed_form_kind(&self) -> Option<&EstimatorKind> {
        None
    }
}

/// Shared handle used wherever estimators are stored or passed around.
pub type DynEstimator = Arc<dyn Estimator>;

/// Default exponent for the Hodges estimator's threshold `n^(-exponent)`.
pub const DEFAULT_HODGES_EXPONENT: f64 = 0.25;

/// Parameter set identifying one estimator from the built-in collection.
#[derive(Clone, Debug, PartialEq)]
pub enum EstimatorKind {
    /// Sample mean.
    Mean,
    /// Sample median (midpoint of the two central order statistics for
    /// even sample sizes).
    Median,
    /// Randomized symmetric order statistic: the `r`-th or the
    /// `(n - r + 1)`-th order statistic, chosen by a fair coin from the
    /// stream. Requires `1 <= r` and `2r <= n`.
    OrderStatMedian { r: usize },
    /// Bias-corrected endpoint estimator for `Uniform(0, theta)`:
    /// `2 * x_(n) - x_(n-1)`, the maximum pushed out by the gap below it.
    UniformScaleCorrected,
    /// Maximum of the sample (the scale MLE for `Uniform(0, theta)`).
    UniformMle,
    /// Clipped mean `max(mean, 0)`, aimed at the clipped target.
    ThresholdMean,
    /// Hodges-style shrinkage estimator: the mean, zeroed whenever its magnitude is at
    /// most `n^(-exponent)`.
    Hodges { exponent: f64 },
    /// Clipped mean `max(mean, 0)`, aimed at the raw mean. Same statistic
    /// as `ThresholdMean`; the two names exist because the registry pairs
    /// them with different targets.
    HardThreshold,
}

/// Concrete implementation of every [`EstimatorKind`].
#[derive(Clone, Debug)]
pub struct ZooEstimator {
    kind: EstimatorKind,
    name: String,
}

impl ZooEstimator {
    pub fn new(kind: EstimatorKind) -> Self {
        let name = match &kind {
            EstimatorKind::Mean => "mean".to_string(),
            EstimatorKind::Median => "median".to_string(),
            EstimatorKind::OrderStatMedian { r } => format!("order_stat_median:r={r}"),
            EstimatorKind::UniformScaleCorrected => "uniform_scale_corrected".to_string(),
            EstimatorKind::UniformMle => "uniform_mle".to_string(),
            EstimatorKind::ThresholdMean => "threshold_mean".to_string(),
            EstimatorKind::Hodges { exponent } => {
                if *exponent == DEFAULT_HODGES_EXPONENT {
                    "hodges".to_string()
                } else {
                    format!("hodges:exponent={exponent}")
                }
            }
            EstimatorKind::HardThreshold => "hard_threshold".to_string(),
        };
        Self { kind, name }
    }

    /// Like [`ZooEstimator::new`], but rejects out-of-range parameters
    /// (rank zero, clip exponent outside `(0, 1)`). Sample-size
    /// dependent checks still happen per call in `estimate`.
    pub fn validated(kind: EstimatorKind) -> Result<Self> {
        match &kind {
            EstimatorKind::OrderStatMedian { r } if *r == 0 => {
                return Err(Error::InvalidRank { r: 0, n: 0 });
            }
            EstimatorKind::Hodges { exponent }
                if !exponent.is_finite() || *exponent <= 0.0 || *exponent >= 1.0 =>
            {
                return Err(Error::config(
                    "estimator",
                    format!("hodges exponent must lie in (0, 1), got {exponent}"),
                ));
            }
            _ => {}
        }
        Ok(Self::new(kind))
    }

    pub fn kind(&self) -> &EstimatorKind {
        &self.kind
    }

    pub fn shared(kind: EstimatorKind) -> DynEstimator {
        Arc::new(Self::new(kind))
    }

    pub fn into_shared(self) -> DynEstimator {
        Arc::new(self)
    }
}

fn require_nonempty(sample: &[f64]) -> Result<()> {
    if sample.is_empty() {
        Err(Error::InsufficientData {
            required: 1,
            got: 0,
        })
    } else {
        Ok(())
    }
}

fn mean_of(sample: &[f64]) -> f64 {
    sample.iter().sum::<f64>() / sample.len() as f64
}

/// Validate a symmetric order-statistic rank against the sample size.
pub fn check_rank(r: usize, n: usize) -> Result<()> {
    if r >= 1 && 2 * r <= n {
        Ok(())
    } else {
        Err(Error::InvalidRank { r, n })
    }
}

/// Smallest sample size the estimator accepts.
pub fn estimator_min_n(kind: &EstimatorKind) -> usize {
    match kind {
        EstimatorKind::OrderStatMedian { r } => 2 * r,
        EstimatorKind::UniformScaleCorrected => 2,
        _ => 1,
    }
}

impl Estimator for ZooEstimator {
    fn name(&self) -> &str {
        &self.name
    }

    fn closed_form_kind(&self) -> Option<&EstimatorKind> {
        Some(&self.kind)
    }

    fn estimate(&self, sample: &[f64], stream: StreamSeed) -> Result<ExtReal> {
        match &self.kind {
            EstimatorKind::Mean => {
                require_nonempty(sample)?;
                Ok(ExtReal::from_estimate(mean_of(sample)))
            }
            EstimatorKind::Median => {
                require_nonempty(sample)?;
                let mut xs = sample.to_vec();
                xs.sort_by(|a, b| a.partial_cmp(b).expect("samples are never NaN"));
                let n = xs.len();
                let value = if n % 2 == 1 {
                    xs[n / 2]
                } else {
                    (xs[n / 2 - 1] + xs[n / 2]) / 2.0
                };
                Ok(ExtReal::from_estimate(value))
            }
            EstimatorKind::OrderStatMedian { r } => {
                let n = sample.len();
                check_rank(*r, n)?;
                let mut xs = sample.to_vec();
                xs.sort_by(|a, b| a.partial_cmp(b).expect("samples are never NaN"));
                // Fair coin: low rank on false, mirrored high rank on true.
                let value = if stream.coin() {
                    xs[n - *r]
                } else {
                    xs[*r - 1]
                };
                Ok(ExtReal::from_estimate(value))
            }
            EstimatorKind::UniformScaleCorrected => {
                let n = sample.len();
                if n < 2 {
                    return Err(Error::InsufficientData {
                        required: 2,
                        got: n,
                    });
                }
                // Largest and second-largest in one pass.
                let mut top = f64::NEG_INFINITY;
                let mut second = f64::NEG_INFINITY;
                for &x in sample {
                    if x > top {
                        second = top;
                        top = x;
                    } else if x > second {
                        second = x;
                    }
                }
                Ok(ExtReal::from_estimate(2.0 * top - second))
            }
            EstimatorKind::UniformMle => {
                require_nonempty(sample)?;
                let top = sample.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Ok(ExtReal::from_estimate(top))
            }
            EstimatorKind::ThresholdMean | EstimatorKind::HardThreshold => {
                require_nonempty(sample)?;
                let m = mean_of(sample);
                Ok(ExtReal::from_estimate(if m > 0.0 { m } else { 0.0 }))
            }
            EstimatorKind::Hodges { exponent } => {
                require_nonempty(sample)?;
                let m = mean_of(sample);
                let cutoff = (sample.len() as f64).powf(-exponent);
                let value = if m.abs() > cutoff { m } else { 0.0 };
                Ok(ExtReal::from_estimate(value))
            }
        }
    }
}

/// `P(Bin(n, 1/2) >= k)` as an exact dyadic rational.
fn half_binomial_upper_tail(n: usize, k: usize) -> BigRational {
    let mut tail = BigUint::ZERO;
    // Running binomial coefficient C(n, j), exact in BigUint.
    let mut coeff = BigUint::from(1u32);
    for j in 0..=n {
        if j >= k {
            tail += &coeff;
        }
        if j < n {
            coeff = coeff * BigUint::from(n - j) / BigUint::from(j + 1);
        }
    }
    BigRational::new(tail.into(), (BigUint::from(1u32) << n).into())
}

/// Exact hit probabilities of the randomized symmetric order statistic when
/// each observation is independently at-or-below the target with
/// probability exactly 1/2 and at-or-above with probability exactly 1/2
/// (continuous distribution, target at its median).
///
/// Averaging over the fair coin,
/// `P(estimate <= theta) = (P(B >= r) + P(B >= n - r + 1)) / 2` with
/// `B ~ Bin(n, 1/2)`; the two tails are complementary, so the sum is
/// exactly one and each probability is exactly 1/2. The arithmetic below
/// keeps everything in integers so the returned doubles are exact.
pub fn order_stat_median_hit_probs(n: usize, r: usize) -> Result<(f64, f64)> {
    check_rank(r, n)?;
    let half = BigRational::new(1.into(), 2.into());
    let p_le = (half_binomial_upper_tail(n, r) + half_binomial_upper_tail(n, n - r + 1)) * &half;
    // P(estimate >= theta) = (P(B <= r - 1) + P(B <= n - r)) / 2 with the
    // complementary count; by tail symmetry this equals the same pair of
    // complementary tails.
    let one = BigRational::new(1.into(), 1.into());
    let p_ge =
        (&one - half_binomial_upper_tail(n, r)) + (&one - half_binomial_upper_tail(n, n - r + 1));
    let p_ge = p_ge * &half;
    let to_f64 = |q: &BigRational| {
        q.to_f64()
            .expect("reduced dyadic probability converts exactly")
    };
    Ok((to_f64(&p_ge), to_f64(&p_le)))
}

fn standard_normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Hit probabilities of the clipped mean `max(mean, 0)` against the clipped
/// target `max(mu, 0)` under `N(mu, 1)` samples of size `n`.
///
/// For `mu > 0` the target is `mu` and the clip is almost surely inactive
/// on the event `{mean >= mu}`, so both probabilities are 1/2. For
/// `mu <= 0` the target is 0, the estimate is always `>= 0`, and it is
/// `<= 0` exactly when the mean is nonpositive.
pub fn threshold_mean_hit_probs(mu: f64, n: usize) -> (f64, f64) {
    if mu > 0.0 {
        (0.5, 0.5)
    } else {
        let root_n = (n as f64).sqrt();
        (1.0, standard_normal_cdf(-mu * root_n))
    }
}

/// Hit probabilities of the clipped mean against the *raw* mean `mu` under
/// `N(mu, 1)`. For `mu < 0` the estimate is always `>= 0 > mu` and never
/// `<= mu`, so the median bias is exactly 1/2.
pub fn hard_threshold_hit_probs(mu: f64) -> (f64, f64) {
    if mu > 0.0 {
        (0.5, 0.5)
    } else if mu == 0.0 {
        (1.0, 0.5)
    } else {
        (1.0, 0.0)
    }
}

/// Hit probabilities of the Hodges estimator against `mu` under
/// `N(mu, 1)` samples of size `n` with cutoff `c = n^(-exponent)`.
///
/// The estimate equals the mean when `|mean| > c` and 0 otherwise, so each
/// probability decomposes into the unclipped region plus (when 0 falls on
/// the relevant side of `mu`) the whole clipped band.
pub fn hodges_hit_probs(mu: f64, n: usize, exponent: f64) -> (f64, f64) {
    let root_n = (n as f64).sqrt();
    let c = (n as f64).powf(-exponent);
    // CDF of the sample mean.
    let cdf = |x: f64| standard_normal_cdf((x - mu) * root_n);
    let band = cdf(c) - cdf(-c);

    // P(estimate >= mu): mean >= mu with the clip inactive, plus the whole
    // clipped band when 0 >= mu.
    let mut p_ge = 1.0 - cdf(mu.max(c));
    if mu < -c {
        p_ge += cdf(-c) - cdf(mu);
    }
    if mu <= 0.0 {
        p_ge += band;
    }

    // Mirror image for P(estimate <= mu).
    let mut p_le = cdf(mu.min(-c));
    if mu > c {
        p_le += cdf(mu) - cdf(c);
    }
    if mu >= 0.0 {
        p_le += band;
    }

    (p_ge.clamp(0.0, 1.0), p_le.clamp(0.0, 1.0))
}

/// Closed-form `(P(estimate >= theta), P(estimate <= theta))` for
/// model/estimator pairs where the answer is known exactly; `None` when no
/// closed form is registered and Monte Carlo is required.
pub fn exact_probs(
    model: &DataModel,
    kind: &EstimatorKind,
    n: usize,
) -> Result<Option<(f64, f64)>> {
    if n == 0 {
        return Err(Error::InsufficientData {
            required: 1,
            got: 0,
        });
    }
    let probs = match (model.kind(), kind) {
        // Continuous distributions symmetric about their location: the mean
        // (where it exists symmetrically) and the median are symmetric
        // about theta with no atom at it.
        (
            ModelKind::NormalMean { .. }
            | ModelKind::LaplaceLocation { .. }
            | ModelKind::CauchyLocation { .. },
            EstimatorKind::Mean | EstimatorKind::Median,
        ) => Some((0.5, 0.5)),

        (
            ModelKind::NormalMean { .. }
            | ModelKind::LaplaceLocation { .. }
            | ModelKind::CauchyLocation { .. },
            EstimatorKind::OrderStatMedian { r },
        ) => Some(order_stat_median_hit_probs(n, *r)?),

        // The maximum never reaches the open upper endpoint.
        (ModelKind::UniformScale { .. }, EstimatorKind::UniformMle) => Some((0.0, 1.0)),

        // 2 x_(n) - x_(n-1) exceeds theta iff the top-two integral
        // evaluates to 1/2, independent of n (>= 2); no atom at theta.
        (ModelKind::UniformScale { .. }, EstimatorKind::UniformScaleCorrected) => {
            if n < 2 {
                return Err(Error::InsufficientData {
                    required: 2,
                    got: n,
                });
            }
            Some((0.5, 0.5))
        }

        (ModelKind::ThresholdNormal { mu }, EstimatorKind::ThresholdMean) => {
            Some(threshold_mean_hit_probs(*mu, n))
        }

        (ModelKind::NormalMean { mu }, EstimatorKind::HardThreshold) => {
            Some(hard_threshold_hit_probs(*mu))
        }

        (ModelKind::NormalMean { mu }, EstimatorKind::Hodges { exponent }) => {
            Some(hodges_hit_probs(*mu, n, *exponent))
        }

        // Constant samples make value-preserving estimators constant at the
        // target, hence ties on both sides with probability one.
        (
            ModelKind::PointMass { .. },
            EstimatorKind::Mean
            | EstimatorKind::Median
            | EstimatorKind::OrderStatMedian { .. }
            | EstimatorKind::UniformMle,
        ) => {
            if let EstimatorKind::OrderStatMedian { r } = kind {
                check_rank(*r, n)?;
            }
            Some((1.0, 1.0))
        }

        _ => None,
    };
    Ok(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::DataModel;

    fn est(kind: EstimatorKind) -> ZooEstimator {
        ZooEstimator::new(kind)
    }

    fn value(e: &ZooEstimator, sample: &[f64], stream: StreamSeed) -> f64 {
        e.estimate(sample, stream).unwrap().value()
    }

    #[test]
    fn names_are_canonical() {
        assert_eq!(est(EstimatorKind::Mean).name(), "mean");
        assert_eq!(
            est(EstimatorKind::OrderStatMedian { r: 3 }).name(),
            "order_stat_median:r=3"
        );
        assert_eq!(
            est(EstimatorKind::Hodges { exponent: 0.25 }).name(),
            "hodges"
        );
        assert_eq!(
            est(EstimatorKind::Hodges { exponent: 0.5 }).name(),
            "hodges:exponent=0.5"
        );
    }

    #[test]
    fn mean_median_basics() {
        let s = StreamSeed::root(1).child(0);
        assert_eq!(value(&est(EstimatorKind::Mean), &[1.0, 2.0, 6.0], s), 3.0);
        assert_eq!(value(&est(EstimatorKind::Median), &[5.0, 1.0, 3.0], s), 3.0);
        assert_eq!(
            value(&est(EstimatorKind::Median), &[4.0, 1.0, 3.0, 2.0], s),
            2.5
        );
        assert!(est(EstimatorKind::Mean).estimate(&[], s).is_err());
    }

    #[test]
    fn order_stat_median_picks_the_two_ranks() {
        let e = est(EstimatorKind::OrderStatMedian { r: 1 });
        let sample = [10.0, -4.0, 3.0, 7.0];
        // Over many streams both branches must appear, and nothing else.
        let mut seen_low = false;
        let mut seen_high = false;
        for i in 0..64 {
            let v = value(&e, &sample, StreamSeed::root(42).child(i));
            assert!(v == -4.0 || v == 10.0, "unexpected branch value {v}");
            seen_low |= v == -4.0;
            seen_high |= v == 10.0;
        }
        assert!(seen_low && seen_high);
        // Deterministic per stream.
        let s = StreamSeed::root(42).child(5);
        assert_eq!(value(&e, &sample, s), value(&e, &sample, s));
        // Rank validation.
        assert!(matches!(
            est(EstimatorKind::OrderStatMedian { r: 3 })
                .estimate(&[1.0, 2.0, 3.0, 4.0], s)
                .unwrap_err(),
            Error::InvalidRank { r: 3, n: 4 }
        ));
        assert!(est(EstimatorKind::OrderStatMedian { r: 0 })
            .estimate(&[1.0, 2.0], s)
            .is_err());
    }

    #[test]
    fn uniform_estimators() {
        let s = StreamSeed::root(2).child(0);
        assert_eq!(
            value(&est(EstimatorKind::UniformMle), &[0.2, 0.9, 0.5], s),
            0.9
        );
        // 2 * 0.9 - 0.5 = 1.3.
        assert_eq!(
            value(
                &est(EstimatorKind::UniformScaleCorrected),
                &[0.2, 0.9, 0.5],
                s
            ),
            1.3
        );
        // Ties between the top two are fine: 2a - a = a.
        assert_eq!(
            value(&est(EstimatorKind::UniformScaleCorrected), &[0.7, 0.7], s),
            0.7
        );
        assert!(est(EstimatorKind::UniformScaleCorrected)
            .estimate(&[0.4], s)
            .is_err());
    }

    #[test]
    fn clipped_and_hodges_estimators() {
        let s = StreamSeed::root(3).child(0);
        assert_eq!(
            value(&est(EstimatorKind::ThresholdMean), &[-1.0, -3.0], s),
            0.0
        );
        assert_eq!(
            value(&est(EstimatorKind::ThresholdMean), &[1.0, 3.0], s),
            2.0
        );
        assert_eq!(
            value(&est(EstimatorKind::HardThreshold), &[-1.0, -3.0], s),
            0.0
        );
        // Hodges with n = 4, exponent 0.25: cutoff = 4^(-1/4) ~ 0.7071.
        let e = est(EstimatorKind::Hodges {
            exponent: DEFAULT_HODGES_EXPONENT,
        });
        assert_eq!(value(&e, &[0.5, 0.5, 0.5, 0.5], s), 0.0);
        assert_eq!(value(&e, &[0.8, 0.8, 0.8, 0.8], s), 0.8);
        assert_eq!(value(&e, &[-0.8, -0.8, -0.8, -0.8], s), -0.8);
    }

    #[test]
    fn order_stat_hit_probs_are_exactly_half() {
        for n in [2usize, 3, 5, 10, 33, 100, 201] {
            for r in [1usize, 2, n / 2] {
                if r == 0 || 2 * r > n {
                    continue;
                }
                let (p_ge, p_le) = order_stat_median_hit_probs(n, r).unwrap();
                assert_eq!(p_ge, 0.5, "n={n} r={r}");
                assert_eq!(p_le, 0.5, "n={n} r={r}");
            }
        }
        assert!(order_stat_median_hit_probs(4, 3).is_err());
    }

    #[test]
    fn threshold_mean_probs_match_their_regimes() {
        let (p_ge, p_le) = threshold_mean_hit_probs(0.5, 100);
        assert_eq!((p_ge, p_le), (0.5, 0.5));
        let (p_ge, p_le) = threshold_mean_hit_probs(0.0, 100);
        assert_eq!(p_ge, 1.0);
        assert!((p_le - 0.5).abs() < 1e-15);
        let (p_ge, p_le) = threshold_mean_hit_probs(-0.3, 100);
        assert_eq!(p_ge, 1.0);
        // P(mean <= 0) = Phi(0.3 * 10) = Phi(3).
        assert!((p_le - standard_normal_cdf(3.0)).abs() < 1e-15);
    }

    #[test]
    fn hodges_probs_reduce_to_symmetry_at_zero() {
        let (p_ge, p_le) = hodges_hit_probs(0.0, 100, 0.25);
        // At mu = 0 the clipped band counts on both sides; each probability
        // is Phi(c sqrt(n)) by symmetry.
        let expected = standard_normal_cdf(100f64.powf(-0.25) * 10.0);
        assert!((p_ge - expected).abs() < 1e-15);
        assert!((p_le - expected).abs() < 1e-15);
    }

    #[test]
    fn hodges_probs_match_monte_carlo() {
        // Moderate-n spot check of the closed form against simulation.
        let n = 25usize;
        let reps = 40_000u64;
        for &mu in &[-0.6, -0.2, 0.1, 0.4] {
            let model = DataModel::normal_mean(mu).unwrap();
            let e = est(EstimatorKind::Hodges { exponent: 0.25 });
            let root = StreamSeed::root(99);
            let (mut c_ge, mut c_le) = (0u64, 0u64);
            for i in 0..reps {
                let s = root.child(i);
                let xs = model.sample(n, s.child(0));
                let v = value(&e, &xs, s.child(1));
                if v >= mu {
                    c_ge += 1;
                }
                if v <= mu {
                    c_le += 1;
                }
            }
            let (p_ge, p_le) = hodges_hit_probs(mu, n, 0.25);
            let tol_ge = crate::binomial::three_sigma(p_ge, reps);
            let tol_le = crate::binomial::three_sigma(p_le, reps);
            let f_ge = c_ge as f64 / reps as f64;
            let f_le = c_le as f64 / reps as f64;
            assert!((f_ge - p_ge).abs() <= tol_ge, "mu={mu}: {f_ge} vs {p_ge}");
            assert!((f_le - p_le).abs() <= tol_le, "mu={mu}: {f_le} vs {p_le}");
        }
    }

    #[test]
    fn exact_probs_dispatch() {
        let normal = DataModel::normal_mean(0.0).unwrap();
        let uniform = DataModel::uniform_scale(1.0).unwrap();
        let point = DataModel::point_mass(2.0).unwrap();

        assert_eq!(
            exact_probs(&normal, &EstimatorKind::Mean, 10).unwrap(),
            Some((0.5, 0.5))
        );
        assert_eq!(
            exact_probs(&uniform, &EstimatorKind::UniformMle, 10).unwrap(),
            Some((0.0, 1.0))
        );
        assert_eq!(
            exact_probs(&uniform, &EstimatorKind::UniformScaleCorrected, 10).unwrap(),
            Some((0.5, 0.5))
        );
        assert_eq!(
            exact_probs(&point, &EstimatorKind::Median, 3).unwrap(),
            Some((1.0, 1.0))
        );
        // No closed form registered: mean on the uniform scale model.
        assert_eq!(
            exact_probs(&uniform, &EstimatorKind::Mean, 10).unwrap(),
            None
        );
        // Errors propagate.
        assert!(exact_probs(&normal, &EstimatorKind::Mean, 0).is_err());
        assert!(exact_probs(&uniform, &EstimatorKind::UniformScaleCorrected, 1).is_err());
    }

    #[cfg(test)]
    mod proptests {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Location equivariance: shifting the sample shifts the estimate.
            #[test]
            fn mean_and_median_are_location_equivariant(
                xs in proptest::collection::vec(-100.0f64..100.0, 1..40),
                shift in -50.0f64..50.0,
            ) {
                let s = StreamSeed::root(77).child(0);
                for kind in [EstimatorKind::Mean, EstimatorKind::Median] {
                    let e = ZooEstimator::new(kind);
                    let base = e.estimate(&xs, s).unwrap().value();
                    let shifted: Vec<f64> = xs.iter().map(|x| x + shift).collect();
                    let moved = e.estimate(&shifted, s).unwrap().value();
                    prop_assert!((moved - (base + shift)).abs() < 1e-9);
                }
            }

            // The randomized order statistic is permutation-invariant given
            // the same stream (it sorts), and equivariant as well.
            #[test]
            fn order_stat_is_permutation_invariant(
                mut xs in proptest::collection::vec(-100.0f64..100.0, 4..30),
                seed in 0u64..1000,
            ) {
                let r = xs.len() / 3 + 1;
                prop_assume!(2 * r <= xs.len());
                let e = ZooEstimator::new(EstimatorKind::OrderStatMedian { r });
                let s = StreamSeed::root(seed).child(0);
                let a = e.estimate(&xs, s).unwrap();
                xs.reverse();
                let b = e.estimate(&xs, s).unwrap();
                prop_assert_eq!(a, b);
            }

            // Scale equivariance of the endpoint estimators.
            #[test]
            fn uniform_estimators_are_scale_equivariant(
                xs in proptest::collection::vec(0.0001f64..1.0, 2..30),
                scale in 0.1f64..10.0,
            ) {
                let s = StreamSeed::root(5).child(0);
                for kind in [EstimatorKind::UniformMle, EstimatorKind::UniformScaleCorrected] {
                    let e = ZooEstimator::new(kind);
                    let base = e.estimate(&xs, s).unwrap().value();
                    let scaled: Vec<f64> = xs.iter().map(|x| x * scale).collect();
                    let moved = e.estimate(&scaled, s).unwrap().value();
                    prop_assert!((moved - base * scale).abs() < 1e-9 * scale.max(1.0));
                }
            }
        }
    }
}
