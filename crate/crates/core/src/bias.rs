//! Median-bias measurement: exact where a closed form exists, Monte Carlo
//! with exact binomial error bounds otherwise.
//!
//! The median bias of an estimator at a target `theta` is
//! `max(1/2 - min(P(est >= theta), P(est <= theta)), 0)`, a number in
//! `[0, 1/2]`. Exact ties `est == theta` count toward *both* one-sided
//! probabilities, which is what makes deliberately atom-producing
//! estimators (clipping at the target, point-mass data) unbiased rather
//! than pathological.

use crate::binomial::{one_sided_lower_bound, one_sided_upper_bound};
use crate::error::{Error, Result};
use crate::estimators::{exact_probs, Estimator, EstimatorKind};
use crate::ext::ExtReal;
use crate::models::DataModel;
use crate::rng::StreamSeed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Default confidence for the exact binomial bounds attached to Monte
/// Carlo bias estimates.
pub const DEFAULT_BOUND_CONFIDENCE: f64 = 0.999;

/// Median bias from the two one-sided hit probabilities.
pub fn median_bias_from_probs(p_ge: f64, p_le: f64) -> Result<f64> {
    for (what, value) in [("P(est >= theta)", p_ge), ("P(est <= theta)", p_le)] {
        if value.is_nan() || !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidProbability { what, value });
        }
    }
    Ok((0.5 - p_ge.min(p_le)).max(0.0))
}

/// A median-bias estimate with conservative confidence bounds.
///
/// `lower <= point <= upper` always holds. For exact (closed-form)
/// evaluations all three coincide and `reps` is zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MedianBiasEstimate {
    /// Point estimate of the median bias, in `[0, 1/2]`.
    pub point: f64,
    /// Conservative lower confidence bound.
    pub lower: f64,
    /// Conservative upper confidence bound.
    pub upper: f64,
    /// Monte Carlo replications used (zero for exact evaluations).
    pub reps: u64,
    /// Whether the value came from a closed form rather than simulation.
    pub exact: bool,
}

impl MedianBiasEstimate {
    fn exact(bias: f64) -> Self {
        Self {
            point: bias,
            lower: bias,
            upper: bias,
            reps: 0,
            exact: true,
        }
    }
}

/// Exact median bias when a closed form is registered for this
/// model/estimator pair; `None` otherwise.
pub fn exact_median_bias(
    model: &DataModel,
    kind: &EstimatorKind,
    n: usize,
) -> Result<Option<MedianBiasEstimate>> {
    match exact_probs(model, kind, n)? {
        Some((p_ge, p_le)) => Ok(Some(MedianBiasEstimate::exact(median_bias_from_probs(
            p_ge, p_le,
        )?))),
        None => Ok(None),
    }
}

/// Monte Carlo median bias at the default bound confidence.
pub fn estimate_median_bias_mc(
    model: &DataModel,
    estimator: &dyn Estimator,
    n: usize,
    reps: u64,
    seed: u64,
) -> Result<MedianBiasEstimate> {
    estimate_median_bias_mc_with_confidence(
        model,
        estimator,
        n,
        reps,
        seed,
        DEFAULT_BOUND_CONFIDENCE,
    )
}

/// Monte Carlo median bias with exact binomial confidence bounds.
///
/// Each replication draws a fresh sample and a fresh estimator stream from
/// a per-replication branch of the seed tree, so results are identical for
/// identical `(model, estimator, n, reps, seed)` regardless of thread
/// count or scheduling. Counts accumulate as integers; no floating-point
/// reduction order is involved.
///
/// The bounds come from exact one-sided binomial bounds on each of the two
/// hit probabilities, allocated `(1 - confidence) / 4` apiece, pushed
/// through the bias formula in the direction that makes the bias interval
/// conservative (the bias decreases in each probability below 1/2).
pub fn estimate_median_bias_mc_with_confidence(
    model: &DataModel,
    estimator: &dyn Estimator,
    n: usize,
    reps: u64,
    seed: u64,
    confidence: f64,
) -> Result<MedianBiasEstimate> {
    if reps == 0 {
        return Err(Error::ZeroReps);
    }
    if confidence.is_nan() || !(0.0 < confidence && confidence < 1.0) {
        return Err(Error::InvalidProbability {
            what: "bound confidence",
            value: confidence,
        });
    }
    let theta = ExtReal::new(model.theta()).expect("model targets are finite");
    let root = StreamSeed::root(seed);

    let (count_ge, count_le) = (0..reps)
        .into_par_iter()
        .map(|i| {
            let rep = root.child(i);
            let sample = model.sample(n, rep.child(0));
            let value = estimator.estimate(&sample, rep.child(1))?;
            // Ties count on both sides.
            Ok((u64::from(value >= theta), u64::from(value <= theta)))
        })
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;

    let point =
        median_bias_from_probs(count_ge as f64 / reps as f64, count_le as f64 / reps as f64)?;

    // One-sided error budget per bound; four bounds in play.
    let tail = (1.0 - confidence) / 4.0;
    // Bias is antitone in min(p_ge, p_le): lower probability bounds give
    // the upper bias bound and vice versa.
    let upper = median_bias_from_probs(
        one_sided_lower_bound(count_ge, reps, tail)?,
        one_sided_lower_bound(count_le, reps, tail)?,
    )?;
    let lower = median_bias_from_probs(
        one_sided_upper_bound(count_ge, reps, tail)?,
        one_sided_upper_bound(count_le, reps, tail)?,
    )?;

    debug_assert!(lower <= point && point <= upper);
    Ok(MedianBiasEstimate {
        point,
        lower,
        upper,
        reps,
        exact: false,
    })
}

/// Median bias of an estimator against each model in a list, and the
/// worst case over the list.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WorstCaseMedianBias {
    /// Name of the model attaining the largest point estimate (first on
    /// ties, so the result is deterministic).
    pub worst_model: String,
    /// The estimate at the worst model.
    pub worst: MedianBiasEstimate,
    /// Every per-model estimate, in input order.
    pub per_model: Vec<(String, MedianBiasEstimate)>,
}

/// Worst-case median bias over a family of models, using the registered
/// closed form for any model/estimator pair that has one and Monte Carlo
/// for the rest. Each model gets its own branch of the seed tree, indexed
/// by position, so a model's draws depend only on its slot in the list.
pub fn worst_case_median_bias(
    models: &[DataModel],
    estimator: &dyn Estimator,
    n: usize,
    reps: u64,
    seed: u64,
) -> Result<WorstCaseMedianBias> {
    if models.is_empty() {
        return Err(Error::EmptyModelList);
    }
    let root = StreamSeed::root(seed);
    let mut per_model = Vec::with_capacity(models.len());
    for (j, model) in models.iter().enumerate() {
        let closed_form = match estimator.closed_form_kind() {
            Some(kind) => exact_median_bias(model, kind, n)?,
            None => None,
        };
        let est = match closed_form {
            Some(e) => e,
            None => estimate_median_bias_mc(model, estimator, n, reps, root.child(j as u64).key())?,
        };
        per_model.push((model.name().to_string(), est));
    }
    let (worst_model, worst) = per_model
        .iter()
        .max_by(|a, b| {
            a.1.point
                .partial_cmp(&b.1.point)
                .expect("bias is never NaN")
                // max_by returns the *last* max; prefer the first on ties.
                .then(std::cmp::Ordering::Greater)
        })
        .cloned()
        .expect("nonempty list");
    Ok(WorstCaseMedianBias {
        worst_model,
        worst,
        per_model,
    })
}
