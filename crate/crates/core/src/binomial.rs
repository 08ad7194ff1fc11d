//! Exact binomial proportion bounds and Monte Carlo tolerances.
//!
//! Replication counts in this crate are summarized by exact one-sided
//! binomial (Clopper–Pearson) bounds computed from the beta quantile:
//! with `k` successes in `n` trials, the lower bound at one-sided level `a`
//! is the `a`-quantile of `Beta(k, n - k + 1)` (zero when `k = 0`) and the
//! upper bound is the `(1 - a)`-quantile of `Beta(k + 1, n - k)` (one when
//! `k = n`). These are the standard tail inversions; no normal approximation
//! is involved.

use crate::error::{Error, Result};
use statrs::distribution::{Beta, ContinuousCDF};

fn check_counts(successes: u64, trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(Error::ZeroReps);
    }
    if successes > trials {
        return Err(Error::InvalidProbability {
            what: "success count",
            value: successes as f64,
        });
    }
    Ok(())
}

fn check_level(level: f64) -> Result<f64> {
    if level.is_nan() || !(0.0 < level && level < 1.0) {
        Err(Error::InvalidLevel(level))
    } else {
        Ok(level)
    }
}

/// Exact one-sided lower confidence bound for a binomial proportion:
/// `P(bound > p) <= level` for the true proportion `p`.
pub fn one_sided_lower_bound(successes: u64, trials: u64, level: f64) -> Result<f64> {
    check_counts(successes, trials)?;
    let level = check_level(level)?;
    if successes == 0 {
        return Ok(0.0);
    }
    let beta =
        Beta::new(successes as f64, (trials - successes + 1) as f64).expect("positive beta shapes");
    Ok(beta.inverse_cdf(level))
}

/// Exact one-sided upper confidence bound for a binomial proportion:
/// `P(bound < p) <= level` for the true proportion `p`.
pub fn one_sided_upper_bound(successes: u64, trials: u64, level: f64) -> Result<f64> {
    check_counts(successes, trials)?;
    let level = check_level(level)?;
    if successes == trials {
        return Ok(1.0);
    }
    let beta = Beta::new((successes + 1) as f64, (trials - successes) as f64)
        .expect("positive beta shapes");
    Ok(beta.inverse_cdf(1.0 - level))
}

/// Two-sided exact interval at the given confidence, splitting the
/// complement evenly between the tails.
pub fn two_sided_bounds(successes: u64, trials: u64, confidence: f64) -> Result<(f64, f64)> {
    let tail = (1.0 - check_level(confidence)?) / 2.0;
    Ok((
        one_sided_lower_bound(successes, trials, tail)?,
        one_sided_upper_bound(successes, trials, tail)?,
    ))
}

/// Three exact-binomial standard errors of a proportion estimated from
/// `reps` replications, evaluated at the reference proportion `p`. This is
/// the crate-wide Monte Carlo tolerance: an observed frequency is accepted
/// when it deviates from its reference by at most `three_sigma(p, reps)`.
pub fn three_sigma(p: f64, reps: u64) -> f64 {
    assert!(reps > 0, "tolerance needs at least one replication");
    3.0 * (p * (1.0 - p) / reps as f64).sqrt()
}
