//! Independent validation oracles.
//!
//! Everything here re-derives expected values from first principles — exact
//! integer/rational arithmetic or polynomial-exact quadrature — without
//! calling into the code it validates. The only shared machinery is
//! primitive math (`f64` bit decoding, big integers), so an oracle and its
//! subject cannot fail in the same way.
//!
//! * [`brute_force_batch_count`] — linear scan of the batch-count condition
//!   in exact dyadic arithmetic;
//! * [`uniform_top2_probability`] — quadrature of the joint density of the
//!   top two order statistics of a uniform sample;
//! * [`enumerate_median_bias`] — exhaustive enumeration of a finite-support
//!   sampling experiment with exact rational probabilities.

use crate::error::{Error, Result};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::cmp::Ordering;

/// Hard cap on enumeration size (sample space times randomization branches).
pub const ENUMERATION_OUTCOME_LIMIT: u128 = 10_000_000;

/// Largest sample size the enumeration oracle accepts.
pub const ENUMERATION_MAX_N: usize = 6;

// ---------------------------------------------------------------------------
// Exact dyadic arithmetic on f64 values.
// ---------------------------------------------------------------------------

/// A non-negative dyadic rational `num / 2^exp`. Every finite non-negative
/// `f64` is exactly one of these.
struct Dyadic {
    num: BigUint,
    exp: u64,
}

fn dyadic_from_f64(x: f64) -> Dyadic {
    assert!(
        x.is_finite() && x >= 0.0,
        "dyadic decode needs finite x >= 0"
    );
    if x == 0.0 {
        return Dyadic {
            num: BigUint::zero(),
            exp: 0,
        };
    }
    let bits = x.to_bits();
    let exp_field = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    // value = m * 2^e with integer m
    let (m, e) = if exp_field == 0 {
        (frac, -1074i64) // subnormal
    } else {
        (frac | (1u64 << 52), exp_field - 1075)
    };
    if e >= 0 {
        Dyadic {
            num: BigUint::from(m) << e as u64,
            exp: 0,
        }
    } else {
        Dyadic {
            num: BigUint::from(m),
            exp: (-e) as u64,
        }
    }
}

/// Smallest `B <= b_max` with `(1/2 - delta)^B + (1/2 + delta)^B <= alpha`,
/// by direct scan with exact arithmetic; `None` if no such `B` exists in
/// range.
///
/// `alpha` must lie in `(0, 1]` and `delta` in `[0, 1/2)`. Both are taken at
/// their exact binary values, so the comparison at every `B` is decided
/// without rounding.
pub fn brute_force_batch_count(alpha: f64, delta: f64, b_max: u32) -> Result<Option<u32>> {
    if alpha.is_nan() || alpha > 1.0 {
        return Err(Error::InvalidLevel(alpha));
    }
    if alpha <= 0.0 {
        return Err(Error::UndefinedBatchCount(alpha));
    }
    if delta.is_nan() || !(0.0..0.5).contains(&delta) {
        return Err(Error::InvalidDelta(delta));
    }

    // Represent 1/2 - delta and 1/2 + delta over the common denominator 2^e.
    let d = dyadic_from_f64(delta);
    let e = d.exp.max(1);
    let dn = &d.num << (e - d.exp);
    let half = BigUint::one() << (e - 1);
    debug_assert!(dn < half);
    let low = &half - &dn;
    let high = &half + &dn;

    let a = dyadic_from_f64(alpha);

    let mut low_pow = low.clone();
    let mut high_pow = high.clone();
    for b in 1..=b_max {
        if b > 1 {
            low_pow *= &low;
            high_pow *= &high;
        }
        // (low^B + high^B) / 2^{eB} <= a.num / 2^{a.exp}
        //   <=>  (low^B + high^B) << a.exp  <=  a.num << eB
        let lhs = (&low_pow + &high_pow) << a.exp;
        let rhs = &a.num << (e * b as u64);
        if lhs <= rhs {
            return Ok(Some(b));
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// Quadrature for the top-two order statistics of a uniform sample.
// ---------------------------------------------------------------------------

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on the
/// Legendre recurrence (Numerical Recipes construction).
fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(k >= 2);
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    let m = k.div_ceil(2);
    for i in 1..=m {
        let mut z = (std::f64::consts::PI * (i as f64 - 0.25) / (k as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = z;
            for j in 2..=k {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            pp = k as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i - 1] = -z;
        nodes[k - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i - 1] = w;
        weights[k - i] = w;
    }
    (nodes, weights)
}

/// `P(2 X_(n) - X_(n-1) >= 1)` for an i.i.d. `Uniform(0, 1)` sample of size
/// `n >= 2`, by integrating the joint density `n (n-1) v^{n-2}` of
/// `(u, v) = (X_(n), X_(n-1))` over the region `{0 < v < u < 1, v <= 2u - 1}`.
///
/// The integrand is polynomial in each variable, so Gauss–Legendre with
/// `n + 8` nodes integrates it exactly up to rounding; the result is
/// accurate to well under `1e-10`.
pub fn uniform_top2_probability(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InsufficientData {
            required: 2,
            got: n,
        });
    }
    let k = n + 8;
    let (t, w) = gauss_legendre(k);
    let c = (n * (n - 1)) as f64;

    // Outer variable u on [1/2, 1]; the inner region is v in [0, 2u - 1].
    let mut total = 0.0;
    for (tu, wu) in t.iter().zip(&w) {
        let u = 0.75 + 0.25 * tu;
        let b = 2.0 * u - 1.0;
        let mut inner = 0.0;
        for (tv, wv) in t.iter().zip(&w) {
            let v = 0.5 * b * (1.0 + tv);
            inner += wv * v.powi(n as i32 - 2);
        }
        inner *= 0.5 * b; // Jacobian of v-map onto [0, b]
        total += wu * inner * c;
    }
    Ok(total * 0.25) // Jacobian of u-map onto [1/2, 1]
}

// ---------------------------------------------------------------------------
// Exhaustive enumeration of finite-support experiments.
// ---------------------------------------------------------------------------

/// Estimators the enumeration oracle can evaluate. Each is re-implemented
/// here directly from its definition, independent of the estimator zoo.
#[derive(Clone, Debug, PartialEq)]
pub enum EnumEstimator {
    /// Sample mean; one deterministic branch.
    Mean,
    /// The pair `X_(r)` / `X_(n-r+1)`, each picked with probability 1/2.
    RandomizedOrderStatMedian { r: usize },
}

impl EnumEstimator {
    /// Number of equally likely randomization branches.
    fn branch_count(&self) -> u32 {
        match self {
            EnumEstimator::Mean => 1,
            EnumEstimator::RandomizedOrderStatMedian { .. } => 2,
        }
    }

    /// Branch values on one sample (unsorted input).
    fn branch_values(&self, sample: &[f64], scratch: &mut Vec<f64>) -> Result<Vec<f64>> {
        let n = sample.len();
        match self {
            EnumEstimator::Mean => Ok(vec![sample.iter().sum::<f64>() / n as f64]),
            EnumEstimator::RandomizedOrderStatMedian { r } => {
                let r = *r;
                if r < 1 || 2 * r > n {
                    return Err(Error::InvalidRank { r, n });
                }
                scratch.clear();
                scratch.extend_from_slice(sample);
                scratch.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
                Ok(vec![scratch[r - 1], scratch[n - r]])
            }
        }
    }
}

/// A finite-support sampling experiment: `n` i.i.d. draws from a distribution
/// with rational point masses, an enumerable estimator, and the target value
/// `theta` the estimator is measured against.
#[derive(Clone, Debug)]
pub struct EnumerationSpec {
    support: Vec<(f64, BigRational)>,
    n: usize,
    estimator: EnumEstimator,
    theta: f64,
}

impl EnumerationSpec {
    pub fn new(
        support: Vec<(f64, BigRational)>,
        n: usize,
        estimator: EnumEstimator,
        theta: f64,
    ) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::config("support", "must be non-empty"));
        }
        if support.iter().any(|(v, _)| v.is_nan()) || theta.is_nan() {
            return Err(Error::NotANumber {
                what: "enumeration support",
            });
        }
        let total: BigRational = support.iter().map(|(_, p)| p.clone()).sum();
        if support.iter().any(|(_, p)| !p.is_positive()) || !total.is_one() {
            return Err(Error::config(
                "support",
                "probabilities must be positive and sum to exactly 1",
            ));
        }
        if !(1..=ENUMERATION_MAX_N).contains(&n) {
            return Err(Error::config(
                "n",
                format!("must lie in 1..={ENUMERATION_MAX_N}, got {n}"),
            ));
        }
        let spec = EnumerationSpec {
            support,
            n,
            estimator,
            theta,
        };
        let outcomes = spec.outcome_count();
        if outcomes > ENUMERATION_OUTCOME_LIMIT {
            return Err(Error::EnumerationTooLarge {
                outcomes,
                limit: ENUMERATION_OUTCOME_LIMIT,
            });
        }
        Ok(spec)
    }

    /// Uniform distribution on the given distinct values.
    pub fn discrete_uniform(
        values: &[f64],
        n: usize,
        estimator: EnumEstimator,
        theta: f64,
    ) -> Result<Self> {
        let k = BigInt::from(values.len());
        let p = BigRational::new(BigInt::one(), k);
        EnumerationSpec::new(
            values.iter().map(|&v| (v, p.clone())).collect(),
            n,
            estimator,
            theta,
        )
    }

    /// Distribution on `{0, 1}` with `P(X = 1) = p` (taken at its exact
    /// binary value).
    pub fn two_point(p: f64, n: usize, estimator: EnumEstimator, theta: f64) -> Result<Self> {
        if !(0.0 < p && p < 1.0) {
            return Err(Error::InvalidProbability {
                what: "two-point mass",
                value: p,
            });
        }
        let p1 = BigRational::from_float(p).expect("finite probability");
        let p0 = BigRational::one() - &p1;
        EnumerationSpec::new(vec![(0.0, p0), (1.0, p1)], n, estimator, theta)
    }

    /// Point mass at `c`.
    pub fn point_mass(c: f64, n: usize, estimator: EnumEstimator) -> Result<Self> {
        EnumerationSpec::new(vec![(c, BigRational::one())], n, estimator, c)
    }

    /// Total number of (sample, randomization-branch) outcomes.
    pub fn outcome_count(&self) -> u128 {
        let s = self.support.len() as u128;
        s.saturating_pow(self.n as u32)
            .saturating_mul(self.estimator.branch_count() as u128)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// Result of an exact enumeration: one-sided probabilities and the bias they
/// induce, with probabilities converted once (correctly rounded) to `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnumeratedBias {
    pub p_ge: f64,
    pub p_le: f64,
    pub bias: f64,
    pub outcomes: u128,
    /// True iff the bias is exactly zero as a rational.
    pub bias_exactly_zero: bool,
}

/// Exhaustively enumerates the experiment, accumulating
/// `P(estimate >= theta)` and `P(estimate <= theta)` in exact rational
/// arithmetic (ties add to both), then forms the bias
/// `max(1/2 - min(p_ge, p_le), 0)`.
pub fn enumerate_median_bias(spec: &EnumerationSpec) -> Result<EnumeratedBias> {
    let k = spec.support.len();
    let n = spec.n;
    let outcomes = spec.outcome_count();

    let mut p_ge = BigRational::zero();
    let mut p_le = BigRational::zero();

    let branch_prob = BigRational::new(BigInt::one(), BigInt::from(spec.estimator.branch_count()));

    let mut indices = vec![0usize; n];
    let mut sample = vec![0.0f64; n];
    let mut scratch: Vec<f64> = Vec::with_capacity(n);
    loop {
        let mut prob = BigRational::one();
        for (slot, &idx) in sample.iter_mut().zip(indices.iter()) {
            let (value, p) = &spec.support[idx];
            *slot = *value;
            prob *= p;
        }
        let values = spec.estimator.branch_values(&sample, &mut scratch)?;
        for v in values {
            let w = &prob * &branch_prob;
            if v >= spec.theta {
                p_ge += &w;
            }
            if v <= spec.theta {
                p_le += w;
            }
        }

        // Odometer over the product space.
        let mut pos = 0;
        loop {
            if pos == n {
                break;
            }
            indices[pos] += 1;
            if indices[pos] < k {
                break;
            }
            indices[pos] = 0;
            pos += 1;
        }
        if pos == n {
            break;
        }
    }

    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let min = if p_ge <= p_le {
        p_ge.clone()
    } else {
        p_le.clone()
    };
    let bias = if min >= half {
        BigRational::zero()
    } else {
        half - min
    };

    Ok(EnumeratedBias {
        p_ge: ratio_to_f64(&p_ge),
        p_le: ratio_to_f64(&p_le),
        bias: ratio_to_f64(&bias),
        outcomes,
        bias_exactly_zero: bias.is_zero(),
    })
}

/// Correctly rounded conversion of a non-negative rational to `f64`
/// (round-to-nearest, ties-to-even), valid for values whose magnitude fits
/// comfortably inside the normal range — probabilities and biases here.
fn ratio_to_f64(r: &BigRational) -> f64 {
    assert!(
        !r.is_negative(),
        "conversion restricted to non-negative values"
    );
    if r.is_zero() {
        return 0.0;
    }
    let num = r.numer().magnitude().clone();
    let den = r.denom().magnitude();

    let nbits = num.bits() as i64;
    let dbits = den.bits() as i64;
    // Scale the numerator so the integer quotient carries ~56 bits.
    let shift = 56 - (nbits - dbits);
    let (q, rem) = if shift >= 0 {
        let scaled = num << shift as u64;
        (&scaled / den, scaled % den)
    } else {
        let dscaled = den << (-shift) as u64;
        (&num / &dscaled, num % dscaled)
    };
    debug_assert!(q.bits() >= 54, "quotient must overfill the mantissa");

    // Round q to 53 significant bits; `rem` acts as a sticky bit.
    let excess = q.bits() as i64 - 53;
    let kept = &q >> excess as u64;
    let dropped = &q - (&kept << excess as u64);
    let halfway = BigUint::one() << (excess as u64 - 1);
    let mut mantissa = u64::try_from(&kept).expect("53-bit mantissa");
    let round_up = match dropped.cmp(&halfway) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => !rem.is_zero() || (mantissa & 1 == 1),
    };
    if round_up {
        mantissa += 1;
    }
    let exp2 = excess - shift;
    debug_assert!((-900..900).contains(&exp2), "value outside supported range");
    mantissa as f64 * 2f64.powi(exp2 as i32)
}
