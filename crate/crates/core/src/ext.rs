//! Extended reals and closed intervals over them.
//!
//! Estimators are allowed to diverge, so estimates live on the extended real
//! line: a finite `f64` or one of the two infinities, never NaN. Comparisons
//! follow IEEE semantics on non-NaN values, which gives exactly the ordering
//! we need: `+INF` is strictly greater than every finite value, `-INF`
//! strictly smaller, and two infinities of the same sign compare equal.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;

/// A point on the extended real line. Invariant: never NaN.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExtReal(f64);

impl ExtReal {
    pub const NEG_INF: ExtReal = ExtReal(f64::NEG_INFINITY);
    pub const POS_INF: ExtReal = ExtReal(f64::INFINITY);

    /// Wraps a value, rejecting NaN.
    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() {
            Err(Error::NotANumber {
                what: "extended real",
            })
        } else {
            Ok(ExtReal(value))
        }
    }

    /// Wraps a value produced by estimator arithmetic. NaN here is a
    /// programming error, not a recoverable condition, so this panics.
    pub fn from_estimate(value: f64) -> Self {
        ExtReal::new(value).expect("estimator produced NaN")
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }
}

impl Eq for ExtReal {}

impl Ord for ExtReal {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.partial_cmp(&other.0).expect("ExtReal is never NaN")
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A closed interval `[lo, hi]` on the extended real line.
///
/// Invariant: `lo <= hi`. The all-of-the-line interval `[-INF, +INF]` is
/// representable but flagged as *trivial*; an interval is non-trivial iff at
/// least one endpoint is finite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    lo: ExtReal,
    hi: ExtReal,
}

impl Interval {
    pub fn new(lo: ExtReal, hi: ExtReal) -> Result<Self> {
        if lo > hi {
            Err(Error::EndpointsOutOfOrder {
                lo: lo.value(),
                hi: hi.value(),
            })
        } else {
            Ok(Interval { lo, hi })
        }
    }

    /// Builds `[lo, hi]` from raw floats, rejecting NaN and reversed endpoints.
    pub fn from_f64(lo: f64, hi: f64) -> Result<Self> {
        Interval::new(ExtReal::new(lo)?, ExtReal::new(hi)?)
    }

    /// The degenerate interval `[x, x]`.
    pub fn point(x: ExtReal) -> Self {
        Interval { lo: x, hi: x }
    }

    /// `[center - halfwidth, center + halfwidth]`. An infinite center gives a
    /// degenerate interval at that infinity; a non-negative half-width is
    /// required.
    pub fn around(center: ExtReal, halfwidth: f64) -> Result<Self> {
        if halfwidth.is_nan() || halfwidth < 0.0 {
            return Err(Error::NotANumber {
                what: "interval half-width",
            });
        }
        if !center.is_finite() {
            return Ok(Interval::point(center));
        }
        Interval::from_f64(center.value() - halfwidth, center.value() + halfwidth)
    }

    /// The whole extended line, flagged trivial.
    pub fn trivial() -> Self {
        Interval {
            lo: ExtReal::NEG_INF,
            hi: ExtReal::POS_INF,
        }
    }

    pub fn lo(&self) -> ExtReal {
        self.lo
    }

    pub fn hi(&self) -> ExtReal {
        self.hi
    }

    /// True iff neither endpoint is finite.
    pub fn is_trivial(&self) -> bool {
        !self.lo.is_finite() && !self.hi.is_finite()
    }

    /// Closed-interval membership.
    pub fn contains(&self, x: ExtReal) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// `hi - lo`; infinite when either endpoint is infinite.
    pub fn width(&self) -> f64 {
        if self.lo.is_finite() && self.hi.is_finite() {
            self.hi.value() - self.lo.value()
        } else {
            f64::INFINITY
        }
    }

    /// Smallest interval containing both inputs.
    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Hull of a non-empty collection.
    pub fn hull_of(intervals: impl IntoIterator<Item = Interval>) -> Option<Interval> {
        intervals.into_iter().reduce(|a, b| a.hull(&b))
    }
}
