//! Validated levels and slack sequences.
//!
//! Three kinds of scalar parameters recur throughout the crate and each has a
//! hard domain invariant:
//!
//! * [`Level`] — a miscoverage level (`alpha` or a base level `gamma`) in
//!   `[0, 1]`;
//! * [`Delta`] — a per-batch median-bias budget in `[0, 1/2)`;
//! * [`SlackSequence`] — a map `n -> r_n in [0, 1)` describing how far a
//!   procedure's finite-sample miscoverage may exceed its nominal level, with
//!   a cached nonincreasing envelope `sup_{m >= k} r_m`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A miscoverage level in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Level(f64);

impl Level {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || !(0.0..=1.0).contains(&value) {
            Err(Error::InvalidLevel(value))
        } else {
            Ok(Level(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A per-batch median-bias budget in `[0, 1/2)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Delta(f64);

impl Delta {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || !(0.0..0.5).contains(&value) {
            Err(Error::InvalidDelta(value))
        } else {
            Ok(Delta(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Slack of a procedure as a function of the sample size.
///
/// Stores finitely many checkpoint pairs `(n, r_n)` and reads as a step
/// function: the slack at size `n` is the value at the largest checkpoint
/// at or below `n` (zero below the first checkpoint, and zero everywhere
/// for the empty sequence). The envelope `r*_k = sup_{m >= k} r_m` is
/// precomputed so repeated lookups are cheap, and is nonincreasing in `k`
/// by construction.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SlackSequence {
    /// Sorted by `n`, deduplicated.
    values: Vec<(usize, f64)>,
    /// `suffix_max[i]` = max slack among `values[i..]`.
    #[serde(skip)]
    suffix_max: Vec<f64>,
}

impl SlackSequence {
    /// The identically-zero slack sequence (an exactly valid procedure).
    pub fn zero() -> Self {
        SlackSequence::default()
    }

    /// Builds from `(n, r_n)` pairs; every `r_n` must lie in `[0, 1)`.
    /// Later duplicates of the same `n` win.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut values: Vec<(usize, f64)> = Vec::new();
        for (n, r) in pairs {
            if r.is_nan() || !(0.0..1.0).contains(&r) {
                return Err(Error::InvalidSlack(r));
            }
            match values.binary_search_by_key(&n, |&(k, _)| k) {
                Ok(i) => values[i] = (n, r),
                Err(i) => values.insert(i, (n, r)),
            }
        }
        let mut seq = SlackSequence {
            values,
            suffix_max: Vec::new(),
        };
        seq.rebuild_envelope();
        Ok(seq)
    }

    fn rebuild_envelope(&mut self) {
        self.suffix_max = vec![0.0; self.values.len()];
        let mut running = 0.0_f64;
        for i in (0..self.values.len()).rev() {
            running = running.max(self.values[i].1);
            self.suffix_max[i] = running;
        }
    }

    /// `r_n`: the checkpoint value at the largest listed size at or below
    /// `n`; zero below the first checkpoint.
    pub fn value(&self, n: usize) -> f64 {
        let i = self.values.partition_point(|&(k, _)| k <= n);
        if i == 0 {
            0.0
        } else {
            self.values[i - 1].1
        }
    }

    /// The monotone envelope `r*_k = sup_{m >= k} r_m` of the step
    /// function.
    pub fn envelope(&self, k: usize) -> f64 {
        // The step value holds from k until the next checkpoint; beyond
        // that the suffix maximum of later checkpoints takes over.
        let i = self.values.partition_point(|&(n, _)| n < k);
        let later = if i < self.suffix_max.len() {
            self.suffix_max[i]
        } else {
            0.0
        };
        self.value(k).max(later)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_rejects_out_of_range() {
        assert!(Level::new(-0.01).is_err());
        assert!(Level::new(1.01).is_err());
        assert!(Level::new(f64::NAN).is_err());
        assert_eq!(Level::new(0.0).unwrap().value(), 0.0);
        assert_eq!(Level::new(1.0).unwrap().value(), 1.0);
    }

    #[test]
    fn delta_rejects_half() {
        assert!(Delta::new(0.5).is_err());
        assert!(Delta::new(-0.1).is_err());
        assert_eq!(Delta::new(0.49).unwrap().value(), 0.49);
        assert_eq!(Delta::new(0.0).unwrap().value(), 0.0);
    }

    #[test]
    fn slack_envelope_is_suffix_sup() {
        let s = SlackSequence::from_pairs([(10, 0.2), (20, 0.05), (40, 0.1)]).unwrap();
        // Step semantics: each checkpoint's value holds until the next.
        assert_eq!(s.value(9), 0.0);
        assert_eq!(s.value(10), 0.2);
        assert_eq!(s.value(15), 0.2);
        assert_eq!(s.value(25), 0.05);
        assert_eq!(s.value(45), 0.1);
        assert_eq!(s.envelope(0), 0.2);
        assert_eq!(s.envelope(11), 0.2);
        assert_eq!(s.envelope(41), 0.1);
        // r*_k can be attained beyond k itself: on [20, 40) the step sits
        // at 0.05 but the tail rises back to 0.1.
        assert_eq!(s.envelope(20), 0.1);
        assert_eq!(s.envelope(21), 0.1);
        let zero = SlackSequence::zero();
        assert_eq!(zero.value(100), 0.0);
        assert_eq!(zero.envelope(0), 0.0);
    }

    #[test]
    fn slack_rejects_one() {
        assert!(SlackSequence::from_pairs([(5, 1.0)]).is_err());
    }

    #[cfg(test)]
    mod proptests {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn envelope_nonincreasing(pairs in proptest::collection::vec((1usize..200, 0.0f64..0.999), 0..20)) {
                let s = SlackSequence::from_pairs(pairs).unwrap();
                let mut prev = f64::INFINITY;
                for k in 0..220 {
                    let e = s.envelope(k);
                    prop_assert!(e <= prev + 1e-18);
                    prop_assert!(e >= s.value(k));
                    prev = e;
                }
            }
        }
    }
}
