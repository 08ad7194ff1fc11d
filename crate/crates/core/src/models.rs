//! Sampling models for the experiments.
//!
//! A [`DataModel`] bundles a sampling rule with the scalar target `theta`
//! that estimators and interval procedures aim at. The same model value is
//! used by the Monte Carlo driver (which draws fresh samples per
//! replication) and by the closed-form evaluators (which only need the
//! parameters), so the target is fixed at construction and never recomputed
//! from data.

use crate::error::{Error, Result};
use crate::rng::StreamSeed;
use rand::Rng;
use rand_distr::{Cauchy, Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Parameter set for one sampling model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ModelKind {
    /// I.i.d. `N(mu, 1)`; the target is the mean `mu`.
    NormalMean { mu: f64 },
    /// I.i.d. Laplace with location `mu` and unit scale; target `mu`.
    LaplaceLocation { mu: f64 },
    /// I.i.d. Cauchy with location `mu` and unit scale; target `mu`.
    CauchyLocation { mu: f64 },
    /// I.i.d. `Uniform(0, theta)` with `theta > 0`; the target is `theta`.
    UniformScale { theta: f64 },
    /// I.i.d. `N(mu, 1)`, but the target is the clipped mean
    /// `max(mu, 0)` rather than `mu` itself.
    ThresholdNormal { mu: f64 },
    /// Uniform on the integers `lo..=hi`; the target is the midpoint
    /// `(lo + hi) / 2` (the distribution's median, conventionally averaged
    /// when the support has even size).
    DiscreteUniform { lo: i64, hi: i64 },
    /// Bernoulli with success probability `p` on `{0, 1}`; target `p`.
    TwoPoint { p: f64 },
    /// Every observation equals `c`; target `c`.
    PointMass { c: f64 },
}

/// A sampling model together with its inference target.
#[derive(Clone, Debug, PartialEq)]
pub struct DataModel {
    kind: ModelKind,
    name: String,
    theta: f64,
}

fn require_finite(what: &'static str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NotFinite { what, value: x })
    }
}

impl DataModel {
    pub fn normal_mean(mu: f64) -> Result<Self> {
        let mu = require_finite("normal mean", mu)?;
        Ok(Self {
            kind: ModelKind::NormalMean { mu },
            name: format!("normal_mean:mu={mu}"),
            theta: mu,
        })
    }

    pub fn laplace_location(mu: f64) -> Result<Self> {
        let mu = require_finite("laplace location", mu)?;
        Ok(Self {
            kind: ModelKind::LaplaceLocation { mu },
            name: format!("laplace_location:mu={mu}"),
            theta: mu,
        })
    }

    pub fn cauchy_location(mu: f64) -> Result<Self> {
        let mu = require_finite("cauchy location", mu)?;
        Ok(Self {
            kind: ModelKind::CauchyLocation { mu },
            name: format!("cauchy_location:mu={mu}"),
            theta: mu,
        })
    }

    pub fn uniform_scale(theta: f64) -> Result<Self> {
        if !theta.is_finite() || theta <= 0.0 {
            return Err(Error::InvalidScale(theta));
        }
        Ok(Self {
            kind: ModelKind::UniformScale { theta },
            name: format!("uniform_scale:theta={theta}"),
            theta,
        })
    }

    pub fn threshold_normal(mu: f64) -> Result<Self> {
        let mu = require_finite("threshold normal mean", mu)?;
        Ok(Self {
            kind: ModelKind::ThresholdNormal { mu },
            name: format!("threshold_normal:mu={mu}"),
            theta: if mu > 0.0 { mu } else { 0.0 },
        })
    }

    pub fn discrete_uniform(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(Error::config(
                "discrete_uniform",
                format!("empty support: lo = {lo} exceeds hi = {hi}"),
            ));
        }
        Ok(Self {
            kind: ModelKind::DiscreteUniform { lo, hi },
            name: format!("discrete_uniform:lo={lo},hi={hi}"),
            theta: (lo as f64 + hi as f64) / 2.0,
        })
    }

    pub fn two_point(p: f64) -> Result<Self> {
        if p.is_nan() || !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability {
                what: "two-point success probability",
                value: p,
            });
        }
        Ok(Self {
            kind: ModelKind::TwoPoint { p },
            name: format!("two_point:p={p}"),
            theta: p,
        })
    }

    pub fn point_mass(c: f64) -> Result<Self> {
        let c = require_finite("point mass location", c)?;
        Ok(Self {
            kind: ModelKind::PointMass { c },
            name: format!("point_mass:c={c}"),
            theta: c,
        })
    }

    /// The inference target this model defines.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Canonical registry name, e.g. `normal_mean:mu=0.5`.
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    /// Draw one sample of size `n` from the stream rooted at `stream`.
    /// Identical `(model, n, stream)` triples produce identical samples.
    pub fn sample(&self, n: usize, stream: StreamSeed) -> Vec<f64> {
        let mut rng = stream.rng();
        let mut out = Vec::with_capacity(n);
        match self.kind {
            ModelKind::NormalMean { mu } | ModelKind::ThresholdNormal { mu } => {
                let dist = Normal::new(mu, 1.0).expect("finite mean, unit scale");
                out.extend(dist.sample_iter(&mut rng).take(n));
            }
            ModelKind::LaplaceLocation { mu } => {
                for _ in 0..n {
                    out.push(mu + sample_standard_laplace(&mut rng));
                }
            }
            ModelKind::CauchyLocation { mu } => {
                let dist = Cauchy::new(mu, 1.0).expect("finite location, unit scale");
                out.extend(dist.sample_iter(&mut rng).take(n));
            }
            ModelKind::UniformScale { theta } => {
                for _ in 0..n {
                    out.push(theta * rng.random::<f64>());
                }
            }
            ModelKind::DiscreteUniform { lo, hi } => {
                for _ in 0..n {
                    out.push(rng.random_range(lo..=hi) as f64);
                }
            }
            ModelKind::TwoPoint { p } => {
                for _ in 0..n {
                    out.push(if rng.random::<f64>() < p { 1.0 } else { 0.0 });
                }
            }
            ModelKind::PointMass { c } => {
                out.resize(n, c);
            }
        }
        out
    }
}

/// Standard Laplace draw by inverting the CDF on a uniform in (0, 1).
fn sample_standard_laplace<R: Rng>(rng: &mut R) -> f64 {
    // random::<f64>() lies in [0, 1); reject 0 so the log argument is positive.
    let u = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    let centered = u - 0.5;
    // Inverse CDF: sign(centered) * -ln(1 - 2|centered|).
    -centered.signum() * (1.0 - 2.0 * centered.abs()).ln()
}
