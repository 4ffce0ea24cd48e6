//! Bounded, symmetric, zero-mean noise models.
//!
//! Only bounded-support models are provided, so every model has a finite
//! second moment and a finite support bound `d = sup |xi|`. Each model can
//! analytically witness the noise hypotheses of the two critical-noise
//! results:
//!
//! - sub-critical ([`certify_theorem2`]): `P{|xi| <= eps/2} = 1` together with
//!   constants `a, p in (0, 1)` such that `P{xi >= a} >= p` and
//!   `P{xi <= -a} >= p`;
//! - super-critical ([`certify_theorem3`]): a `q > 0` with
//!   `P{xi > eps/2} >= q` and `P{xi < -eps/2} >= q`.
//!
//! The two hypotheses are mutually exclusive for bounded models: either the
//! support fits within `eps/2` or there is mass beyond it.
//!
//! Absorption below `eps` is exact in real arithmetic. With atoms sitting
//! exactly at `+-eps/2` (a `Discrete` model with `delta = eps/2`) the rounded
//! difference `(m + delta) - (m - delta)` can land one ulp above `eps`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};
use core::fmt;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::dynamics::ConfidenceThreshold;
use crate::rng::unit_f64;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// No noise: recovers the deterministic HK model.
    Zero,
    /// Uniform on `[-delta, delta]`.
    Uniform { delta: f64 },
    /// Normal `N(0, sigma^2)` conditioned on `|xi| <= bound` (hard truncation,
    /// renormalised). Symmetric truncation keeps the mean at zero.
    TruncatedGaussian { sigma: f64, bound: f64 },
    /// `+delta` and `-delta` with probability `mass / 2` each, zero otherwise.
    Discrete { delta: f64, mass: f64 },
}

impl NoiseModel {
    pub fn uniform(delta: f64) -> Self {
        NoiseModel::Uniform { delta }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let positive = |name, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name, value })
            }
        };
        match *self {
            NoiseModel::Zero => Ok(()),
            NoiseModel::Uniform { delta } => positive("delta", delta),
            NoiseModel::TruncatedGaussian { sigma, bound } => {
                positive("sigma", sigma)?;
                positive("bound", bound)
            }
            NoiseModel::Discrete { delta, mass } => {
                positive("delta", delta)?;
                if mass > 0.0 && mass <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter { name: "mass", value: mass })
                }
            }
        }
    }

    /// Support bound `d = sup |xi|`.
    pub fn support_bound(&self) -> f64 {
        match *self {
            NoiseModel::Zero => 0.0,
            NoiseModel::Uniform { delta } => delta,
            NoiseModel::TruncatedGaussian { bound, .. } => bound,
            NoiseModel::Discrete { delta, .. } => delta,
        }
    }

    /// Exact per-draw variance `E xi^2`.
    pub fn variance(&self) -> f64 {
        match *self {
            NoiseModel::Zero => 0.0,
            NoiseModel::Uniform { delta } => delta * delta / 3.0,
            NoiseModel::TruncatedGaussian { sigma, bound } => {
                let beta = bound / sigma;
                let density = libm::exp(-0.5 * beta * beta) / libm::sqrt(2.0 * PI);
                let central = libm::erf(beta / SQRT_2);
                sigma * sigma * (1.0 - 2.0 * beta * density / central)
            }
            NoiseModel::Discrete { delta, mass } => mass * delta * delta,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, NoiseModel::Zero)
    }

    /// `P{xi >= x}` (or `P{xi > x}` when `strict`) for `x >= 0`.
    pub fn upper_tail(&self, x: f64, strict: bool) -> f64 {
        debug_assert!(x >= 0.0);
        match *self {
            NoiseModel::Zero => {
                if x == 0.0 && !strict {
                    1.0
                } else {
                    0.0
                }
            }
            NoiseModel::Uniform { delta } => {
                if x >= delta {
                    0.0
                } else {
                    (delta - x) / (2.0 * delta)
                }
            }
            NoiseModel::TruncatedGaussian { sigma, bound } => {
                if x >= bound {
                    0.0
                } else {
                    let central = libm::erf(bound / (sigma * SQRT_2));
                    let inner = libm::erf(x / (sigma * SQRT_2));
                    (central - inner) / (2.0 * central)
                }
            }
            NoiseModel::Discrete { delta, mass } => {
                let atom = if strict { x < delta } else { x <= delta };
                match (atom, x == 0.0 && !strict) {
                    (_, true) => 1.0 - mass / 2.0,
                    (true, false) => mass / 2.0,
                    (false, false) => 0.0,
                }
            }
        }
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseModel::Zero => 0.0,
            NoiseModel::Uniform { delta } => -delta + 2.0 * delta * unit_f64(rng),
            NoiseModel::TruncatedGaussian { sigma, bound } => {
                sample_truncated_gaussian(rng, sigma, bound)
            }
            NoiseModel::Discrete { delta, mass } => {
                let u = unit_f64(rng);
                if u < mass / 2.0 {
                    delta
                } else if u < mass {
                    -delta
                } else {
                    0.0
                }
            }
        }
    }

    pub fn sample_into<R: RngCore + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        if self.is_degenerate() {
            out.fill(0.0);
            return;
        }
        for v in out {
            *v = self.sample(rng);
        }
    }
}

fn sample_truncated_gaussian<R: RngCore + ?Sized>(rng: &mut R, sigma: f64, bound: f64) -> f64 {
    if bound <= 2.0 * sigma {
        // uniform proposal on [-bound, bound], accept with the Gaussian kernel
        loop {
            let z = bound * (2.0 * unit_f64(rng) - 1.0);
            if unit_f64(rng) < libm::exp(-0.5 * (z / sigma) * (z / sigma)) {
                return z;
            }
        }
    }
    loop {
        let u1 = 1.0 - unit_f64(rng);
        let u2 = unit_f64(rng);
        let z = sigma * libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * PI * u2);
        if z.abs() <= bound {
            return z;
        }
    }
}

/// `n` independent draws from `model`.
pub fn sample_vector<R: RngCore + ?Sized>(model: &NoiseModel, n: usize, rng: &mut R) -> Vec<f64> {
    let mut out = vec![0.0; n];
    model.sample_into(rng, &mut out);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Certificate {
    pub a: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem3Certificate {
    pub q: f64,
}

/// Why a certificate could not be issued.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Refusal {
    Degenerate,
    SupportExceedsHalfThreshold { bound: f64, half_threshold: f64 },
    NoMassBeyondHalfThreshold { bound: f64, half_threshold: f64 },
}

impl fmt::Display for Refusal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Refusal::Degenerate => f.write_str("noise is degenerate (identically zero)"),
            Refusal::SupportExceedsHalfThreshold { bound, half_threshold } => write!(
                f,
                "support bound {bound} exceeds eps/2 = {half_threshold}"
            ),
            Refusal::NoMassBeyondHalfThreshold { bound, half_threshold } => write!(
                f,
                "support bound {bound} leaves no mass beyond eps/2 = {half_threshold}"
            ),
        }
    }
}

/// Witnesses the sub-critical hypothesis for `model` at threshold `eps`.
pub fn certify_theorem2(
    model: &NoiseModel,
    eps: ConfidenceThreshold,
) -> Result<Theorem2Certificate, Refusal> {
    let half = eps.half();
    let bound = model.support_bound();
    if model.is_degenerate() {
        return Err(Refusal::Degenerate);
    }
    if bound > half {
        return Err(Refusal::SupportExceedsHalfThreshold {
            bound,
            half_threshold: half,
        });
    }
    let a = match *model {
        NoiseModel::Discrete { delta, .. } => delta,
        _ => bound / 2.0,
    };
    Ok(Theorem2Certificate {
        a,
        p: model.upper_tail(a, false),
    })
}

/// Witnesses the super-critical hypothesis for `model` at threshold `eps`.
pub fn certify_theorem3(
    model: &NoiseModel,
    eps: ConfidenceThreshold,
) -> Result<Theorem3Certificate, Refusal> {
    let half = eps.half();
    if model.is_degenerate() {
        return Err(Refusal::Degenerate);
    }
    let q = model.upper_tail(half, true);
    if q > 0.0 {
        Ok(Theorem3Certificate { q })
    } else {
        Err(Refusal::NoMassBeyondHalfThreshold {
            bound: model.support_bound(),
            half_threshold: half,
        })
    }
}
