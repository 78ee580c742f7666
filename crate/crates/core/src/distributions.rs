//! Parametric sampling distributions with exact analytic moments.
//!
//! Only the families the experiments exercise are provided. Every family
//! samples by inverting its CDF on a single uniform draw, so a sample
//! consumes exactly one stream position and common-random-number
//! comparisons stay aligned.

use crate::rng::RngStream;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistError {
    #[error("invalid distribution parameters: {0}")]
    InvalidParameters(String),
}

/// Tagged description of a sampling law. Serializes into scenario configs as
/// e.g. `{ kind = "exponential", mean = 2.0 }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistSpec {
    Exponential { mean: f64 },
    Uniform { a: f64, b: f64 },
    Rayleigh { scale: f64 },
    /// Parameterized by its target mean and variance; the location/shape
    /// parameters of the underlying normal are derived internally.
    LogNormal { mean: f64, variance: f64 },
    TwoPoint { lo: f64, hi: f64, prob_hi: f64 },
    Deterministic { value: f64 },
    /// Slot-valued with support {1, 2, 3, ...} and mean `1/success_prob`.
    Geometric { success_prob: f64 },
}

impl DistSpec {
    pub fn exponential(mean: f64) -> Result<Self, DistError> {
        let d = DistSpec::Exponential { mean };
        d.validate()?;
        Ok(d)
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self, DistError> {
        let d = DistSpec::Uniform { a, b };
        d.validate()?;
        Ok(d)
    }

    pub fn rayleigh(scale: f64) -> Result<Self, DistError> {
        let d = DistSpec::Rayleigh { scale };
        d.validate()?;
        Ok(d)
    }

    pub fn log_normal(mean: f64, variance: f64) -> Result<Self, DistError> {
        let d = DistSpec::LogNormal { mean, variance };
        d.validate()?;
        Ok(d)
    }

    pub fn two_point(lo: f64, hi: f64, prob_hi: f64) -> Result<Self, DistError> {
        let d = DistSpec::TwoPoint { lo, hi, prob_hi };
        d.validate()?;
        Ok(d)
    }

    pub fn deterministic(value: f64) -> Result<Self, DistError> {
        let d = DistSpec::Deterministic { value };
        d.validate()?;
        Ok(d)
    }

    pub fn geometric(success_prob: f64) -> Result<Self, DistError> {
        let d = DistSpec::Geometric { success_prob };
        d.validate()?;
        Ok(d)
    }

    /// Parameter checks. Specs built through the constructors are always
    /// valid; specs deserialized from a config must be validated before use.
    pub fn validate(&self) -> Result<(), DistError> {
        let bad = |msg: String| Err(DistError::InvalidParameters(msg));
        match *self {
            DistSpec::Exponential { mean } => {
                if !(mean.is_finite() && mean > 0.0) {
                    return bad(format!("exponential mean must be positive, got {mean}"));
                }
            }
            DistSpec::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && 0.0 <= a && a <= b) {
                    return bad(format!("uniform requires 0 <= a <= b, got a={a}, b={b}"));
                }
            }
            DistSpec::Rayleigh { scale } => {
                if !(scale.is_finite() && scale > 0.0) {
                    return bad(format!("rayleigh scale must be positive, got {scale}"));
                }
            }
            DistSpec::LogNormal { mean, variance } => {
                if !(mean.is_finite() && mean > 0.0 && variance.is_finite() && variance > 0.0) {
                    return bad(format!(
                        "log-normal requires positive mean and variance, got mean={mean}, variance={variance}"
                    ));
                }
            }
            DistSpec::TwoPoint { lo, hi, prob_hi } => {
                if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
                    return bad(format!("two-point requires 0 <= lo <= hi, got lo={lo}, hi={hi}"));
                }
                if !(0.0..=1.0).contains(&prob_hi) {
                    return bad(format!("two-point prob_hi must be in [0,1], got {prob_hi}"));
                }
            }
            DistSpec::Deterministic { value } => {
                if !(value.is_finite() && value >= 0.0) {
                    return bad(format!("deterministic value must be nonnegative, got {value}"));
                }
            }
            DistSpec::Geometric { success_prob } => {
                if !(success_prob > 0.0 && success_prob <= 1.0) {
                    return bad(format!("geometric success_prob must be in (0,1], got {success_prob}"));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DistSpec::Exponential { mean } => mean,
            DistSpec::Uniform { a, b } => 0.5 * (a + b),
            DistSpec::Rayleigh { scale } => scale * (std::f64::consts::PI / 2.0).sqrt(),
            DistSpec::LogNormal { mean, .. } => mean,
            DistSpec::TwoPoint { lo, hi, prob_hi } => lo * (1.0 - prob_hi) + hi * prob_hi,
            DistSpec::Deterministic { value } => value,
            DistSpec::Geometric { success_prob } => 1.0 / success_prob,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            DistSpec::Exponential { mean } => mean * mean,
            DistSpec::Uniform { a, b } => (b - a) * (b - a) / 12.0,
            DistSpec::Rayleigh { scale } => scale * scale * (4.0 - std::f64::consts::PI) / 2.0,
            DistSpec::LogNormal { variance, .. } => variance,
            DistSpec::TwoPoint { lo, hi, prob_hi } => {
                prob_hi * (1.0 - prob_hi) * (hi - lo) * (hi - lo)
            }
            DistSpec::Deterministic { .. } => 0.0,
            DistSpec::Geometric { success_prob } => {
                (1.0 - success_prob) / (success_prob * success_prob)
            }
        }
    }

    /// Exact `(mean, variance)` pair.
    pub fn moments(&self) -> (f64, f64) {
        (self.mean(), self.variance())
    }

    /// One i.i.d. draw. Identical `(spec, stream-state)` pairs give
    /// identical draws; `Deterministic` consumes no stream position.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            DistSpec::Exponential { mean } => -mean * rng.uniform_open0().ln(),
            DistSpec::Uniform { a, b } => a + (b - a) * rng.uniform(),
            DistSpec::Rayleigh { scale } => scale * (-2.0 * rng.uniform_open0().ln()).sqrt(),
            DistSpec::LogNormal { mean, variance } => {
                let (loc, shape) = log_normal_params(mean, variance);
                (loc + shape * inverse_normal_cdf(rng.uniform_open0())).exp()
            }
            DistSpec::TwoPoint { lo, hi, prob_hi } => {
                if rng.uniform() < prob_hi {
                    hi
                } else {
                    lo
                }
            }
            DistSpec::Deterministic { value } => value,
            DistSpec::Geometric { success_prob } => {
                if success_prob >= 1.0 {
                    1.0
                } else {
                    let u = rng.uniform();
                    1.0 + ((1.0 - u).ln() / (1.0 - success_prob).ln()).floor()
                }
            }
        }
    }

    /// Distribution function `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            DistSpec::Exponential { mean } => {
                if x <= 0.0 {
                    0.0
                } else {
                    1.0 - (-x / mean).exp()
                }
            }
            DistSpec::Uniform { a, b } => {
                if x <= a {
                    0.0
                } else if x >= b {
                    1.0
                } else {
                    (x - a) / (b - a)
                }
            }
            DistSpec::Rayleigh { scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    1.0 - (-x * x / (2.0 * scale * scale)).exp()
                }
            }
            DistSpec::LogNormal { mean, variance } => {
                if x <= 0.0 {
                    0.0
                } else {
                    let (loc, shape) = log_normal_params(mean, variance);
                    normal_cdf((x.ln() - loc) / shape)
                }
            }
            DistSpec::TwoPoint { lo, hi, prob_hi } => {
                if x < lo {
                    0.0
                } else if x < hi {
                    1.0 - prob_hi
                } else {
                    1.0
                }
            }
            DistSpec::Deterministic { value } => {
                if x < value {
                    0.0
                } else {
                    1.0
                }
            }
            DistSpec::Geometric { success_prob } => {
                if x < 1.0 {
                    0.0
                } else {
                    1.0 - (1.0 - success_prob).powf(x.floor())
                }
            }
        }
    }
}

impl DistSpec {
    /// Left limit `P(X < x)`; differs from [`DistSpec::cdf`] only at the
    /// atoms of the discrete families.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match *self {
            DistSpec::TwoPoint { lo, hi, prob_hi } => {
                if x <= lo {
                    0.0
                } else if x <= hi {
                    1.0 - prob_hi
                } else {
                    1.0
                }
            }
            DistSpec::Deterministic { value } => {
                if x <= value {
                    0.0
                } else {
                    1.0
                }
            }
            DistSpec::Geometric { success_prob } => {
                if x <= 1.0 {
                    0.0
                } else {
                    1.0 - (1.0 - success_prob).powf(x.ceil() - 1.0)
                }
            }
            _ => self.cdf(x),
        }
    }
}

/// Location/shape of the underlying normal for a log-normal with the given
/// mean and variance.
fn log_normal_params(mean: f64, variance: f64) -> (f64, f64) {
    let shape2 = (1.0 + variance / (mean * mean)).ln();
    let loc = mean.ln() - 0.5 * shape2;
    (loc, shape2.sqrt())
}

/// Standard normal CDF via the Abramowitz-Stegun 7.1.26 erf approximation
/// (absolute error below 1.5e-7).
pub(crate) fn normal_cdf(z: f64) -> f64 {
    let x = z / std::f64::consts::SQRT_2;
    let (sign, x) = if x < 0.0 { (-1.0, -x) } else { (1.0, x) };
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let erf = 1.0 - poly * (-x * x).exp();
    0.5 * (1.0 + sign * erf)
}

/// Inverse standard normal CDF (Acklam's rational approximation, relative
/// error below 1.15e-9). `p` must lie in (0, 1).
pub(crate) fn inverse_normal_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}
