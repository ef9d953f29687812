//! Log-space special functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("log_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma(x))
}

/// Unchecked `ln Γ(x)`; callers guarantee `x > 0`.
#[inline]
pub(crate) fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// `ln Σ exp(vᵢ)` with a max shift. All-`-∞` input yields `-∞`.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::usage("log_sum_exp of an empty list"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::numeric("NaN passed to log_sum_exp"));
    }
    Ok(lse(values.iter().copied()))
}

/// Infallible log-sum-exp over an iterator; NaN-free inputs assumed.
pub(crate) fn lse<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64> + Clone,
{
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = values.into_iter().map(|v| (v - max).exp()).sum();
    max + s.ln()
}

/// `ln(eᵃ + eᵇ)`.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Natural log of a nonnegative quantity. `-∞` encodes zero.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogValue(f64);

impl LogValue {
    pub const ZERO: LogValue = LogValue(f64::NEG_INFINITY);
    pub const ONE: LogValue = LogValue(0.0);

    /// Wrap a log magnitude. NaN and `+∞` are rejected.
    pub fn from_log(log_magnitude: f64) -> Result<Self> {
        if log_magnitude.is_nan() || log_magnitude == f64::INFINITY {
            return Err(Error::numeric(format!(
                "invalid log magnitude {log_magnitude}"
            )));
        }
        Ok(LogValue(log_magnitude))
    }

    pub fn from_linear(x: f64) -> Result<Self> {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(Error::domain(format!("expected a finite x >= 0, got {x}")));
        }
        Ok(LogValue(x.ln()))
    }

    #[inline]
    pub fn log_magnitude(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    pub fn to_linear(self) -> f64 {
        self.0.exp()
    }

    /// Multiply by a positive linear factor.
    pub fn scale(self, factor: f64) -> Result<LogValue> {
        Ok(self * LogValue::from_linear(factor)?)
    }
}

/// Sum of the two represented quantities.
impl std::ops::Add for LogValue {
    type Output = LogValue;

    fn add(self, other: LogValue) -> LogValue {
        LogValue(log_add(self.0, other.0))
    }
}

/// Product of the two represented quantities.
impl std::ops::Mul for LogValue {
    type Output = LogValue;

    fn mul(self, other: LogValue) -> LogValue {
        if self.is_zero() || other.is_zero() {
            return LogValue::ZERO;
        }
        LogValue(self.0 + other.0)
    }
}
