//! Overflow-safe nonnegative magnitudes.
//!
//! A [`LogScaled`] stores `mantissa · 2^exponent` with `mantissa ∈ [1, 2)` (or an
//! exact zero), so products of thousands of weight matrices stay representable.
//! A [`ScaledVec`] shares one base-2 exponent across its entries and is
//! renormalised after every matrix application.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul};

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;

const LN_2: f64 = std::f64::consts::LN_2;

/// Splits a finite nonnegative `x` into `(m, e)` with `x = m·2^e`, `m ∈ [1,2)`.
pub fn frexp(x: f64) -> (f64, i64) {
    debug_assert!(x.is_finite() && x >= 0.0);
    if x == 0.0 {
        return (0.0, 0);
    }
    let bits = x.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    if exp_bits == 0 {
        // subnormal
        let (m, e) = frexp(x * 2f64.powi(64));
        return (m, e - 64);
    }
    let m = f64::from_bits((bits & 0x000f_ffff_ffff_ffff) | (1023u64 << 52));
    (m, exp_bits - 1023)
}

/// `x · 2^e`, saturating to `inf` / `0`.
pub fn ldexp(mut x: f64, mut e: i64) -> f64 {
    let big = 2f64.powi(1000);
    let small = 2f64.powi(-1000);
    while e > 1000 {
        x *= big;
        e -= 1000;
        if x.is_infinite() {
            return x;
        }
    }
    while e < -1000 {
        x *= small;
        e += 1000;
        if x == 0.0 {
            return x;
        }
    }
    x * 2f64.powi(e as i32)
}

#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogScaled {
    mantissa: f64,
    exponent: i64,
}

impl LogScaled {
    pub const ZERO: LogScaled = LogScaled {
        mantissa: 0.0,
        exponent: 0,
    };
    pub const ONE: LogScaled = LogScaled {
        mantissa: 1.0,
        exponent: 0,
    };

    /// Panics on negative or non-finite input.
    pub fn from_f64(x: f64) -> Self {
        assert!(x.is_finite() && x >= 0.0, "LogScaled::from_f64({x})");
        let (mantissa, exponent) = frexp(x);
        LogScaled { mantissa, exponent }
    }

    /// Builds from `m·2^e` for any finite nonnegative `m`.
    pub fn from_parts(m: f64, e: i64) -> Self {
        let s = LogScaled::from_f64(m);
        if s.mantissa == 0.0 {
            return LogScaled::ZERO;
        }
        LogScaled {
            mantissa: s.mantissa,
            exponent: s.exponent + e,
        }
    }

    /// Builds from a natural logarithm; `-inf` maps to zero.
    pub fn from_ln(l: f64) -> Self {
        if l == f64::NEG_INFINITY {
            return LogScaled::ZERO;
        }
        let e = (l / LN_2).floor();
        let m = (l - e * LN_2).exp();
        LogScaled::from_parts(m, e as i64)
    }

    pub fn mantissa(&self) -> f64 {
        self.mantissa
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0.0
    }

    /// Saturates to `inf` beyond the f64 range.
    pub fn to_f64(&self) -> f64 {
        ldexp(self.mantissa, self.exponent)
    }

    /// Like [`to_f64`](Self::to_f64) but `None` when the value does not fit.
    pub fn try_to_f64(&self) -> Option<f64> {
        let v = self.to_f64();
        v.is_finite().then_some(v)
    }

    pub fn ln(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.mantissa.ln() + self.exponent as f64 * LN_2
        }
    }

    pub fn log2(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.mantissa.log2() + self.exponent as f64
        }
    }

    pub fn log10(&self) -> f64 {
        self.ln() / std::f64::consts::LN_10
    }

    pub fn powf(&self, p: f64) -> Self {
        if self.is_zero() {
            return if p == 0.0 { LogScaled::ONE } else { LogScaled::ZERO };
        }
        LogScaled::from_ln(self.ln() * p)
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    /// Ratio `self / other` as a plain float.
    pub fn ratio(&self, other: &LogScaled) -> f64 {
        if other.is_zero() {
            return if self.is_zero() { f64::NAN } else { f64::INFINITY };
        }
        ldexp(self.mantissa / other.mantissa, self.exponent - other.exponent)
    }

    /// Relative difference `|a-b| / max(a,b)`, zero when both are zero.
    pub fn rel_diff(&self, other: &LogScaled) -> f64 {
        let hi = if self >= other { *self } else { *other };
        if hi.is_zero() {
            return 0.0;
        }
        let a = self.ratio(&hi);
        let b = other.ratio(&hi);
        (a - b).abs()
    }
}

impl Default for LogScaled {
    fn default() -> Self {
        LogScaled::ZERO
    }
}

impl fmt::Debug for LogScaled {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.try_to_f64() {
            Some(v) => write!(f, "{v}"),
            None => write!(f, "{}·2^{}", self.mantissa, self.exponent),
        }
    }
}

impl fmt::Display for LogScaled {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.try_to_f64() {
            Some(v) => write!(f, "{v}"),
            None => write!(f, "1e{:.4}", self.log10()),
        }
    }
}

impl PartialOrd for LogScaled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => Some(Ordering::Equal),
            (true, false) => Some(Ordering::Less),
            (false, true) => Some(Ordering::Greater),
            _ => match self.exponent.cmp(&other.exponent) {
                Ordering::Equal => self.mantissa.partial_cmp(&other.mantissa),
                o => Some(o),
            },
        }
    }
}

impl Mul for LogScaled {
    type Output = LogScaled;
    fn mul(self, rhs: LogScaled) -> LogScaled {
        if self.is_zero() || rhs.is_zero() {
            return LogScaled::ZERO;
        }
        LogScaled::from_parts(self.mantissa * rhs.mantissa, self.exponent + rhs.exponent)
    }
}

impl Div for LogScaled {
    type Output = LogScaled;
    fn div(self, rhs: LogScaled) -> LogScaled {
        assert!(!rhs.is_zero(), "LogScaled division by zero");
        if self.is_zero() {
            return LogScaled::ZERO;
        }
        LogScaled::from_parts(self.mantissa / rhs.mantissa, self.exponent - rhs.exponent)
    }
}

impl Add for LogScaled {
    type Output = LogScaled;
    fn add(self, rhs: LogScaled) -> LogScaled {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let (hi, lo) = if self.exponent >= rhs.exponent {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let shift = lo.exponent - hi.exponent;
        LogScaled::from_parts(hi.mantissa + ldexp(lo.mantissa, shift), hi.exponent)
    }
}

impl std::iter::Sum for LogScaled {
    fn sum<I: Iterator<Item = LogScaled>>(iter: I) -> Self {
        iter.fold(LogScaled::ZERO, |a, b| a + b)
    }
}

impl From<f64> for LogScaled {
    fn from(x: f64) -> Self {
        LogScaled::from_f64(x)
    }
}

/// Nonnegative vector `values · 2^exponent` with `max(values) ∈ [1,2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledVec {
    values: Vec<f64>,
    exponent: i64,
}

impl ScaledVec {
    pub fn new(values: Vec<f64>) -> Self {
        let mut v = ScaledVec {
            values,
            exponent: 0,
        };
        v.normalize();
        v
    }

    pub fn ones(n: usize) -> Self {
        ScaledVec {
            values: vec![1.0; n],
            exponent: 0,
        }
    }

    fn normalize(&mut self) {
        let max = self.values.iter().fold(0.0f64, |m, &v| m.max(v));
        if max == 0.0 {
            self.exponent = 0;
            return;
        }
        let (_, e) = frexp(max);
        if e != 0 {
            for v in &mut self.values {
                *v = ldexp(*v, -e);
            }
            self.exponent += e;
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Mantissas relative to the shared exponent.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    pub fn get(&self, i: usize) -> LogScaled {
        LogScaled::from_parts(self.values[i], self.exponent)
    }

    pub fn sum(&self) -> LogScaled {
        LogScaled::from_parts(self.values.iter().sum(), self.exponent)
    }

    pub fn dot(&self, other: &ScaledVec) -> LogScaled {
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        LogScaled::from_parts(s, self.exponent + other.exponent)
    }

    /// `m · self` for an entrywise nonnegative matrix.
    pub fn apply(&self, m: &Matrix) -> ScaledVec {
        let mut out = ScaledVec {
            values: m.matvec(&self.values),
            exponent: self.exponent,
        };
        out.normalize();
        out
    }

    /// `mᵀ · self` for an entrywise nonnegative matrix.
    pub fn apply_t(&self, m: &Matrix) -> ScaledVec {
        let mut out = ScaledVec {
            values: m.matvec_t(&self.values),
            exponent: self.exponent,
        };
        out.normalize();
        out
    }

    /// Entry `i` divided by `denom`, as a float.
    pub fn ratio(&self, i: usize, denom: &LogScaled) -> f64 {
        self.get(i).ratio(denom)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.values.iter().map(|&v| ldexp(v, self.exponent)).collect()
    }
}
