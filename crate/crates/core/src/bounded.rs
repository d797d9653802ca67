use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A real number with a certified absolute error: the exact quantity lies in
/// `[value - err, value + err]`.
///
/// `err` covers truncation of infinite products and sums. Floating-point
/// rounding is absorbed by a relative slack in each arithmetic step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundedValue {
    pub value: f64,
    pub err: f64,
}

const ROUNDING: f64 = 4.0 * f64::EPSILON;

impl BoundedValue {
    pub fn new(value: f64, err: f64) -> Self {
        debug_assert!(err >= 0.0, "negative error bound {err}");
        BoundedValue { value, err }
    }

    pub fn exact(value: f64) -> Self {
        BoundedValue { value, err: 0.0 }
    }

    pub fn zero() -> Self {
        Self::exact(0.0)
    }

    pub fn lower(&self) -> f64 {
        self.value - self.err
    }

    pub fn upper(&self) -> f64 {
        self.value + self.err
    }

    pub fn contains(&self, x: f64) -> bool {
        (x - self.value).abs() <= self.err
    }

    /// True when the two intervals intersect, widened by `slack`.
    pub fn agrees_with(&self, other: &BoundedValue, slack: f64) -> bool {
        (self.value - other.value).abs() <= self.err + other.err + slack
    }

    pub fn scale(self, c: f64) -> Self {
        let value = self.value * c;
        BoundedValue::new(value, self.err * c.abs() + value.abs() * ROUNDING)
    }

    pub fn with_extra_err(self, extra: f64) -> Self {
        BoundedValue::new(self.value, self.err + extra.abs())
    }
}

impl Add for BoundedValue {
    type Output = BoundedValue;
    fn add(self, o: BoundedValue) -> BoundedValue {
        let value = self.value + o.value;
        BoundedValue::new(value, self.err + o.err + value.abs() * ROUNDING)
    }
}

impl Sub for BoundedValue {
    type Output = BoundedValue;
    fn sub(self, o: BoundedValue) -> BoundedValue {
        self + (-o)
    }
}

impl Neg for BoundedValue {
    type Output = BoundedValue;
    fn neg(self) -> BoundedValue {
        BoundedValue::new(-self.value, self.err)
    }
}

impl Mul for BoundedValue {
    type Output = BoundedValue;
    fn mul(self, o: BoundedValue) -> BoundedValue {
        let value = self.value * o.value;
        let err = self.value.abs() * o.err + o.value.abs() * self.err + self.err * o.err;
        BoundedValue::new(value, err + value.abs() * ROUNDING)
    }
}

impl fmt::Display for BoundedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.12e} ± {:.3e}", self.value, self.err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_arithmetic_contains_exact_results() {
        let a = BoundedValue::new(2.0, 0.1);
        let b = BoundedValue::new(-3.0, 0.2);
        for (x, y) in [(2.1, -3.2), (1.9, -2.8), (2.05, -3.0)] {
            assert!((a + b).contains(x + y));
            assert!((a - b).contains(x - y));
            assert!((a * b).contains(x * y));
            assert!(a.scale(-2.5).contains(-2.5 * x));
        }
    }

    #[test]
    fn agreement_uses_both_errors() {
        let a = BoundedValue::new(1.0, 0.01);
        let b = BoundedValue::new(1.015, 0.01);
        assert!(a.agrees_with(&b, 0.0));
        assert!(!a.agrees_with(&BoundedValue::exact(1.03), 0.0));
    }
}
