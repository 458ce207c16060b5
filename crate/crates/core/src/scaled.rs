//! Overflow-free accumulation of large powers.
//!
//! Sums of the form `sum_k exp(l_k)` are kept as `exp(log_scale) * acc` with
//! `acc` in `[1, count]`, so terms like `|x|^128 / h^65` never leave the
//! representable range.

use std::ops::Add;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledSum {
    log_scale: f64,
    acc: f64,
}

impl Default for ScaledSum {
    fn default() -> Self {
        Self::ZERO
    }
}

impl ScaledSum {
    pub const ZERO: ScaledSum = ScaledSum {
        log_scale: f64::NEG_INFINITY,
        acc: 0.0,
    };

    /// A sum holding the single term `exp(l)`.
    pub fn from_log(l: f64) -> Self {
        if l == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self {
                log_scale: l,
                acc: 1.0,
            }
        }
    }

    pub fn from_value(x: f64) -> Self {
        debug_assert!(x >= 0.0);
        Self::from_log(x.ln())
    }

    /// Adds the term `exp(l)`.
    #[inline]
    pub fn push_log(&mut self, l: f64) {
        if l == f64::NEG_INFINITY {
            return;
        }
        if l > self.log_scale {
            self.acc = self.acc * (self.log_scale - l).exp() + 1.0;
            self.log_scale = l;
        } else {
            self.acc += (l - self.log_scale).exp();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.acc == 0.0
    }

    /// Natural log of the sum (`-inf` for an empty sum).
    pub fn ln(&self) -> f64 {
        if self.acc == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.log_scale + self.acc.ln()
        }
    }

    /// The sum as a plain float; may overflow to `inf` or underflow to 0.
    pub fn value(&self) -> f64 {
        self.ln().exp()
    }

    /// Multiplies the sum by `exp(l)`.
    pub fn scale_log(self, l: f64) -> Self {
        if self.is_zero() {
            self
        } else {
            Self {
                log_scale: self.log_scale + l,
                acc: self.acc,
            }
        }
    }
}

impl Add for ScaledSum {
    type Output = ScaledSum;

    fn add(self, rhs: ScaledSum) -> ScaledSum {
        if rhs.is_zero() {
            return self;
        }
        if self.is_zero() {
            return rhs;
        }
        if self.log_scale >= rhs.log_scale {
            ScaledSum {
                log_scale: self.log_scale,
                acc: self.acc + rhs.acc * (rhs.log_scale - self.log_scale).exp(),
            }
        } else {
            ScaledSum {
                log_scale: rhs.log_scale,
                acc: rhs.acc + self.acc * (self.log_scale - rhs.log_scale).exp(),
            }
        }
    }
}

impl std::iter::Sum for ScaledSum {
    fn sum<I: Iterator<Item = ScaledSum>>(iter: I) -> Self {
        iter.fold(ScaledSum::ZERO, |a, b| a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_sum_in_range() {
        let xs: [f64; 6] = [1.5, 0.25, 7.0, 1e-3, 0.0, 3.0];
        let mut s = ScaledSum::ZERO;
        for &x in &xs {
            s.push_log(if x == 0.0 { f64::NEG_INFINITY } else { x.ln() });
        }
        let naive: f64 = xs.iter().sum();
        assert!((s.value() - naive).abs() < 1e-13 * naive);
    }

    #[test]
    fn survives_overflowing_terms() {
        // 2 * 10^400, far beyond f64.
        let l = 400.0 * 10f64.ln();
        let mut s = ScaledSum::ZERO;
        s.push_log(l);
        s.push_log(l);
        assert!((s.ln() - (l + 2f64.ln())).abs() < 1e-12);
        assert!(s.value().is_infinite());
    }

    #[test]
    fn add_is_order_insensitive_up_to_rounding() {
        let a = ScaledSum::from_log(3.0);
        let b = ScaledSum::from_log(-2.0);
        let c = ScaledSum::from_log(10.0);
        let l1 = ((a + b) + c).ln();
        let l2 = (a + (b + c)).ln();
        assert!((l1 - l2).abs() < 1e-14);
        assert_eq!((ScaledSum::ZERO + a).ln(), a.ln());
    }
}
