//! Overflow-safe arithmetic on quantities stored through their logarithm.

use crate::{Error, Result};

/// Largest `ln` that still exponentiates to a finite f64.
pub const LN_MAX: f64 = 709.782_712_893_384;

/// A positive quantity kept as its natural logarithm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogValue(pub f64);

impl LogValue {
    pub fn ln(self) -> f64 {
        self.0
    }

    /// Exponentiates, failing instead of returning infinity.
    pub fn exp(self) -> Result<f64> {
        if self.0 > LN_MAX || self.0.is_nan() {
            Err(Error::Saturation { log_value: self.0 })
        } else {
            Ok(self.0.exp())
        }
    }
}

/// Accumulates signed terms `sign·e^{l}` without forming any `e^{l}` that
/// could overflow on its own.
#[derive(Debug, Clone, Default)]
pub struct SignedLogSum {
    terms: Vec<(f64, f64)>,
}

impl SignedLogSum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `sign·e^{log_abs}`; a zero sign drops the term.
    pub fn push_log(&mut self, sign: f64, log_abs: f64) {
        if sign != 0.0 && log_abs > f64::NEG_INFINITY {
            self.terms.push((sign.signum(), log_abs));
        }
    }

    pub fn push(&mut self, v: f64) {
        if v != 0.0 {
            self.push_log(v.signum(), v.abs().ln());
        }
    }

    /// The sum as an f64: ±∞ when it does not fit, NaN only for NaN input.
    pub fn value(&self) -> f64 {
        let top = self.terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return 0.0;
        }
        if top.is_nan() {
            return f64::NAN;
        }
        let s: f64 = self.terms.iter().map(|(sg, l)| sg * (l - top).exp()).sum();
        if s == 0.0 {
            return 0.0;
        }
        let l = s.abs().ln() + top;
        if l > LN_MAX {
            s.signum() * f64::INFINITY
        } else {
            s.signum() * l.exp()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordinary_sums() {
        let mut s = SignedLogSum::new();
        s.push(3.0);
        s.push(-1.5);
        s.push(0.0);
        assert!((s.value() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn dominant_overflowing_terms() {
        let mut s = SignedLogSum::new();
        s.push_log(-1.0, 2000.0);
        s.push_log(1.0, 1000.0);
        assert_eq!(s.value(), f64::NEG_INFINITY);
        let mut c = SignedLogSum::new();
        c.push_log(1.0, 800.0);
        c.push_log(-1.0, 800.0 + (0.5f64).ln());
        // e^800/2 still overflows
        assert_eq!(c.value(), f64::INFINITY);
        let mut d = SignedLogSum::new();
        d.push_log(1.0, 800.0);
        d.push_log(-1.0, 800.0);
        assert_eq!(d.value(), 0.0);
    }

    #[test]
    fn log_value_saturates() {
        assert!(LogValue(1.0).exp().is_ok());
        assert!(matches!(LogValue(800.0).exp(), Err(Error::Saturation { .. })));
    }
}
