//! Extended-range signed scalars.
//!
//! A [`LogValue`] stores `sign · m · 2^e` with `m ∈ [1, 2)` and a 64-bit
//! binary exponent, so products such as `a_I^{p/2} b_K^p` stay finite for
//! any `p` a caller is likely to use. The natural-log magnitude is derived
//! on demand; conversion from and back to `f64` is exact.

use std::cmp::Ordering;
use std::f64::consts::LN_2;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Split a finite non-zero `x` into `(m, e)` with `|m| ∈ [1, 2)` and `x = m · 2^e`.
pub(crate) fn frexp(x: f64) -> (f64, i64) {
    debug_assert!(x.is_finite() && x != 0.0);
    let bits = x.to_bits();
    let raw = ((bits >> 52) & 0x7ff) as i64;
    if raw == 0 {
        // subnormal: rescale into the normal range first
        let (m, e) = frexp(x * f64::from_bits(0x43f0_0000_0000_0000)); // 2^64
        return (m, e - 64);
    }
    let m = f64::from_bits((bits & !(0x7ffu64 << 52)) | (1023u64 << 52));
    (m, raw - 1023)
}

/// `2^k` for `k` in the normal exponent range, saturating to 0/inf outside it.
pub(crate) fn pow2(k: i64) -> f64 {
    if k > 1023 {
        f64::INFINITY
    } else if k >= -1022 {
        f64::from_bits(((k + 1023) as u64) << 52)
    } else if k >= -1074 {
        f64::from_bits(1u64 << (k + 1074))
    } else {
        0.0
    }
}

/// `x · 2^k` without intermediate overflow for moderate `x`.
pub(crate) fn ldexp(x: f64, k: i64) -> f64 {
    if x == 0.0 || k == 0 {
        return x;
    }
    let (m, e) = frexp(x);
    let t = e + k;
    if t > 1023 {
        return m.signum() * f64::INFINITY;
    }
    if t >= -1022 {
        return m * pow2(t);
    }
    // gradual underflow: two steps keep the rounding correct
    m * pow2(t + 60) * pow2(-60)
}

/// Signed extended-range real number.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogValue {
    sign: i8,
    mant: f64,
    exp: i64,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue { sign: 0, mant: 0.0, exp: 0 };
    pub const ONE: LogValue = LogValue { sign: 1, mant: 1.0, exp: 0 };

    pub fn from_real(x: f64) -> Self {
        if x == 0.0 || x.is_nan() {
            return Self::ZERO;
        }
        assert!(x.is_finite(), "LogValue::from_real on non-finite {x}");
        let (m, e) = frexp(x);
        LogValue { sign: if m < 0.0 { -1 } else { 1 }, mant: m.abs(), exp: e }
    }

    /// Positive value `exp(ln_mag)`; `-inf` maps to zero.
    pub fn from_ln(ln_mag: f64) -> Self {
        Self::from_sign_ln(1, ln_mag)
    }

    pub fn from_sign_ln(sign: i8, ln_mag: f64) -> Self {
        if sign == 0 || ln_mag == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        assert!(ln_mag.is_finite(), "non-finite log magnitude {ln_mag}");
        Self::from_log2_parts(sign.signum(), ln_mag / LN_2)
    }

    /// Build from a base-2 logarithm.
    fn from_log2_parts(sign: i8, lg: f64) -> Self {
        let e = lg.floor();
        let mut mant = (lg - e).exp2();
        let mut exp = e as i64;
        if mant >= 2.0 {
            mant /= 2.0;
            exp += 1;
        }
        LogValue { sign, mant, exp }
    }

    fn from_parts(m: f64, e: i64) -> Self {
        if m == 0.0 {
            return Self::ZERO;
        }
        let (mm, ee) = frexp(m);
        LogValue { sign: if mm < 0.0 { -1 } else { 1 }, mant: mm.abs(), exp: e + ee }
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn is_positive(&self) -> bool {
        self.sign > 0
    }

    /// Natural log of the magnitude; `-inf` for zero.
    pub fn logmag(&self) -> f64 {
        if self.sign == 0 {
            f64::NEG_INFINITY
        } else {
            (self.exp as f64 + self.mant.log2()) * LN_2
        }
    }

    /// Base-10 log of the magnitude.
    pub fn log10(&self) -> f64 {
        if self.sign == 0 {
            f64::NEG_INFINITY
        } else {
            (self.exp as f64 + self.mant.log2()) * std::f64::consts::LOG10_2
        }
    }

    /// Binary exponent of the magnitude (`floor(log2 |x|)`); `i64::MIN` for zero.
    pub fn exponent(&self) -> i64 {
        if self.sign == 0 {
            i64::MIN
        } else {
            self.exp
        }
    }

    /// Mantissa and exponent with `m ∈ ±[1,2)`.
    pub fn parts(&self) -> (f64, i64) {
        (self.sign as f64 * self.mant, self.exp)
    }

    /// Nearest `f64`; saturates to `±inf` or flushes to 0 outside the double range.
    pub fn to_real(&self) -> f64 {
        if self.sign == 0 {
            return 0.0;
        }
        ldexp(self.sign as f64 * self.mant, self.exp)
    }

    pub fn abs(&self) -> Self {
        LogValue { sign: self.sign.abs(), ..*self }
    }

    /// `|x|^q` for a zero-or-positive result sign convention: the sign is dropped.
    pub fn powf(&self, q: f64) -> Self {
        if self.sign == 0 {
            return if q == 0.0 { Self::ONE } else { Self::ZERO };
        }
        if q == 0.0 {
            return Self::ONE;
        }
        // split q·(e + log2 m) into integer and fractional parts without losing the
        // exponent's precision when e is large
        let qe = q * self.exp as f64;
        let qi = qe.floor();
        let frac = (qe - qi) + q * self.mant.log2();
        let f = frac.floor();
        let mut out = Self::from_log2_parts(1, frac - f);
        out.exp += qi as i64 + f as i64;
        out
    }

    pub fn sqrt(&self) -> Self {
        assert!(self.sign >= 0, "sqrt of negative LogValue");
        if self.sign == 0 {
            return Self::ZERO;
        }
        if self.exp.rem_euclid(2) == 0 {
            LogValue { sign: 1, mant: self.mant.sqrt(), exp: self.exp / 2 }
        } else {
            Self::from_parts((2.0 * self.mant).sqrt(), (self.exp - 1).div_euclid(2))
        }
    }

    pub fn recip(&self) -> Self {
        assert!(self.sign != 0, "reciprocal of zero LogValue");
        Self::from_parts(self.sign as f64 / self.mant, -self.exp)
    }

    /// Multiply by `2^k`.
    pub fn scale2(&self, k: i64) -> Self {
        if self.sign == 0 {
            return *self;
        }
        LogValue { exp: self.exp + k, ..*self }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    /// Compare by magnitude only.
    pub fn cmp_abs(&self, other: &Self) -> Ordering {
        match (self.sign == 0, other.sign == 0) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            _ => self
                .exp
                .cmp(&other.exp)
                .then(self.mant.partial_cmp(&other.mant).unwrap_or(Ordering::Equal)),
        }
    }
}

impl Default for LogValue {
    fn default() -> Self {
        Self::ZERO
    }
}

impl fmt::Debug for LogValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.sign == 0 {
            write!(f, "0")
        } else if (-1000..1000).contains(&self.exp) {
            write!(f, "{:e}", self.to_real())
        } else {
            write!(f, "{}exp({})", if self.sign < 0 { "-" } else { "" }, self.logmag())
        }
    }
}

impl fmt::Display for LogValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl PartialOrd for LogValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        let ord = match self.sign.cmp(&other.sign) {
            Ordering::Equal => match self.sign {
                0 => Ordering::Equal,
                1 => self.cmp_abs(other),
                _ => other.cmp_abs(self),
            },
            o => o,
        };
        Some(ord)
    }
}

impl Mul for LogValue {
    type Output = LogValue;
    fn mul(self, rhs: Self) -> Self {
        if self.sign == 0 || rhs.sign == 0 {
            return Self::ZERO;
        }
        let mut m = self.mant * rhs.mant;
        let mut e = self.exp + rhs.exp;
        if m >= 2.0 {
            m *= 0.5;
            e += 1;
        }
        LogValue { sign: self.sign * rhs.sign, mant: m, exp: e }
    }
}

impl Div for LogValue {
    type Output = LogValue;
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl Neg for LogValue {
    type Output = LogValue;
    fn neg(self) -> Self {
        LogValue { sign: -self.sign, ..self }
    }
}

impl Add for LogValue {
    type Output = LogValue;
    fn add(self, rhs: Self) -> Self {
        if self.sign == 0 {
            return rhs;
        }
        if rhs.sign == 0 {
            return self;
        }
        let (big, small) = if self.exp >= rhs.exp { (self, rhs) } else { (rhs, self) };
        let shift = small.exp - big.exp;
        if shift < -60 {
            return big;
        }
        let s = big.sign as f64 * big.mant + small.sign as f64 * small.mant * pow2(shift);
        Self::from_parts(s, big.exp)
    }
}

impl Sub for LogValue {
    type Output = LogValue;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl std::iter::Sum for LogValue {
    fn sum<I: Iterator<Item = LogValue>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |a, b| a + b)
    }
}

impl std::iter::Product for LogValue {
    fn product<I: Iterator<Item = LogValue>>(iter: I) -> Self {
        iter.fold(Self::ONE, |a, b| a * b)
    }
}

impl From<f64> for LogValue {
    fn from(x: f64) -> Self {
        Self::from_real(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn frexp_and_ldexp_agree() {
        for &x in &[1.0, -3.5, 1e-310, 7.25e300, f64::MIN_POSITIVE] {
            let (m, e) = frexp(x);
            assert!((1.0..2.0).contains(&m.abs()));
            assert_eq!(ldexp(m, e), x);
        }
    }

    #[test]
    fn huge_products_stay_finite() {
        let a = LogValue::from_ln(1e15);
        let b = a * a;
        assert!((b.logmag() - 2e15).abs() / 2e15 < 1e-12);
        assert!(a.max(b) == b);
        assert_eq!(LogValue::from_ln(-1e15).to_real(), 0.0);
    }

    #[test]
    fn powers_match_log_scaling() {
        let x = LogValue::from_real(36.0);
        let y = x.powf(2048.0);
        assert!((y.logmag() - 2048.0 * 36f64.ln()).abs() < 1e-9);
        let back = y.powf(1.0 / 2048.0);
        assert!((back.to_real() - 36.0).abs() < 1e-10);
    }

    #[test]
    fn sum_with_cancellation() {
        let a = LogValue::from_real(1.0e200);
        let b = LogValue::from_real(-1.0e200);
        assert!((a + b).is_zero());
        let c = LogValue::from_real(3.0) - LogValue::from_real(1.0);
        assert_eq!(c.to_real(), 2.0);
        assert_eq!(LogValue::from_real(8.0).sqrt().to_real(), 8f64.sqrt());
        assert_eq!(LogValue::from_real(16.0).sqrt().to_real(), 4.0);
    }

    proptest! {
        #[test]
        fn real_round_trip_is_exact(m in 1.0f64..10.0, e in -300i32..300, neg in any::<bool>()) {
            let x = if neg { -m * 10f64.powi(e) } else { m * 10f64.powi(e) };
            prop_assert_eq!(LogValue::from_real(x).to_real(), x);
        }

        #[test]
        fn ordering_matches_reals(x in -1e6f64..1e6, y in -1e6f64..1e6) {
            let (a, b) = (LogValue::from_real(x), LogValue::from_real(y));
            prop_assert_eq!(a.partial_cmp(&b), x.partial_cmp(&y));
            let p = (a * b).to_real();
            prop_assert!((p - x * y).abs() <= 1e-15 * (x * y).abs());
        }
    }
}
