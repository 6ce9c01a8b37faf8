//! Extended-range complex scalars and dense matrices.
//!
//! Every entry carries its own binary exponent, so a matrix such as
//! `diag(a^{p/2}) U diag(b^{p/2})` can be factorized for `p` in the
//! thousands without any entry overflowing or underflowing.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::logval::{frexp, ldexp, pow2, LogValue};

/// `(re + i·im) · 2^exp` with `max(|re|, |im|) ∈ [1, 2)` unless zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XComplex {
    re: f64,
    im: f64,
    exp: i64,
}

impl XComplex {
    pub const ZERO: XComplex = XComplex { re: 0.0, im: 0.0, exp: 0 };
    pub const ONE: XComplex = XComplex { re: 1.0, im: 0.0, exp: 0 };

    fn normalized(re: f64, im: f64, exp: i64) -> Self {
        let big = re.abs().max(im.abs());
        if big == 0.0 {
            return Self::ZERO;
        }
        let (_, e) = frexp(big);
        XComplex { re: ldexp(re, -e), im: ldexp(im, -e), exp: exp + e }
    }

    pub fn from_c64(z: Complex64) -> Self {
        Self::normalized(z.re, z.im, 0)
    }

    pub fn from_real(x: LogValue) -> Self {
        let (m, e) = x.parts();
        Self::normalized(m, 0.0, e)
    }

    /// `z · exp(ln_scale)`.
    pub fn scaled_c64(z: Complex64, ln_scale: f64) -> Self {
        Self::from_c64(z).mul_real(LogValue::from_ln(ln_scale))
    }

    pub fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(ldexp(self.re, self.exp), ldexp(self.im, self.exp))
    }

    pub fn conj(&self) -> Self {
        XComplex { im: -self.im, ..*self }
    }

    pub fn re(&self) -> LogValue {
        let (m, e) = if self.re == 0.0 { (0.0, 0) } else { frexp(self.re) };
        LogValue::from_real(m).scale2(e + self.exp)
    }

    pub fn norm_sqr(&self) -> LogValue {
        if self.is_zero() {
            return LogValue::ZERO;
        }
        LogValue::from_real(self.re * self.re + self.im * self.im).scale2(2 * self.exp)
    }

    pub fn abs(&self) -> LogValue {
        if self.is_zero() {
            return LogValue::ZERO;
        }
        LogValue::from_real(self.re.hypot(self.im)).scale2(self.exp)
    }

    /// Unit-modulus phase `z/|z|` (1 for zero).
    pub fn phase(&self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(1.0, 0.0);
        }
        let r = self.re.hypot(self.im);
        Complex64::new(self.re / r, self.im / r)
    }

    pub fn mul_real(&self, x: LogValue) -> Self {
        if x.is_zero() || self.is_zero() {
            return Self::ZERO;
        }
        let (m, e) = x.parts();
        Self::normalized(self.re * m, self.im * m, self.exp + e)
    }

    pub fn mul_c64(&self, z: Complex64) -> Self {
        let w = Complex64::new(self.re, self.im) * z;
        Self::normalized(w.re, w.im, self.exp)
    }

    pub fn div_real(&self, x: LogValue) -> Self {
        self.mul_real(x.recip())
    }

    /// Binary exponent of the larger component (`i64::MIN` for zero).
    pub fn exponent(&self) -> i64 {
        if self.is_zero() {
            i64::MIN
        } else {
            self.exp
        }
    }
}

impl Default for XComplex {
    fn default() -> Self {
        Self::ZERO
    }
}

impl Add for XComplex {
    type Output = XComplex;
    fn add(self, rhs: Self) -> Self {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let (big, small) = if self.exp >= rhs.exp { (self, rhs) } else { (rhs, self) };
        let shift = small.exp - big.exp;
        if shift < -60 {
            return big;
        }
        let s = pow2(shift);
        Self::normalized(big.re + small.re * s, big.im + small.im * s, big.exp)
    }
}

impl Sub for XComplex {
    type Output = XComplex;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for XComplex {
    type Output = XComplex;
    fn neg(self) -> Self {
        XComplex { re: -self.re, im: -self.im, exp: self.exp }
    }
}

impl Mul for XComplex {
    type Output = XComplex;
    fn mul(self, rhs: Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Self::ZERO;
        }
        let re = self.re * rhs.re - self.im * rhs.im;
        let im = self.re * rhs.im + self.im * rhs.re;
        Self::normalized(re, im, self.exp + rhs.exp)
    }
}

impl std::iter::Sum for XComplex {
    fn sum<I: Iterator<Item = XComplex>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |a, b| a + b)
    }
}

/// Dense column-major matrix of [`XComplex`].
#[derive(Clone, Debug, PartialEq)]
pub struct XMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<XComplex>,
}

impl XMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        XMatrix { nrows, ncols, data: vec![XComplex::ZERO; nrows * ncols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = XComplex::ONE;
        }
        m
    }

    pub fn from_dmatrix(m: &DMatrix<Complex64>) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                out[(i, j)] = XComplex::from_c64(m[(i, j)]);
            }
        }
        out
    }

    /// `diag(row) · core · diag(col)` with the scales given as LogValues.
    pub fn from_scaled(core: &DMatrix<Complex64>, row: &[LogValue], col: &[LogValue]) -> Self {
        assert_eq!(core.nrows(), row.len());
        assert_eq!(core.ncols(), col.len());
        let mut out = Self::zeros(row.len(), col.len());
        for j in 0..col.len() {
            for i in 0..row.len() {
                out[(i, j)] = XComplex::from_c64(core[(i, j)]).mul_real(row[i] * col[j]);
            }
        }
        out
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn column(&self, j: usize) -> &[XComplex] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [XComplex] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn column_norm_sqr(&self, j: usize) -> LogValue {
        self.column(j).iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn row_norm_sqr(&self, i: usize) -> LogValue {
        (0..self.ncols).map(|j| self[(i, j)].norm_sqr()).sum()
    }

    pub fn swap_columns(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.nrows {
            self.data.swap(a * self.nrows + i, b * self.nrows + i);
        }
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.ncols {
            self.data.swap(j * self.nrows + a, j * self.nrows + b);
        }
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.ncols, self.nrows);
        for j in 0..self.ncols {
            for i in 0..self.nrows {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &XMatrix) -> XMatrix {
        assert_eq!(self.ncols, rhs.nrows);
        let mut out = Self::zeros(self.nrows, rhs.ncols);
        for j in 0..rhs.ncols {
            for i in 0..self.nrows {
                out[(i, j)] = (0..self.ncols).map(|k| self[(i, k)] * rhs[(k, j)]).sum();
            }
        }
        out
    }

    pub fn scale_rows(&mut self, s: &[LogValue]) {
        for j in 0..self.ncols {
            for (i, si) in s.iter().enumerate() {
                let v = self[(i, j)].mul_real(*si);
                self[(i, j)] = v;
            }
        }
    }

    pub fn scale_columns(&mut self, s: &[LogValue]) {
        for (j, sj) in s.iter().enumerate() {
            for z in self.column_mut(j) {
                *z = z.mul_real(*sj);
            }
        }
    }

    /// Nearest double-precision matrix (entries outside the range saturate).
    pub fn to_dmatrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.nrows, self.ncols, |i, j| self[(i, j)].to_c64())
    }
}

impl std::ops::Index<(usize, usize)> for XMatrix {
    type Output = XComplex;
    fn index(&self, (i, j): (usize, usize)) -> &XComplex {
        &self.data[j * self.nrows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for XMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut XComplex {
        &mut self.data[j * self.nrows + i]
    }
}
