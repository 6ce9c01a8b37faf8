//! Hermitian and positive semidefinite matrices, spectral decompositions and
//! direct evaluation of `Z_p = (A^{p/2} B^p A^{p/2})^{1/p}` and
//! `G_p = (A^p # B^p)^{2/p}` at any `p`.

pub mod graded;
mod powers;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub use powers::{
    g_p_matrix_numeric, g_p_spectrum, geometric_mean_power, multi_product_eigenvalues_numeric, multi_product_numeric,
    multi_product_spectrum, relative_frame, z_p_eigenvalues_numeric, z_p_matrix_numeric, z_p_spectrum, LogSpectrum,
    FRAME_SNAP_TOL,
};

pub type CMatrix = DMatrix<Complex64>;

pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Largest absolute entry.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Operator (spectral) norm.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// A Hermitian matrix, validated on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    entries: CMatrix,
}

impl HermitianMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch { expected: entries.nrows(), found: entries.ncols() });
        }
        let scale = max_abs(&entries);
        let asym = max_abs(&(&entries - entries.adjoint()));
        let tol = 1e-12 * scale;
        if asym > tol {
            return Err(Error::NotHermitian { asymmetry: asym, tolerance: tol });
        }
        // store the exactly Hermitian part
        let sym = (&entries + entries.adjoint()).map(|z| z * 0.5);
        Ok(HermitianMatrix { entries: sym })
    }

    /// Real symmetric matrix from row-major data.
    pub fn from_real_rows(d: usize, rows: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_row_slice(d, d, rows).map(c))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }
}

/// Eigen-decomposition of a Hermitian matrix: decreasing real eigenvalues.
#[derive(Clone, Debug)]
pub struct Spectral {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

/// Sort `(values, vectors)` by decreasing value, ties by ascending original index.
fn sorted_spectrum(values: &[f64], vectors: &CMatrix) -> Spectral {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let eigenvalues = order.iter().map(|&i| values[i]).collect();
    let eigenvectors = CMatrix::from_fn(vectors.nrows(), order.len(), |r, k| vectors[(r, order[k])]);
    Spectral { eigenvalues, eigenvectors }
}

pub fn spectral_decompose(h: &HermitianMatrix) -> Spectral {
    let d = h.dim();
    if d == 0 {
        return Spectral { eigenvalues: vec![], eigenvectors: CMatrix::zeros(0, 0) };
    }
    let eig = h.entries.clone().symmetric_eigen();
    let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    sorted_spectrum(&vals, &eig.eigenvectors)
}

/// Positive semidefinite matrix in spectral form `V diag(a) V*`.
#[derive(Clone, Debug, PartialEq)]
pub struct PsdMatrix {
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
}

impl PsdMatrix {
    /// Decompose a Hermitian matrix, clamping negligible negative eigenvalues.
    pub fn from_hermitian(h: &HermitianMatrix) -> Result<Self> {
        let s = spectral_decompose(h);
        Self::from_signed_spectrum(s.eigenvalues, s.eigenvectors)
    }

    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        Self::from_hermitian(&HermitianMatrix::new(m)?)
    }

    fn from_signed_spectrum(values: Vec<f64>, vectors: CMatrix) -> Result<Self> {
        let big = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        if !values.is_empty() && min < -1e-8 * big {
            return Err(Error::MateriallyNegative { min, max: big });
        }
        let values = values.into_iter().map(|v| v.max(0.0)).collect::<Vec<_>>();
        let s = sorted_spectrum(&values, &vectors);
        Ok(PsdMatrix { eigenvalues: s.eigenvalues, eigenvectors: s.eigenvectors })
    }

    /// Build from a spectral form; the eigenvectors must be unitary within 1e-10.
    pub fn from_spectral(eigenvalues: Vec<f64>, eigenvectors: CMatrix) -> Result<Self> {
        let d = eigenvalues.len();
        if eigenvectors.nrows() != d || eigenvectors.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: eigenvectors.ncols() });
        }
        let defect = op_norm(&(eigenvectors.adjoint() * &eigenvectors - CMatrix::identity(d, d)));
        if defect > 1e-10 {
            return Err(Error::InvalidArgument(format!("eigenvectors are not unitary (defect {defect:.3e})")));
        }
        if eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadSpectrum("non-finite eigenvalue".into()));
        }
        Self::from_signed_spectrum(eigenvalues, eigenvectors)
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let d = values.len();
        Self::from_spectral(values.to_vec(), CMatrix::identity(d, d))
    }

    /// Real symmetric matrix from row-major data.
    pub fn from_real_rows(d: usize, rows: &[f64]) -> Result<Self> {
        Self::from_hermitian(&HermitianMatrix::from_real_rows(d, rows)?)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn rank(&self, rel_tol: f64) -> usize {
        let cut = rel_tol * self.max_eigenvalue();
        self.eigenvalues.iter().filter(|&&v| v > cut && v > 0.0).count()
    }

    pub fn is_definite(&self) -> bool {
        self.eigenvalues.last().is_some_and(|&v| v > 0.0)
    }

    /// `V diag(f(a)) V*`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let d = self.dim();
        let fd = DVector::from_iterator(d, self.eigenvalues.iter().map(|&v| c(f(v))));
        let scaled = CMatrix::from_fn(d, d, |i, j| self.eigenvectors[(i, j)] * fd[j]);
        scaled * self.eigenvectors.adjoint()
    }

    pub fn to_matrix(&self) -> CMatrix {
        self.map_spectrum(|v| v)
    }

    /// `A^q` on the support (zero eigenvalues stay zero for `q > 0`).
    pub fn pow(&self, q: f64) -> PsdMatrix {
        let vals = self.eigenvalues.iter().map(|&v| if v > 0.0 { v.powf(q) } else { 0.0 }).collect();
        PsdMatrix::from_signed_spectrum(vals, self.eigenvectors.clone()).expect("power of PSD is PSD")
    }

    /// Support projection `A^0`.
    pub fn support(&self) -> CMatrix {
        self.map_spectrum(|v| if v > 0.0 { 1.0 } else { 0.0 })
    }

    pub fn hermitian(&self) -> HermitianMatrix {
        HermitianMatrix { entries: hermitian_part(&self.to_matrix()) }
    }

    /// `U A U*`.
    pub fn conjugate(&self, u: &CMatrix) -> PsdMatrix {
        PsdMatrix { eigenvalues: self.eigenvalues.clone(), eigenvectors: u * &self.eigenvectors }
    }

    /// `c · A` for `c ≥ 0`.
    pub fn scale(&self, s: f64) -> PsdMatrix {
        assert!(s >= 0.0);
        PsdMatrix {
            eigenvalues: self.eigenvalues.iter().map(|v| v * s).collect(),
            eigenvectors: self.eigenvectors.clone(),
        }
    }

    /// `A + εI`.
    pub fn shift(&self, eps: f64) -> PsdMatrix {
        PsdMatrix {
            eigenvalues: self.eigenvalues.iter().map(|v| v + eps).collect(),
            eigenvectors: self.eigenvectors.clone(),
        }
    }

    pub(crate) fn from_parts_unchecked(eigenvalues: Vec<f64>, eigenvectors: CMatrix) -> PsdMatrix {
        let s = sorted_spectrum(&eigenvalues, &eigenvectors);
        PsdMatrix { eigenvalues: s.eigenvalues, eigenvectors: s.eigenvectors }
    }
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).map(|z| z * 0.5)
}

/// Extend orthonormal columns to a full unitary matrix.
pub fn complete_basis(cols: &CMatrix) -> CMatrix {
    let d = cols.nrows();
    let mut basis: Vec<DVector<Complex64>> = Vec::with_capacity(d);
    for j in 0..cols.ncols() {
        basis.push(cols.column(j).into_owned());
    }
    let mut e = 0;
    while basis.len() < d && e < d {
        let mut v = DVector::from_fn(d, |i, _| if i == e { c(1.0) } else { c(0.0) });
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let n = v.norm();
        if n > 1e-6 {
            basis.push(v / c(n));
        }
        e += 1;
    }
    CMatrix::from_columns(&basis)
}

/// Smallest eigenvalue of the Hermitian part, used for Löwner-order tests.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    hermitian_part(m).symmetric_eigen().eigenvalues.min()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_decomposes_to_ones() {
        let h = HermitianMatrix::new(CMatrix::identity(3, 3)).unwrap();
        let p = PsdMatrix::from_hermitian(&h).unwrap();
        assert_eq!(p.eigenvalues(), &[1.0, 1.0, 1.0]);
        assert!((p.to_matrix() - CMatrix::identity(3, 3)).norm() < 1e-14);
    }

    #[test]
    fn diagonal_decomposition_permutes_basis() {
        let p = PsdMatrix::from_real_rows(3, &[1.0, 0.0, 0.0, 0.0, 4.0, 0.0, 0.0, 0.0, 2.0]).unwrap();
        assert_eq!(p.eigenvalues(), &[4.0, 2.0, 1.0]);
        let v = p.eigenvectors();
        assert!((v[(1, 0)].norm() - 1.0).abs() < 1e-14);
        assert!((v[(2, 1)].norm() - 1.0).abs() < 1e-14);
        assert!((v[(0, 2)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_by_two_eigenpairs() {
        let p = PsdMatrix::from_real_rows(2, &[5.0, 4.0, 4.0, 5.0]).unwrap();
        assert!((p.eigenvalues()[0] - 9.0).abs() < 1e-13);
        assert!((p.eigenvalues()[1] - 1.0).abs() < 1e-13);
        let v0 = p.eigenvectors().column(0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v0[0].norm() - s).abs() < 1e-13 && (v0[1].norm() - s).abs() < 1e-13);
        assert!((v0[0] - v0[1]).norm() < 1e-13);
        let v1 = p.eigenvectors().column(1);
        assert!((v1[0] + v1[1]).norm() < 1e-13);
        let src = DMatrix::from_row_slice(2, 2, &[5.0, 4.0, 4.0, 5.0]).map(c);
        assert!((p.to_matrix() - src).norm() < 1e-12 * 9.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]).map(c);
        assert!(matches!(HermitianMatrix::new(m), Err(Error::NotHermitian { .. })));
        let neg = PsdMatrix::from_real_rows(2, &[1.0, 0.0, 0.0, -0.5]);
        assert!(matches!(neg, Err(Error::MateriallyNegative { .. })));
        let tiny = PsdMatrix::from_real_rows(2, &[1.0, 0.0, 0.0, -1e-13]).unwrap();
        assert_eq!(tiny.eigenvalues()[1], 0.0);
    }

    #[test]
    fn completes_partial_basis() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let cols = DMatrix::from_column_slice(3, 1, &[c(s), c(s), c(0.0)]);
        let full = complete_basis(&cols);
        assert_eq!(full.ncols(), 3);
        assert!((full.adjoint() * &full - CMatrix::identity(3, 3)).norm() < 1e-12);
    }
}
