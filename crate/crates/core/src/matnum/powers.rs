//! Direct evaluation of `Z_p`, multi-factor products and `G_p` in extended range.
//!
//! Everything is expressed in the eigenbasis of the first argument, where
//! `A^{p/2}` is diagonal and `B` is `U diag(b) U*` with `U = V*W`. Powers
//! of eigenvalues become per-row and per-column [`LogValue`] scales of an
//! [`XMatrix`], and the graded SVD recovers singular values to relative
//! accuracy regardless of `p`.

use nalgebra::DMatrix;
use super::graded::{pivoted_qr, xsvd, XSvd};
use super::{c, complete_basis, CMatrix, PsdMatrix};
use crate::error::{Error, Result};
use crate::ext::XMatrix;
use crate::logval::LogValue;

/// Eigenvalues in extended range with double-precision eigenvectors.
#[derive(Clone, Debug)]
pub struct LogSpectrum {
    /// Decreasing.
    pub eigenvalues: Vec<LogValue>,
    pub eigenvectors: CMatrix,
}

impl LogSpectrum {
    /// Eigenvalues raised to `q`.
    pub fn powf(&self, q: f64) -> LogSpectrum {
        LogSpectrum {
            eigenvalues: self.eigenvalues.iter().map(|v| v.powf(q)).collect(),
            eigenvectors: self.eigenvectors.clone(),
        }
    }

    pub fn log_eigenvalues(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|v| v.logmag()).collect()
    }

    /// Convert to a double-precision PSD matrix (eigenvalues saturate outside the range).
    pub fn to_psd(&self) -> PsdMatrix {
        PsdMatrix::from_parts_unchecked(
            self.eigenvalues.iter().map(|v| v.to_real()).collect(),
            self.eigenvectors.clone(),
        )
    }
}

pub(crate) fn check_same_dim(a: &PsdMatrix, b: &PsdMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(())
}

/// Entries of `V*W` at or below this magnitude are treated as exact zeros.
///
/// They are rounding noise of the product of two unitaries, and the large-`p`
/// quantities depend discontinuously on which entries vanish.
pub const FRAME_SNAP_TOL: f64 = 1e-13;

/// `V*W` with rounding noise removed.
pub fn relative_frame(v: &CMatrix, w: &CMatrix) -> CMatrix {
    (v.adjoint() * w).map(|z| if z.norm() <= FRAME_SNAP_TOL { c(0.0) } else { z })
}

fn positive_indices(vals: &[f64]) -> Vec<usize> {
    (0..vals.len()).filter(|&i| vals[i] > 0.0).collect()
}

fn pow_scales(vals: &[f64], idx: &[usize], q: f64) -> Vec<LogValue> {
    idx.iter().map(|&i| LogValue::from_real(vals[i]).powf(q)).collect()
}

fn submatrix(m: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Left singular vectors of `svd` placed in rows `rows` of a `d × d`
/// unitary, completed to a full basis, with eigenvalues `s^q` padded by zeros.
fn spectrum_from_left(svd: &XSvd, rows: &[usize], d: usize, q: f64, frame: &CMatrix) -> LogSpectrum {
    let t = svd.singular_values.len();
    let u = svd.u.to_dmatrix();
    let mut cols = CMatrix::zeros(d, t);
    for k in 0..t {
        for (r, &i) in rows.iter().enumerate() {
            cols[(i, k)] = u[(r, k)];
        }
    }
    let basis = complete_basis(&orthonormalize(cols));
    let mut eigenvalues: Vec<LogValue> = svd.singular_values.iter().map(|s| s.powf(q)).collect();
    eigenvalues.resize(d, LogValue::ZERO);
    LogSpectrum { eigenvalues, eigenvectors: frame * basis }
}

/// Modified Gram-Schmidt, twice; removes the rounding drift of extended-range vectors.
fn orthonormalize(mut m: CMatrix) -> CMatrix {
    for _ in 0..2 {
        for j in 0..m.ncols() {
            for i in 0..j {
                let proj = m.column(i).dotc(&m.column(j));
                let ci = m.column(i).into_owned();
                let mut cj = m.column_mut(j);
                cj -= ci * proj;
            }
            let n = m.column(j).norm();
            if n > 0.0 {
                m.column_mut(j).unscale_mut(n);
            }
        }
    }
    m
}

/// Spectrum of `Z_p = (A^{p/2} B^p A^{p/2})^{1/p}`.
///
/// With `M = diag(a^{p/2}) V*W diag(b^{p/2})`, `λ_i = s_i(M)^{2/p}` and the
/// eigenvectors are `V` times the left singular vectors of `M`. Zero
/// eigenvalues of `A` or `B` drop the corresponding rows or columns, so
/// rank deficiency yields exact zeros.
pub fn z_p_spectrum(a: &PsdMatrix, b: &PsdMatrix, p: f64) -> Result<LogSpectrum> {
    check_same_dim(a, b)?;
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!("p must be positive, got {p}")));
    }
    let d = a.dim();
    let u = relative_frame(a.eigenvectors(), b.eigenvectors());
    let ra = positive_indices(a.eigenvalues());
    let rb = positive_indices(b.eigenvalues());
    if ra.is_empty() || rb.is_empty() {
        return Ok(LogSpectrum { eigenvalues: vec![LogValue::ZERO; d], eigenvectors: a.eigenvectors().clone() });
    }
    let core = submatrix(&u, &ra, &rb);
    let m = XMatrix::from_scaled(&core, &pow_scales(a.eigenvalues(), &ra, p / 2.0), &pow_scales(b.eigenvalues(), &rb, p / 2.0));
    let svd = xsvd(&m);
    Ok(spectrum_from_left(&svd, &ra, d, 2.0 / p, a.eigenvectors()))
}

/// Decreasing eigenvalues of `Z_p` in extended range.
pub fn z_p_eigenvalues_numeric(a: &PsdMatrix, b: &PsdMatrix, p: f64) -> Result<Vec<LogValue>> {
    Ok(z_p_spectrum(a, b, p)?.eigenvalues)
}

/// `Z_p` as a PSD matrix.
pub fn z_p_matrix_numeric(a: &PsdMatrix, b: &PsdMatrix, p: f64) -> Result<PsdMatrix> {
    Ok(z_p_spectrum(a, b, p)?.to_psd())
}

/// Spectrum of `(A_1^{p/2} ⋯ A_{m-1}^{p/2} A_m^p A_{m-1}^{p/2} ⋯ A_1^{p/2})^{1/p}`.
///
/// The factor `M = A_1^{p/2} ⋯ A_m^{p/2}` (trailing unitary dropped) is
/// accumulated right to left as `Q · diag(s) · R` with `Q` unitary and `R`
/// carrying no scale. Each step forms `D_l (U_l Q) diag(s)` in extended range and
/// refactors it by pivoted QR, so small singular values are never formed by
/// cancellation of large entries. For `m = 2` this is [`z_p_spectrum`].
pub fn multi_product_spectrum(mats: &[PsdMatrix], p: f64) -> Result<LogSpectrum> {
    if mats.len() < 2 {
        return Err(Error::InvalidArgument(format!("need at least two matrices, got {}", mats.len())));
    }
    for m in &mats[1..] {
        check_same_dim(&mats[0], m)?;
    }
    if mats.len() == 2 {
        return z_p_spectrum(&mats[0], &mats[1], p);
    }
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!("p must be positive, got {p}")));
    }
    let d = mats[0].dim();
    let all: Vec<usize> = (0..d).collect();
    let last = &mats[mats.len() - 1];
    let mut q = CMatrix::identity(d, d);
    let mut s = pow_scales(last.eigenvalues(), &all, p / 2.0);
    let mut r = CMatrix::identity(d, d);
    for l in (0..mats.len() - 1).rev() {
        let core = relative_frame(mats[l].eigenvectors(), mats[l + 1].eigenvectors()) * &q;
        let cm = XMatrix::from_scaled(&core, &pow_scales(mats[l].eigenvalues(), &all, p / 2.0), &s);
        let (qx, rx, cperm) = pivoted_qr(&cm);
        q = orthonormalize(qx.to_dmatrix());
        // R = diag(|r_kk|) N with |N_kj| ≤ 1; fold N Π* into the running factor
        let mut n = CMatrix::zeros(d, d);
        let mut scales = vec![LogValue::ZERO; d];
        for k in 0..d {
            let dk = rx[(k, k)].abs();
            if dk.is_zero() {
                continue;
            }
            scales[k] = dk;
            let inv = dk.recip();
            for jc in k..d {
                n[(k, cperm[jc])] = rx[(k, jc)].mul_real(inv).to_c64();
            }
        }
        r = n * r;
        s = scales;
    }
    let ra = positive_indices(mats[0].eigenvalues());
    if ra.is_empty() {
        return Ok(LogSpectrum { eigenvalues: vec![LogValue::ZERO; d], eigenvectors: mats[0].eigenvectors().clone() });
    }
    let svd = xsvd(&XMatrix::from_scaled(&r, &s, &vec![LogValue::ONE; d]));
    let left = q * svd.u.to_dmatrix();
    let t = svd.singular_values.len();
    let basis = complete_basis(&orthonormalize(left));
    let mut eigenvalues: Vec<LogValue> = svd.singular_values.iter().map(|v| v.powf(2.0 / p)).collect();
    eigenvalues.resize(d, LogValue::ZERO);
    debug_assert_eq!(t, d);
    Ok(LogSpectrum { eigenvalues, eigenvectors: mats[0].eigenvectors() * basis })
}

pub fn multi_product_eigenvalues_numeric(mats: &[PsdMatrix], p: f64) -> Result<Vec<LogValue>> {
    Ok(multi_product_spectrum(mats, p)?.eigenvalues)
}

pub fn multi_product_numeric(mats: &[PsdMatrix], p: f64) -> Result<PsdMatrix> {
    Ok(multi_product_spectrum(mats, p)?.to_psd())
}

/// Orthonormal basis (in the eigenbasis of `A`) of `range A ∩ range B`,
/// or `None` when it is the whole space.
fn support_intersection(a: &PsdMatrix, b: &PsdMatrix, u: &CMatrix) -> Option<CMatrix> {
    let d = a.dim();
    let ra = positive_indices(a.eigenvalues());
    let rb = positive_indices(b.eigenvalues());
    match (ra.len() == d, rb.len() == d) {
        (true, true) => None,
        (true, false) => Some(submatrix(u, &(0..d).collect::<Vec<_>>(), &rb)),
        (false, true) => {
            let mut j = CMatrix::zeros(d, ra.len());
            for (k, &i) in ra.iter().enumerate() {
                j[(i, k)] = c(1.0);
            }
            Some(j)
        }
        (false, false) => {
            let ub = submatrix(u, &(0..d).collect::<Vec<_>>(), &rb);
            let mut pa = CMatrix::zeros(d, d);
            for &i in &ra {
                pa[(i, i)] = c(1.0);
            }
            let sum = super::hermitian_part(&(pa + &ub * ub.adjoint()));
            let eig = sum.symmetric_eigen();
            let cols: Vec<_> =
                (0..d).filter(|&k| eig.eigenvalues[k] > 2.0 - 1e-8).map(|k| eig.eigenvectors.column(k).into_owned()).collect();
            if cols.is_empty() {
                Some(CMatrix::zeros(d, 0))
            } else {
                Some(CMatrix::from_columns(&cols))
            }
        }
    }
}

/// Spectrum of `A^p # B^p` in extended range.
///
/// With `S = range A ∩ range B` and `J` an orthonormal basis of `S`,
/// `A^p # B^p = J ((J* A^{-p} J) # (J* B^{-p} J))^{-1} J*`, where the inverse
/// powers are taken on the supports. This is the limit of the
/// ε-regularized means, evaluated without any ε. Writing
/// `J* A^{-p} J = G G*` and `K = G^{-1} (J* B^{-p/2})`, the mean inside is
/// `G (K K*)^{1/2} G*`, whose inverse is `F F*` with `F = G^{-*} L_K S_K^{-1/2}`.
pub fn geometric_mean_power(a: &PsdMatrix, b: &PsdMatrix, p: f64) -> Result<LogSpectrum> {
    check_same_dim(a, b)?;
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!("p must be positive, got {p}")));
    }
    let d = a.dim();
    let u = relative_frame(a.eigenvectors(), b.eigenvectors());
    let ra = positive_indices(a.eigenvalues());
    let rb = positive_indices(b.eigenvalues());
    let j = support_intersection(a, b, &u);
    let s = j.as_ref().map_or(d, |j| j.ncols());
    if s == 0 {
        return Ok(LogSpectrum { eigenvalues: vec![LogValue::ZERO; d], eigenvectors: a.eigenvectors().clone() });
    }
    let inv_a = pow_scales(a.eigenvalues(), &ra, -p / 2.0);
    let inv_b = pow_scales(b.eigenvalues(), &rb, -p / 2.0);

    // G with G G* = J* A^{-p} J, stored as (left unitary, diagonal scale)
    let (ga_left, ga_scale): (CMatrix, Vec<LogValue>) = match &j {
        None => (CMatrix::identity(d, d), inv_a.clone()),
        Some(j) => {
            let rows: Vec<usize> = (0..s).collect();
            let ha = submatrix(&j.adjoint(), &rows, &ra);
            let svd = xsvd(&XMatrix::from_scaled(&ha, &vec![LogValue::ONE; s], &inv_a));
            (orthonormalize(svd.u.to_dmatrix()), svd.singular_values)
        }
    };
    // H_b = J* U_{:, rb} diag(b^{-p/2})
    let ub = submatrix(&u, &(0..d).collect::<Vec<_>>(), &rb);
    let hb_core = match &j {
        None => ub,
        Some(j) => j.adjoint() * ub,
    };
    let core = ga_left.adjoint() * hb_core;
    let inv_ga: Vec<LogValue> = ga_scale.iter().map(|v| v.recip()).collect();
    let k = XMatrix::from_scaled(&core, &inv_ga, &inv_b);
    let ksvd = xsvd(&k);
    // F = L_a diag(1/s_a) L_K diag(s_K^{-1/2})
    let mut f = ksvd.u.clone();
    f.scale_rows(&inv_ga);
    let sk: Vec<LogValue> = ksvd.singular_values.iter().map(|v| v.sqrt().recip()).collect();
    f.scale_columns(&sk);
    let f = XMatrix::from_dmatrix(&ga_left).matmul(&f);
    let fsvd = xsvd(&f);
    let frame = match &j {
        None => a.eigenvectors().clone(),
        Some(j) => a.eigenvectors() * j,
    };
    let t = fsvd.singular_values.len();
    let lf = orthonormalize(frame * fsvd.u.to_dmatrix());
    let basis = complete_basis(&lf);
    let mut eigenvalues: Vec<LogValue> = fsvd.singular_values.iter().map(|v| *v * *v).collect();
    eigenvalues.resize(d, LogValue::ZERO);
    debug_assert_eq!(t, s);
    Ok(LogSpectrum { eigenvalues, eigenvectors: basis })
}

/// Spectrum of `G_p = (A^p # B^p)^{2/p}`.
pub fn g_p_spectrum(a: &PsdMatrix, b: &PsdMatrix, p: f64) -> Result<LogSpectrum> {
    Ok(geometric_mean_power(a, b, p)?.powf(2.0 / p))
}

/// `G_p` as a PSD matrix.
pub fn g_p_matrix_numeric(a: &PsdMatrix, b: &PsdMatrix, p: f64) -> Result<PsdMatrix> {
    Ok(g_p_spectrum(a, b, p)?.to_psd())
}


#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rot(theta: f64) -> CMatrix {
        let (s, co) = theta.sin_cos();
        DMatrix::from_row_slice(2, 2, &[c(co), c(-s), c(s), c(co)])
    }

    fn logs(v: &[LogValue]) -> Vec<f64> {
        v.iter().map(|x| x.logmag()).collect()
    }

    #[test]
    fn commuting_diagonals_multiply() {
        let a = PsdMatrix::diagonal(&[2.0, 3.0]).unwrap();
        let b = PsdMatrix::diagonal(&[5.0, 7.0]).unwrap();
        let ev = z_p_eigenvalues_numeric(&a, &b, 10.0).unwrap();
        assert!((ev[0].to_real() - 21.0).abs() < 1e-12);
        assert!((ev[1].to_real() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn rotated_pair_at_large_p() {
        let a = PsdMatrix::diagonal(&[4.0, 1.0]).unwrap();
        let b = PsdMatrix::from_real_rows(2, &[5.0, 4.0, 4.0, 5.0]).unwrap();
        let ev = logs(&z_p_eigenvalues_numeric(&a, &b, 4096.0).unwrap());
        assert!((ev[0] - 36f64.ln()).abs() < 1e-3);
        assert!(ev[1].abs() < 1e-3);
        let z = z_p_matrix_numeric(&a, &b, 4096.0).unwrap().to_matrix();
        let target = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(36.0), c(1.0)]));
        assert!((z - target).norm() < 1e-3 * 36.0);
    }

    #[test]
    fn permutation_is_exact() {
        let a = PsdMatrix::diagonal(&[4.0, 1.0]).unwrap();
        let w = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let b = PsdMatrix::from_spectral(vec![9.0, 1.0], w).unwrap();
        for p in [0.5, 1.0, 7.0, 4096.0] {
            let z = z_p_matrix_numeric(&a, &b, p).unwrap().to_matrix();
            let target = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(4.0), c(9.0)]));
            assert!((z - target).norm() < 1e-12 * 9.0, "p = {p}");
        }
    }

    #[test]
    fn rank_one_projections() {
        let a = PsdMatrix::diagonal(&[1.0, 0.0]).unwrap();
        let b = PsdMatrix::from_spectral(vec![1.0, 0.0], rot(0.4)).unwrap();
        let ev = z_p_eigenvalues_numeric(&a, &b, 3.0).unwrap();
        assert!(ev[0].to_real() > 0.0 && ev[0].to_real() < 1.0);
        assert!(ev[1].is_zero());
        let g = g_p_matrix_numeric(&a, &b, 5.0).unwrap();
        assert!(g.to_matrix().norm() < 1e-14);
    }

    #[test]
    fn determinant_is_preserved() {
        let a = PsdMatrix::from_spectral(vec![30.0, 2.0, 0.01], crate_unitary3()).unwrap();
        let b = PsdMatrix::diagonal(&[50.0, 0.5, 0.02]).unwrap();
        let detab = (30.0f64 * 2.0 * 0.01 * 50.0 * 0.5 * 0.02).ln();
        for p in [1.0, 64.0, 4096.0] {
            let z: f64 = logs(&z_p_eigenvalues_numeric(&a, &b, p).unwrap()).iter().sum();
            let g: f64 = g_p_spectrum(&a, &b, p).unwrap().log_eigenvalues().iter().sum();
            assert!((z - detab).abs() < 1e-9 * detab.abs().max(1.0), "Z_p det at p = {p}: {z} vs {detab}");
            assert!((g - detab).abs() < 1e-9 * detab.abs().max(1.0), "G_p det at p = {p}: {g} vs {detab}");
        }
    }

    fn crate_unitary3() -> CMatrix {
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[c64(0.3, 0.1), c64(-1.0, 0.2), c64(0.5, 0.0), c64(0.8, -0.4), c64(0.2, 0.0), c64(-0.1, 0.6), c64(0.0, 0.3), c64(0.7, 0.7), c64(1.0, 0.0)],
        );
        m.qr().q()
    }

    #[test]
    fn geometric_mean_of_equal_matrices() {
        let a = PsdMatrix::from_spectral(vec![3.0, 1.5, 0.2], crate_unitary3()).unwrap();
        for p in [1.0, 10.0, 1000.0] {
            let g = g_p_matrix_numeric(&a, &a, p).unwrap().to_matrix();
            let a2 = a.to_matrix() * a.to_matrix();
            let e = (g - &a2).norm(); assert!(e < 1e-10 * a2.norm(), "p = {p} err {e}");
        }
    }

    #[test]
    fn geometric_mean_riccati() {
        let a = PsdMatrix::from_spectral(vec![3.0, 1.5, 0.2], crate_unitary3()).unwrap();
        let b = PsdMatrix::diagonal(&[2.0, 0.7, 0.4]).unwrap();
        let g = g_p_spectrum(&a, &b, 1.0).unwrap().powf(0.5).to_psd().to_matrix();
        let ainv = a.pow(-1.0).to_matrix();
        let res = &g * ainv * &g - b.to_matrix();
        assert!(res.norm() < 1e-10);
    }

    #[test]
    fn two_by_two_unit_determinant_formula() {
        let a = PsdMatrix::from_spectral(vec![2.0, 0.5], rot(0.3)).unwrap();
        let b = PsdMatrix::from_spectral(vec![4.0, 0.25], rot(1.1)).unwrap();
        for p in [1.0, 3.0] {
            let ap = a.pow(p).to_matrix();
            let bp = b.pow(p).to_matrix();
            let sum = &ap + &bp;
            let det = (sum[(0, 0)] * sum[(1, 1)] - sum[(0, 1)] * sum[(1, 0)]).re;
            let mean = PsdMatrix::from_matrix(sum.map(|z| z / det.sqrt())).unwrap();
            let expected = mean.pow(2.0 / p).to_matrix();
            let got = g_p_matrix_numeric(&a, &b, p).unwrap().to_matrix();
            assert!((got - expected).norm() < 1e-12 * 16.0, "p = {p}");
        }
    }
}
