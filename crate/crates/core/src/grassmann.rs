//! Gap and wedge metrics between `k`-dimensional subspaces, and an empirical
//! probe comparing them.
//!
//! For unit vectors `‖x − e^{iθ}y‖² = 2 − 2 Re(e^{−iθ}⟨x, y⟩)`, which is smallest
//! at `θ = arg⟨x, y⟩`. With `⟨∧U, ∧V⟩ = det(U*V)` the wedge distance is therefore
//! `sqrt(2 − 2|det(U*V)|)`, evaluated through the principal angles so that it
//! stays accurate near zero.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matnum::{op_norm, CMatrix};
use crate::oracle::{complex_gaussian, rng};

/// `k` orthonormal columns in `C^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    columns: CMatrix,
}

impl Frame {
    pub fn new(columns: CMatrix) -> Result<Self> {
        let k = columns.ncols();
        let defect = op_norm(&(columns.adjoint() * &columns - CMatrix::identity(k, k)));
        if defect > 1e-10 {
            return Err(Error::InvalidArgument(format!("frame columns are not orthonormal (defect {defect:.3e})")));
        }
        Ok(Frame { columns })
    }

    /// Orthonormalize a full-column-rank basis.
    pub fn from_basis(basis: CMatrix) -> Result<Self> {
        if basis.ncols() > basis.nrows() {
            return Err(Error::ShapeMismatch { left: (basis.nrows(), basis.ncols()), right: (basis.nrows(), basis.nrows()) });
        }
        let (q, r) = basis.qr().unpack();
        let k = r.nrows();
        let smax = (0..k).map(|i| r[(i, i)].norm()).fold(0.0, f64::max);
        if (0..k).any(|i| r[(i, i)].norm() <= 1e-12 * smax) || smax == 0.0 {
            return Err(Error::InvalidArgument("basis is rank deficient".into()));
        }
        Frame::new(q)
    }

    /// Uniformly distributed `k`-frame from a seeded generator.
    pub fn random<R: Rng>(rng: &mut R, d: usize, k: usize) -> Self {
        let (q, _) = complex_gaussian(rng, d, k).qr().unpack();
        Frame { columns: q }
    }

    pub fn d(&self) -> usize {
        self.columns.nrows()
    }

    pub fn k(&self) -> usize {
        self.columns.ncols()
    }

    pub fn columns(&self) -> &CMatrix {
        &self.columns
    }

    pub fn projection(&self) -> CMatrix {
        &self.columns * self.columns.adjoint()
    }
}

fn projection_defect(p: &CMatrix) -> f64 {
    op_norm(&(p * p - p)).max(op_norm(&(p - p.adjoint())))
}

/// `‖P − Q‖` in operator norm.
pub fn gap_distance(p: &CMatrix, q: &CMatrix) -> Result<f64> {
    if p.shape() != q.shape() {
        return Err(Error::ShapeMismatch { left: p.shape(), right: q.shape() });
    }
    for m in [p, q] {
        let defect = projection_defect(m);
        if defect > 1e-10 {
            return Err(Error::NotProjection { defect });
        }
    }
    let (rp, rq) = (p.trace().re.round() as usize, q.trace().re.round() as usize);
    if rp != rq {
        return Err(Error::RankMismatch { left: rp, right: rq });
    }
    Ok(op_norm(&(p - q)).clamp(0.0, 1.0))
}

/// `inf_θ ‖u_1∧⋯∧u_k − e^{iθ} v_1∧⋯∧v_k‖`.
pub fn wedge_distance(u: &Frame, v: &Frame) -> Result<f64> {
    if (u.d(), u.k()) != (v.d(), v.k()) {
        return Err(Error::ShapeMismatch { left: (u.d(), u.k()), right: (v.d(), v.k()) });
    }
    // |det(U*V)| = ∏ cos θ_i; the sines come from V − U U*V without cancellation
    let residual = &v.columns - &u.columns * (u.columns.adjoint() * &v.columns);
    let sines = residual.svd(false, false).singular_values;
    let log_cos: f64 = sines.iter().map(|s| 0.5 * (-(s.min(1.0) * s.min(1.0))).ln_1p()).sum();
    Ok((-2.0 * log_cos.exp_m1()).max(0.0).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeReport {
    /// `wedge / gap` per sample with nonzero gap, in sample order.
    pub ratios: Vec<f64>,
    /// Smallest observed ratio.
    pub alpha_hat: f64,
    /// Largest observed ratio.
    pub beta_hat: f64,
    /// Every sample had both metrics zero or both nonzero.
    pub zero_consistent: bool,
}

/// Observed range of `wedge / gap` over random pairs of `k`-frames.
/// Sample `i` draws from stream `i` of `seed`, so results do not depend on threading.
pub fn metric_comparability_probe(samples: usize, d: usize, k: usize, seed: u64) -> Result<ProbeReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if k == 0 || k > d {
        return Err(Error::BadCardinality { d, k });
    }
    let pairs: Vec<(f64, f64)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng(seed, i);
            let u = Frame::random(&mut r, d, k);
            let v = Frame::random(&mut r, d, k);
            let gap = gap_distance(&u.projection(), &v.projection())?;
            Ok((gap, wedge_distance(&u, &v)?))
        })
        .collect::<Result<_>>()?;
    let zero_consistent = pairs.iter().all(|&(g, w)| (g < 1e-12) == (w < 1e-9));
    let ratios: Vec<f64> = pairs.iter().filter(|(g, _)| *g >= 1e-12).map(|(g, w)| w / g).collect();
    let alpha_hat = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let beta_hat = ratios.iter().copied().fold(0.0, f64::max);
    Ok(ProbeReport { ratios, alpha_hat, beta_hat, zero_consistent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::haar_unitary;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn line(theta: f64) -> Frame {
        Frame::new(CMatrix::from_column_slice(2, 1, &[Complex64::new(theta.cos(), 0.0), Complex64::new(theta.sin(), 0.0)])).unwrap()
    }

    #[test]
    fn examples() {
        let l0 = line(0.0);
        let l1 = line(std::f64::consts::FRAC_PI_2);
        let l6 = line(std::f64::consts::FRAC_PI_6);
        assert_eq!(gap_distance(&l0.projection(), &l0.projection()).unwrap(), 0.0);
        assert!((gap_distance(&l0.projection(), &l1.projection()).unwrap() - 1.0).abs() < 1e-15);
        assert!((gap_distance(&l0.projection(), &l6.projection()).unwrap() - 0.5).abs() < 1e-15);
        assert!(wedge_distance(&l0, &l0).unwrap() < 1e-15);
        assert!((wedge_distance(&l0, &l1).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let expect = (2.0 - 2.0 * std::f64::consts::FRAC_PI_6.cos()).sqrt();
        assert!((wedge_distance(&l0, &l6).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let l0 = line(0.0);
        let id = CMatrix::identity(2, 2);
        assert!(matches!(gap_distance(&l0.projection(), &id), Err(Error::RankMismatch { left: 1, right: 2 })));
        let bad = id.map(|z| z * 0.5);
        assert!(matches!(gap_distance(&bad, &bad), Err(Error::NotProjection { .. })));
        let plane = Frame::new(CMatrix::identity(2, 2)).unwrap();
        assert!(matches!(wedge_distance(&l0, &plane), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn probe() {
        let r = metric_comparability_probe(1000, 4, 2, 7).unwrap();
        assert_eq!(r.ratios.len(), 1000);
        assert!(r.ratios.iter().all(|x| x.is_finite() && *x > 0.0));
        assert!(r.zero_consistent && r.alpha_hat > 0.0);
        assert_eq!(r, metric_comparability_probe(1000, 4, 2, 7).unwrap());
    }

    #[test]
    fn near_identical_frames() {
        let mut g = rng(5, 0);
        let u = Frame::random(&mut g, 4, 2);
        assert!(gap_distance(&u.projection(), &u.projection()).unwrap() < 1e-12);
        assert!(wedge_distance(&u, &u).unwrap() < 1e-12);
        let noise = complex_gaussian(&mut g, 4, 2).map(|z| z * 1e-9);
        let v = Frame::from_basis(u.columns() + noise).unwrap();
        assert!(gap_distance(&u.projection(), &v.projection()).unwrap() < 1e-6);
        assert!(wedge_distance(&u, &v).unwrap() < 1e-6);
    }

    proptest! {
        #[test]
        fn frame_invariance(seed in 0u64..1000) {
            let mut g = rng(seed, 0);
            let u = Frame::random(&mut g, 5, 3);
            let v = Frame::random(&mut g, 5, 3);
            let rot = haar_unitary(&mut g, 3);
            let ur = Frame::new(u.columns() * rot).unwrap();
            prop_assert!((wedge_distance(&u, &v).unwrap() - wedge_distance(&ur, &v).unwrap()).abs() < 1e-10);
            prop_assert!((gap_distance(&u.projection(), &v.projection()).unwrap()
                - gap_distance(&ur.projection(), &v.projection()).unwrap()).abs() < 1e-10);
        }

        #[test]
        fn ranges(seed in 0u64..1000) {
            let mut g = rng(seed, 1);
            let u = Frame::random(&mut g, 4, 2);
            let v = Frame::random(&mut g, 4, 2);
            let gap = gap_distance(&u.projection(), &v.projection()).unwrap();
            let w = wedge_distance(&u, &v).unwrap();
            prop_assert!((0.0..=1.0).contains(&gap));
            prop_assert!((0.0..=2f64.sqrt()).contains(&w));
        }
    }
}
