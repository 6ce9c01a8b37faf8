//! Kubo–Ando means, spectral-order sup/inf, the geometric-mean power limits
//! and the `p → 0` Lie–Trotter limits.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ext::XMatrix;
use crate::logval::LogValue;
use crate::matnum::graded::xsvd;
use crate::matnum::{
    g_p_spectrum, geometric_mean_power, hermitian_part, min_eigenvalue, op_norm, relative_frame, CMatrix, HermitianMatrix,
    PsdMatrix,
};
use crate::oracle::{extrapolate, ConvergenceTrace};

/// Finite-difference step for `α = f'(1)` of a custom mean.
pub const ALPHA_STEP: f64 = 1e-6;
/// Regularization levels for means of singular inputs.
pub const EPSILONS: [f64; 3] = [1e-6, 1e-8, 1e-10];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeanKind {
    Arithmetic,
    Harmonic,
    Geometric,
    Custom,
}

/// A Kubo–Ando mean given by its representing function.
#[derive(Clone)]
pub struct OperatorMeanSpec {
    pub name: String,
    pub kind: MeanKind,
    /// `f'(1)`.
    pub alpha: f64,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for OperatorMeanSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorMeanSpec").field("name", &self.name).field("kind", &self.kind).field("alpha", &self.alpha).finish()
    }
}

fn check_weight(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("weight must lie in [0, 1], got {alpha}")));
    }
    Ok(())
}

impl OperatorMeanSpec {
    /// `∇_α`, `f(x) = (1 − α) + αx`.
    pub fn arithmetic(alpha: f64) -> Result<Self> {
        check_weight(alpha)?;
        Ok(OperatorMeanSpec {
            name: format!("arithmetic({alpha})"),
            kind: MeanKind::Arithmetic,
            alpha,
            f: Arc::new(move |x| (1.0 - alpha) + alpha * x),
        })
    }

    /// `!_α`, `f(x) = x / ((1 − α)x + α)`.
    pub fn harmonic(alpha: f64) -> Result<Self> {
        check_weight(alpha)?;
        Ok(OperatorMeanSpec {
            name: format!("harmonic({alpha})"),
            kind: MeanKind::Harmonic,
            alpha,
            f: Arc::new(move |x| x / ((1.0 - alpha) * x + alpha)),
        })
    }

    /// `#`, `f(x) = x^{1/2}`.
    pub fn geometric() -> Self {
        OperatorMeanSpec { name: "geometric".into(), kind: MeanKind::Geometric, alpha: 0.5, f: Arc::new(f64::sqrt) }
    }

    /// User-supplied `f`; operator monotonicity is the caller's responsibility.
    pub fn custom(name: &str, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        let one = f(1.0);
        if (one - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("f(1) = {one}, expected 1")));
        }
        let alpha = (f(1.0 + ALPHA_STEP) - f(1.0 - ALPHA_STEP)) / (2.0 * ALPHA_STEP);
        // the central difference carries ~eps/h rounding, so allow that much
        let slack = 1e-12 + 4.0 * f64::EPSILON / ALPHA_STEP;
        if !(alpha >= -slack && alpha <= 1.0 + slack) {
            return Err(Error::InvalidArgument(format!("f'(1) = {alpha} is outside [0, 1]")));
        }
        Ok(OperatorMeanSpec { name: name.into(), kind: MeanKind::Custom, alpha: alpha.clamp(0.0, 1.0), f: Arc::new(f) })
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

fn check_pair(a: &PsdMatrix, b: &PsdMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(())
}

fn psd(m: &CMatrix) -> Result<PsdMatrix> {
    PsdMatrix::from_matrix(hermitian_part(m))
}

/// `A^{1/2} f(A^{-1/2} B A^{-1/2}) A^{1/2}` for definite `A`.
fn mean_definite(a: &PsdMatrix, b: &PsdMatrix, f: &(dyn Fn(f64) -> f64 + Send + Sync)) -> Result<CMatrix> {
    let half = a.map_spectrum(f64::sqrt);
    let inv_half = a.map_spectrum(|v| 1.0 / v.sqrt());
    let inner = psd(&(&inv_half * b.to_matrix() * &inv_half))?;
    let fi = inner.map_spectrum(f);
    Ok(&half * fi * &half)
}

/// `X (X + Y)^+ Y` for `X = A/(1−α)`, `Y = B/α`, which is `A !_α B` for all PSD inputs.
fn harmonic_parallel_sum(a: &PsdMatrix, b: &PsdMatrix, alpha: f64) -> Result<CMatrix> {
    let x = a.to_matrix() * Complex64::new(1.0 / (1.0 - alpha), 0.0);
    let y = b.to_matrix() * Complex64::new(1.0 / alpha, 0.0);
    let sum = psd(&(&x + &y))?;
    let cut = 1e-12 * sum.max_eigenvalue();
    let pinv = sum.map_spectrum(|v| if v > cut { 1.0 / v } else { 0.0 });
    Ok(hermitian_part(&(x * pinv * y)))
}

/// `A σ B`.
///
/// Arithmetic, harmonic and geometric means use closed forms that need no
/// regularization; custom means are evaluated at `A + εI, B + εI` for each ε in [`EPSILONS`] and
/// accepted when the last two differ by less than `1e-6` times the leading
/// eigenvalue.
pub fn operator_mean(a: &PsdMatrix, b: &PsdMatrix, sigma: &OperatorMeanSpec) -> Result<PsdMatrix> {
    check_pair(a, b)?;
    match sigma.kind {
        MeanKind::Arithmetic => {
            let al = sigma.alpha;
            psd(&(a.to_matrix() * Complex64::new(1.0 - al, 0.0) + b.to_matrix() * Complex64::new(al, 0.0)))
        }
        MeanKind::Geometric => Ok(geometric_mean_power(a, b, 1.0)?.to_psd()),
        _ if sigma.alpha == 0.0 => Ok(a.clone()),
        _ if sigma.alpha == 1.0 && sigma.kind == MeanKind::Harmonic => Ok(b.clone()),
        MeanKind::Harmonic => psd(&harmonic_parallel_sum(a, b, sigma.alpha)?),
        _ if a.is_definite() => psd(&mean_definite(a, b, sigma.f.as_ref())?),
        _ => {
            let results: Vec<CMatrix> =
                EPSILONS.iter().map(|&e| mean_definite(&a.shift(e), &b.shift(e), sigma.f.as_ref())).collect::<Result<_>>()?;
            let last = &results[results.len() - 1];
            let lead = op_norm(last).max(f64::MIN_POSITIVE);
            let increment = op_norm(&(last - &results[results.len() - 2]));
            if increment >= 1e-6 * lead {
                return Err(Error::RegularizationDiverged { increment });
            }
            psd(last)
        }
    }
}

/// `(A^p σ B^p)^{q/p}`; `q = 1` is the usual normalization.
pub fn mean_power(a: &PsdMatrix, b: &PsdMatrix, sigma: &OperatorMeanSpec, p: f64, q: f64) -> Result<PsdMatrix> {
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!("p must be positive, got {p}")));
    }
    if sigma.kind == MeanKind::Geometric {
        return Ok(geometric_mean_power(a, b, p)?.powf(q / p).to_psd());
    }
    Ok(operator_mean(&a.pow(p), &b.pow(p), sigma)?.pow(q / p))
}

/// Orthogonal projection with `P² = P = P*`.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportProjection {
    pub d: usize,
    pub projection: CMatrix,
}

impl SupportProjection {
    pub fn new(projection: CMatrix) -> Result<Self> {
        let d = projection.nrows();
        let defect = op_norm(&(&projection * &projection - &projection)).max(op_norm(&(&projection - projection.adjoint())));
        if defect > 1e-10 {
            return Err(Error::NotProjection { defect });
        }
        Ok(SupportProjection { d, projection })
    }

    pub fn rank(&self) -> usize {
        self.projection.trace().re.round().max(0.0) as usize
    }

    /// Orthonormal basis of the range.
    pub fn basis(&self) -> CMatrix {
        let eig = hermitian_part(&self.projection).symmetric_eigen();
        let cols: Vec<_> = (0..self.d).filter(|&k| eig.eigenvalues[k] > 0.5).map(|k| eig.eigenvectors.column(k).into_owned()).collect();
        if cols.is_empty() {
            CMatrix::zeros(self.d, 0)
        } else {
            CMatrix::from_columns(&cols)
        }
    }
}

/// `P_0 = A^0 ∧ B^0`: eigenvectors of `A^0 + B^0` with eigenvalue 2.
pub fn support_meet(a: &PsdMatrix, b: &PsdMatrix) -> Result<SupportProjection> {
    check_pair(a, b)?;
    let d = a.dim();
    let eig = hermitian_part(&(a.support() + b.support())).symmetric_eigen();
    let mut p = CMatrix::zeros(d, d);
    for k in 0..d {
        if eig.eigenvalues[k] > 2.0 - 1e-8 {
            let v = eig.eigenvectors.column(k);
            p += v * v.adjoint();
        }
    }
    SupportProjection::new(hermitian_part(&p))
}

/// `(log A) A^0`: log on the support, zero on the kernel.
pub fn generalized_log(a: &PsdMatrix) -> HermitianMatrix {
    HermitianMatrix::new(hermitian_part(&a.map_spectrum(|v| if v > 0.0 { v.ln() } else { 0.0 })))
        .expect("functional calculus of a Hermitian matrix is Hermitian")
}

/// `P_0 exp(H) P_0` with `H` compressed onto the range of `P_0`.
fn exp_on(p0: &SupportProjection, h: &CMatrix) -> Result<PsdMatrix> {
    let y = p0.basis();
    let d = p0.d;
    if y.ncols() == 0 {
        return PsdMatrix::diagonal(&vec![0.0; d]);
    }
    let compressed = psd_exp(&(y.adjoint() * h * &y));
    psd(&(&y * compressed * y.adjoint()))
}

fn psd_exp(h: &CMatrix) -> CMatrix {
    let eig = hermitian_part(h).symmetric_eigen();
    let n = h.nrows();
    let v = &eig.eigenvectors;
    let scaled = CMatrix::from_fn(n, n, |i, j| v[(i, j)] * eig.eigenvalues[j].exp());
    scaled * v.adjoint()
}

/// `lim_{p→0} (A^{p/2} B^p A^{p/2})^{1/p} = P_0 exp(log A ∔ log B)`.
pub fn lie_trotter_limit(a: &PsdMatrix, b: &PsdMatrix) -> Result<PsdMatrix> {
    check_pair(a, b)?;
    let p0 = support_meet(a, b)?;
    let h = generalized_log(a).into_matrix() + generalized_log(b).into_matrix();
    exp_on(&p0, &h)
}

/// Exponent normalization of `(A^p σ B^p)^{q/p}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// `q = 1`.
    OneOverP,
    /// `q = 2`, natural for the geometric mean.
    TwoOverP,
}

impl Normalization {
    pub fn exponent(self) -> f64 {
        match self {
            Normalization::OneOverP => 1.0,
            Normalization::TwoOverP => 2.0,
        }
    }
}

/// `lim_{p→0} (A^p σ B^p)^{q/p} = P_0 exp(q((1 − α) log A ∔ α log B))`.
///
/// For `α = 0` the mean is `A` itself (and `B` for `α = 1`), so the limit is
/// `A^q` (`B^q`).
pub fn weighted_lt_limit(a: &PsdMatrix, b: &PsdMatrix, sigma: &OperatorMeanSpec, norm: Normalization) -> Result<PsdMatrix> {
    check_pair(a, b)?;
    let q = norm.exponent();
    if sigma.alpha == 0.0 {
        return Ok(a.pow(q));
    }
    if sigma.alpha == 1.0 {
        return Ok(b.pow(q));
    }
    let p0 = support_meet(a, b)?;
    let al = sigma.alpha;
    let h = generalized_log(a).into_matrix() * Complex64::new(q * (1.0 - al), 0.0)
        + generalized_log(b).into_matrix() * Complex64::new(q * al, 0.0);
    exp_on(&p0, &h)
}

/// Which side of the spectral order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectralSide {
    Sup,
    Inf,
}

/// Finite-`p` values, extrapolated limit and Cauchy increments of
/// `(A^p + B^p)^{1/p}` (sup) or `(A^{-p} + B^{-p})^{-1/p}` (inf).
#[derive(Clone, Debug)]
pub struct SpectralLimit {
    pub limit: PsdMatrix,
    pub schedule: Vec<f64>,
    pub values: Vec<PsdMatrix>,
    /// `‖R_n − R_{n−1}‖ / ‖R_n‖` for successive extrapolants.
    pub increments: Vec<f64>,
}

/// `(A^p + B^p)^{1/p}` in extended range: eigenvalues are `s^{2/p}` of
/// `[V diag(a^{p/2}), W diag(b^{p/2})]`.
pub fn power_sum_root(a: &PsdMatrix, b: &PsdMatrix, p: f64) -> Result<PsdMatrix> {
    check_pair(a, b)?;
    let d = a.dim();
    let mut core = CMatrix::zeros(d, 2 * d);
    core.columns_mut(0, d).copy_from(a.eigenvectors());
    core.columns_mut(d, d).copy_from(b.eigenvectors());
    let scales: Vec<LogValue> =
        a.eigenvalues().iter().chain(b.eigenvalues()).map(|&v| LogValue::from_real(v).powf(p / 2.0)).collect();
    let svd = xsvd(&XMatrix::from_scaled(&core, &vec![LogValue::ONE; d], &scales));
    let vals: Vec<f64> = svd.singular_values.iter().map(|s| s.powf(2.0 / p).to_real()).collect();
    PsdMatrix::from_spectral(vals, orthonormal(svd.u.to_dmatrix()))
}

fn orthonormal(m: CMatrix) -> CMatrix {
    let (q, r) = m.qr().unpack();
    let d = q.ncols();
    let mut q = q;
    for j in 0..d {
        let rjj = r[(j, j)];
        if rjj.norm() > 0.0 {
            let mut col = q.column_mut(j);
            col *= rjj / rjj.norm();
        }
    }
    q
}

fn spectral_point(a: &PsdMatrix, b: &PsdMatrix, p: f64, side: SpectralSide) -> Result<PsdMatrix> {
    match side {
        SpectralSide::Sup => power_sum_root(a, b, p),
        SpectralSide::Inf => {
            let inv = |m: &PsdMatrix| PsdMatrix::from_spectral(m.eigenvalues().iter().map(|v| 1.0 / v).collect(), m.eigenvectors().clone());
            let s = power_sum_root(&inv(a)?, &inv(b)?, p)?;
            inv(&s)
        }
    }
}

fn spectral_limit_definite(a: &PsdMatrix, b: &PsdMatrix, schedule: &[f64], side: SpectralSide) -> Result<SpectralLimit> {
    if schedule.len() < 3 || schedule.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("schedule needs at least three increasing points".into()));
    }
    let values: Vec<PsdMatrix> = schedule.par_iter().map(|&p| spectral_point(a, b, p, side)).collect::<Result<_>>()?;
    let mats: Vec<CMatrix> = values.iter().map(|m| m.to_matrix()).collect();
    // first-order Richardson for doubling schedules: removes the 1/p term
    let rich: Vec<CMatrix> = (1..mats.len())
        .map(|i| {
            let t = schedule[i] / schedule[i - 1];
            (&mats[i] * Complex64::new(t, 0.0) - &mats[i - 1]) / Complex64::new(t - 1.0, 0.0)
        })
        .collect();
    let increments: Vec<f64> =
        (1..rich.len()).map(|i| op_norm(&(&rich[i] - &rich[i - 1])) / op_norm(&rich[i]).max(f64::MIN_POSITIVE)).collect();
    let last = *increments.last().unwrap();
    if !(last < 1e-6) {
        return Err(Error::NotConverged { increment: last });
    }
    let limit = psd(rich.last().unwrap())?;
    Ok(SpectralLimit { limit, schedule: schedule.to_vec(), values, increments })
}

fn spectral_limit(a: &PsdMatrix, b: &PsdMatrix, schedule: &[f64], side: SpectralSide) -> Result<SpectralLimit> {
    check_pair(a, b)?;
    if side == SpectralSide::Sup || (a.is_definite() && b.is_definite()) {
        return spectral_limit_definite(a, b, schedule, side);
    }
    let runs: Vec<SpectralLimit> =
        EPSILONS.iter().map(|&e| spectral_limit_definite(&a.shift(e), &b.shift(e), schedule, side)).collect::<Result<_>>()?;
    let n = runs.len();
    let last = runs[n - 1].limit.to_matrix();
    let increment = op_norm(&(&last - runs[n - 2].limit.to_matrix()));
    if increment >= 1e-6 * op_norm(&last).max(f64::MIN_POSITIVE) {
        return Err(Error::RegularizationDiverged { increment });
    }
    Ok(runs.into_iter().last().unwrap())
}

/// `A ∨ B = lim (A^p + B^p)^{1/p}`.
pub fn spectral_sup(a: &PsdMatrix, b: &PsdMatrix, schedule: &[f64]) -> Result<SpectralLimit> {
    spectral_limit(a, b, schedule, SpectralSide::Sup)
}

/// `A ∧ B = lim (A^p ! B^p)^{1/p}`; singular inputs go through the ε-sequence.
pub fn spectral_inf(a: &PsdMatrix, b: &PsdMatrix, schedule: &[f64]) -> Result<SpectralLimit> {
    spectral_limit(a, b, schedule, SpectralSide::Inf)
}

/// Which case of the 2×2 limit applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum G2Branch {
    /// `V*W` diagonal.
    Diagonal,
    /// `V*W` antidiagonal.
    Antidiagonal,
    /// Both definite, all entries of `V*W` nonzero.
    Definite,
    /// Both rank one and not commuting.
    RankOnePair,
    /// One input rank one, the other definite.
    RankOneDefinite,
    /// `A = 0` or `B = 0`.
    Zero,
}

#[derive(Clone, Debug)]
pub struct G2Limit {
    pub matrix: PsdMatrix,
    pub eigenvalues: (f64, f64),
    pub branch: G2Branch,
    /// The value was reconstructed by scaling from a normalized statement.
    pub normalization_derived: bool,
}

const OFF_DIAGONAL_TOL: f64 = 1e-10;

fn spectral_2x2(vals: [f64; 2], frame: &CMatrix) -> Result<PsdMatrix> {
    PsdMatrix::from_spectral(vals.to_vec(), frame.clone())
}

/// `lim_{p→∞} G_p` for 2×2 inputs in closed form.
///
/// When all entries of `V*W` are nonzero and both inputs are definite the
/// limit is `(A' ∨ B')² · αβ / (a'_1 b'_1)` for the determinant-normalized
/// `A' = A/α`, `B' = B/β`. The top eigenvector of `A' ∨ B'` is the top
/// eigenvector of whichever of `A'`, `B'` has the larger top eigenvalue, so the
/// limit is diagonal in that eigenbasis with eigenvalues
/// `(max{a_1b_2, a_2b_1}, min{a_1b_2, a_2b_1})`.
pub fn g_p_limit_2x2(a: &PsdMatrix, b: &PsdMatrix) -> Result<G2Limit> {
    check_pair(a, b)?;
    if a.dim() != 2 {
        return Err(Error::InvalidArgument(format!("expected 2×2 inputs, got d = {}", a.dim())));
    }
    let (a1, a2) = (a.eigenvalues()[0], a.eigenvalues()[1]);
    let (b1, b2) = (b.eigenvalues()[0], b.eigenvalues()[1]);
    let v = a.eigenvectors();
    let w = b.eigenvectors();
    let u = relative_frame(v, w);
    let done = |vals: [f64; 2], frame: &CMatrix, branch, derived| -> Result<G2Limit> {
        let matrix = spectral_2x2(vals, frame)?;
        let e = (matrix.eigenvalues()[0], matrix.eigenvalues()[1]);
        Ok(G2Limit { matrix, eigenvalues: e, branch, normalization_derived: derived })
    };
    if a1 == 0.0 || b1 == 0.0 {
        return done([0.0, 0.0], v, G2Branch::Zero, false);
    }
    if u[(0, 1)].norm() <= OFF_DIAGONAL_TOL {
        return done([a1 * b1, a2 * b2], v, G2Branch::Diagonal, false);
    }
    if u[(0, 0)].norm() <= OFF_DIAGONAL_TOL {
        return done([a1 * b2, a2 * b1], v, G2Branch::Antidiagonal, false);
    }
    match (a2 > 0.0, b2 > 0.0) {
        (false, false) => done([0.0, 0.0], v, G2Branch::RankOnePair, false),
        (false, true) => done([a1 * b2, 0.0], v, G2Branch::RankOneDefinite, true),
        (true, false) => done([b1 * a2, 0.0], w, G2Branch::RankOneDefinite, true),
        (true, true) => {
            let (x, y) = (a1 * b2, a2 * b1);
            let hi = x.max(y);
            let lo = x.min(y);
            if x > y {
                done([hi, lo], v, G2Branch::Definite, false)
            } else if y > x {
                // top eigenvector w_1; the second is its orthogonal complement
                done([hi, lo], w, G2Branch::Definite, false)
            } else {
                done([hi, lo], v, G2Branch::Definite, false)
            }
        }
    }
}

/// Heuristic large-`p` estimate of `G_p` with diagnostics.
#[derive(Clone, Debug)]
pub struct GLimitEstimate {
    pub schedule: Vec<f64>,
    /// Extrapolated eigenvalue limits, which exist for every `d`.
    pub eigenvalues: Vec<LogValue>,
    /// Extrapolated matrix; for `d ≥ 3` convergence is not known and this is a heuristic.
    pub matrix: CMatrix,
    /// `‖G_{p_n} − G_{p_{n−1}}‖` along the schedule.
    pub cauchy: Vec<f64>,
    /// Ratio of the last two Cauchy increments.
    pub score: f64,
    /// Leading partial products are nonincreasing in `p` within `1e-10 · d`.
    pub monotone: bool,
    pub heuristic: bool,
    pub closed_form: Option<G2Limit>,
}

pub fn g_limit_estimate(a: &PsdMatrix, b: &PsdMatrix, schedule: &[f64]) -> Result<GLimitEstimate> {
    check_pair(a, b)?;
    let d = a.dim();
    if schedule.len() < 3 || schedule.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("schedule needs at least three increasing points".into()));
    }
    let spectra: Vec<_> = schedule.par_iter().map(|&p| g_p_spectrum(a, b, p)).collect::<Result<_>>()?;
    let mats: Vec<CMatrix> = spectra.iter().map(|s| s.to_psd().to_matrix()).collect();
    let eig: Vec<Vec<LogValue>> = spectra.iter().map(|s| s.eigenvalues.clone()).collect();
    let slack = 1e-10 * d as f64;
    let monotone = eig.windows(2).all(|w| {
        let (mut sp, mut sq) = (0.0, 0.0);
        (0..d).all(|k| {
            sp += w[0][k].logmag();
            sq += w[1][k].logmag();
            sq == f64::NEG_INFINITY || sq <= sp + slack
        })
    });
    let cauchy: Vec<f64> = mats.windows(2).map(|w| op_norm(&(&w[1] - &w[0]))).collect();
    let n = cauchy.len();
    let score = if n >= 2 && cauchy[n - 2] > 0.0 { cauchy[n - 1] / cauchy[n - 2] } else { 0.0 };
    let ex = extrapolate(&ConvergenceTrace::new(schedule.to_vec(), eig, Some(mats))?)?;
    Ok(GLimitEstimate {
        schedule: schedule.to_vec(),
        eigenvalues: ex.limit(),
        matrix: hermitian_part(ex.matrix.as_ref().expect("trace carries matrices")),
        cauchy,
        score,
        monotone,
        heuristic: d >= 3,
        closed_form: if d == 2 { Some(g_p_limit_2x2(a, b)?) } else { None },
    })
}

/// `D_{α,z}(ρ‖σ) = log Tr(ρ^{α/2z} σ^{(1−α)/z} ρ^{α/2z})^z / (α − 1)`.
///
/// Returns `+inf` when a negative power of `σ` meets a part of `ρ` outside
/// the support of `σ`, or when the trace vanishes for `α < 1`.
pub fn renyi_divergence(rho: &PsdMatrix, sigma: &PsdMatrix, alpha: f64, z: f64) -> Result<f64> {
    check_pair(rho, sigma)?;
    for m in [rho, sigma] {
        let trace: f64 = m.eigenvalues().iter().sum();
        if (trace - 1.0).abs() > 1e-10 {
            return Err(Error::NotDensity { trace });
        }
    }
    if alpha == 1.0 {
        return Err(Error::AlphaOne);
    }
    if z == 0.0 {
        return Err(Error::ZZero);
    }
    let s_exp = (1.0 - alpha) / z;
    let r_exp = alpha / (2.0 * z);
    if s_exp < 0.0 || r_exp < 0.0 {
        let leak = op_norm(&((CMatrix::identity(rho.dim(), rho.dim()) - sigma.support()) * rho.support()));
        if leak > 1e-8 {
            return Ok(f64::INFINITY);
        }
    }
    let rp = rho.map_spectrum(|v| if v > 0.0 { v.powf(r_exp) } else { 0.0 });
    let sp = sigma.map_spectrum(|v| if v > 0.0 { v.powf(s_exp) } else { 0.0 });
    let inner = psd(&(&rp * sp * &rp))?;
    let tr: f64 = inner.eigenvalues().iter().filter(|&&v| v > 0.0).map(|v| v.powf(z)).sum();
    Ok(tr.ln() / (alpha - 1.0))
}

/// `X ≤ Y` in Löwner order up to `slack`.
pub fn loewner_le(x: &CMatrix, y: &CMatrix, slack: f64) -> bool {
    min_eigenvalue(&(y - x)) >= -slack
}
