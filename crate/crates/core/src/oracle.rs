//! Independent checks: unpruned η enumeration, large-`p` extrapolation of
//! numeric traces, and seeded random instances.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::antisym::{enumerate_subsets, IndexSet};
use crate::error::{Error, Result};
use crate::logval::LogValue;
use crate::matnum::{relative_frame, z_p_spectrum, CMatrix, PsdMatrix};

/// `p = 2^6, 2^7, …, 2^12`.
pub fn default_schedule() -> Vec<f64> {
    (6..=12).map(|e| 2f64.powi(e)).collect()
}

/// `n` points doubling up to `p_max`.
pub fn doubling_schedule(p_max: f64, n: usize) -> Vec<f64> {
    (0..n).rev().map(|i| p_max / 2f64.powi(i as i32)).collect()
}

fn det_cofactor(m: &[Vec<Complex64>]) -> Complex64 {
    match m.len() {
        0 => Complex64::new(1.0, 0.0),
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        n => (0..n)
            .map(|j| {
                let sub: Vec<Vec<Complex64>> =
                    m[1..].iter().map(|row| row.iter().enumerate().filter(|&(c, _)| c != j).map(|(_, z)| *z).collect()).collect();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                m[0][j] * det_cofactor(&sub) * sign
            })
            .sum(),
    }
}

fn brute_minor(u: &CMatrix, i: &IndexSet, j: &IndexSet) -> (Complex64, f64) {
    let rows: Vec<Vec<Complex64>> = i.members().iter().map(|&r| j.members().iter().map(|&c| u[(r, c)]).collect()).collect();
    let k = rows.len();
    let det = if k <= 4 {
        det_cofactor(&rows)
    } else {
        DMatrix::from_fn(k, k, |r, c| rows[r][c]).lu().determinant()
    };
    let scale: f64 = (0..k).map(|c| rows.iter().map(|r| r[c].norm_sqr()).sum::<f64>().sqrt()).product();
    (det, scale)
}

/// `η_k` by visiting every pair `(I, J)`.
pub fn brute_force_eta(a: &PsdMatrix, b: &PsdMatrix, k: usize, minor_tol: f64) -> Result<LogValue> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let u = relative_frame(a.eigenvectors(), b.eigenvectors());
    let la: Vec<LogValue> = a.eigenvalues().iter().map(|&x| LogValue::from_real(x)).collect();
    let lb: Vec<LogValue> = b.eigenvalues().iter().map(|&x| LogValue::from_real(x)).collect();
    let sets = enumerate_subsets(a.dim(), k)?;
    let mut best = LogValue::ZERO;
    for i in &sets {
        for j in &sets {
            let (det, scale) = brute_minor(&u, i, j);
            if scale > 0.0 && det.norm() > minor_tol * scale {
                let prod = i.product(&la) * j.product(&lb);
                if prod > best {
                    best = prod;
                }
            }
        }
    }
    Ok(best)
}

/// Spectra (and optionally matrices) along a `p` schedule.
#[derive(Clone, Debug)]
pub struct ConvergenceTrace {
    pub ps: Vec<f64>,
    pub spectra: Vec<Vec<LogValue>>,
    pub matrices: Option<Vec<CMatrix>>,
}

impl ConvergenceTrace {
    pub fn new(ps: Vec<f64>, spectra: Vec<Vec<LogValue>>, matrices: Option<Vec<CMatrix>>) -> Result<Self> {
        if ps.len() != spectra.len() || matrices.as_ref().is_some_and(|m| m.len() != ps.len()) {
            return Err(Error::LengthMismatch { left: ps.len(), right: spectra.len() });
        }
        if ps.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("p values must be strictly increasing".into()));
        }
        if let Some(first) = spectra.first() {
            if let Some(bad) = spectra.iter().find(|s| s.len() != first.len()) {
                return Err(Error::LengthMismatch { left: first.len(), right: bad.len() });
            }
        }
        Ok(ConvergenceTrace { ps, spectra, matrices })
    }
}

/// Numeric `Z_p` spectra on `schedule`, points computed in parallel.
pub fn z_p_trace(a: &PsdMatrix, b: &PsdMatrix, schedule: &[f64], with_matrices: bool) -> Result<ConvergenceTrace> {
    let points: Vec<_> = schedule.par_iter().map(|&p| z_p_spectrum(a, b, p)).collect::<Result<_>>()?;
    let spectra = points.iter().map(|s| s.eigenvalues.clone()).collect();
    let matrices = with_matrices.then(|| points.iter().map(|s| s.to_psd().to_matrix()).collect());
    ConvergenceTrace::new(schedule.to_vec(), spectra, matrices)
}

#[derive(Clone, Debug)]
pub struct Extrapolation {
    /// Natural logs of the extrapolated eigenvalues (`-inf` for zeros).
    pub log_limit: Vec<f64>,
    /// Entrywise extrapolated matrix when the trace carries matrices.
    pub matrix: Option<CMatrix>,
    /// Per eigenvalue, the fitted per-unit-`p` decay `r` of `c · r^p`.
    pub rates: Vec<f64>,
    /// Largest change between the last two extrapolants.
    pub residual: f64,
    /// Ratio of the last two Cauchy increments of the raw trace (worst index).
    pub score: f64,
}

impl Extrapolation {
    pub fn limit(&self) -> Vec<LogValue> {
        self.log_limit.iter().map(|&l| LogValue::from_ln(l)).collect()
    }
}

/// Aitken's Δ² on the last three entries; exact for geometric tails.
fn aitken(x0: f64, x1: f64, x2: f64) -> (f64, f64) {
    let d1 = x1 - x0;
    let d2 = x2 - x1;
    let den = d2 - d1;
    let ratio = if d1 != 0.0 { d2 / d1 } else { 0.0 };
    if d2 == 0.0 || den.abs() <= 1e-300 || den.abs() <= 1e-14 * (d1.abs() + d2.abs()) || !(ratio.abs() < 1.0) {
        return (x2, ratio.clamp(0.0, 1.0));
    }
    (x2 - d2 * d2 / den, ratio)
}

/// Richardson-style extrapolation of each log-eigenvalue sequence.
///
/// The tail is modelled as `c · r^p`; on a doubling schedule a `c / p` tail is
/// geometric in the index as well, so both are removed exactly by Δ².
pub fn extrapolate(trace: &ConvergenceTrace) -> Result<Extrapolation> {
    let n = trace.ps.len();
    if n < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: n });
    }
    let d = trace.spectra[0].len();
    let logs: Vec<Vec<f64>> = trace.spectra.iter().map(|s| s.iter().map(|v| v.logmag()).collect()).collect();
    let mut log_limit = Vec::with_capacity(d);
    let mut rates = Vec::with_capacity(d);
    let mut residual: f64 = 0.0;
    let mut score: f64 = 0.0;
    let (p1, p2) = (trace.ps[n - 2], trace.ps[n - 1]);
    for i in 0..d {
        let seq: Vec<f64> = logs.iter().map(|l| l[i]).collect();
        if seq[n - 1] == f64::NEG_INFINITY {
            log_limit.push(f64::NEG_INFINITY);
            rates.push(0.0);
            continue;
        }
        let (est, ratio) = aitken(seq[n - 3], seq[n - 2], seq[n - 1]);
        log_limit.push(est);
        rates.push(if ratio > 0.0 { ratio.powf(1.0 / (p2 - p1)) } else { 0.0 });
        score = score.max(ratio.abs());
        if n >= 4 && seq[n - 4].is_finite() {
            let (prev, _) = aitken(seq[n - 4], seq[n - 3], seq[n - 2]);
            residual = residual.max((est - prev).abs());
        } else {
            residual = residual.max((seq[n - 1] - seq[n - 2]).abs());
        }
    }
    let matrix = trace.matrices.as_ref().map(|ms| {
        let (m0, m1, m2) = (&ms[n - 3], &ms[n - 2], &ms[n - 1]);
        CMatrix::from_fn(m2.nrows(), m2.ncols(), |r, c| {
            let re = aitken(m0[(r, c)].re, m1[(r, c)].re, m2[(r, c)].re).0;
            let im = aitken(m0[(r, c)].im, m1[(r, c)].im, m2[(r, c)].im).0;
            Complex64::new(re, im)
        })
    });
    Ok(Extrapolation { log_limit, matrix, rates, residual, score })
}

/// How eigenvalues of a random instance are chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum SpectrumSpec {
    Values(Vec<f64>),
    /// Log-uniform in `[lo, hi]`.
    LogUniform { lo: f64, hi: f64 },
}

/// Deterministic generator for `(seed, stream)`.
pub fn rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn complex_gaussian<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) / 2f64.sqrt()
    })
}

/// Haar unitary: QR of a complex Gaussian matrix with `R`'s diagonal made positive.
pub fn haar_unitary<R: Rng>(rng: &mut R, d: usize) -> CMatrix {
    let qr = complex_gaussian(rng, d, d).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { Complex64::new(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

pub fn sample_spectrum<R: Rng>(rng: &mut R, d: usize, spec: &SpectrumSpec) -> Result<Vec<f64>> {
    let mut vals = match spec {
        SpectrumSpec::Values(v) => {
            if v.len() != d {
                return Err(Error::BadSpectrum(format!("expected {d} values, got {}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::BadSpectrum("values must be finite and nonnegative".into()));
            }
            v.clone()
        }
        &SpectrumSpec::LogUniform { lo, hi } => {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::BadSpectrum(format!("bad log-uniform range [{lo}, {hi}]")));
            }
            let (l, h) = (lo.ln(), hi.ln());
            (0..d).map(|_| (l + (h - l) * rng.random::<f64>()).exp().clamp(lo, hi)).collect()
        }
    };
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(vals)
}

/// `V diag(spectrum) V*` with Haar `V`, deterministic in `seed`.
pub fn random_psd(seed: u64, d: usize, spec: &SpectrumSpec) -> Result<PsdMatrix> {
    let mut r = rng(seed, 0);
    random_psd_with(&mut r, d, spec)
}

pub fn random_psd_with<R: Rng>(rng: &mut R, d: usize, spec: &SpectrumSpec) -> Result<PsdMatrix> {
    let vals = sample_spectrum(rng, d, spec)?;
    let v = haar_unitary(rng, d);
    PsdMatrix::from_spectral(vals, v)
}

/// `n` seeded instances; the `i`-th uses stream `i` so results do not depend on scheduling.
pub fn random_family(seed: u64, n: usize, d: usize, spec: &SpectrumSpec) -> Result<Vec<PsdMatrix>> {
    (0..n as u64).into_par_iter().map(|i| random_psd_with(&mut rng(seed, i + 1), d, spec)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antitrotter::{eta_sequence, DEFAULT_MINOR_TOL};

    #[test]
    fn brute_force_matches_examples() {
        let a = PsdMatrix::diagonal(&[4.0, 1.0]).unwrap();
        let b = PsdMatrix::from_real_rows(2, &[5.0, 4.0, 4.0, 5.0]).unwrap();
        let fast = eta_sequence(&a, &b, DEFAULT_MINOR_TOL).unwrap();
        for k in 1..=2 {
            let slow = brute_force_eta(&a, &b, k, DEFAULT_MINOR_TOL).unwrap();
            assert!((slow.logmag() - fast.values[k - 1].logmag()).abs() < 1e-12);
        }
    }

    #[test]
    fn cofactor_agrees_with_lu() {
        let mut r = rng(3, 0);
        let m = complex_gaussian(&mut r, 4, 4);
        let rows: Vec<Vec<Complex64>> = (0..4).map(|i| (0..4).map(|j| m[(i, j)]).collect()).collect();
        assert!((det_cofactor(&rows) - m.clone().lu().determinant()).norm() < 1e-12);
    }

    #[test]
    fn extrapolation_cases() {
        let flat = ConvergenceTrace::new(vec![1.0, 2.0, 3.0], vec![vec![LogValue::from_real(2.0)]; 3], None).unwrap();
        let e = extrapolate(&flat).unwrap();
        assert_eq!(e.log_limit[0], 2f64.ln());
        assert_eq!(e.rates[0], 0.0);

        let l = 0.7f64;
        let ps: Vec<f64> = (1..=6).map(|p| p as f64).collect();
        let spectra = ps.iter().map(|&p| vec![LogValue::from_ln(l + 0.5f64.powf(p))]).collect();
        let e = extrapolate(&ConvergenceTrace::new(ps, spectra, None).unwrap()).unwrap();
        assert!((e.log_limit[0] - l).abs() < 1e-10);
        assert!((e.rates[0] - 0.5).abs() < 1e-8);

        assert!(matches!(
            extrapolate(&ConvergenceTrace::new(vec![1.0, 2.0], vec![vec![]; 2], None).unwrap()),
            Err(Error::InsufficientPoints { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn random_instances() {
        let spec = SpectrumSpec::LogUniform { lo: 1e-3, hi: 1e3 };
        let a = random_psd(11, 6, &spec).unwrap();
        assert_eq!(a, random_psd(11, 6, &spec).unwrap());
        let ev = a.eigenvalues();
        assert!(ev[0] / ev[5] <= 1e6);
        let u = a.eigenvectors();
        assert!((u.adjoint() * u - CMatrix::identity(6, 6)).norm() < 1e-12);

        let r = random_psd(1, 2, &SpectrumSpec::Values(vec![1.0, 0.0])).unwrap();
        assert_eq!(r.rank(1e-12), 1);
        assert!(matches!(random_psd(1, 2, &SpectrumSpec::Values(vec![1.0, -1.0])), Err(Error::BadSpectrum(_))));
    }
}
