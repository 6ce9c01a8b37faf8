//! Log-majorization and the monotonicity and sandwich checks built on it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::logval::LogValue;
use crate::matnum::{g_p_spectrum, z_p_eigenvalues_numeric, PsdMatrix};

/// Decreasing nonnegative values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumVector {
    values: Vec<LogValue>,
}

impl SpectrumVector {
    /// Values must already be decreasing and nonnegative.
    pub fn new(values: Vec<LogValue>) -> Result<Self> {
        if values.iter().any(|v| v.sign() < 0) {
            return Err(Error::BadSpectrum("negative entry".into()));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::BadSpectrum("entries are not decreasing".into()));
        }
        Ok(SpectrumVector { values })
    }

    /// Sorts into decreasing order first.
    pub fn from_unsorted(mut values: Vec<LogValue>) -> Result<Self> {
        values.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Self::new(values)
    }

    pub fn from_reals(values: &[f64]) -> Result<Self> {
        Self::from_unsorted(values.iter().map(|&v| LogValue::from_real(v)).collect())
    }

    pub fn values(&self) -> &[LogValue] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn zeros(&self) -> usize {
        self.values.iter().filter(|v| v.is_zero()).count()
    }

    /// Partial sums of natural logs; `-inf` once a zero is reached.
    fn partial_logs(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.values
            .iter()
            .map(|v| {
                acc += v.logmag();
                acc
            })
            .collect()
    }
}

/// `min_k (∑_{i≤k} log y_i − ∑_{i≤k} log x_i)` over `k < d`, and the total defect.
fn margins(x: &SpectrumVector, y: &SpectrumVector) -> (f64, f64) {
    let (sx, sy) = (x.partial_logs(), y.partial_logs());
    let d = sx.len();
    let mut worst = f64::INFINITY;
    for k in 0..d.saturating_sub(1) {
        let m = match (sx[k] == f64::NEG_INFINITY, sy[k] == f64::NEG_INFINITY) {
            (true, _) => f64::INFINITY,
            (false, true) => f64::NEG_INFINITY,
            _ => sy[k] - sx[k],
        };
        worst = worst.min(m);
    }
    let total = if d == 0 {
        0.0
    } else if x.zeros() != y.zeros() {
        f64::INFINITY
    } else if sx[d - 1] == f64::NEG_INFINITY {
        // equal zero counts: compare the products of the positive parts
        let nz = d - x.zeros();
        if nz == 0 {
            0.0
        } else {
            (sx[nz - 1] - sy[nz - 1]).abs()
        }
    } else {
        (sx[d - 1] - sy[d - 1]).abs()
    };
    (worst, total)
}

/// `x ≺_(log) y`: leading partial products of `x` bounded by those of `y` and
/// equal full products, all in log domain with additive `slack`.
pub fn log_majorizes(x: &SpectrumVector, y: &SpectrumVector, slack: f64) -> Result<bool> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    let (worst, total) = margins(x, y);
    Ok(worst >= -slack && total <= slack)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairCheck {
    pub p: f64,
    pub q: f64,
    pub holds: bool,
    /// Smallest leading-partial-sum margin (`+inf` for `d = 1`).
    pub margin: f64,
    /// Deviation of the full log-products.
    pub total_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub holds: bool,
    pub pairs: Vec<PairCheck>,
    pub worst_margin: f64,
    pub worst_total_defect: f64,
}

fn check_grid(grid: &[f64], slack: f64, spectrum: impl Fn(f64) -> Result<Vec<LogValue>>, smaller_first: bool) -> Result<MonotonicityReport> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("grid must be strictly increasing".into()));
    }
    let spectra: Vec<SpectrumVector> = grid.iter().map(|&p| SpectrumVector::from_unsorted(spectrum(p)?)).collect::<Result<_>>()?;
    let mut pairs = Vec::new();
    for i in 1..grid.len() {
        let (lo, hi) = if smaller_first { (&spectra[i - 1], &spectra[i]) } else { (&spectra[i], &spectra[i - 1]) };
        let (margin, total) = margins(lo, hi);
        pairs.push(PairCheck { p: grid[i - 1], q: grid[i], holds: margin >= -slack && total <= slack, margin, total_defect: total });
    }
    let worst_margin = pairs.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
    let worst_total_defect = pairs.iter().map(|c| c.total_defect).fold(0.0, f64::max);
    Ok(MonotonicityReport { holds: pairs.iter().all(|c| c.holds), pairs, worst_margin, worst_total_defect })
}

/// `λ(Z_p) ≺_(log) λ(Z_q)` for consecutive `p < q` of the grid.
pub fn check_alt_monotonicity(a: &PsdMatrix, b: &PsdMatrix, grid: &[f64], slack: f64) -> Result<MonotonicityReport> {
    check_grid(grid, slack, |p| z_p_eigenvalues_numeric(a, b, p), true)
}

/// `λ(G_q) ≺_(log) λ(G_p)` for consecutive `p < q` of the grid.
pub fn check_gm_monotonicity(a: &PsdMatrix, b: &PsdMatrix, grid: &[f64], slack: f64) -> Result<MonotonicityReport> {
    check_grid(grid, slack, |p| Ok(g_p_spectrum(a, b, p)?.eigenvalues), false)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichReport {
    pub holds: bool,
    pub lower_holds: bool,
    pub upper_holds: bool,
    /// Decreasing rearrangement of `(a_i b_{d+1−i})`.
    pub lower: SpectrumVector,
    /// `(a_i b_i)`.
    pub upper: SpectrumVector,
}

/// `(a_i b_{d+1−i}) ≺_(log) λ ≺_(log) (a_i b_i)`.
pub fn gelfand_naimark_sandwich(a: &PsdMatrix, b: &PsdMatrix, spectrum: &SpectrumVector, slack: f64) -> Result<SandwichReport> {
    let d = a.dim();
    if b.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: b.dim() });
    }
    if spectrum.len() != d {
        return Err(Error::LengthMismatch { left: d, right: spectrum.len() });
    }
    let av: Vec<LogValue> = a.eigenvalues().iter().map(|&x| LogValue::from_real(x)).collect();
    let bv: Vec<LogValue> = b.eigenvalues().iter().map(|&x| LogValue::from_real(x)).collect();
    let lower = SpectrumVector::from_unsorted((0..d).map(|i| av[i] * bv[d - 1 - i]).collect())?;
    let upper = SpectrumVector::from_unsorted((0..d).map(|i| av[i] * bv[i]).collect())?;
    let lower_holds = log_majorizes(&lower, spectrum, slack)?;
    let upper_holds = log_majorizes(spectrum, &upper, slack)?;
    Ok(SandwichReport { holds: lower_holds && upper_holds, lower_holds, upper_holds, lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(v: &[f64]) -> SpectrumVector {
        SpectrumVector::from_reals(v).unwrap()
    }

    #[test]
    fn examples() {
        assert!(log_majorizes(&sv(&[3.0, 2.0]), &sv(&[3.0, 2.0]), 0.0).unwrap());
        assert!(log_majorizes(&sv(&[2.0, 2.0]), &sv(&[4.0, 1.0]), 1e-12).unwrap());
        assert!(!log_majorizes(&sv(&[4.0, 1.0]), &sv(&[2.0, 2.0]), 1e-12).unwrap());
        assert!(!log_majorizes(&sv(&[3.0, 1.0]), &sv(&[4.0, 2.0]), 1e-12).unwrap());
        assert!(matches!(log_majorizes(&sv(&[1.0]), &sv(&[1.0, 1.0]), 0.0), Err(Error::LengthMismatch { .. })));
        assert!(SpectrumVector::new(vec![LogValue::ONE, LogValue::from_real(2.0)]).is_err());
    }

    #[test]
    fn zeros_compare_by_pattern() {
        assert!(log_majorizes(&sv(&[2.0, 0.0]), &sv(&[3.0, 0.0]), 0.0).is_ok_and(|b| !b));
        assert!(log_majorizes(&sv(&[2.0, 0.0]), &sv(&[2.0, 0.0]), 0.0).unwrap());
        assert!(!log_majorizes(&sv(&[2.0, 0.0]), &sv(&[4.0, 0.5]), 1e-12).unwrap());
        assert!(log_majorizes(&sv(&[0.0, 0.0]), &sv(&[0.0, 0.0]), 0.0).unwrap());
    }

    #[test]
    fn sandwich_examples() {
        let a = PsdMatrix::diagonal(&[4.0, 1.0]).unwrap();
        let b = PsdMatrix::diagonal(&[9.0, 1.0]).unwrap();
        let r = gelfand_naimark_sandwich(&a, &b, &sv(&[9.0, 4.0]), 1e-12).unwrap();
        assert!(r.holds);
        assert_eq!(r.lower, sv(&[9.0, 4.0]));
        assert!(gelfand_naimark_sandwich(&a, &b, &sv(&[36.0, 1.0]), 1e-12).unwrap().holds);
        assert!(!gelfand_naimark_sandwich(&a, &b, &sv(&[40.0, 0.9]), 1e-12).unwrap().holds);
    }

    #[test]
    fn commuting_monotonicity_is_tight() {
        let a = PsdMatrix::diagonal(&[3.0, 2.0, 0.5]).unwrap();
        let b = PsdMatrix::diagonal(&[5.0, 1.0, 0.25]).unwrap();
        let grid = [1.0, 2.0, 4.0, 8.0];
        let r = check_alt_monotonicity(&a, &b, &grid, 1e-10).unwrap();
        assert!(r.holds && r.worst_margin.abs() < 1e-12);
        let g = check_gm_monotonicity(&a, &b, &grid, 1e-10).unwrap();
        assert!(g.holds && g.worst_margin.abs() < 1e-12);
    }

    fn spectrum(d: usize) -> impl Strategy<Value = SpectrumVector> {
        prop::collection::vec(-5.0f64..5.0, d).prop_map(|v| SpectrumVector::from_unsorted(v.into_iter().map(LogValue::from_ln).collect()).unwrap())
    }

    /// A vector log-majorized by `y`: average its logs partially (a T-transform in log space).
    fn below(y: &SpectrumVector, t: f64) -> SpectrumVector {
        let l: Vec<f64> = y.values().iter().map(|v| v.logmag()).collect();
        let d = l.len();
        let m = (l[0] + l[d - 1]) / 2.0;
        let mut out = l.clone();
        out[0] = (1.0 - t) * l[0] + t * m;
        out[d - 1] = (1.0 - t) * l[d - 1] + t * m;
        SpectrumVector::from_unsorted(out.into_iter().map(LogValue::from_ln).collect()).unwrap()
    }

    proptest! {
        #[test]
        fn reflexive(x in spectrum(4)) {
            prop_assert!(log_majorizes(&x, &x, 0.0).unwrap());
        }

        #[test]
        fn transitive(z in spectrum(4), s in 0.0f64..1.0, t in 0.0f64..1.0) {
            let y = below(&z, s);
            let x = below(&y, t);
            prop_assert!(log_majorizes(&y, &z, 1e-12).unwrap());
            prop_assert!(log_majorizes(&x, &y, 1e-12).unwrap());
            prop_assert!(log_majorizes(&x, &z, 1e-12).unwrap());
        }

        #[test]
        fn antisymmetric(x in spectrum(3), y in spectrum(3)) {
            if log_majorizes(&x, &y, 0.0).unwrap() && log_majorizes(&y, &x, 0.0).unwrap() {
                for (a, b) in x.values().iter().zip(y.values()) {
                    prop_assert!((a.logmag() - b.logmag()).abs() < 1e-12);
                }
            }
        }
    }
}
