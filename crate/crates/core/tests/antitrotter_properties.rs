use num_complex::Complex64;
use proptest::prelude::*;

use antitrotter::antitrotter::{eta_sequence, limit_eigenvalues, limit_matrix, Tolerances, DEFAULT_MINOR_TOL};
use antitrotter::majorize::{gelfand_naimark_sandwich, SpectrumVector};
use antitrotter::matnum::{op_norm, CMatrix};
use antitrotter::oracle::{brute_force_eta, extrapolate, haar_unitary, random_family, rng, z_p_trace, SpectrumSpec};
use antitrotter::PsdMatrix;

fn spec() -> SpectrumSpec {
    SpectrumSpec::LogUniform { lo: 1e-3, hi: 1e3 }
}

fn pair(seed: u64, d: usize) -> (PsdMatrix, PsdMatrix) {
    let f = random_family(seed, 2, d, &spec()).unwrap();
    (f[0].clone(), f[1].clone())
}

fn ln_gap(x: f64, y: f64) -> f64 {
    (x.ln() - y.ln()).abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn extreme_eigenvalue_bounds(seed in 0u64..100_000, d in 2usize..=6) {
        let (a, b) = pair(seed, d);
        let lim = limit_eigenvalues(&a, &b, DEFAULT_MINOR_TOL).unwrap();
        let (av, bv) = (a.eigenvalues(), b.eigenvalues());
        prop_assert!(lim[0].logmag() <= (av[0] * bv[0]).ln() + 1e-12);
        prop_assert!(lim[d - 1].logmag() >= (av[d - 1] * bv[d - 1]).ln() - 1e-12);
    }

    #[test]
    fn limit_spectrum_sandwich(seed in 0u64..100_000, d in 2usize..=6) {
        let (a, b) = pair(seed, d);
        let lim = SpectrumVector::from_unsorted(limit_eigenvalues(&a, &b, DEFAULT_MINOR_TOL).unwrap()).unwrap();
        prop_assert!(gelfand_naimark_sandwich(&a, &b, &lim, 1e-10).unwrap().holds);
    }

    #[test]
    fn scale_equivariance(seed in 0u64..100_000, d in 2usize..=6, log_c in -20.0f64..20.0) {
        let (a, b) = pair(seed, d);
        let c = log_c.exp();
        let base = limit_eigenvalues(&a, &b, DEFAULT_MINOR_TOL).unwrap();
        let scaled = limit_eigenvalues(&a.scale(c), &b, DEFAULT_MINOR_TOL).unwrap();
        for (x, y) in base.iter().zip(&scaled) {
            prop_assert!((y.logmag() - x.logmag() - c.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn unitary_equivariance(seed in 0u64..100_000, d in 2usize..=5) {
        let (a, b) = pair(seed, d);
        let u = haar_unitary(&mut rng(seed, 77), d);
        let tol = Tolerances { verify_grid: vec![], ..Tolerances::default() };
        let z = limit_matrix(&a, &b, &tol).unwrap().limit_matrix.to_matrix();
        let zu = limit_matrix(&a.conjugate(&u), &b.conjugate(&u), &tol).unwrap().limit_matrix.to_matrix();
        let expect = &u * z * u.adjoint();
        prop_assert!(op_norm(&(zu - &expect)) <= 1e-8 * op_norm(&expect));
    }

    #[test]
    fn limit_matrix_spectrum_matches(seed in 0u64..100_000, d in 2usize..=6) {
        let (a, b) = pair(seed, d);
        let tol = Tolerances { verify_grid: vec![], ..Tolerances::default() };
        let r = limit_matrix(&a, &b, &tol).unwrap();
        let mut got: Vec<f64> = r.limit_matrix.eigenvalues().to_vec();
        got.sort_by(|x, y| y.total_cmp(x));
        for (l, g) in r.limit_eigenvalues.iter().zip(&got) {
            if l.is_positive() {
                prop_assert!((l.to_real() - g).abs() <= 1e-8 * l.to_real());
            }
        }
    }
}

#[test]
fn brute_force_matches_pruned_enumeration() {
    for seed in 0..500u64 {
        let d = 2 + (seed % 5) as usize;
        let (a, b) = pair(20_000 + seed, d);
        let eta = eta_sequence(&a, &b, DEFAULT_MINOR_TOL).unwrap();
        for k in 1..=d {
            let bf = brute_force_eta(&a, &b, k, DEFAULT_MINOR_TOL).unwrap();
            let fast = eta.values[k - 1];
            assert_eq!(bf.is_zero(), fast.is_zero(), "seed {seed} k {k}");
            if !bf.is_zero() {
                assert!((bf.logmag() - fast.logmag()).abs() < 1e-12, "seed {seed} k {k}");
            }
        }
    }
}

#[test]
fn brute_force_on_singular_inputs() {
    let a = PsdMatrix::diagonal(&[3.0, 1.0, 0.0]).unwrap();
    let b = pair(9, 3).1;
    let eta = eta_sequence(&a, &b, DEFAULT_MINOR_TOL).unwrap();
    for k in 1..=3 {
        let bf = brute_force_eta(&a, &b, k, DEFAULT_MINOR_TOL).unwrap();
        assert_eq!(bf.is_zero(), eta.values[k - 1].is_zero());
    }
    assert!(eta.values[2].is_zero());
}

/// Every positive limit eigenvalue is within max(1e-3, fitted residual) of the
/// value extrapolated from the numeric trace.
#[test]
fn extrapolated_traces_approach_limits() {
    let schedule: Vec<f64> = (6..=12).map(|e| 2f64.powi(e)).collect();
    for seed in 0..200u64 {
        let d = 2 + (seed % 5) as usize;
        let (a, b) = pair(30_000 + seed, d);
        let lim = limit_eigenvalues(&a, &b, DEFAULT_MINOR_TOL).unwrap();
        let ex = extrapolate(&z_p_trace(&a, &b, &schedule, false).unwrap()).unwrap();
        let allowed = ex.residual.max(1e-3);
        for (k, l) in lim.iter().enumerate() {
            if l.is_positive() {
                let gap = (ex.log_limit[k] - l.logmag()).abs();
                assert!(gap <= allowed, "seed {seed} k {k}: {gap:.3e} > {allowed:.3e}");
            }
        }
    }
}

#[test]
fn worked_pairs() {
    let a = PsdMatrix::diagonal(&[4.0, 1.0]).unwrap();
    let rot = PsdMatrix::from_real_rows(2, &[5.0, 4.0, 4.0, 5.0]).unwrap();
    let lim = limit_eigenvalues(&a, &rot, DEFAULT_MINOR_TOL).unwrap();
    assert!(ln_gap(lim[0].to_real(), 36.0) < 1e-12 && ln_gap(lim[1].to_real(), 1.0) < 1e-12);
    let z = limit_matrix(&a, &rot, &Tolerances::default()).unwrap();
    let diag = CMatrix::from_fn(2, 2, |i, j| Complex64::new(if i == j { [36.0, 1.0][i] } else { 0.0 }, 0.0));
    assert!(op_norm(&(z.limit_matrix.to_matrix() - diag)) < 1e-10);
    assert!(z.diagnostics.last().unwrap().relative < 1e-3);

    let swap = PsdMatrix::from_spectral(
        vec![9.0, 1.0],
        CMatrix::from_fn(2, 2, |i, j| Complex64::new(if i != j { 1.0 } else { 0.0 }, 0.0)),
    )
    .unwrap();
    let z = limit_matrix(&a, &swap, &Tolerances::default()).unwrap().limit_matrix.to_matrix();
    let expect = CMatrix::from_fn(2, 2, |i, j| Complex64::new(if i == j { [4.0, 9.0][i] } else { 0.0 }, 0.0));
    assert!(op_norm(&(z - expect)) < 1e-12);
}
