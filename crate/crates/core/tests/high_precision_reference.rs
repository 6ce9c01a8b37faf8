//! Values pinned from a 5000–11000 digit evaluation of the defining formulas
//! (products formed, then eigen-decomposed, with no scaling tricks).

use antitrotter::matnum::{g_p_spectrum, multi_product_spectrum, CMatrix};
use antitrotter::PsdMatrix;
use nalgebra::DMatrix;
use num_complex::Complex64;

fn rz(t: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[t.cos(), -t.sin(), 0., t.sin(), t.cos(), 0., 0., 0., 1.])
}

fn rx(t: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[1., 0., 0., 0., t.cos(), -t.sin(), 0., t.sin(), t.cos()])
}

fn complexify(m: DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

fn inputs() -> (PsdMatrix, PsdMatrix, PsdMatrix) {
    let v = complexify(rz(0.3) * rx(0.7) * rz(1.1));
    let w = complexify(rx(0.5) * rz(1.9) * rx(0.2));
    (
        PsdMatrix::from_spectral(vec![5.0, 1.0, 0.2], v).unwrap(),
        PsdMatrix::diagonal(&[4.0, 1.0, 0.3]).unwrap(),
        PsdMatrix::from_spectral(vec![3.0, 0.5, 0.1], w).unwrap(),
    )
}

fn assert_close(got: &[f64], want: &[f64], tol: f64, what: &str) {
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() <= tol * w.abs().max(1.0), "{what}: {got:?} vs {want:?}");
    }
}

#[test]
fn geometric_mean_power_matches_reference() {
    let (a, b, _) = inputs();
    let cases: [(f64, [f64; 3], [f64; 9]); 3] = [
        (
            16.0,
            [0.4773233624027463, 0.16530797734363978, -0.46030978295243147],
            [1.1992618823403838, 0.14184873506634266, 0.0020522034441426825, 0.14184873506634266, 1.23824851337362, 0.4503950545795444, 0.0020522034441426825, 0.4503950545795444, 0.9850886607977447],
        ),
        (
            512.0,
            [0.4076326734893376, 0.004311874656135825, -0.22962299135151884],
            [1.0235600415439932, 0.1153994210281289, 0.035925179334302074, 0.1153994210281289, 1.2326130334847698, 0.3235433364916432, 0.035925179334302074, 0.3235433364916432, 1.0462361885242628],
        ),
        (
            2048.0,
            [0.4060069994534577, 0.0010779686640339562, -0.22476341132353703],
            [1.0206183368276605, 0.11471164517497529, 0.03706775788413217, 0.11471164517497529, 1.2325589876866254, 0.32055540176326397, 0.03706775788413217, 0.32055540176326397, 1.0474194436638173],
        ),
    ];
    for (p, logs, entries) in cases {
        for (x, y) in [(&a, &b), (&b, &a)] {
            let g = g_p_spectrum(x, y, p).unwrap();
            assert_close(&g.log_eigenvalues(), &logs, 1e-11, "log eigenvalues");
            let m = g.to_psd().to_matrix();
            let flat: Vec<f64> = m.iter().map(|z| z.re).collect();
            assert_close(&flat, &entries, 1e-11, "entries");
            assert!(m.iter().all(|z| z.im.abs() < 1e-12));
        }
    }
}

#[test]
fn three_factor_product_matches_reference() {
    let (a, b, c) = inputs();
    let cases: [(f64, [f64; 3], [f64; 9]); 3] = [
        (
            16.0,
            [3.770496309035285, -0.4172495313062394, -5.068045205820972],
            [2.9340188482448903, 7.860098614777965, 5.596027817322674, 7.860098614777965, 26.766601581724974, 19.57670202379379, 5.596027817322674, 19.57670202379379, 14.366130874740355],
        ),
        (
            512.0,
            [4.084224822803664, -0.684525993234339, -5.1144972576612515],
            [3.6533312087439715, 10.782339660622796, 7.768345801928542, 10.782339660622796, 36.6278183236201, 26.784561191507684, 7.768345801928542, 26.784561191507684, 19.625066265382163],
        ),
        (
            2048.0,
            [4.091814627367492, -0.6909918837285437, -5.115621171730875],
            [3.6747086298742504, 10.864953534811004, 7.829499807744103, 10.864953534811004, 36.90682119934171, 26.988507852041558, 7.829499807744103, 26.988507852041558, 19.7739469936165],
        ),
    ];
    for (p, logs, entries) in cases {
        let z = multi_product_spectrum(&[a.clone(), b.clone(), c.clone()], p).unwrap();
        assert_close(&z.log_eigenvalues(), &logs, 1e-11, "log eigenvalues");
        let flat: Vec<f64> = z.to_psd().to_matrix().iter().map(|z| z.re).collect();
        assert_close(&flat, &entries, 1e-11, "entries");
    }
}
