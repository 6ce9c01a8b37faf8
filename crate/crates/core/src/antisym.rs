//! k-subsets, minors, compound matrices and antisymmetric tensors.
//!
//! Subsets are stored 0-based and enumerated lexicographically; `rank` is the
//! position in that enumeration and indexes rows and columns of compounds and
//! coordinates of wedge vectors.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matnum::CMatrix;

pub const MAX_DIM: usize = 20;
pub const MAX_COMPOUND: usize = 184_756;

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// A sorted k-subset of `{0, …, d-1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexSet {
    d: usize,
    members: Vec<usize>,
}

impl IndexSet {
    pub fn new(d: usize, mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        if members.windows(2).any(|w| w[0] == w[1]) || members.last().is_some_and(|&m| m >= d) {
            return Err(Error::BadCardinality { d, k: members.len() });
        }
        Ok(IndexSet { d, members })
    }

    /// `{0, …, k-1}`.
    pub fn leading(d: usize, k: usize) -> Self {
        IndexSet { d, members: (0..k).collect() }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// Members as 1-based indices.
    pub fn one_based(&self) -> Vec<usize> {
        self.members.iter().map(|m| m + 1).collect()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    /// Position in the lexicographic enumeration of `k`-subsets of `d`.
    pub fn rank(&self) -> usize {
        let k = self.k();
        let mut r = 0;
        let mut prev = 0;
        for (pos, &m) in self.members.iter().enumerate() {
            for skipped in prev..m {
                r += binomial(self.d - skipped - 1, k - pos - 1);
            }
            prev = m + 1;
        }
        r
    }

    pub fn from_rank(d: usize, k: usize, mut rank: usize) -> Result<Self> {
        if k > d || rank >= binomial(d, k) {
            return Err(Error::BadCardinality { d, k });
        }
        let mut members = Vec::with_capacity(k);
        let mut next = 0;
        for pos in 0..k {
            loop {
                let block = binomial(d - next - 1, k - pos - 1);
                if rank < block {
                    break;
                }
                rank -= block;
                next += 1;
            }
            members.push(next);
            next += 1;
        }
        Ok(IndexSet { d, members })
    }

    /// `∏_{i∈I} x_i`.
    pub fn product<T: Copy + std::iter::Product<T>>(&self, x: &[T]) -> T {
        self.members.iter().map(|&i| x[i]).product()
    }

    pub fn without(&self, pos: usize) -> IndexSet {
        let mut members = self.members.clone();
        members.remove(pos);
        IndexSet { d: self.d, members }
    }
}

impl std::fmt::Display for IndexSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.one_based().iter().map(|m| m.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

fn check_enumerable(d: usize, k: usize) -> Result<()> {
    if k == 0 || k > d {
        return Err(Error::BadCardinality { d, k });
    }
    if d > MAX_DIM || binomial(d, k) > MAX_COMPOUND {
        return Err(Error::DimensionTooLarge { d, k });
    }
    Ok(())
}

/// All `k`-subsets of `{0, …, d-1}` in lexicographic order.
pub fn enumerate_subsets(d: usize, k: usize) -> Result<Vec<IndexSet>> {
    check_enumerable(d, k)?;
    let mut out = Vec::with_capacity(binomial(d, k));
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(IndexSet { d, members: cur.clone() });
        let mut i = k;
        while i > 0 && cur[i - 1] == d - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        cur[i - 1] += 1;
        for j in i..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
    Ok(out)
}

fn submatrix(m: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// `det M_{I,J}` by partially pivoted LU.
pub fn minor(m: &CMatrix, i: &IndexSet, j: &IndexSet) -> Result<Complex64> {
    if i.k() != j.k() {
        return Err(Error::CardinalityMismatch { left: i.k(), right: j.k() });
    }
    if i.k() == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    Ok(submatrix(m, i.members(), j.members()).lu().determinant())
}

/// Product of the column norms of `M_{I,J}`, the scale for nonzero-minor tests.
pub fn minor_scale(m: &CMatrix, i: &IndexSet, j: &IndexSet) -> f64 {
    j.members().iter().map(|&c| i.members().iter().map(|&r| m[(r, c)].norm_sqr()).sum::<f64>().sqrt()).product()
}

/// `k`-th compound: entry `(rank I, rank J)` is `det M_{I,J}`.
pub fn compound(m: &CMatrix, k: usize) -> Result<CMatrix> {
    let d = m.nrows();
    if m.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: m.ncols() });
    }
    let sets = enumerate_subsets(d, k)?;
    let n = sets.len();
    let rows: Vec<Vec<Complex64>> = sets
        .par_iter()
        .map(|i| sets.iter().map(|j| submatrix(m, i.members(), j.members()).lu().determinant()).collect())
        .collect();
    Ok(DMatrix::from_fn(n, n, |r, c| rows[r][c]))
}

/// Element of `Λ^k C^d` in the subset basis.
#[derive(Clone, Debug, PartialEq)]
pub struct WedgeVector {
    d: usize,
    k: usize,
    coords: Vec<Complex64>,
}

impl WedgeVector {
    pub fn new(d: usize, k: usize, coords: Vec<Complex64>) -> Result<Self> {
        if k > d {
            return Err(Error::BadCardinality { d, k });
        }
        if coords.len() != binomial(d, k) {
            return Err(Error::DimensionMismatch { expected: binomial(d, k), found: coords.len() });
        }
        Ok(WedgeVector { d, k, coords })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.coords
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self, other⟩`, conjugate-linear in `self`.
    pub fn inner(&self, other: &WedgeVector) -> Complex64 {
        self.coords.iter().zip(&other.coords).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn add(&self, other: &WedgeVector) -> Result<WedgeVector> {
        if self.d != other.d || self.k != other.k {
            return Err(Error::DimensionMismatch { expected: self.coords.len(), found: other.coords.len() });
        }
        let coords = self.coords.iter().zip(&other.coords).map(|(a, b)| a + b).collect();
        Ok(WedgeVector { d: self.d, k: self.k, coords })
    }
}

/// `u_1 ∧ ⋯ ∧ u_k` for the columns of a `d × k` matrix.
pub fn wedge(u: &CMatrix) -> Result<WedgeVector> {
    let (d, k) = (u.nrows(), u.ncols());
    if k > d {
        return Err(Error::BadCardinality { d, k });
    }
    if k == 0 {
        return Ok(WedgeVector { d, k, coords: vec![Complex64::new(1.0, 0.0)] });
    }
    let cols: Vec<usize> = (0..k).collect();
    let coords = enumerate_subsets(d, k)?.iter().map(|i| submatrix(u, i.members(), &cols).lu().determinant()).collect();
    Ok(WedgeVector { d, k, coords })
}

/// Wedge of a list of vectors of equal length.
pub fn wedge_vectors(us: &[DVector<Complex64>]) -> Result<WedgeVector> {
    let d = us.first().map_or(0, |u| u.len());
    if let Some(bad) = us.iter().find(|u| u.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: bad.len() });
    }
    wedge(&CMatrix::from_columns(us))
}

/// A subspace given by an orthonormal basis and its projection.
#[derive(Clone, Debug)]
pub struct Subspace {
    pub basis: CMatrix,
    pub projection: CMatrix,
}

impl Subspace {
    pub fn from_basis(basis: CMatrix) -> Self {
        let projection = &basis * basis.adjoint();
        Subspace { basis, projection }
    }
}

/// Matrix of `x ↦ x ∧ ψ`, mapping `C^d` to `Λ^{k+1} C^d`.
fn wedge_map(psi: &WedgeVector) -> Result<CMatrix> {
    let (d, k) = (psi.d, psi.k);
    let targets = enumerate_subsets(d, k + 1)?;
    let mut l = CMatrix::zeros(targets.len(), d);
    for (row, kset) in targets.iter().enumerate() {
        for (pos, &m) in kset.members().iter().enumerate() {
            let rest = kset.without(pos);
            let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
            l[(row, m)] += psi.coords[rest.rank()] * sign;
        }
    }
    Ok(l)
}

/// Recover `span{u_1, …, u_k}` from `ψ ∝ u_1 ∧ ⋯ ∧ u_k`.
///
/// The span is the null space of `x ↦ x ∧ ψ`, cut at `tol` times the largest
/// singular value; a kernel of dimension other than `k`, or a recovered wedge
/// not collinear with `ψ` within `tol`, means `ψ` is not decomposable.
pub fn subspace_from_decomposable(psi: &WedgeVector, tol: f64) -> Result<Subspace> {
    let (d, k) = (psi.d, psi.k);
    let norm = psi.norm();
    if norm == 0.0 {
        return Err(Error::NotDecomposable { kernel_dim: d, k });
    }
    if k == d {
        return Ok(Subspace::from_basis(CMatrix::identity(d, d)));
    }
    if k == 0 {
        return Ok(Subspace::from_basis(CMatrix::zeros(d, 0)));
    }
    let mut l = wedge_map(psi)?;
    if l.nrows() < d {
        let rows = l.nrows();
        l = l.insert_rows(rows, d - rows, Complex64::new(0.0, 0.0));
    }
    let svd = l.svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let smax = svd.singular_values.max();
    let null: Vec<usize> = (0..d).filter(|&i| svd.singular_values[i] <= tol * smax).collect();
    if null.len() != k {
        return Err(Error::NotDecomposable { kernel_dim: null.len(), k });
    }
    let mut basis = CMatrix::zeros(d, k);
    for (c, &i) in null.iter().enumerate() {
        for r in 0..d {
            basis[(r, c)] = vt[(i, r)].conj();
        }
    }
    let collinear = wedge(&basis)?.inner(psi).norm() / norm;
    if collinear < 1.0 - tol {
        return Err(Error::NotDecomposable { kernel_dim: null.len(), k });
    }
    Ok(Subspace::from_basis(basis))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn members(sets: &[IndexSet]) -> Vec<Vec<usize>> {
        sets.iter().map(|s| s.one_based()).collect()
    }

    #[test]
    fn enumerations() {
        assert_eq!(members(&enumerate_subsets(3, 2).unwrap()), vec![vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(members(&enumerate_subsets(4, 1).unwrap()), vec![vec![1], vec![2], vec![3], vec![4]]);
        assert_eq!(enumerate_subsets(5, 3).unwrap().len(), 10);
        assert!(matches!(enumerate_subsets(3, 0), Err(Error::BadCardinality { .. })));
        assert!(matches!(enumerate_subsets(3, 4), Err(Error::BadCardinality { .. })));
        assert!(matches!(enumerate_subsets(21, 2), Err(Error::DimensionTooLarge { .. })));
        assert_eq!(enumerate_subsets(20, 10).unwrap().len(), MAX_COMPOUND);
    }

    #[test]
    fn ranks_round_trip() {
        for d in 1..=7 {
            for k in 1..=d {
                for (r, s) in enumerate_subsets(d, k).unwrap().iter().enumerate() {
                    assert_eq!(s.rank(), r);
                    assert_eq!(&IndexSet::from_rank(d, k, r).unwrap(), s);
                }
            }
        }
    }

    #[test]
    fn small_minors() {
        let i3 = CMatrix::identity(3, 3);
        let s13 = IndexSet::new(3, vec![0, 2]).unwrap();
        let s12 = IndexSet::new(3, vec![0, 1]).unwrap();
        assert_eq!(minor(&i3, &s13, &s13).unwrap(), c(1.0));
        assert_eq!(minor(&i3, &s12, &s13).unwrap().norm(), 0.0);
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0), c(2.0), c(3.0), c(4.0)]);
        let full = IndexSet::leading(2, 2);
        assert!((minor(&m, &full, &full).unwrap() - c(-2.0)).norm() < 1e-14);
        let one = IndexSet::leading(3, 1);
        assert!(matches!(minor(&i3, &one, &s12), Err(Error::CardinalityMismatch { .. })));
    }

    #[test]
    fn compounds_of_identity_and_diagonal() {
        let a = [3.0, 2.0, 0.5, 7.0];
        let m = CMatrix::from_diagonal(&DVector::from_iterator(4, a.iter().map(|&x| c(x))));
        for k in 1..=4 {
            let ck = compound(&m, k).unwrap();
            for (r, i) in enumerate_subsets(4, k).unwrap().iter().enumerate() {
                assert!((ck[(r, r)] - c(i.product(&a))).norm() < 1e-13);
            }
            let off = ck.clone() - CMatrix::from_diagonal(&ck.diagonal());
            assert!(off.norm() < 1e-14);
            let id = compound(&CMatrix::identity(4, 4), k).unwrap();
            assert_eq!(id, CMatrix::identity(id.nrows(), id.ncols()));
        }
    }

    #[test]
    fn decomposable_tensors() {
        let e = CMatrix::identity(4, 4);
        let psi = wedge(&e.columns(0, 2).into_owned()).unwrap();
        assert_eq!(psi.coords()[0], c(1.0));
        assert!(psi.coords()[1..].iter().all(|z| z.norm() == 0.0));
        let s = subspace_from_decomposable(&psi, 1e-8).unwrap();
        let mut p = CMatrix::zeros(4, 4);
        p[(0, 0)] = c(1.0);
        p[(1, 1)] = c(1.0);
        assert!((s.projection - p).norm() < 1e-12);

        let u = DVector::from_vec(vec![c(1.0), c(2.0), c(-1.0)]);
        assert!(wedge_vectors(&[u.clone(), u]).unwrap().norm() < 1e-14);

        // p12 p34 − p13 p24 + p14 p23 = 1 for e1∧e2 + e3∧e4
        let other = wedge(&e.columns(2, 2).into_owned()).unwrap();
        let sum = psi.add(&other).unwrap();
        assert!(matches!(subspace_from_decomposable(&sum, 1e-8), Err(Error::NotDecomposable { .. })));
    }

    fn random_matrix(rows: usize, cols: usize, vals: &[f64]) -> CMatrix {
        DMatrix::from_fn(rows, cols, |i, j| {
            let t = 2 * (i * cols + j);
            Complex64::new(vals[t % vals.len()], vals[(t + 1) % vals.len()])
        })
    }

    proptest! {
        #[test]
        fn binet_cauchy(vals in proptest::collection::vec(-1.0f64..1.0, 64), k in 1usize..=4) {
            let m = random_matrix(4, 4, &vals[..32]);
            let n = random_matrix(4, 4, &vals[32..]);
            let lhs = compound(&(&m * &n), k).unwrap();
            let rhs = compound(&m, k).unwrap() * compound(&n, k).unwrap();
            prop_assert!((&lhs - &rhs).norm() <= 1e-10 * rhs.norm().max(1.0));
        }

        #[test]
        fn compound_of_unitary_is_unitary(vals in proptest::collection::vec(-1.0f64..1.0, 50), k in 1usize..=5) {
            let q = random_matrix(5, 5, &vals).qr().q();
            let ck = compound(&q, k).unwrap();
            let n = ck.nrows();
            prop_assert!((ck.adjoint() * &ck - CMatrix::identity(n, n)).norm() < 1e-10);
        }

        #[test]
        fn orthonormal_wedge_has_unit_norm_and_round_trips(vals in proptest::collection::vec(-1.0f64..1.0, 60), k in 1usize..=5) {
            let q = random_matrix(6, 6, &vals).qr().q();
            let u = q.columns(0, k).into_owned();
            let psi = wedge(&u).unwrap();
            prop_assert!((psi.norm() - 1.0).abs() < 1e-10);
            let s = subspace_from_decomposable(&psi, 1e-8).unwrap();
            prop_assert!((s.projection - &u * u.adjoint()).norm() < 1e-9);
        }

        #[test]
        fn wedge_inner_is_determinant(vals in proptest::collection::vec(-1.0f64..1.0, 100), k in 1usize..=4) {
            let u = random_matrix(5, 5, &vals[..50]).qr().q().columns(0, k).into_owned();
            let v = random_matrix(5, 5, &vals[50..]).qr().q().columns(0, k).into_owned();
            let lhs = wedge(&u).unwrap().inner(&wedge(&v).unwrap()).norm();
            let rhs = (u.adjoint() * v).determinant().norm();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn laplace_expansion_for_pairs() {
        let u = random_matrix(4, 2, &[0.3, -0.2, 0.9, 0.1, -0.5, 0.4, 0.8, -0.7, 0.6, 0.2, -0.1, 0.3, 0.5, 0.9, -0.4, 0.7]);
        let psi = wedge(&u).unwrap();
        for i in enumerate_subsets(4, 2).unwrap() {
            let (a, b) = (i.members()[0], i.members()[1]);
            let direct = u[(a, 0)] * u[(b, 1)] - u[(b, 0)] * u[(a, 1)];
            assert!((psi.coords()[i.rank()] - direct).norm() < 1e-14);
        }
    }
}
